"""
Chart-based Riemannian geometry with finite-difference tensor calculus.

Conventions
-----------
- Points are 1-D float arrays in chart coordinates.
- dg[a, i, j]       = ∂_a g_ij
- christoffel[k, i, j] = Γ^k_ij
- riemann_up[a, b, c, d] = R^a_bcd with R(∂_c, ∂_d)∂_b = R^a_bcd ∂_a
- ricci[b, d] = R^a_bad, scalar = g^bd ricci_bd   (round S²(1) has scalar +2)
- laplacian f = g^ij Hess_ij f                    (Euclidean ½|x|² has laplacian dim)

Every metric derivative is a central stencil of order 2 or 4. Quantities that
are themselves built from first derivatives (Γ, mean curvature fields,
gradients) are differentiated again with the wider nested step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from . import settings
from .errors import (
    AsymmetricMetricError,
    BoundaryError,
    DegenerateMetricError,
    DensityError,
    ParameterError,
)

Point = np.ndarray

# offset, weight pairs for the first derivative; divide by h
_CENTRAL_STENCILS = {
    2: ((-1, -1.0 / 2.0), (1, 1.0 / 2.0)),
    4: ((-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)),
}


# ---------------------------------------------------------------------
# Chart domain
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class ChartDomain:
    """Coordinate box with per-axis periodicity."""
    bounds: Tuple[Tuple[float, float], ...]
    periodic: Tuple[bool, ...]
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        periodic = tuple(bool(p) for p in self.periodic)
        if len(bounds) < 1:
            raise ParameterError("a chart needs at least one axis")
        if len(periodic) != len(bounds):
            raise ParameterError(
                f"periodic flags ({len(periodic)}) do not match the number of axes ({len(bounds)})"
            )
        for axis, (lo, hi) in enumerate(bounds):
            if not hi > lo:
                raise ParameterError(f"axis {axis} has non-positive length: [{lo}, {hi}]")
        names = tuple(self.names) or tuple(f"x{i + 1}" for i in range(len(bounds)))
        if len(names) != len(bounds):
            raise ParameterError("one coordinate name per axis is required")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "periodic", periodic)
        object.__setattr__(self, "names", names)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds])

    @property
    def lengths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def fully_periodic(self) -> bool:
        return all(self.periodic)

    def wrap(self, x) -> np.ndarray:
        """Map periodic coordinates into [lo, hi); other axes are untouched."""
        x = np.array(x, dtype=float).reshape(self.dim)
        for axis, (lo, hi) in enumerate(self.bounds):
            if self.periodic[axis]:
                x[axis] = lo + np.mod(x[axis] - lo, hi - lo)
        return x

    def require_interior(self, x, reach) -> np.ndarray:
        """Reject points whose stencil would leave a non-periodic axis."""
        x = np.array(x, dtype=float).reshape(self.dim)
        reach = np.broadcast_to(np.asarray(reach, dtype=float), (self.dim,))
        for axis, (lo, hi) in enumerate(self.bounds):
            if self.periodic[axis]:
                continue
            if x[axis] - reach[axis] < lo or x[axis] + reach[axis] > hi:
                raise BoundaryError(x, axis, float(reach[axis]))
        return x

    def product(self, other: "ChartDomain") -> "ChartDomain":
        return ChartDomain(self.bounds + other.bounds,
                           self.periodic + other.periodic,
                           self.names + other.names)

    def sub_box(self, margin: float = 0.0) -> "ChartDomain":
        """Shrink every non-periodic axis by margin·length on each side."""
        bounds = []
        for (lo, hi), per in zip(self.bounds, self.periodic):
            pad = 0.0 if per else margin * (hi - lo)
            bounds.append((lo + pad, hi - pad))
        return ChartDomain(tuple(bounds), self.periodic, self.names)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform pseudo-random points, shape (count, dim)."""
        return self.lower + self.lengths * rng.random((count, self.dim))


# ---------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class MetricField:
    domain: ChartDomain
    func: Callable[[Point], np.ndarray]
    name: str = "g"

    def __call__(self, x) -> np.ndarray:
        x = self.domain.wrap(x)
        g = np.array(self.func(x), dtype=float).reshape(self.domain.dim, self.domain.dim)
        asym = float(np.max(np.abs(g - g.T))) if g.size else 0.0
        scale = max(1.0, float(np.max(np.abs(g))))
        if asym > settings.ASYMMETRY_LIMIT * scale:
            raise AsymmetricMetricError(x, asym)
        g = 0.5 * (g + g.T)
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise DegenerateMetricError(x, self.name) from None
        return g

    def sqrt_det(self, x) -> float:
        return float(np.sqrt(np.linalg.det(self(x))))


@dataclass(frozen=True)
class ScalarField:
    domain: ChartDomain
    func: Callable[[Point], float]
    name: str = "f"

    def __call__(self, x) -> float:
        return float(self.func(self.domain.wrap(x)))


@dataclass(frozen=True)
class DensityField(ScalarField):
    """Positive weight φ; non-positive values are construction errors."""
    name: str = "phi"

    def __call__(self, x) -> float:
        x = self.domain.wrap(x)
        value = float(self.func(x))
        if not value > 0.0:
            raise DensityError(x, value)
        return value

    def log(self) -> ScalarField:
        return ScalarField(self.domain, lambda x: float(np.log(self(x))), name=f"ln {self.name}")


def constant_density(domain: ChartDomain, value: float = 1.0) -> DensityField:
    return DensityField(domain, lambda x: value, name="one" if value == 1.0 else "phi")


# ---------------------------------------------------------------------
# Differentiation settings
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class DifferentiationConfig:
    step: float = settings.DEFAULT_STEP
    stencil_order: int = settings.DEFAULT_STENCIL_ORDER
    nested_step: float = settings.DEFAULT_NESTED_STEP

    def __post_init__(self):
        for label, value in (("step", self.step), ("nested_step", self.nested_step)):
            if not 0.0 < value <= 0.1:
                raise ParameterError(f"{label} must lie in (0, 0.1] relative to the axis length, got {value!r}")
        if self.stencil_order not in _CENTRAL_STENCILS:
            raise ParameterError(f"stencil_order must be 2 or 4, got {self.stencil_order!r}")

    @property
    def half_width(self) -> int:
        return self.stencil_order // 2

    def steps(self, domain: ChartDomain) -> np.ndarray:
        return self.step * domain.lengths

    def nested_steps(self, domain: ChartDomain) -> np.ndarray:
        return self.nested_step * domain.lengths

    def reach(self, domain: ChartDomain, nested: int = 0) -> np.ndarray:
        """Distance the stencils travel from a point: one inner stencil plus `nested` outer ones."""
        return self.half_width * (self.steps(domain) + nested * self.nested_steps(domain))


DEFAULT_CONFIG = DifferentiationConfig()


def partials(func: Callable[[Point], object], x, steps: Sequence[float], order: int) -> np.ndarray:
    """Central-difference ∂_a func at x for every axis a; shape (dim, *value_shape)."""
    x = np.asarray(x, dtype=float)
    stencil = _CENTRAL_STENCILS[order]
    out = []
    for axis, h in enumerate(steps):
        acc = None
        for offset, weight in stencil:
            shifted = x.copy()
            shifted[axis] += offset * h
            term = weight * np.asarray(func(shifted), dtype=float)
            acc = term if acc is None else acc + term
        out.append(acc / h)
    return np.stack(out)


# ---------------------------------------------------------------------
# Curvature
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class CurvatureAtPoint:
    christoffel: np.ndarray
    riemann_lowered: np.ndarray
    ricci: np.ndarray
    scalar: float
    point: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def symmetry_residuals(self) -> dict:
        """Max absolute defects of the algebraic curvature symmetries."""
        r = self.riemann_lowered
        gamma = self.christoffel
        # R_ijkl + R_iklj + R_iljk
        bianchi = r + np.einsum("iklj->ijkl", r) + np.einsum("iljk->ijkl", r)
        return {
            "torsion": float(np.max(np.abs(gamma - gamma.transpose(0, 2, 1)), initial=0.0)),
            "first_pair": float(np.max(np.abs(r + r.transpose(1, 0, 2, 3)), initial=0.0)),
            "second_pair": float(np.max(np.abs(r + r.transpose(0, 1, 3, 2)), initial=0.0)),
            "pair_exchange": float(np.max(np.abs(r - r.transpose(2, 3, 0, 1)), initial=0.0)),
            "bianchi": float(np.max(np.abs(bianchi), initial=0.0)),
        }


def christoffel(m: MetricField, x, cfg: DifferentiationConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Γ^k_ij = ½ g^kl (∂_i g_jl + ∂_j g_il − ∂_l g_ij)."""
    x = m.domain.require_interior(x, cfg.reach(m.domain))
    g = m(x)
    dg = partials(m, x, cfg.steps(m.domain), cfg.stencil_order)
    first_kind = 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)
    gamma = np.einsum("kl,lij->kij", np.linalg.inv(g), first_kind)
    return 0.5 * (gamma + gamma.transpose(0, 2, 1))


def curvature_at(m: MetricField, x, cfg: DifferentiationConfig = DEFAULT_CONFIG) -> CurvatureAtPoint:
    x = m.domain.require_interior(x, cfg.reach(m.domain, nested=1))
    g = m(x)
    gamma = christoffel(m, x, cfg)
    # dgamma[c, a, d, b] = ∂_c Γ^a_db
    dgamma = partials(lambda p: christoffel(m, p, cfg), x,
                      cfg.nested_steps(m.domain), cfg.stencil_order)
    riemann_up = (np.einsum("cadb->abcd", dgamma) - np.einsum("dacb->abcd", dgamma)
                  + np.einsum("ace,edb->abcd", gamma, gamma)
                  - np.einsum("ade,ecb->abcd", gamma, gamma))
    riemann_lowered = np.einsum("ae,ebcd->abcd", g, riemann_up)
    ricci = np.einsum("abad->bd", riemann_up)
    ricci = 0.5 * (ricci + ricci.T)
    scalar = float(np.einsum("ij,ij->", np.linalg.inv(g), ricci))
    return CurvatureAtPoint(gamma, riemann_lowered, ricci, scalar, x)


def scalar_curvature(m: MetricField, x, cfg: DifferentiationConfig = DEFAULT_CONFIG) -> float:
    return curvature_at(m, x, cfg).scalar


# ---------------------------------------------------------------------
# Scalar-field calculus
# ---------------------------------------------------------------------

def differential(f: ScalarField, x, cfg: DifferentiationConfig = DEFAULT_CONFIG,
                 domain: Optional[ChartDomain] = None) -> np.ndarray:
    """Coordinate components ∂_i f."""
    domain = domain or f.domain
    return partials(f, x, cfg.steps(domain), cfg.stencil_order)


def gradient(m: MetricField, f: ScalarField, x,
             cfg: DifferentiationConfig = DEFAULT_CONFIG) -> Tuple[np.ndarray, float]:
    """(∇f)^i = g^ij ∂_j f together with |∇f|²."""
    x = m.domain.require_interior(x, cfg.reach(m.domain))
    df = differential(f, x, cfg, m.domain)
    ginv = np.linalg.inv(m(x))
    vector = ginv @ df
    return vector, float(max(df @ vector, 0.0))


def second_partials(f: ScalarField, x, cfg: DifferentiationConfig, domain: ChartDomain) -> np.ndarray:
    d2f = partials(lambda p: differential(f, p, cfg, domain), x,
                   cfg.nested_steps(domain), cfg.stencil_order)
    return 0.5 * (d2f + d2f.T)


def hessian(m: MetricField, f: ScalarField, x, cfg: DifferentiationConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Hess f_ij = ∂_i∂_j f − Γ^k_ij ∂_k f, exactly symmetric."""
    x = m.domain.require_interior(x, cfg.reach(m.domain, nested=1))
    gamma = christoffel(m, x, cfg)
    df = differential(f, x, cfg, m.domain)
    hess = second_partials(f, x, cfg, m.domain) - np.einsum("kij,k->ij", gamma, df)
    return 0.5 * (hess + hess.T)


def laplacian(m: MetricField, f: ScalarField, x, cfg: DifferentiationConfig = DEFAULT_CONFIG) -> float:
    """Trace of the Hessian against g^ij."""
    hess = hessian(m, f, x, cfg)
    return float(np.einsum("ij,ij->", np.linalg.inv(m(x)), hess))


def orthonormal_frame(g: np.ndarray) -> np.ndarray:
    """Gram–Schmidt of the coordinate basis under g; columns are the frame vectors."""
    lower = np.linalg.cholesky(g)
    return np.linalg.inv(lower).T
