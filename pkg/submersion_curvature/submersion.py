"""
Riemannian submersions given in connection (Kaluza–Klein) form.

Total-space coordinates are (x, y) with x on the base chart (dim n) and y on a
periodic fiber chart (dim q). The metric

    g = g_B,αβ dx^α dx^β + g_F,ij (dy^i + A^i_α dx^α)(dy^j + A^j_β dx^β)

makes (x, y) ↦ x a Riemannian submersion onto (base, g_B) by construction.

O'Neill conventions (Besse, chapter 9):
    T     : |T|² = Σ_ij |(∇_{u_i} u_j)^hor|²
    N     = Σ_i (∇_{u_i} u_i)^hor
    A     : |A|² = Σ_αβ |(∇_{ē_α} ē_β)^vert|²
    δ̌N   = −Σ_α ⟨∇_{ē_α} N, ē_α⟩
and R^M = R^B + R^F − |A|² − |T|² − |N|² − 2 δ̌N.

Vectors are total-space coordinate component arrays of length n + q.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from . import quadrature, settings
from .diffgeo_core import (
    DEFAULT_CONFIG,
    ChartDomain,
    DensityField,
    DifferentiationConfig,
    MetricField,
    ScalarField,
    christoffel,
    curvature_at,
    differential,
    gradient,
    hessian,
    laplacian,
    orthonormal_frame,
    partials,
)
from .errors import (
    ConsistencyError,
    HypothesisUnmetError,
    ParameterError,
    PreconditionError,
    StepSizeError,
    UnsupportedDomainError,
    _fmt_point,
)
from .weighted_geometry import WeightedManifold, modified_scalar_inf, modified_scalar_q

logger = logging.getLogger(__name__)

BaseFn = Callable[[np.ndarray], np.ndarray]
TotalFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


# ---------------------------------------------------------------------
# Submersion presentation
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class KKSubmersion:
    base: ChartDomain
    fiber: ChartDomain
    g_base: BaseFn
    g_fiber: TotalFn
    connection: TotalFn                                          # (x, y) -> q×n matrix A^i_α
    phi_M: Optional[Callable[[np.ndarray, np.ndarray], float]] = None   # None means φ^M ≡ 1
    name: str = "submersion"
    fiber_invariant: bool = False                                # g_F and A do not depend on y

    def __post_init__(self):
        if not self.fiber.fully_periodic:
            raise UnsupportedDomainError(
                f"{self.name}: every fiber axis must be periodic (compact fiber), got {self.fiber.periodic}"
            )

    @property
    def n(self) -> int:
        return self.base.dim

    @property
    def q(self) -> int:
        return self.fiber.dim

    @property
    def total(self) -> ChartDomain:
        return self.base.product(self.fiber)

    @property
    def unit_density(self) -> bool:
        return self.phi_M is None

    def split(self, p):
        p = np.asarray(p, dtype=float)
        return p[: self.n], p[self.n:]

    def join(self, x, y) -> np.ndarray:
        return np.concatenate([np.asarray(x, dtype=float), np.asarray(y, dtype=float)])

    def base_metric(self) -> MetricField:
        return MetricField(self.base, self.g_base, name="g_B")

    def fiber_metric(self, x) -> MetricField:
        x = np.array(x, dtype=float)
        return MetricField(self.fiber, lambda y: self.g_fiber(x, y), name="g_F")

    def connection_matrix(self, x, y) -> np.ndarray:
        return np.asarray(self.connection(x, y), dtype=float).reshape(self.q, self.n)

    def density_value(self, x, y) -> float:
        return 1.0 if self.phi_M is None else float(self.phi_M(x, y))

    def density(self) -> DensityField:
        return DensityField(self.total, lambda p: self.density_value(*self.split(p)), name="phi_M")

    def fiber_density(self, x) -> DensityField:
        x = np.array(x, dtype=float)
        return DensityField(self.fiber, lambda y: self.density_value(x, y), name="phi_F")

    def horizontal_lift(self, x, y, v) -> np.ndarray:
        """X̄ = X^α (∂_α − A^i_α ∂_{y^i}) for a base vector v at x."""
        v = np.asarray(v, dtype=float)
        return np.concatenate([v, -self.connection_matrix(x, y) @ v])


def assemble_total_metric(s: KKSubmersion) -> MetricField:
    base_metric = s.base_metric()

    def total(p):
        x, y = s.split(p)
        gb = base_metric(x)
        gf = s.fiber_metric(x)(y)
        a = s.connection_matrix(x, y)
        cross = a.T @ gf
        return np.block([[gb + cross @ a, cross], [cross.T, gf]])

    return MetricField(s.total, total, name="g_M")


# ---------------------------------------------------------------------
# Adapted frames
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class AdaptedFrame:
    point: np.ndarray
    horizontal: np.ndarray   # (n, n+q), rows ē_α
    vertical: np.ndarray     # (q, n+q), rows u_i
    base_frame: np.ndarray   # (n, n), rows e_α in base coordinates

    def vectors(self) -> np.ndarray:
        return np.vstack([self.horizontal, self.vertical])

    def gram(self, g: np.ndarray) -> np.ndarray:
        full = self.vectors()
        return full @ g @ full.T


def adapted_frame(s: KKSubmersion, point, horizontal_rotation: Optional[np.ndarray] = None,
                  vertical_rotation: Optional[np.ndarray] = None) -> AdaptedFrame:
    point = s.total.wrap(point)
    x, y = s.split(point)
    base_frame = orthonormal_frame(s.base_metric()(x)).T
    if horizontal_rotation is not None:
        base_frame = np.asarray(horizontal_rotation, dtype=float) @ base_frame
    a = s.connection_matrix(x, y)
    horizontal = np.hstack([base_frame, -base_frame @ a.T])
    fiber_frame = orthonormal_frame(s.fiber_metric(x)(y)).T
    if vertical_rotation is not None:
        fiber_frame = np.asarray(vertical_rotation, dtype=float) @ fiber_frame
    vertical = np.hstack([np.zeros((s.q, s.n)), fiber_frame])
    return AdaptedFrame(point, horizontal, vertical, base_frame)


class _PointGeometry:
    """Christoffels, frame and projections of the total space at one point."""

    def __init__(self, s: KKSubmersion, metric: MetricField, point, cfg: DifferentiationConfig,
                 horizontal_rotation=None, vertical_rotation=None):
        self.s = s
        self.metric = metric
        self.cfg = cfg
        self.point = s.total.wrap(point)
        self.g = metric(self.point)
        self.gamma = christoffel(metric, self.point, cfg)
        self.frame = adapted_frame(s, self.point, horizontal_rotation, vertical_rotation)
        self._rotations = (horizontal_rotation, vertical_rotation)
        self._t_vectors = None

    def inner(self, a, b) -> float:
        return float(a @ self.g @ b)

    def cov(self, u, v) -> np.ndarray:
        """Γ(u, v)^k, the part of ∇_u v that does not differentiate v."""
        return np.einsum("kij,i,j->k", self.gamma, u, v)

    def hor(self, w) -> np.ndarray:
        h = self.frame.horizontal
        return (h @ self.g @ w) @ h

    def ver(self, w) -> np.ndarray:
        return w - self.hor(w)

    @property
    def t_vectors(self) -> np.ndarray:
        # (∇_U V)^hor is tensorial: U^a ∂_a V stays vertical for vertical U, V.
        if self._t_vectors is None:
            u = self.frame.vertical
            self._t_vectors = np.array([[self.hor(self.cov(ui, uj)) for uj in u] for ui in u])
        return self._t_vectors

    @property
    def T_norm2(self) -> float:
        t = self.t_vectors
        return float(sum(self.inner(t[i, j], t[i, j]) for i in range(t.shape[0]) for j in range(t.shape[1])))

    @property
    def N(self) -> np.ndarray:
        t = self.t_vectors
        return np.sum([t[i, i] for i in range(t.shape[0])], axis=0)

    @property
    def N_norm2(self) -> float:
        n_vec = self.N
        return self.inner(n_vec, n_vec)

    def a_tensor(self) -> np.ndarray:
        """A_{ē_α} ē_β as an (n, n, n+q) array, via the coordinate lifts X_γ = ∂_γ − A^i_γ ∂_i."""
        s, n = self.s, self.s.n
        x, y = s.split(self.point)
        a = s.connection_matrix(x, y)
        lifts = np.hstack([np.eye(n), -a.T])
        # da[c, i, γ] = ∂_c A^i_γ
        da = partials(lambda p: s.connection_matrix(*s.split(p)), self.point,
                      self.cfg.steps(s.total), self.cfg.stencil_order)
        coord = np.empty((n, n, n + s.q))
        for gam in range(n):
            for dlt in range(n):
                d_lift = np.concatenate([np.zeros(n), -np.einsum("c,ci->i", lifts[gam], da[:, :, dlt])])
                coord[gam, dlt] = self.ver(d_lift + self.cov(lifts[gam], lifts[dlt]))
        coef = self.frame.base_frame
        tensor = np.einsum("ag,bd,gdk->abk", coef, coef, coord)

        defect = max((np.sqrt(abs(self.inner(tensor[i, j] + tensor[j, i], tensor[i, j] + tensor[j, i])))
                      for i in range(n) for j in range(n)), default=0.0)
        scale = max([1.0] + [np.sqrt(abs(self.inner(tensor[i, j], tensor[i, j])))
                             for i in range(n) for j in range(n)])
        if defect > settings.ANTISYMMETRY_LIMIT * scale:
            raise ConsistencyError(
                f"O'Neill A fails antisymmetry at {_fmt_point(self.point)}: defect {defect:.3e}"
            )
        return tensor

    def A_norm2(self) -> float:
        tensor = self.a_tensor()
        n = self.s.n
        return float(sum(self.inner(tensor[i, j], tensor[i, j]) for i in range(n) for j in range(n)))

    def check_delta_N(self) -> float:
        s = self.s
        h_rot, v_rot = self._rotations

        def n_field(p):
            return _PointGeometry(s, self.metric, p, self.cfg, h_rot, v_rot).N

        dn = partials(n_field, self.point, self.cfg.nested_steps(s.total), self.cfg.stencil_order)
        n_vec = self.N
        total = 0.0
        for e in self.frame.horizontal:
            nabla = e @ dn + self.cov(e, n_vec)
            total += self.inner(nabla, e)
        return -total


@dataclass(frozen=True)
class SubmersionPointReport:
    point: np.ndarray
    R_M: float
    R_F: float
    R_B: float
    A_norm2: float
    T_norm2: float
    N_norm2: float
    check_delta_N: float
    N_vector: np.ndarray
    residual_3_1: float
    fiber_dim: int = 1

    @property
    def cauchy_schwarz_gap(self) -> float:
        """|T|² − |N|²/q, non-negative for every submersion."""
        return self.T_norm2 - self.N_norm2 / self.fiber_dim


def oneill_invariants(s: KKSubmersion, point, cfg: DifferentiationConfig = DEFAULT_CONFIG,
                      horizontal_rotation: Optional[np.ndarray] = None,
                      vertical_rotation: Optional[np.ndarray] = None) -> SubmersionPointReport:
    metric = assemble_total_metric(s)
    point = s.total.require_interior(s.total.wrap(point), cfg.reach(s.total, nested=1))
    geom = _PointGeometry(s, metric, point, cfg, horizontal_rotation, vertical_rotation)
    x, y = s.split(point)
    r_m = curvature_at(metric, point, cfg).scalar
    r_b = curvature_at(s.base_metric(), x, cfg).scalar
    r_f = curvature_at(s.fiber_metric(x), y, cfg).scalar if s.q > 1 else 0.0
    a2, t2, n2 = geom.A_norm2(), geom.T_norm2, geom.N_norm2
    dn = geom.check_delta_N()
    residual = r_m - (r_b + r_f - a2 - t2 - n2 - 2.0 * dn)
    return SubmersionPointReport(point, r_m, r_f, r_b, a2, t2, n2, dn, geom.N, residual, s.q)


# ---------------------------------------------------------------------
# Fiber integration
# ---------------------------------------------------------------------

def _fiber_table(s: KKSubmersion, x, grid: quadrature.GridSpec):
    """Fiber nodes, the common weight, and √det g_F(x, ·) at every node."""
    nodes, weight = quadrature.periodic_nodes(s.fiber, grid)
    g_f = s.fiber_metric(x)
    return nodes, weight, np.array([g_f.sqrt_det(y) for y in nodes])


def fiber_integrate(s: KKSubmersion, x, integrand: Callable[[np.ndarray, np.ndarray], float],
                    grid: quadrature.GridSpec = settings.DEFAULT_GRID, workers: int = 1) -> float:
    """∫_{F_x} integrand(x, y) dvol_{g_F(x)}."""
    x = s.base.wrap(x)
    nodes, weight, vol = _fiber_table(s, x, grid)
    values = quadrature.evaluate(lambda y: integrand(x, y), nodes, workers)
    return float(np.sum(values * vol) * weight)


def pushforward_density(s: KKSubmersion, grid: quadrature.GridSpec = settings.DEFAULT_GRID) -> DensityField:
    """φ^B(x) = ∫_{F_x} φ^M dvol_F; the fiber volume when φ^M ≡ 1."""
    return DensityField(s.base, lambda x: fiber_integrate(s, x, s.density_value, grid), name="phi_B")


# ---------------------------------------------------------------------
# Identity reports
# ---------------------------------------------------------------------

class IdentityId(str, enum.Enum):
    ONEILL = "oneill"
    LAPLACIAN_SPLIT = "laplacian-split"
    BASE_DERIVATIVES = "base-derivatives"
    MEASURE_HYPOTHESIS = "measure-hypothesis"
    MAIN_EQUALITY = "main-equality"
    THEOREM2_2 = "theorem2-2"
    LIE_FIBER_VOLUME = "lie-fiber-volume"


@dataclass(frozen=True)
class IdentityReport:
    identity_id: IdentityId
    sample_points: List[np.ndarray]
    residuals: List[float]
    max_abs_residual: float
    passed: bool
    tolerance: float
    notes: str = ""
    details: dict = field(default_factory=dict)
    hypothesis_met: Optional[bool] = None

    @classmethod
    def from_residuals(cls, identity_id: IdentityId, points: Sequence, residuals: Sequence[float],
                       tolerance: float, notes: str = "", details: Optional[dict] = None,
                       hypothesis_met: Optional[bool] = None) -> "IdentityReport":
        residuals = [float(r) for r in residuals]
        worst = max((abs(r) for r in residuals), default=0.0)
        if not np.isfinite(worst):
            worst = float("inf")
        return cls(identity_id, [np.asarray(p, dtype=float) for p in points], residuals,
                   worst, worst <= tolerance, tolerance, notes, dict(details or {}), hypothesis_met)

    @classmethod
    def combine(cls, reports: Sequence["IdentityReport"]) -> "IdentityReport":
        """Merge per-point reports of one identity; detail values become per-report lists."""
        if not reports:
            raise ParameterError("nothing to combine")
        first = reports[0]
        points, residuals, notes = [], [], []
        details: dict = {}
        for r in reports:
            points.extend(r.sample_points)
            residuals.extend(r.residuals)
            if r.notes and r.notes not in notes:
                notes.append(r.notes)
            for key, value in r.details.items():
                details.setdefault(key, []).append(value)
        flags = [r.hypothesis_met for r in reports if r.hypothesis_met is not None]
        return cls.from_residuals(first.identity_id, points, residuals, first.tolerance,
                                  "; ".join(notes), details, all(flags) if flags else None)

    def to_dict(self) -> dict:
        return {
            "identity": self.identity_id.value,
            "passed": bool(self.passed),
            "max_abs_residual": float(self.max_abs_residual),
            "tolerance": float(self.tolerance),
            "residuals": [float(r) for r in self.residuals],
            "sample_points": [[float(c) for c in p] for p in self.sample_points],
            "hypothesis_met": self.hypothesis_met,
            "notes": self.notes,
            "details": _plain(self.details),
        }


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)) and not isinstance(value, bool):
        return int(value)
    return value


def _relative(lhs: float, rhs: float) -> float:
    return (lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


def _ordered_map(func, items: Iterable, workers: int) -> list:
    items = list(items)
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


# ---------------------------------------------------------------------
# Pointwise identities
# ---------------------------------------------------------------------

def verify_oneill_identity(s: KKSubmersion, sample_points: Sequence, cfg: DifferentiationConfig = DEFAULT_CONFIG,
                           tolerance: float = settings.TOL_NESTED_IDENTITY, workers: int = 1,
                           horizontal_rotation: Optional[np.ndarray] = None) -> IdentityReport:
    reports = _ordered_map(lambda p: oneill_invariants(s, p, cfg, horizontal_rotation), sample_points, workers)
    residuals = [r.residual_3_1 / max(1.0, abs(r.R_M)) for r in reports]
    details = {
        "R_M": [r.R_M for r in reports],
        "A_norm2": [r.A_norm2 for r in reports],
        "T_norm2": [r.T_norm2 for r in reports],
        "N_norm2": [r.N_norm2 for r in reports],
        "check_delta_N": [r.check_delta_N for r in reports],
        "min_cauchy_schwarz_gap": min((r.cauchy_schwarz_gap for r in reports), default=0.0),
    }
    report = IdentityReport.from_residuals(IdentityId.ONEILL, [r.point for r in reports], residuals,
                                           tolerance, details=details)
    logger.info("[Verify] %s oneill: max residual %.3e over %d points", s.name,
                report.max_abs_residual, len(residuals))
    return report


def verify_laplacian_split(s: KKSubmersion, f: ScalarField, sample_points: Sequence,
                           cfg: DifferentiationConfig = DEFAULT_CONFIG,
                           tolerance: float = settings.TOL_IDENTITY, workers: int = 1) -> IdentityReport:
    """Laplacian and gradient-norm splittings of f on the total space.

    Residuals list the Laplacian splitting at every point, then the
    Pythagorean gradient splitting at every point.
    """
    metric = assemble_total_metric(s)
    total = s.total

    def one(p):
        p = total.require_interior(total.wrap(p), cfg.reach(total, nested=1))
        x, y = s.split(p)
        geom = _PointGeometry(s, metric, p, cfg)
        lap_m = laplacian(metric, f, p, cfg)
        hess = hessian(metric, f, p, cfg)
        horizontal = geom.frame.horizontal
        hor_lap = float(sum(e @ hess @ e for e in horizontal))
        fiber_f = ScalarField(s.fiber, lambda yy: f(s.join(x, yy)))
        g_f = s.fiber_metric(x)
        lap_f = laplacian(g_f, fiber_f, y, cfg)
        df = differential(f, p, cfg, total)
        lap_res = _relative(lap_m, hor_lap + lap_f - float(df @ geom.N))

        _, full = gradient(metric, f, p, cfg)
        hor_sq = float(sum((e @ df) ** 2 for e in horizontal))
        dfy = df[s.n:]
        fib_sq = float(dfy @ np.linalg.inv(g_f(y)) @ dfy)
        grad_res = _relative(full, hor_sq + fib_sq)
        return p, lap_res, grad_res

    rows = _ordered_map(one, sample_points, workers)
    points = [r[0] for r in rows]
    lap, grad = [r[1] for r in rows], [r[2] for r in rows]
    details = {
        "laplacian_max": max((abs(v) for v in lap), default=0.0),
        "gradient_max": max((abs(v) for v in grad), default=0.0),
    }
    return IdentityReport.from_residuals(IdentityId.LAPLACIAN_SPLIT, points + points, lap + grad,
                                         tolerance, notes=f"f = {getattr(f, 'name', 'f')}", details=details)


# ---------------------------------------------------------------------
# Transport of the density along horizontal lifts
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class MeasurePreservationCheck:
    base_point: np.ndarray
    max_fiber_variance: float      # largest standard deviation over the fiber, over directions
    per_direction: List[float]
    tolerance: float
    values: np.ndarray             # (fiber nodes, n)

    @property
    def certified(self) -> bool:
        return self.max_fiber_variance <= self.tolerance


@dataclass
class _FiberNode:
    y: np.ndarray
    phi: float
    vol: float
    geom: _PointGeometry
    dphi: np.ndarray

    @property
    def h(self) -> np.ndarray:
        """ē_α φ^M / φ^M − ⟨ē_α, N⟩ for each α."""
        n_vec = self.geom.N
        return np.array([(e @ self.dphi) / self.phi - self.geom.inner(e, n_vec)
                         for e in self.geom.frame.horizontal])


def _fiber_nodes(s: KKSubmersion, b, grid, cfg: DifferentiationConfig, workers: int = 1):
    metric = assemble_total_metric(s)
    density = s.density()
    nodes, weight, vol = _fiber_table(s, b, grid)

    def one(k):
        p = s.join(b, nodes[k])
        geom = _PointGeometry(s, metric, p, cfg)
        return _FiberNode(nodes[k], density(p), float(vol[k]), geom, differential(density, p, cfg, s.total))

    return _ordered_map(one, range(len(nodes)), workers), weight


def check_measure_preserving(s: KKSubmersion, b, grid: quadrature.GridSpec = settings.DEFAULT_GRID,
                             cfg: DifferentiationConfig = DEFAULT_CONFIG,
                             tolerance: float = settings.TOL_MEASURE, workers: int = 1,
                             _nodes=None) -> MeasurePreservationCheck:
    """Whether X̄φ^M/φ^M − ⟨X̄, N⟩ is constant along the fiber over b for every base direction."""
    b = s.base.require_interior(s.base.wrap(b), cfg.reach(s.base, nested=1))
    nodes = _nodes if _nodes is not None else _fiber_nodes(s, b, grid, cfg, workers)[0]
    values = np.array([node.h for node in nodes])
    spread = np.std(values, axis=0)
    check = MeasurePreservationCheck(b, float(np.max(spread, initial=0.0)), [float(v) for v in spread],
                                     tolerance, values)
    logger.debug("[Verify] %s fiber spread at %s: %.3e", s.name, _fmt_point(b), check.max_fiber_variance)
    return check


def measure_hypothesis_report(s: KKSubmersion, base_points: Sequence, grid=settings.DEFAULT_GRID,
                              cfg: DifferentiationConfig = DEFAULT_CONFIG,
                              tolerance: float = settings.TOL_MEASURE, workers: int = 1) -> IdentityReport:
    checks = [check_measure_preserving(s, b, grid, cfg, tolerance, workers) for b in base_points]
    return IdentityReport.from_residuals(
        IdentityId.MEASURE_HYPOTHESIS, [c.base_point for c in checks],
        [c.max_fiber_variance for c in checks], tolerance,
        details={"per_direction": [c.per_direction for c in checks]},
        hypothesis_met=all(c.certified for c in checks),
    )


# ---------------------------------------------------------------------
# Base-derivative identities
# ---------------------------------------------------------------------

def verify_base_derivative_identities(s: KKSubmersion, b, directions: Optional[Sequence] = None,
                                      grid: quadrature.GridSpec = settings.DEFAULT_GRID,
                                      cfg: DifferentiationConfig = DEFAULT_CONFIG,
                                      tolerance: float = settings.TOL_NESTED_IDENTITY,
                                      measure_tolerance: float = settings.TOL_MEASURE,
                                      workers: int = 1) -> IdentityReport:
    """Derivatives of φ^B at b against fiber integrals of total-space data.

    First variation per direction and the Laplacian always count; the
    |∇φ^B|²/φ^B formula only when the transport criterion holds at b.
    """
    base = s.base
    b = base.require_interior(base.wrap(b), cfg.reach(base, nested=2))
    g_b = s.base_metric()
    phi_b = pushforward_density(s, grid)
    metric = assemble_total_metric(s)
    density = s.density()
    nodes, weight = _fiber_nodes(s, b, grid, cfg, workers)
    measure = check_measure_preserving(s, b, grid, cfg, measure_tolerance, _nodes=nodes)

    if directions is None:
        directions = list(orthonormal_frame(g_b(b)).T)
    directions = [np.asarray(d, dtype=float) for d in directions]

    d_phi_b = differential(phi_b, b, cfg, base)
    residuals, details = [], {}
    for k, d in enumerate(directions):
        lhs = float(d @ d_phi_b)
        rhs = 0.0
        for node in nodes:
            lift = s.horizontal_lift(b, node.y, d)
            rhs += (lift @ node.dphi - node.geom.inner(lift, node.geom.N) * node.phi) * node.vol
        rhs *= weight
        residuals.append(_relative(lhs, rhs))
        details[f"first_variation_{k}"] = {"lhs": lhs, "rhs": rhs}

    def second_order(node):
        p = s.join(b, node.y)
        hess = hessian(metric, density, p, cfg)
        horizontal = node.geom.frame.horizontal
        hor_lap = float(sum(e @ hess @ e for e in horizontal)) / node.phi
        ratios = np.array([(e @ node.dphi) / node.phi for e in horizontal])
        h = node.h
        lap_term = hor_lap - float(ratios @ ratios) + node.geom.check_delta_N() + float(h @ h)
        return lap_term * node.phi * node.vol, float(h @ h) * node.phi * node.vol

    terms = np.array(_ordered_map(second_order, nodes, workers))
    lap_rhs = float(np.sum(terms[:, 0]) * weight)
    grad_rhs = float(np.sum(terms[:, 1]) * weight)

    lap_lhs = laplacian(g_b, phi_b, b, cfg)
    residuals.append(_relative(lap_lhs, lap_rhs))
    details["laplacian"] = {"lhs": lap_lhs, "rhs": lap_rhs}

    _, grad_sq = gradient(g_b, phi_b, b, cfg)
    grad_lhs = grad_sq / phi_b(b)
    details["gradient_ratio"] = {"lhs": grad_lhs, "rhs": grad_rhs}
    notes = ""
    if measure.certified:
        residuals.append(_relative(grad_lhs, grad_rhs))
    else:
        details["informational_gap"] = grad_lhs - grad_rhs
        notes = (f"fiber spread {measure.max_fiber_variance:.3e} exceeds {measure_tolerance:g}; "
                 "gradient formula reported, not asserted")
    details["fiber_spread"] = measure.max_fiber_variance

    return IdentityReport.from_residuals(IdentityId.BASE_DERIVATIVES, [b] * len(residuals), residuals,
                                         tolerance, notes, details, measure.certified)


# ---------------------------------------------------------------------
# Integrated curvature identities
# ---------------------------------------------------------------------

def verify_main_equality(s: KKSubmersion, b, grid: quadrature.GridSpec = settings.DEFAULT_GRID,
                         cfg: DifferentiationConfig = DEFAULT_CONFIG,
                         tolerance: float = settings.TOL_IDENTITY,
                         measure_tolerance: float = settings.TOL_MEASURE,
                         workers: int = 1) -> IdentityReport:
    """φ^B R^B_∞ = ∫_F (R^M_∞ − R^F_∞ + |A|² + |T|²) φ^M dvol_F at b.

    Raises HypothesisUnmetError when the transport criterion fails at b.
    """
    base = s.base
    b = base.require_interior(base.wrap(b), cfg.reach(base, nested=2))
    nodes, weight = _fiber_nodes(s, b, grid, cfg, workers)
    measure = check_measure_preserving(s, b, grid, cfg, measure_tolerance, _nodes=nodes)
    if not measure.certified:
        raise HypothesisUnmetError(
            f"{s.name}: φ^M is not transported by horizontal lifts at {_fmt_point(b)} "
            f"(fiber spread {measure.max_fiber_variance:.3e} > {measure_tolerance:g})",
            spread=measure.max_fiber_variance,
        )

    metric = assemble_total_metric(s)
    w_total = WeightedManifold(metric, s.density())
    w_fiber = WeightedManifold(s.fiber_metric(b), s.fiber_density(b))
    phi_b = pushforward_density(s, grid)
    w_base = WeightedManifold(s.base_metric(), phi_b)

    def one(node):
        p = s.join(b, node.y)
        r_m = modified_scalar_inf(w_total, p, cfg)
        r_f = modified_scalar_inf(w_fiber, node.y, cfg) if s.q > 1 or s.phi_M is not None else 0.0
        slack = node.geom.A_norm2() + node.geom.T_norm2
        return (r_m - r_f + slack) * node.phi * node.vol, slack * node.phi * node.vol, node.phi * node.vol

    table = np.array(_ordered_map(one, nodes, workers))
    rhs = float(np.sum(table[:, 0]) * weight)
    slack = float(np.sum(table[:, 1]) * weight)
    mass = float(np.sum(table[:, 2]) * weight)

    r_b_inf = modified_scalar_inf(w_base, b, cfg)
    lhs = mass * r_b_inf
    mean_difference = (rhs - slack) / mass
    details = {
        "lhs": lhs,
        "rhs": rhs,
        "phi_B": mass,
        "R_B_inf": r_b_inf,
        "inequality_slack": slack,
        "slack_identity_residual": (r_b_inf - mean_difference) - slack / mass,
        "fiber_spread": measure.max_fiber_variance,
    }
    report = IdentityReport.from_residuals(IdentityId.MAIN_EQUALITY, [b], [_relative(lhs, rhs)], tolerance,
                                           details=details, hypothesis_met=True)
    logger.info("[Verify] %s main equality at %s: lhs %.10g rhs %.10g", s.name, _fmt_point(b), lhs, rhs)
    return report


def _require_fiber_invariance(s: KKSubmersion, metric: MetricField, b, nodes) -> None:
    """ConsistencyError unless the total metric takes one value at every fiber node over b."""
    reference = metric(s.join(b, nodes[0].y))
    scale = max(1.0, float(np.max(np.abs(reference))))
    for node in nodes[1:]:
        drift = float(np.max(np.abs(metric(s.join(b, node.y)) - reference)))
        if drift > 1e-12 * scale:
            raise ConsistencyError(
                f"{s.name}: declared fiber-invariant but the metric over {_fmt_point(b)} "
                f"changes along the fiber by {drift:.3e}"
            )


def verify_theorem2_2(s: KKSubmersion, sample_base_points: Sequence,
                      grid: quadrature.GridSpec = settings.DEFAULT_GRID,
                      cfg: DifferentiationConfig = DEFAULT_CONFIG,
                      tolerance: float = settings.TOL_IDENTITY,
                      measure_tolerance: float = settings.TOL_MEASURE,
                      workers: int = 1) -> IdentityReport:
    """Fiber-averaged R^M − R^F against R^B_q with φ^B the fiber volume, q = dim F.

    Residuals are violation amounts: max(0, lhs − rhs) scaled, then the
    largest pointwise Cauchy–Schwarz violation of |T|² ≥ |N|²/q over the
    fiber. Where the transport criterion fails the inequality is recorded
    in details only.
    """
    q = s.q
    if not s.unit_density:
        for b in sample_base_points:
            nodes, _ = quadrature.periodic_nodes(s.fiber, grid)
            off = max(abs(s.density_value(s.base.wrap(b), y) - 1.0) for y in nodes)
            if off > 1e-12:
                raise PreconditionError(f"{s.name}: fiber-volume inequality needs φ^M ≡ 1 (deviation {off:.3e})")

    metric = assemble_total_metric(s)
    w_base = WeightedManifold(s.base_metric(), pushforward_density(s, grid))
    points, residuals = [], []
    details = {"lhs": [], "rhs": [], "slack": [], "min_cauchy_schwarz_gap": [], "hypothesis_met": [],
               "R_M_min": [], "R_M_max": []}
    all_met = True
    for b in sample_base_points:
        b = s.base.require_interior(s.base.wrap(b), cfg.reach(s.base, nested=2))
        nodes, weight = _fiber_nodes(s, b, grid, cfg, workers)
        measure = check_measure_preserving(s, b, grid, cfg, measure_tolerance, _nodes=nodes)
        g_f = s.fiber_metric(b)

        def curvatures(node):
            r_m = curvature_at(metric, s.join(b, node.y), cfg).scalar
            r_f = curvature_at(g_f, node.y, cfg).scalar if q > 1 else 0.0
            return r_m, r_f

        if s.fiber_invariant:
            _require_fiber_invariance(s, metric, b, nodes)
            scalars = np.tile(curvatures(nodes[0]), (len(nodes), 1))
        else:
            scalars = np.array(_ordered_map(curvatures, nodes, workers))
        gaps = [node.geom.T_norm2 - node.geom.N_norm2 / q for node in nodes]
        table = np.column_stack([scalars, gaps])
        vol = np.array([node.vol for node in nodes])
        volume = float(np.sum(vol) * weight)
        lhs = float(np.sum((table[:, 0] - table[:, 1]) * vol) * weight) / volume
        rhs = modified_scalar_q(w_base, q, b, cfg)
        gap = float(np.min(table[:, 2]))

        if measure.certified:
            points.append(b)
            residuals.append(max(0.0, _relative(lhs, rhs)))
        else:
            all_met = False
        points.append(b)
        residuals.append(max(0.0, -gap) / max(1.0, float(np.max(np.abs(table[:, 0])))))

        details["lhs"].append(lhs)
        details["rhs"].append(rhs)
        details["slack"].append(rhs - lhs)
        details["min_cauchy_schwarz_gap"].append(gap)
        details["hypothesis_met"].append(measure.certified)
        details["R_M_min"].append(float(np.min(table[:, 0])))
        details["R_M_max"].append(float(np.max(table[:, 0])))

    notes = "" if all_met else "transport criterion fails at some base points; inequality there is informational"
    return IdentityReport.from_residuals(IdentityId.THEOREM2_2, points, residuals, tolerance, notes, details,
                                         all_met)


# ---------------------------------------------------------------------
# Lie derivative of the fiber volume
# ---------------------------------------------------------------------

def _periodic_derivative(values: np.ndarray, axis: int, spacing: float) -> np.ndarray:
    if values.shape[axis] >= 5:
        return (-np.roll(values, -2, axis) + 8.0 * np.roll(values, -1, axis)
                - 8.0 * np.roll(values, 1, axis) + np.roll(values, 2, axis)) / (12.0 * spacing)
    return (np.roll(values, -1, axis) - np.roll(values, 1, axis)) / (2.0 * spacing)


def verify_lie_derivative_fiber_volume(s: KKSubmersion, b, direction,
                                       grid: quadrature.GridSpec = settings.DEFAULT_GRID,
                                       cfg: DifferentiationConfig = DEFAULT_CONFIG,
                                       t_step: float = 1e-3,
                                       tolerance: float = settings.TOL_NESTED_IDENTITY) -> IdentityReport:
    """d/dt of the pulled-back fiber volume under the flow of X̄, against −⟨X̄, N⟩ dvol_F."""
    base, fiber = s.base, s.fiber
    b = base.require_interior(base.wrap(b), cfg.reach(base, nested=1))
    d = np.asarray(direction, dtype=float).reshape(s.n)
    for sign in (1.0, -1.0):
        end = b + sign * t_step * d
        for axis, (lo, hi) in enumerate(base.bounds):
            if not base.periodic[axis] and not lo <= end[axis] <= hi:
                raise StepSizeError(f"flow of length {t_step:g} leaves the base chart along axis {axis}")

    counts = quadrature.node_counts(fiber, grid)
    nodes, weight = quadrature.periodic_nodes(fiber, grid)
    spacing = fiber.lengths / np.array(counts)

    def pulled_back_volume(sign: float) -> np.ndarray:
        t_end = sign * t_step

        def rhs(t, state):
            x = b + t * d
            ys = state.reshape(-1, s.q)
            return np.concatenate([-s.connection_matrix(x, y) @ d for y in ys])

        sol = solve_ivp(rhs, (0.0, t_end), nodes.ravel(), method="DOP853", rtol=1e-12, atol=1e-12)
        if not sol.success:
            raise StepSizeError(f"fiber flow did not integrate: {sol.message}")
        ys = sol.y[:, -1].reshape(-1, s.q)
        x_end = b + t_end * d
        g_f = s.fiber_metric(x_end)
        displacement = (ys - nodes).reshape(*counts, s.q)
        jac = np.zeros((*counts, s.q, s.q))
        for k in range(s.q):
            jac[..., :, k] = _periodic_derivative(displacement, k, spacing[k])
        jac += np.eye(s.q)
        dets = np.linalg.det(jac).ravel()
        return np.array([g_f.sqrt_det(y) for y in ys]) * dets

    derivative = (pulled_back_volume(1.0) - pulled_back_volume(-1.0)) / (2.0 * t_step)
    metric = assemble_total_metric(s)
    g_f = s.fiber_metric(b)
    expected = []
    for y in nodes:
        geom = _PointGeometry(s, metric, s.join(b, y), cfg)
        lift = s.horizontal_lift(b, y, d)
        expected.append(-geom.inner(lift, geom.N) * g_f.sqrt_det(y))
    expected = np.array(expected)
    scale = max(1.0, float(np.max(np.abs(expected))))
    residuals = (derivative - expected) / scale
    details = {"max_expected": float(np.max(np.abs(expected))),
               "total_rate": float(np.sum(derivative) * weight)}
    return IdentityReport.from_residuals(IdentityId.LIE_FIBER_VOLUME, [s.join(b, y) for y in nodes],
                                         residuals, tolerance, details=details)
