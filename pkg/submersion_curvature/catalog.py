"""
Closed-form examples with their oracle values.

Every oracle carries a provenance note so a failing comparison can be traced
back to the formula it was checked against.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from .diffgeo_core import ChartDomain, DensityField, MetricField, ScalarField
from .errors import CatalogError
from .submersion import IdentityId, KKSubmersion
from .weighted_geometry import WeightedManifold

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

OracleValue = Union[float, Callable[..., float]]


@dataclass(frozen=True)
class Oracle:
    name: str
    value: OracleValue
    provenance: str

    def at(self, point=None, **kwargs) -> float:
        if callable(self.value):
            return float(self.value(np.asarray(point, dtype=float), **kwargs))
        return float(self.value)


@dataclass(frozen=True)
class ParamSpec:
    name: str
    default: object
    lo: Optional[float] = None
    hi: Optional[float] = None
    choices: Tuple[str, ...] = ()
    integer: bool = False
    doc: str = ""

    def coerce(self, entry_id: str, value):
        if self.choices:
            value = str(value)
            if value not in self.choices:
                raise CatalogError(f"{entry_id}: {self.name} must be one of {', '.join(self.choices)}, got {value!r}")
            return value
        try:
            number = int(value) if self.integer else float(value)
        except (TypeError, ValueError):
            raise CatalogError(f"{entry_id}: {self.name} must be numeric, got {value!r}") from None
        if self.integer and float(value) != number:
            raise CatalogError(f"{entry_id}: {self.name} must be an integer, got {value!r}")
        if (self.lo is not None and number < self.lo) or (self.hi is not None and number > self.hi):
            raise CatalogError(f"{entry_id}: {self.name}={number!r} outside [{self.lo}, {self.hi}]")
        return number


@dataclass(frozen=True)
class CatalogBuild:
    id: str
    kind: str                         # manifold | weighted | submersion
    obj: object                       # MetricField | WeightedManifold | KKSubmersion
    oracles: Dict[str, Oracle]
    sample_region: ChartDomain        # interior region for pointwise samples
    params: Dict[str, object] = field(default_factory=dict)
    expected_failures: frozenset = frozenset()
    test_functions: Tuple[ScalarField, ...] = ()

    @property
    def domain(self) -> ChartDomain:
        if self.kind == "submersion":
            return self.obj.total
        if self.kind == "weighted":
            return self.obj.domain
        return self.obj.domain

    @property
    def metric(self) -> MetricField:
        if self.kind == "weighted":
            return self.obj.metric
        if self.kind == "manifold":
            return self.obj
        raise CatalogError(f"{self.id} is a submersion; use the assembled total metric")

    def default_samples(self, count: int, seed: int = 0) -> np.ndarray:
        return self.sample_region.sample(count, np.random.default_rng(seed))

    def base_samples(self, count: int, seed: int = 0) -> np.ndarray:
        """Samples of the base chart interior, for submersions."""
        if self.kind != "submersion":
            raise CatalogError(f"{self.id} has no base")
        n = self.obj.n
        region = ChartDomain(self.sample_region.bounds[:n], self.sample_region.periodic[:n],
                             self.sample_region.names[:n])
        return region.sample(count, np.random.default_rng(seed))

    def oracle(self, name: str) -> Oracle:
        try:
            return self.oracles[name]
        except KeyError:
            raise CatalogError(f"{self.id} has no oracle {name!r}") from None


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    kind: str                                   # manifold | weighted | submersion | family
    params: Tuple[ParamSpec, ...]
    builder: Callable[..., CatalogBuild]
    summary: str
    family_parameter: Optional[str] = None

    def resolve(self, params: Dict[str, object]) -> Dict[str, object]:
        known = {p.name: p for p in self.params}
        unknown = sorted(set(params) - set(known))
        if unknown:
            raise CatalogError(f"{self.id}: unknown parameter(s) {', '.join(unknown)}; "
                               f"known: {', '.join(known) or 'none'}")
        return {name: spec.coerce(self.id, params.get(name, spec.default)) for name, spec in known.items()}


# ---------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------

def _axis(lo, hi, periodic, name):
    return (float(lo), float(hi)), bool(periodic), name


def _chart(*axes) -> ChartDomain:
    return ChartDomain(tuple(a[0] for a in axes), tuple(a[1] for a in axes), tuple(a[2] for a in axes))


def _circle(name="y", length=TWO_PI):
    return _axis(0.0, length, True, name)


def standard_test_functions(domain: ChartDomain) -> Tuple[ScalarField, ...]:
    """Three smooth functions, periodic on every periodic axis of the chart."""
    lo, lengths = domain.lower, domain.lengths
    last = domain.dim - 1

    def angles(p):
        return TWO_PI * (np.asarray(p, dtype=float) - lo) / lengths

    return (
        ScalarField(domain, lambda p: float(np.cos(angles(p)[0])), name="cos(θ0)"),
        ScalarField(domain, lambda p: float(np.cos(angles(p)[0]) * np.cos(angles(p)[last])),
                    name=f"cos(θ0)cos(θ{last})"),
        ScalarField(domain, lambda p: float(np.exp(0.5 * np.sin(angles(p)[last])) * (2.0 + np.sin(angles(p)[0]))),
                    name=f"exp(sin(θ{last})/2)(2+sin(θ0))"),
    )


def _submersion_build(entry_id, s: KKSubmersion, oracles, sample_region, params, expected_failures=()):
    return CatalogBuild(entry_id, "submersion", s, oracles, sample_region, params,
                        frozenset(expected_failures), standard_test_functions(s.total))


# ---------------------------------------------------------------------
# Manifolds
# ---------------------------------------------------------------------

def _sphere(r: float) -> CatalogBuild:
    domain = _chart(_axis(0.0, np.pi, False, "u"), _axis(0.0, TWO_PI, True, "v"))
    metric = MetricField(domain, lambda p: np.diag([r * r, (r * np.sin(p[0])) ** 2]), name=f"S2({r:g})")
    region = _chart(_axis(0.2, np.pi - 0.2, False, "u"), _axis(0.0, TWO_PI, True, "v"))
    oracles = {"R": Oracle("R", 2.0 / r ** 2, "round sphere of radius r: R = 2/r²")}
    return CatalogBuild("sphere", "manifold", metric, oracles, region, {"r": r})


def _flat_torus(n: int) -> CatalogBuild:
    domain = ChartDomain(((0.0, 1.0),) * n, (True,) * n, tuple(f"x{i + 1}" for i in range(n)))
    metric = MetricField(domain, lambda p: np.eye(n), name=f"T{n}")
    oracles = {"R": Oracle("R", 0.0, "constant coefficients: Γ = 0")}
    return CatalogBuild("flat_torus", "manifold", metric, oracles, domain, {"n": n})


def _hyperbolic_plane() -> CatalogBuild:
    domain = _chart(_axis(-2.0, 2.0, False, "x"), _axis(0.25, 4.0, False, "y"))
    metric = MetricField(domain, lambda p: np.eye(2) / p[1] ** 2, name="H2")
    region = _chart(_axis(-1.0, 1.0, False, "x"), _axis(0.5, 2.0, False, "y"))
    oracles = {"R": Oracle("R", -2.0, "upper half-plane (dx² + dy²)/y²: sectional −1, R = −2")}
    return CatalogBuild("hyperbolic_plane", "manifold", metric, oracles, region, {})


# ---------------------------------------------------------------------
# Weighted manifolds
# ---------------------------------------------------------------------

def _gaussian_line() -> CatalogBuild:
    domain = _chart(_axis(-5.0, 5.0, False, "x"))
    metric = MetricField(domain, lambda p: np.eye(1), name="R1")
    phi = DensityField(domain, lambda p: float(np.exp(-0.5 * p[0] ** 2)), name="gaussian")
    region = _chart(_axis(-3.0, 3.0, False, "x"))
    oracles = {
        "R": Oracle("R", 0.0, "flat line"),
        "R_inf": Oracle("R_inf", lambda p: 2.0 - p[0] ** 2,
                        "φ''/φ = x² − 1, |φ'|²/φ² = x²: R_∞ = −2(x² − 1) + x²"),
        "R_q": Oracle("R_q", lambda p, q: 2.0 - 2.0 * p[0] ** 2 + (1.0 - 1.0 / q) * p[0] ** 2,
                      "R_q = −2(x² − 1) + (1 − 1/q)x²"),
    }
    return CatalogBuild("gaussian_line", "weighted", WeightedManifold(metric, phi), oracles, region, {})


def _weighted_torus(a: float) -> CatalogBuild:
    domain = ChartDomain(((0.0, 1.0), (0.0, 1.0)), (True, True), ("x1", "x2"))
    metric = MetricField(domain, lambda p: np.eye(2), name="T2")
    phi = DensityField(domain, lambda p: float(np.exp(a * np.cos(TWO_PI * p[0]))), name="exp(a cos 2πx1)")
    mean_grad = 2.0 * np.pi ** 2 * a * a
    oracles = {
        "R": Oracle("R", 0.0, "flat torus"),
        "mean_grad_log_sq": Oracle("mean_grad_log_sq", mean_grad,
                                   "|∇ ln φ|² = 4π²a² sin²(2πx1), mean 2π²a²"),
        "mean_R_q": Oracle("mean_R_q", lambda p, q: -(1.0 + 1.0 / q) * mean_grad,
                           "∇² ln φ integrates to zero on the torus"),
    }
    return CatalogBuild("weighted_torus", "weighted", WeightedManifold(metric, phi), oracles, domain, {"a": a})


# ---------------------------------------------------------------------
# Submersions
# ---------------------------------------------------------------------

def _no_connection(n, q=1):
    return lambda x, y: np.zeros((q, n))


def _sphere_base(radius=1.0):
    base = _chart(_axis(0.0, np.pi, False, "u"), _axis(0.0, TWO_PI, True, "v"))
    region = [_axis(0.2, np.pi - 0.2, False, "u"), _axis(0.0, TWO_PI, True, "v")]
    metric = lambda x: radius ** 2 * np.diag([1.0, np.sin(x[0]) ** 2])
    return base, region, metric


def _torus_base():
    base = _chart(_axis(0.0, TWO_PI, True, "x1"), _axis(0.0, TWO_PI, True, "x2"))
    return base, [_axis(0.0, TWO_PI, True, "x1"), _axis(0.0, TWO_PI, True, "x2")], lambda x: np.eye(2)


def _product(base: str, eps: float) -> CatalogBuild:
    base_chart, region, g_base = _sphere_base() if base == "sphere" else _torus_base()
    r_b = 2.0 if base == "sphere" else 0.0
    fiber = _chart(_circle())
    s = KKSubmersion(base_chart, fiber, g_base, lambda x, y: np.array([[eps * eps]]),
                     _no_connection(2), name=f"product({base}, {eps:g})", fiber_invariant=True)
    zero = "A = 0 and g_F independent of x: blocks decouple"
    oracles = {
        "R_M": Oracle("R_M", r_b, "R_M = R_B + R_F with a flat circle fiber"),
        "R_B": Oracle("R_B", r_b, "unit sphere 2, flat torus 0"),
        "R_F": Oracle("R_F", 0.0, "one-dimensional fiber"),
        "A_norm2": Oracle("A_norm2", 0.0, zero),
        "T_norm2": Oracle("T_norm2", 0.0, zero),
        "N_norm2": Oracle("N_norm2", 0.0, zero),
        "phi_B": Oracle("phi_B", TWO_PI * eps, "circle of radius eps"),
        "theorem2_2_slack": Oracle("theorem2_2_slack", 0.0, "φ^B constant, R_M − R_F = R_B"),
    }
    return _submersion_build("product", s, oracles, _chart(*region, _circle()), {"base": base, "eps": eps})


def _hopf(eps: float) -> CatalogBuild:
    base, region, _ = _sphere_base()
    fiber = _chart(_circle())
    s = KKSubmersion(
        base, fiber,
        lambda x: 0.25 * np.diag([1.0, np.sin(x[0]) ** 2]),
        lambda x, y: np.array([[eps * eps]]),
        lambda x, y: np.array([[0.0, 0.5 * (1.0 - np.cos(x[0]))]]),
        name=f"hopf({eps:g})",
        fiber_invariant=True,
    )
    berger = "Berger sphere: circle bundle over S²(1/2) with fiber length 2πε"
    oracles = {
        "R_M": Oracle("R_M", 8.0 - 2.0 * eps ** 2, berger + ", R = 8 − 2ε²"),
        "R_B": Oracle("R_B", 8.0, "S²(1/2): 2/r² = 8"),
        "R_F": Oracle("R_F", 0.0, "one-dimensional fiber"),
        "A_norm2": Oracle("A_norm2", 2.0 * eps ** 2, "curvature form ½ sin u du∧dv has unit-frame norm 2 on S²(1/2)"),
        "T_norm2": Oracle("T_norm2", 0.0, "fibers are geodesics of constant length"),
        "N_norm2": Oracle("N_norm2", 0.0, "fibers are geodesics of constant length"),
        "phi_B": Oracle("phi_B", TWO_PI * eps, "fiber length"),
        "theorem2_2_slack": Oracle("theorem2_2_slack", 2.0 * eps ** 2, "R^B_q = 8 with constant φ^B"),
    }
    return _submersion_build("hopf", s, oracles, _chart(*region, _circle()), {"eps": eps})


def _warped_circle(base: str, t: float, a: float = 0.0) -> CatalogBuild:
    fiber = _chart(_circle())
    if base == "sphere":
        base_chart, region, g_base = _sphere_base()
        r_b = 2.0
        lap_ratio = lambda p: t * t * np.sin(p[0]) ** 2 - 2.0 * t * np.cos(p[0])
        lap_note = "f = e^{t cos u} on S²(1): Δf/f = t² sin²u − 2t cos u"
    else:
        base_chart, region, g_base = _torus_base()
        r_b = 0.0
        lap_ratio = lambda p: t * t * np.sin(p[0]) ** 2 - t * np.cos(p[0])
        lap_note = "f = e^{t cos x1} on the flat torus: Δf/f = t² sin²x1 − t cos x1"
    f = lambda x: np.exp(t * np.cos(x[0]))
    # φ^M = e^{a sin x1}(2 + sin y) is transported: its horizontal log-derivative does not see y.
    weight = lambda x: np.exp(a * np.sin(x[0]))
    phi_M = None if a == 0.0 else (lambda x, y: float(weight(x) * (2.0 + np.sin(y[0]))))
    s = KKSubmersion(base_chart, fiber, g_base, lambda x, y: np.array([[f(x) ** 2]]),
                     _no_connection(2), phi_M=phi_M, name=f"warped_circle({base}, {t:g}, {a:g})",
                     fiber_invariant=True)
    grad_sq = lambda p: t * t * np.sin(p[0]) ** 2
    oracles = {
        "R_M": Oracle("R_M", lambda p: r_b - 2.0 * lap_ratio(p), "warped product: R = R_B − 2Δf/f; " + lap_note),
        "R_B": Oracle("R_B", r_b, "unit sphere 2, flat torus 0"),
        "R_F": Oracle("R_F", 0.0, "one-dimensional fiber"),
        "A_norm2": Oracle("A_norm2", 0.0, "A = 0, horizontal distribution integrable"),
        "T_norm2": Oracle("T_norm2", grad_sq, "umbilic circle fibers: |T|² = |∇f|²/f²"),
        "N_norm2": Oracle("N_norm2", grad_sq, "N = −∇ ln f"),
        "phi_B": Oracle("phi_B", lambda p: TWO_PI * f(p), "fiber length 2πf"),
    }
    if phi_M is None:
        oracles["theorem2_2_slack"] = Oracle("theorem2_2_slack", 0.0, "q = 1 removes |∇φ^B|² from R^B_q; equality")
    else:
        oracles["phi_B"] = Oracle("phi_B", lambda p: 2.0 * TWO_PI * f(p) * weight(p),
                                  "∫ (2 + sin y) f dy = 4πf, times e^{a sin x1}")
    return _submersion_build("warped_circle", s, oracles, _chart(*region, _circle()),
                             {"base": base, "t": t, "a": a})


def _heisenberg() -> CatalogBuild:
    base = _chart(_axis(0.0, 1.0, False, "x1"), _axis(0.0, 1.0, True, "x2"))
    fiber = _chart(_circle("y", 1.0))
    s = KKSubmersion(base, fiber, lambda x: np.eye(2), lambda x, y: np.eye(1),
                     lambda x, y: np.array([[0.0, x[0]]]), name="heisenberg", fiber_invariant=True)
    region = _chart(_axis(0.1, 0.9, False, "x1"), _axis(0.0, 1.0, True, "x2"), _circle("y", 1.0))
    oracles = {
        "R_M": Oracle("R_M", -0.5, "flat base, unit circle, curvature dx1∧dx2: R = −¼|F|² = −½"),
        "R_B": Oracle("R_B", 0.0, "flat base"),
        "R_F": Oracle("R_F", 0.0, "one-dimensional fiber"),
        "A_norm2": Oracle("A_norm2", 0.5, "¼ Σ F_αβ² = ½"),
        "T_norm2": Oracle("T_norm2", 0.0, "fibers are unit-length geodesics"),
        "N_norm2": Oracle("N_norm2", 0.0, "fibers are unit-length geodesics"),
        "phi_B": Oracle("phi_B", 1.0, "fiber period 1"),
        "theorem2_2_slack": Oracle("theorem2_2_slack", 0.5, "R^B_q = 0, fiber average of R_M is −½"),
    }
    return _submersion_build("heisenberg", s, oracles, region, {})


def _violating() -> CatalogBuild:
    base = _chart(_axis(0.0, 1.5, False, "u"))
    fiber = _chart(_circle())
    s = KKSubmersion(base, fiber, lambda x: np.eye(1),
                     lambda x, y: np.array([[(1.0 + 0.5 * np.sin(x[0]) * np.sin(y[0])) ** 2]]),
                     _no_connection(1), name="violating")
    region = _chart(_axis(0.1, 1.2, False, "u"), _circle())
    oracles = {
        "min_fiber_variance": Oracle("min_fiber_variance", 0.01,
                                     "∂_u ln(1 + ½ sin u sin y) varies with y on the sampled interval"),
        "phi_B": Oracle("phi_B", TWO_PI, "∫ (1 + ½ sin u sin y) dy = 2π"),
        "R_F": Oracle("R_F", 0.0, "one-dimensional fiber"),
        "A_norm2": Oracle("A_norm2", 0.0, "A = 0"),
    }
    return _submersion_build("violating", s, oracles, region, {},
                             expected_failures={IdentityId.MEASURE_HYPOTHESIS.value})


# ---------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------

_EPS = ParamSpec("eps", 1.0, 0.01, 10.0, doc="fiber scale")
_BASE = ParamSpec("base", "torus", choices=("torus", "sphere"))

_ENTRIES: Dict[str, CatalogEntry] = {}


def _register(entry: CatalogEntry) -> None:
    _ENTRIES[entry.id] = entry


_register(CatalogEntry("sphere", "manifold", (ParamSpec("r", 1.0, 1e-3, 1e3),), _sphere, "round S²(r)"))
_register(CatalogEntry("flat_torus", "manifold", (ParamSpec("n", 2, 1, 6, integer=True),), _flat_torus,
                       "unit flat torus [0,1]^n"))
_register(CatalogEntry("hyperbolic_plane", "manifold", (), _hyperbolic_plane, "upper half-plane"))
_register(CatalogEntry("gaussian_line", "weighted", (), _gaussian_line, "line with φ = e^{−x²/2}"))
_register(CatalogEntry("weighted_torus", "weighted", (ParamSpec("a", 1.0, 0.0, 5.0),), _weighted_torus,
                       "flat T² with φ = e^{a cos 2πx1}"))
_register(CatalogEntry("product", "submersion", (_BASE, _EPS), _product, "base × circle of radius eps"))
_register(CatalogEntry("hopf", "submersion", (_EPS,), _hopf, "Berger sphere over S²(1/2)"))
_register(CatalogEntry("warped_circle", "submersion",
                       (ParamSpec("base", "sphere", choices=("sphere", "torus")), ParamSpec("t", 1.0, 0.0, 3.0),
                        ParamSpec("a", 0.0, 0.0, 3.0)),
                       _warped_circle, "g_B + e^{2t cos x1} dy², φ^M = e^{a sin x1}(2 + sin y)"))
_register(CatalogEntry("heisenberg", "submersion", (), _heisenberg, "circle bundle over T² with A = x1 dx2"))
_register(CatalogEntry("violating", "submersion", (), _violating, "fiber density not transported"))
_register(CatalogEntry("berger_family", "family", (_EPS,), _hopf, "hopf(eps), eps ↓ 0", "eps"))
_register(CatalogEntry("product_family", "family", (_BASE, _EPS), _product, "product(torus, eps), eps ↓ 0", "eps"))
_register(CatalogEntry("warped_family", "family", _ENTRIES["warped_circle"].params, _warped_circle,
                       "warped_circle(sphere, t)", "t"))


def entries() -> Tuple[CatalogEntry, ...]:
    return tuple(_ENTRIES.values())


def get_entry(entry_id: str) -> CatalogEntry:
    try:
        return _ENTRIES[entry_id]
    except KeyError:
        raise CatalogError(f"unknown example {entry_id!r}; known: {', '.join(sorted(_ENTRIES))}") from None


def build(entry_id: str, **params) -> CatalogBuild:
    entry = get_entry(entry_id)
    resolved = entry.resolve(params)
    result = entry.builder(**resolved)
    logger.debug("[Catalog] built %s with %s", entry_id, resolved)
    return result


def families() -> Tuple[str, ...]:
    return tuple(e.id for e in _ENTRIES.values() if e.kind == "family")
