"""
Smooth metric-measure spaces (M, φ dvol) and their modified scalar curvatures.

    R_∞ = R − 2 ∇²φ/φ + |∇φ|²/φ²
    R_q = R − 2 ∇²φ/φ + (1 − 1/q) |∇φ|²/φ²        q ∈ (0, ∞)
        = R − 2 ∇² ln φ − (1 + 1/q) |∇ ln φ|²

q = ∞ is spelled q=None throughout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import quadrature
from .diffgeo_core import (
    DEFAULT_CONFIG,
    DensityField,
    DifferentiationConfig,
    MetricField,
    curvature_at,
    gradient,
    laplacian,
)
from .errors import ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WeightedManifold:
    metric: MetricField
    phi: DensityField

    def __post_init__(self):
        if self.metric.domain.dim != self.phi.domain.dim:
            raise ParameterError("metric and density live on charts of different dimension")

    @property
    def domain(self):
        return self.metric.domain


@dataclass(frozen=True)
class ModifiedScalarReport:
    point: np.ndarray
    scalar: float
    r_inf: float
    r_q: Optional[float] = None
    q: Optional[float] = None


@dataclass(frozen=True)
class _WeightTerms:
    scalar: float
    lap_ratio: float      # ∇²φ / φ
    grad_ratio_sq: float  # |∇φ|² / φ²


def _require_q(q: float) -> float:
    if q is None or not q > 0.0:
        raise ParameterError(f"q must be positive, got {q!r}")
    return float(q)


def _weight_terms(w: WeightedManifold, x, cfg: DifferentiationConfig) -> _WeightTerms:
    scalar = curvature_at(w.metric, x, cfg).scalar
    phi = w.phi(x)
    _, grad_sq = gradient(w.metric, w.phi, x, cfg)
    lap = laplacian(w.metric, w.phi, x, cfg)
    return _WeightTerms(scalar, lap / phi, grad_sq / phi ** 2)


def modified_scalar_inf(w: WeightedManifold, x, cfg: DifferentiationConfig = DEFAULT_CONFIG) -> float:
    t = _weight_terms(w, x, cfg)
    return t.scalar - 2.0 * t.lap_ratio + t.grad_ratio_sq


def modified_scalar_q(w: WeightedManifold, q: float, x,
                      cfg: DifferentiationConfig = DEFAULT_CONFIG) -> float:
    q = _require_q(q)
    t = _weight_terms(w, x, cfg)
    return t.scalar - 2.0 * t.lap_ratio + (1.0 - 1.0 / q) * t.grad_ratio_sq


def log_form_scalar_q(w: WeightedManifold, q: float, x,
                      cfg: DifferentiationConfig = DEFAULT_CONFIG) -> float:
    q = _require_q(q)
    log_phi = w.phi.log()
    scalar = curvature_at(w.metric, x, cfg).scalar
    _, grad_sq = gradient(w.metric, log_phi, x, cfg)
    return scalar - 2.0 * laplacian(w.metric, log_phi, x, cfg) - (1.0 + 1.0 / q) * grad_sq


def modified_scalar_report(w: WeightedManifold, x, cfg: DifferentiationConfig = DEFAULT_CONFIG,
                           q: Optional[float] = None) -> ModifiedScalarReport:
    t = _weight_terms(w, x, cfg)
    r_inf = t.scalar - 2.0 * t.lap_ratio + t.grad_ratio_sq
    r_q = None
    if q is not None:
        q = _require_q(q)
        r_q = t.scalar - 2.0 * t.lap_ratio + (1.0 - 1.0 / q) * t.grad_ratio_sq
    return ModifiedScalarReport(np.asarray(x, dtype=float), t.scalar, r_inf, r_q, q)


# ---------------------------------------------------------------------
# Global integrals on torus charts
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class Integral:
    value: float
    volume: float


@dataclass(frozen=True)
class MeanScalarChain:
    mean_Rq: float
    mean_R: float
    mean_grad_log_sq: float
    perelman_total: float
    q: float

    @property
    def holds(self) -> bool:
        return self.mean_Rq <= self.mean_R + 1e-8 * max(1.0, abs(self.mean_R))


def integrate_scalar(w: WeightedManifold, field: Callable[[np.ndarray], float],
                     grid: quadrature.GridSpec, workers: int = 1) -> Integral:
    """∫ field dvol and vol over a fully periodic chart."""
    metric = w.metric
    nodes, weight = quadrature.periodic_nodes(metric.domain, grid)
    density = quadrature.evaluate(metric.sqrt_det, nodes, workers)
    values = quadrature.evaluate(field, nodes, workers)
    return Integral(float(np.sum(values * density) * weight), float(np.sum(density) * weight))


def mean_scalar_chain(w: WeightedManifold, q: float, grid: quadrature.GridSpec,
                      cfg: DifferentiationConfig = DEFAULT_CONFIG, workers: int = 1) -> MeanScalarChain:
    q = _require_q(q)
    nodes, weight = quadrature.periodic_nodes(w.domain, grid)

    def row(p):
        t = _weight_terms(w, p, cfg)
        phi = w.phi(p)
        r_inf = t.scalar - 2.0 * t.lap_ratio + t.grad_ratio_sq
        r_q = t.scalar - 2.0 * t.lap_ratio + (1.0 - 1.0 / q) * t.grad_ratio_sq
        # |∇ ln φ|² = |∇φ|²/φ²
        return (w.metric.sqrt_det(p), t.scalar, r_q, t.grad_ratio_sq, r_inf * phi)

    table = quadrature.evaluate(row, nodes, workers)
    density = table[:, 0]
    volume = float(np.sum(density) * weight)

    def mean(column):
        return float(np.sum(table[:, column] * density) * weight) / volume

    chain = MeanScalarChain(
        mean_Rq=mean(2),
        mean_R=mean(1),
        mean_grad_log_sq=mean(3),
        perelman_total=mean(4) * volume,
        q=q,
    )
    logger.debug("[Weighted] mean R = %.12g, mean R_q = %.12g (q = %g)", chain.mean_R, chain.mean_Rq, q)
    return chain
