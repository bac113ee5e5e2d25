"""Tensor-product periodic trapezoidal rule.

For smooth periodic integrands the equally weighted rule on
x_k = lo + k·L/N converges spectrally. Sums go through numpy's pairwise
summation over an array whose order is fixed by the grid, so results do not
depend on how node evaluations were scheduled.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, Tuple, Union

import numpy as np

from .diffgeo_core import ChartDomain
from .errors import ParameterError, UnsupportedDomainError

GridSpec = Union[int, Sequence[int]]


def node_counts(domain: ChartDomain, grid: GridSpec) -> Tuple[int, ...]:
    if isinstance(grid, (int, np.integer)):
        counts = (int(grid),) * domain.dim
    else:
        counts = tuple(int(n) for n in grid)
    if len(counts) != domain.dim:
        raise ParameterError(f"grid has {len(counts)} entries for a {domain.dim}-dimensional chart")
    if any(n < 1 for n in counts):
        raise ParameterError(f"grid node counts must be positive, got {counts}")
    return counts


def periodic_nodes(domain: ChartDomain, grid: GridSpec) -> Tuple[np.ndarray, float]:
    """All nodes (shape (prod N, dim), C order) and the common weight."""
    if not domain.fully_periodic:
        raise UnsupportedDomainError(
            "periodic quadrature needs every axis periodic; got flags "
            f"{domain.periodic}"
        )
    counts = node_counts(domain, grid)
    axes = [lo + (hi - lo) * np.arange(n) / n for (lo, hi), n in zip(domain.bounds, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    weight = float(np.prod(domain.lengths / np.array(counts)))
    return nodes, weight


def evaluate(func: Callable[[np.ndarray], float], nodes: np.ndarray, workers: int = 1) -> np.ndarray:
    """func at every node, in node order regardless of worker count; tuple results become rows."""
    if workers <= 1:
        return np.array([func(p) for p in nodes], dtype=float)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(func, nodes)), dtype=float)


def trapezoid(func: Callable[[np.ndarray], float], domain: ChartDomain,
              grid: GridSpec, workers: int = 1) -> float:
    nodes, weight = periodic_nodes(domain, grid)
    return float(np.sum(evaluate(func, nodes, workers)) * weight)
