import numpy as np

from pytest import approx, raises

from submersion_curvature import quadrature
from submersion_curvature.diffgeo_core import ChartDomain
from submersion_curvature.errors import ParameterError, UnsupportedDomainError

TORUS = ChartDomain(((0.0, 2 * np.pi), (0.0, 1.0)), (True, True))


def test_nodes_cover_the_box_once():
    nodes, weight = quadrature.periodic_nodes(TORUS, (8, 4))
    assert nodes.shape == (32, 2)
    assert weight == approx(2 * np.pi / 8 * 1.0 / 4)
    assert np.all(nodes[:, 0] < 2 * np.pi)


def test_trigonometric_polynomials_integrate_exactly():
    value = quadrature.trapezoid(lambda p: np.cos(p[0]) ** 2 * (1 + np.sin(2 * np.pi * p[1])), TORUS, 16)
    assert value == approx(np.pi, rel=1e-13)


def test_smooth_periodic_integrand_converges_fast():
    circle = ChartDomain(((0.0, 2 * np.pi),), (True,))
    # ∫ e^{cos y} dy = 2π I_0(1)
    exact = 2 * np.pi * 1.2660658777520082
    assert quadrature.trapezoid(lambda p: np.exp(np.cos(p[0])), circle, 16) == approx(exact, rel=1e-14)


def test_worker_count_does_not_change_the_sum():
    func = lambda p: np.exp(np.sin(p[0])) * p[1]
    assert quadrature.trapezoid(func, TORUS, 12, workers=1) == quadrature.trapezoid(func, TORUS, 12, workers=4)


def test_non_periodic_axes_are_refused():
    with raises(UnsupportedDomainError):
        quadrature.periodic_nodes(ChartDomain(((0.0, 1.0),), (False,)), 8)


def test_grid_must_match_dimension():
    with raises(ParameterError):
        quadrature.node_counts(TORUS, (4, 4, 4))
    with raises(ParameterError):
        quadrature.node_counts(TORUS, 0)
