import numpy as np

from hypothesis import given, settings
from hypothesis.strategies import floats
from pytest import approx, mark, raises

from submersion_curvature import catalog
from submersion_curvature.diffgeo_core import (
    ChartDomain,
    DensityField,
    DifferentiationConfig,
    MetricField,
    ScalarField,
    christoffel,
    curvature_at,
    gradient,
    hessian,
    laplacian,
    orthonormal_frame,
    scalar_curvature,
)
from submersion_curvature.errors import (
    AsymmetricMetricError,
    BoundaryError,
    DegenerateMetricError,
    DensityError,
    ParameterError,
)


def euclidean_box(dim, half=1.0):
    return ChartDomain(((-half, half),) * dim, (False,) * dim)


@mark.parametrize("bounds periodic".split(),
                  ((((0.0, 0.0),), (False,)),
                   (((1.0, 0.0),), (True,)),
                   (((0.0, 1.0),), (True, False)),
                   ((), ())))
def test_chart_domain_rejects_malformed_boxes(bounds, periodic):
    with raises(ParameterError):
        ChartDomain(bounds, periodic)


def test_wrap_only_touches_periodic_axes():
    domain = ChartDomain(((0.0, 1.0), (0.0, 2.0)), (False, True))
    assert domain.wrap([1.5, 5.0]) == approx([1.5, 1.0])
    assert domain.wrap([0.5, -0.5]) == approx([0.5, 1.5])


def test_require_interior_rejects_points_near_a_wall():
    domain = ChartDomain(((0.0, 1.0), (0.0, 1.0)), (False, True))
    domain.require_interior([0.5, 0.999], 0.01)
    with raises(BoundaryError) as info:
        domain.require_interior([0.995, 0.5], 0.01)
    assert info.value.axis == 0


def test_sample_stays_inside_the_box_and_is_seeded():
    domain = ChartDomain(((0.2, 0.4), (0.0, 6.0)), (False, True))
    a = domain.sample(50, np.random.default_rng(3))
    b = domain.sample(50, np.random.default_rng(3))
    assert np.array_equal(a, b)
    assert np.all(a >= domain.lower) and np.all(a <= domain.upper)


def test_metric_errors_name_the_point():
    domain = euclidean_box(2)
    skew = MetricField(domain, lambda p: np.array([[1.0, 0.1], [0.0, 1.0]]))
    with raises(AsymmetricMetricError):
        skew([0.0, 0.0])
    flat = MetricField(domain, lambda p: np.array([[1.0, 0.0], [0.0, p[0]]]))
    with raises(DegenerateMetricError) as info:
        flat([-0.5, 0.25])
    assert info.value.point == (-0.5, 0.25)


def test_density_must_stay_positive():
    phi = DensityField(euclidean_box(1), lambda p: p[0])
    with raises(DensityError) as info:
        phi([-0.5])
    assert str(info.value) == "density must be positive, got -0.5 at (-0.5)"


@mark.parametrize("step order nested".split(),
                  ((0.0, 4, 1e-3), (1e-4, 3, 1e-3), (1e-4, 4, 0.5)))
def test_differentiation_config_validates(step, order, nested):
    with raises(ParameterError):
        DifferentiationConfig(step, order, nested)


def test_christoffel_of_euclidean_polar_coordinates():
    domain = ChartDomain(((0.5, 2.0), (0.0, 2 * np.pi)), (False, True))
    polar = MetricField(domain, lambda p: np.diag([1.0, p[0] ** 2]))
    gamma = christoffel(polar, [1.2, 0.4])
    assert gamma[0, 1, 1] == approx(-1.2, abs=1e-9)
    assert gamma[1, 0, 1] == approx(1 / 1.2, abs=1e-9)
    assert gamma[1, 1, 0] == approx(1 / 1.2, abs=1e-9)
    assert scalar_curvature(polar, [1.2, 0.4]) == approx(0.0, abs=1e-7)


@mark.parametrize("u gamma_u_vv gamma_v_uv".split(),
                  ((np.pi / 2, 0.0, 0.0),
                   (1.0, -np.sin(1.0) * np.cos(1.0), 1.0 / np.tan(1.0))))
def test_christoffel_of_the_unit_sphere(u, gamma_u_vv, gamma_v_uv):
    gamma = christoffel(catalog.build("sphere", r=1.0).metric, [u, 0.3])
    assert gamma[0, 1, 1] == approx(gamma_u_vv, abs=1e-8)
    assert gamma[1, 0, 1] == approx(gamma_v_uv, abs=1e-8)
    assert gamma[1, 1, 0] == approx(gamma_v_uv, abs=1e-8)
    assert gamma[0, 0, 0] == approx(0.0, abs=1e-10)
    assert gamma[1, 1, 1] == approx(0.0, abs=1e-10)


def test_christoffel_of_an_exponential_warp():
    domain = euclidean_box(2)
    metric = MetricField(domain, lambda p: np.diag([1.0, np.exp(2.0 * p[0])]))
    gamma = christoffel(metric, [0.0, 0.4])
    assert gamma[1, 0, 1] == approx(1.0, abs=1e-8)
    assert gamma[0, 1, 1] == approx(-1.0, abs=1e-8)
    assert gamma[0, 0, 0] == approx(0.0, abs=1e-10)


@mark.parametrize("u v".split(), ((1.2, 0.4), (0.7, 2.5), (2.0, 5.0)))
def test_scalar_curvature_does_not_depend_on_the_chart(u, v):
    spherical = catalog.build("sphere", r=1.0).metric
    domain = euclidean_box(2, half=4.0)
    stereographic = MetricField(domain, lambda p: 4.0 / (1.0 + p @ p) ** 2 * np.eye(2))
    r = 1.0 / np.tan(u / 2.0)
    x = [r * np.cos(v), r * np.sin(v)]
    r_spherical = scalar_curvature(spherical, [u, v])
    r_stereographic = scalar_curvature(stereographic, x)
    assert r_stereographic == approx(2.0, rel=1e-5)
    assert r_stereographic == approx(r_spherical, rel=1e-5)


@mark.parametrize("r", (0.5, 1.0, 2.0))
def test_round_sphere_scalar_curvature(r):
    build = catalog.build("sphere", r=r)
    for p in build.default_samples(25, seed=0):
        assert curvature_at(build.metric, p).scalar == approx(2.0 / r ** 2, rel=1e-5)


def test_hyperbolic_plane_scalar_curvature():
    build = catalog.build("hyperbolic_plane")
    for p in build.default_samples(25, seed=1):
        assert curvature_at(build.metric, p).scalar == approx(-2.0, rel=1e-5)


def test_flat_torus_is_flat():
    build = catalog.build("flat_torus", n=3)
    for p in build.default_samples(5, seed=2):
        assert abs(curvature_at(build.metric, p).scalar) <= 1e-7


def test_curvature_tensor_symmetries_hold_on_a_sphere():
    build = catalog.build("sphere", r=1.5)
    residuals = curvature_at(build.metric, [1.1, 0.7]).symmetry_residuals()
    assert residuals["torsion"] == 0.0
    for name in ("first_pair", "second_pair", "pair_exchange", "bianchi"):
        assert residuals[name] < 1e-6, name


@settings(deadline=None, max_examples=15)
@given(floats(min_value=0.5, max_value=3.0), floats(min_value=0.3, max_value=2.8))
def test_sphere_curvature_over_radius_and_latitude(r, u):
    metric = catalog.build("sphere", r=r).metric
    assert scalar_curvature(metric, [u, 1.0]) == approx(2.0 / r ** 2, rel=1e-5)


def test_laplacian_of_half_square_norm_is_dimension():
    domain = euclidean_box(3)
    metric = MetricField(domain, lambda p: np.eye(3))
    f = ScalarField(domain, lambda p: 0.5 * float(p @ p))
    assert laplacian(metric, f, [0.1, -0.2, 0.3]) == approx(3.0, abs=1e-6)


def test_hessian_of_cos_u_on_the_unit_sphere():
    build = catalog.build("sphere", r=1.0)
    f = ScalarField(build.metric.domain, lambda p: float(np.cos(p[0])))
    u = 1.1
    hess = hessian(build.metric, f, [u, 0.8])
    # cos u is a first spherical harmonic: Hess f = −f g
    assert hess == approx(-np.cos(u) * np.diag([1.0, np.sin(u) ** 2]), abs=1e-6)
    assert laplacian(build.metric, f, [u, 0.8]) == approx(-2.0 * np.cos(u), abs=1e-6)


def test_hessian_of_a_constant_vanishes():
    build = catalog.build("hyperbolic_plane")
    f = ScalarField(build.metric.domain, lambda p: 3.0)
    assert hessian(build.metric, f, [0.2, 1.1]) == approx(np.zeros((2, 2)), abs=1e-12)


def test_hessian_of_a_quadratic_in_euclidean_coordinates():
    domain = euclidean_box(2)
    metric = MetricField(domain, lambda p: np.eye(2))
    f = ScalarField(domain, lambda p: float(p[0] ** 2 + 3.0 * p[0] * p[1]))
    hess = hessian(metric, f, [0.3, -0.4])
    assert hess == approx(np.array([[2.0, 3.0], [3.0, 0.0]]), abs=1e-6)
    assert np.array_equal(hess, hess.T)


def test_gradient_norm_uses_inverse_metric():
    build = catalog.build("sphere", r=2.0)
    f = ScalarField(build.metric.domain, lambda p: float(np.cos(p[0])))
    vector, norm2 = gradient(build.metric, f, [1.0, 0.5])
    # |∇ cos u|² = sin²u / r²
    assert norm2 == approx(np.sin(1.0) ** 2 / 4.0, rel=1e-8)
    assert vector[1] == approx(0.0, abs=1e-10)


def test_orthonormal_frame_diagonalises_the_metric():
    g = np.array([[2.0, 0.3], [0.3, 0.5]])
    frame = orthonormal_frame(g)
    assert frame.T @ g @ frame == approx(np.eye(2), abs=1e-12)


@mark.parametrize("order nested ratio_lo ratio_hi".split(),
                  ((2, 0.02, 3.0, 5.0),
                   (4, 0.03, 12.0, 20.0)))
def test_curvature_error_shrinks_with_stencil_order(order, nested, ratio_lo, ratio_hi):
    metric = catalog.build("sphere", r=1.0).metric
    coarse = DifferentiationConfig(1e-4, order, nested)
    fine = DifferentiationConfig(1e-4, order, nested / 2.0)
    err_coarse = abs(scalar_curvature(metric, [1.0, 0.5], coarse) - 2.0)
    err_fine = abs(scalar_curvature(metric, [1.0, 0.5], fine) - 2.0)
    assert ratio_lo <= err_coarse / err_fine <= ratio_hi
