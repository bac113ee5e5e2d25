import numpy as np

from pytest import approx, mark, raises
from scipy.special import iv

from submersion_curvature import catalog
from submersion_curvature.diffgeo_core import ChartDomain, DensityField, MetricField, constant_density, laplacian
from submersion_curvature.errors import ParameterError
from submersion_curvature.weighted_geometry import (
    WeightedManifold,
    integrate_scalar,
    log_form_scalar_q,
    mean_scalar_chain,
    modified_scalar_inf,
    modified_scalar_q,
    modified_scalar_report,
)


@mark.parametrize("x", (-2.0, -0.5, 0.0, 1.0, 2.5))
def test_gaussian_line_matches_closed_forms(x):
    build = catalog.build("gaussian_line")
    w = build.obj
    assert modified_scalar_inf(w, [x]) == approx(build.oracle("R_inf").at([x]), abs=1e-6)
    for q in (0.5, 1.0, 3.0):
        assert modified_scalar_q(w, q, [x]) == approx(build.oracle("R_q").at([x], q=q), abs=1e-6)


def test_q_one_at_origin_is_two():
    w = catalog.build("gaussian_line").obj
    report = modified_scalar_report(w, [0.0], q=1.0)
    assert report.r_q == approx(2.0, abs=1e-6)
    assert report.r_inf == approx(2.0, abs=1e-6)
    assert report.scalar == approx(0.0, abs=1e-9)


def test_large_q_approaches_r_infinity():
    w = catalog.build("gaussian_line").obj
    assert modified_scalar_q(w, 1e12, [1.3]) == approx(modified_scalar_inf(w, [1.3]), abs=1e-9)


def test_r_q_increases_towards_r_infinity():
    w = catalog.build("gaussian_line").obj
    x = 1.5
    r_inf = modified_scalar_inf(w, [x])
    values = [modified_scalar_q(w, q, [x]) for q in (1.0, 2.0, 4.0, 8.0, 1e6)]
    assert all(a < b for a, b in zip(values, values[1:]))
    assert all(v < r_inf for v in values)
    # R_∞ − R_q = |∇ ln φ|² / q = x² / q
    assert r_inf - values[2] == approx(x * x / 4.0, abs=1e-6)
    assert abs(values[-1] - r_inf) <= 1e-5


def test_constant_density_leaves_scalar_curvature():
    metric = catalog.build("sphere", r=1.0).metric
    w = WeightedManifold(metric, constant_density(metric.domain, 3.0))
    assert modified_scalar_inf(w, [1.0, 2.0]) == approx(2.0, rel=1e-6)
    assert modified_scalar_q(w, 2.0, [1.0, 2.0]) == approx(2.0, rel=1e-6)


@mark.parametrize("q", (0.0, -1.0, None))
def test_q_must_be_positive(q):
    w = catalog.build("gaussian_line").obj
    with raises(ParameterError):
        modified_scalar_q(w, q, [0.0])


def test_dimension_mismatch_is_rejected():
    metric = catalog.build("sphere").metric
    with raises(ParameterError):
        WeightedManifold(metric, constant_density(ChartDomain(((0.0, 1.0),), (True,))))


def test_log_form_agrees_with_ratio_form():
    build = catalog.build("weighted_torus", a=1.0)
    rng = np.random.default_rng(7)
    for p in build.domain.sample(50, rng):
        q = float(rng.uniform(0.5, 4.0))
        assert log_form_scalar_q(build.obj, q, p) == approx(modified_scalar_q(build.obj, q, p), abs=1e-6)


def test_log_form_on_a_weighted_sphere():
    metric = catalog.build("sphere", r=1.0).metric
    phi = DensityField(metric.domain, lambda p: float(np.exp(np.sin(p[0]) * np.cos(p[1]))))
    w = WeightedManifold(metric, phi)
    for p in ([0.7, 0.3], [1.5, 2.0], [2.4, 5.5]):
        assert log_form_scalar_q(w, 2.0, p) == approx(modified_scalar_q(w, 2.0, p), abs=1e-6)


def test_mean_scalar_chain_on_weighted_torus():
    build = catalog.build("weighted_torus", a=1.0)
    q = 2.0
    chain = mean_scalar_chain(build.obj, q, grid=(32, 4))
    assert chain.mean_R == approx(0.0, abs=1e-7)
    assert chain.mean_grad_log_sq == approx(build.oracle("mean_grad_log_sq").at(), rel=1e-5)
    assert chain.mean_Rq == approx(build.oracle("mean_R_q").at(None, q=q), rel=1e-5)
    assert chain.mean_Rq - chain.mean_R == approx(-(1 + 1 / q) * chain.mean_grad_log_sq, rel=1e-5)
    assert chain.holds


def test_perelman_total_matches_bessel_integral():
    build = catalog.build("weighted_torus", a=1.0)
    chain = mean_scalar_chain(build.obj, 1.0, grid=(32, 4))
    # ∫ |∇φ|²/φ = 4π² I_1(1); the Laplacian term integrates to zero
    assert chain.perelman_total == approx(4 * np.pi ** 2 * iv(1, 1.0), rel=1e-5)


@mark.parametrize("a", (0.5, 1.0, 2.0))
def test_laplacian_of_density_integrates_to_zero_on_torus(a):
    w = catalog.build("weighted_torus", a=a).obj
    total = integrate_scalar(w, lambda p: laplacian(w.metric, w.phi, p), grid=(32, 4))
    assert total.volume == approx(1.0)
    assert total.value == approx(0.0, abs=1e-5)


def test_integrate_scalar_reports_volume():
    domain = ChartDomain(((0.0, 2 * np.pi), (0.0, 2 * np.pi)), (True, True))
    metric = MetricField(domain, lambda p: np.diag([1.0, 4.0]))
    w = WeightedManifold(metric, constant_density(domain))
    total = integrate_scalar(w, lambda p: np.cos(p[0]) ** 2, grid=8)
    assert total.volume == approx(8 * np.pi ** 2)
    assert total.value == approx(4 * np.pi ** 2)
