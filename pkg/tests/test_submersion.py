from dataclasses import replace

import numpy as np

from hypothesis import given, settings
from hypothesis.strategies import floats
from pytest import approx, fixture, mark, raises

from submersion_curvature import catalog
from submersion_curvature.diffgeo_core import ChartDomain, DifferentiationConfig
from submersion_curvature.errors import (
    ConsistencyError,
    HypothesisUnmetError,
    PreconditionError,
    StepSizeError,
    UnsupportedDomainError,
)
from submersion_curvature.submersion import (
    IdentityId,
    IdentityReport,
    KKSubmersion,
    adapted_frame,
    assemble_total_metric,
    check_measure_preserving,
    fiber_integrate,
    oneill_invariants,
    pushforward_density,
    verify_base_derivative_identities,
    verify_laplacian_split,
    verify_lie_derivative_fiber_volume,
    verify_main_equality,
    verify_oneill_identity,
    verify_theorem2_2,
)

GRID = 16


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@fixture(scope="module")
def hopf_half():
    return catalog.build("hopf", eps=0.5)


@fixture(scope="module")
def warped():
    return catalog.build("warped_circle", base="sphere", t=1.0)


@fixture(scope="module")
def weighted_warped():
    return catalog.build("warped_circle", base="sphere", t=1.0, a=0.3)


@fixture(scope="module")
def heisenberg():
    return catalog.build("heisenberg")


@fixture(scope="module")
def violating():
    return catalog.build("violating")


# ---------------------------------------------------------------------
# Assembly and frames
# ---------------------------------------------------------------------

def test_total_metric_volume_factorises(hopf_half):
    metric = assemble_total_metric(hopf_half.obj)
    p = [1.1, 0.4, 2.0]
    assert metric.sqrt_det(p) == approx(np.sin(1.1) * 0.5 / 4.0, rel=1e-12)
    g = metric(p)
    assert g[2, 2] == approx(0.25)
    assert g[1, 2] == approx(0.25 * 0.5 * (1 - np.cos(1.1)))


@mark.parametrize("entry", ("hopf", "heisenberg", "warped_circle", "violating"))
def test_adapted_frame_is_orthonormal(entry):
    build = catalog.build(entry)
    metric = assemble_total_metric(build.obj)
    for p in build.default_samples(3, seed=4):
        frame = adapted_frame(build.obj, p)
        assert frame.gram(metric(p)) == approx(np.eye(len(p)), abs=1e-12)


def test_rotated_frame_stays_orthonormal(heisenberg):
    metric = assemble_total_metric(heisenberg.obj)
    p = [0.4, 0.2, 0.7]
    frame = adapted_frame(heisenberg.obj, p, horizontal_rotation=rotation(0.8))
    assert frame.gram(metric(p)) == approx(np.eye(3), abs=1e-12)


def test_fiber_must_be_periodic():
    base = ChartDomain(((0.0, 1.0),), (True,))
    open_fiber = ChartDomain(((0.0, 1.0),), (False,))
    with raises(UnsupportedDomainError):
        KKSubmersion(base, open_fiber, lambda x: np.eye(1), lambda x, y: np.eye(1), lambda x, y: np.zeros((1, 1)))


# ---------------------------------------------------------------------
# O'Neill invariants
# ---------------------------------------------------------------------

@mark.parametrize("eps", (1.0, 0.5, 0.25, 0.1))
def test_hopf_invariants(eps):
    build = catalog.build("hopf", eps=eps)
    for p in build.default_samples(2, seed=0):
        rep = oneill_invariants(build.obj, p)
        assert rep.R_M == approx(8 - 2 * eps ** 2, rel=1e-4)
        assert rep.R_B == approx(8.0, rel=1e-5)
        assert rep.A_norm2 == approx(2 * eps ** 2, abs=1e-6)
        assert rep.T_norm2 <= 1e-6
        assert rep.N_norm2 <= 1e-6
        assert abs(rep.residual_3_1) <= 1e-4 * max(1.0, abs(rep.R_M))


@mark.parametrize("entry params".split(),
                  (("product", {}),
                   ("product", {"base": "sphere", "eps": 0.3}),
                   ("hopf", {"eps": 1.0}),
                   ("warped_circle", {}),
                   ("warped_circle", {"base": "torus", "t": 0.7}),
                   ("heisenberg", {})))
def test_oneill_identity_holds_on_catalog(entry, params):
    build = catalog.build(entry, **params)
    report = verify_oneill_identity(build.obj, build.default_samples(4, seed=1))
    assert report.identity_id is IdentityId.ONEILL
    assert report.max_abs_residual <= 1e-4
    assert report.passed


def test_warped_circle_second_fundamental_form(warped):
    for p in warped.default_samples(3, seed=5):
        rep = oneill_invariants(warped.obj, p)
        expected = warped.oracle("T_norm2").at(p)
        assert rep.T_norm2 == approx(expected, abs=1e-7)
        assert rep.N_norm2 == approx(expected, abs=1e-7)
        assert rep.R_M == approx(warped.oracle("R_M").at(p), abs=1e-5)


def test_heisenberg_invariants(heisenberg):
    rep = oneill_invariants(heisenberg.obj, [0.3, 0.6, 0.2])
    assert rep.R_M == approx(-0.5, abs=1e-6)
    assert rep.A_norm2 == approx(0.5, abs=1e-8)
    assert rep.R_F == 0.0


@settings(deadline=None, max_examples=8)
@given(floats(min_value=0.0, max_value=2 * np.pi))
def test_invariants_do_not_depend_on_the_horizontal_frame(theta):
    heis = catalog.build("heisenberg").obj
    p = [0.45, 0.3, 0.8]
    plain = oneill_invariants(heis, p)
    turned = oneill_invariants(heis, p, horizontal_rotation=rotation(theta))
    assert turned.A_norm2 == approx(plain.A_norm2, abs=1e-8)
    assert turned.residual_3_1 == approx(plain.residual_3_1, abs=1e-8)

    warp = catalog.build("warped_circle").obj
    q = [1.2, 0.4, 3.0]
    assert (oneill_invariants(warp, q, horizontal_rotation=rotation(theta)).check_delta_N
            == approx(oneill_invariants(warp, q).check_delta_N, abs=1e-7))


def test_cauchy_schwarz_gap_is_never_negative(violating, warped):
    for build in (violating, warped):
        for p in build.default_samples(5, seed=2):
            assert oneill_invariants(build.obj, p).cauchy_schwarz_gap >= -1e-8


# ---------------------------------------------------------------------
# Laplacian and gradient splittings
# ---------------------------------------------------------------------

@mark.parametrize("entry", ("hopf", "heisenberg", "warped_circle", "violating"))
def test_laplacian_split_on_three_functions(entry):
    build = catalog.build(entry)
    samples = build.default_samples(3, seed=6)
    reports = [verify_laplacian_split(build.obj, f, samples) for f in build.test_functions]
    combined = IdentityReport.combine(reports)
    assert len(combined.residuals) == 3 * 2 * len(samples)
    assert combined.max_abs_residual <= 1e-4
    assert combined.passed


# ---------------------------------------------------------------------
@mark.parametrize("order nested ratio_lo ratio_hi".split(),
                  ((2, 0.02, 3.0, 5.0),
                   (4, 0.03, 12.0, 20.0)))
def test_oneill_residual_shrinks_when_steps_are_halved(warped, order, nested, ratio_lo, ratio_hi):
    point = [1.2, 0.7, 2.0]
    coarse = oneill_invariants(warped.obj, point, DifferentiationConfig(0.005, order, nested))
    fine = oneill_invariants(warped.obj, point, DifferentiationConfig(0.0025, order, nested / 2.0))
    assert ratio_lo <= abs(coarse.residual_3_1) / abs(fine.residual_3_1) <= ratio_hi


# ---------------------------------------------------------------------
# Fiber integrals and the transport criterion
# ---------------------------------------------------------------------

def test_pushforward_density_is_fiber_length(hopf_half, warped, heisenberg, violating):
    assert pushforward_density(hopf_half.obj, GRID)([1.0, 2.0]) == approx(np.pi, rel=1e-12)
    assert pushforward_density(warped.obj, GRID)([0.8, 1.0]) == approx(2 * np.pi * np.exp(np.cos(0.8)), rel=1e-12)
    assert pushforward_density(heisenberg.obj, GRID)([0.5, 0.5]) == approx(1.0, rel=1e-12)
    assert pushforward_density(violating.obj, GRID)([0.9]) == approx(2 * np.pi, rel=1e-12)


def test_pushforward_density_of_weighted_warped_circle(weighted_warped):
    b = [1.0, 0.3]
    expected = weighted_warped.oracle("phi_B").at(b)
    assert expected == approx(4 * np.pi * np.exp(np.cos(1.0) + 0.3 * np.sin(1.0)))
    assert pushforward_density(weighted_warped.obj, GRID)(b) == approx(expected, rel=1e-12)


def test_fiber_integrate_weights_by_fiber_volume(violating):
    # ∫ sin y · (1 + ½ sin u sin y) dy = (π/2) sin u
    value = fiber_integrate(violating.obj, [0.7], lambda x, y: np.sin(y[0]), GRID)
    assert value == approx(0.5 * np.pi * np.sin(0.7), rel=1e-12)


@mark.parametrize("entry", ("hopf", "warped_circle", "product", "heisenberg"))
def test_transport_criterion_holds_on_regular_examples(entry):
    build = catalog.build(entry)
    for b in build.base_samples(2, seed=3):
        check = check_measure_preserving(build.obj, b, GRID)
        assert check.max_fiber_variance <= 1e-6
        assert check.certified


def test_transport_criterion_holds_for_a_weighted_fiber(weighted_warped):
    check = check_measure_preserving(weighted_warped.obj, [1.0, 0.3], GRID)
    assert check.max_fiber_variance <= 1e-6
    assert check.certified


def test_transport_criterion_fails_on_violating_example(violating):
    for b in violating.base_samples(3, seed=3):
        check = check_measure_preserving(violating.obj, b, GRID)
        assert check.max_fiber_variance >= 0.01
        assert not check.certified


# ---------------------------------------------------------------------
# Base derivatives
# ---------------------------------------------------------------------

def test_base_derivatives_on_warped_circle(warped):
    report = verify_base_derivative_identities(warped.obj, [1.0, 0.3], grid=GRID)
    assert report.hypothesis_met is True
    assert len(report.residuals) == 2 + 1 + 1
    assert report.passed
    assert report.details["laplacian"]["lhs"] == approx(report.details["laplacian"]["rhs"], rel=1e-4)


def test_base_derivatives_with_a_transported_density(weighted_warped):
    report = verify_base_derivative_identities(weighted_warped.obj, [1.0, 0.3], grid=GRID)
    assert report.hypothesis_met is True
    assert len(report.residuals) == 2 + 1 + 1
    assert report.passed


def test_base_derivatives_report_gap_when_transport_fails(violating):
    report = verify_base_derivative_identities(violating.obj, [0.6], grid=GRID)
    assert report.hypothesis_met is False
    assert "informational_gap" in report.details
    assert len(report.residuals) == 1 + 1
    assert report.passed


# ---------------------------------------------------------------------
# Integrated identities
# ---------------------------------------------------------------------

def test_main_equality_on_hopf(hopf_half):
    report = verify_main_equality(hopf_half.obj, [1.0, 0.5], grid=GRID)
    assert report.passed
    assert report.details["lhs"] == approx(8 * np.pi, rel=1e-4)
    assert report.details["inequality_slack"] / report.details["phi_B"] == approx(0.5, abs=1e-4)
    assert abs(report.details["slack_identity_residual"]) <= 1e-4


def test_main_equality_on_warped_circle(warped):
    for b in warped.base_samples(2, seed=8):
        report = verify_main_equality(warped.obj, b, grid=GRID)
        assert report.max_abs_residual <= 1e-4


def test_main_equality_with_a_transported_density(weighted_warped):
    report = verify_main_equality(weighted_warped.obj, [1.0, 0.3], grid=GRID)
    assert report.max_abs_residual <= 1e-4
    assert report.passed
    assert report.details["phi_B"] == approx(weighted_warped.oracle("phi_B").at([1.0, 0.3]), rel=1e-10)


def test_main_equality_refuses_without_transport(violating):
    with raises(HypothesisUnmetError) as info:
        verify_main_equality(violating.obj, [0.6], grid=GRID)
    assert info.value.spread >= 0.01
    message = str(info.value)
    assert "(0.6)" in message
    assert "float64" not in message


@mark.parametrize("entry params slack".split(),
                  (("hopf", {"eps": 0.5}, 0.5),
                   ("hopf", {"eps": 0.25}, 0.125),
                   ("heisenberg", {}, 0.5),
                   ("warped_circle", {}, 0.0)))
@mark.slow
def test_fiber_volume_inequality_slack(entry, params, slack):
    build = catalog.build(entry, **params)
    report = verify_theorem2_2(build.obj, build.base_samples(2, seed=9), grid=8)
    assert report.passed
    assert report.hypothesis_met
    for value in report.details["slack"]:
        assert value == approx(slack, abs=1e-4)


def test_fiber_volume_inequality_is_informational_without_transport(violating):
    report = verify_theorem2_2(violating.obj, violating.base_samples(2, seed=9), grid=GRID)
    assert report.hypothesis_met is False
    assert len(report.residuals) == 2
    assert min(report.details["min_cauchy_schwarz_gap"]) >= -1e-8


def test_fiber_volume_inequality_needs_unit_density(hopf_half):
    weighted = replace(hopf_half.obj, phi_M=lambda x, y: 2.0 + np.sin(y[0]))
    with raises(PreconditionError):
        verify_theorem2_2(weighted, [[1.0, 0.5]], grid=8)


def test_fiber_volume_inequality_rejects_weighted_catalog_entry(weighted_warped):
    with raises(PreconditionError):
        verify_theorem2_2(weighted_warped.obj, [[1.0, 0.3]], grid=8)


def test_fiber_invariant_shortcut_matches_the_full_fiber_sweep(hopf_half):
    bases = hopf_half.base_samples(2, seed=4)
    assert hopf_half.obj.fiber_invariant
    fast = verify_theorem2_2(hopf_half.obj, bases, grid=8)
    full = verify_theorem2_2(replace(hopf_half.obj, fiber_invariant=False), bases, grid=8)
    assert fast.details["slack"] == approx(full.details["slack"], abs=1e-9)
    assert fast.details["min_cauchy_schwarz_gap"] == approx(full.details["min_cauchy_schwarz_gap"], abs=1e-12)
    assert fast.residuals == approx(full.residuals, abs=1e-12)


def test_fiber_invariant_flag_is_checked_against_the_metric(violating):
    assert not violating.obj.fiber_invariant
    with raises(ConsistencyError):
        verify_theorem2_2(replace(violating.obj, fiber_invariant=True), [[0.6]], grid=8)


# ---------------------------------------------------------------------
# Lie derivative of the fiber volume
# ---------------------------------------------------------------------

def test_lie_derivative_on_warped_circle(warped):
    report = verify_lie_derivative_fiber_volume(warped.obj, [1.0, 0.3], [1.0, 0.0], grid=GRID)
    assert report.max_abs_residual <= 1e-3
    assert report.details["max_expected"] > 0.1


@mark.parametrize("entry", ("hopf", "product"))
def test_lie_derivative_vanishes_for_totally_geodesic_fibers(entry):
    build = catalog.build(entry)
    b = build.base_samples(1, seed=0)[0]
    for d in ([1.0, 0.0], [0.0, 1.0]):
        report = verify_lie_derivative_fiber_volume(build.obj, b, d, grid=GRID)
        assert report.max_abs_residual <= 1e-4


def test_lie_derivative_flow_must_stay_in_the_base(violating):
    with raises(StepSizeError):
        verify_lie_derivative_fiber_volume(violating.obj, [1.45], [1.0], grid=8, t_step=0.1)


# ---------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------

def test_report_passes_iff_worst_residual_within_tolerance():
    ok = IdentityReport.from_residuals(IdentityId.ONEILL, [[0.0]], [-5e-5], 1e-4)
    bad = IdentityReport.from_residuals(IdentityId.ONEILL, [[0.0], [1.0]], [1e-5, -2e-4], 1e-4)
    assert ok.passed and not bad.passed
    assert bad.max_abs_residual == approx(2e-4)


def test_combine_merges_points_and_details():
    a = IdentityReport.from_residuals(IdentityId.MAIN_EQUALITY, [[0.1]], [1e-6], 1e-4,
                                      details={"lhs": 1.0}, hypothesis_met=True)
    b = IdentityReport.from_residuals(IdentityId.MAIN_EQUALITY, [[0.2]], [3e-6], 1e-4,
                                      details={"lhs": 2.0}, hypothesis_met=False)
    merged = IdentityReport.combine([a, b])
    assert merged.residuals == [1e-6, 3e-6]
    assert merged.details["lhs"] == [1.0, 2.0]
    assert merged.hypothesis_met is False
    assert merged.to_dict()["identity"] == "main-equality"
