import numpy as np
import numpy.testing as npt
import pytest

from src.errors import DegenerateFormula, OutsideDomain, SegmentExitsDomain, ZeroVector
from src.geometry import (
    berwald_residuals,
    busemann_mayer_recover,
    completeness_probe,
    distance,
    distance_formula,
    flag_curvature,
    geodesic,
    geodesic_profile,
    line_length,
    origin_distances,
    pairwise_distances,
    projective_factor,
    projective_value,
    reversibility,
)
from src.homogeneous import Euclidean, Randers, Zero
from src.metrics import DomainSpec, FinslerMetric, build_km1, closed_metric, euclid_funk_value

POINT = np.array([0.3, -0.2])
DIRECTION = np.array([0.4, 0.9])


def without_projective(metric):
    return FinslerMetric(lambda x, y: metric.evaluate(x, y, check=False), metric.dim, metric.domain, "wrapped")


def test_minkowski_projective_factor_vanishes(randers_minkowski):
    data = projective_factor(without_projective(randers_minkowski), POINT, DIRECTION)
    assert data.P == pytest.approx(0.0, abs=1e-10)


def test_funk_projective_factor_is_half_the_metric(rng):
    funk = FinslerMetric(euclid_funk_value, 2, DomainSpec.sublevel(Euclidean()), "funk_values")
    x = funk.sample_points(rng, 20, fraction=0.6)
    y = rng.standard_normal((20, 2))
    P = projective_factor(funk, x, y).P
    npt.assert_allclose(P, 0.5 * euclid_funk_value(x, y), rtol=1e-4)


def test_half_funk_projective_factor_is_the_metric(rng):
    half = build_km1(Euclidean(), Euclidean())
    x = half.sample_points(rng, 20, fraction=0.6)
    y = rng.standard_normal((20, 2))
    P = projective_factor(without_projective(half), x, y).P
    npt.assert_allclose(P, half.evaluate(x, y), rtol=1e-4)


def test_berwald_projective_factor_at_origin(berwald):
    assert projective_factor(without_projective(berwald), [0.0, 0.0], [1.0, 0.0]).P == pytest.approx(1.0, rel=1e-5)


def test_native_and_numerical_projective_factors_agree(rng, berwald, hilbert_ball, sphere):
    for metric in (berwald, hilbert_ball, sphere):
        x = metric.sample_points(rng, 20, fraction=0.6)
        y = rng.standard_normal((20, 2))
        npt.assert_allclose(
            projective_value(without_projective(metric), x, y), projective_value(metric, x, y), rtol=1e-4, atol=1e-6
        )


@pytest.mark.parametrize(
    "name, K, tol",
    [("berwald", 0.0, 1e-3), ("hilbert_ball", -1.0, 1e-3), ("euclid_funk", -0.25, 1e-3), ("bryant", 1.0, 1e-2)],
)
def test_berwald_residuals_vanish(name, K, tol):
    metric = closed_metric(name, alpha=0.3) if name == "bryant" else closed_metric(name)
    r1, r2 = berwald_residuals(metric, K, POINT, DIRECTION)
    assert np.max(np.abs(r1)) < tol
    assert np.max(np.abs(r2)) < tol


def test_wrong_curvature_leaves_a_residual(berwald):
    _, r2 = berwald_residuals(berwald, 1.0, POINT, DIRECTION)
    assert np.max(np.abs(r2)) > 1e-2


CURVATURE_FAMILIES = [
    ("berwald", {}, 0.0, 1e-5),
    ("hilbert_ball", {}, -1.0, 1e-5),
    ("euclid_funk", {}, -0.25, 1e-5),
    ("riemann", {"lam": 1.0}, 1.0, 1e-5),
    # no closed-form P, so the formula differentiates a numerical one
    ("bryant", {"alpha": 0.3}, 1.0, 1e-4),
]


@pytest.mark.parametrize("name, params, K, tol", CURVATURE_FAMILIES)
def test_flag_curvature(name, params, K, tol, rng):
    metric = closed_metric(name, **params)
    x = metric.sample_points(rng, 100, fraction=0.6)
    y = rng.standard_normal((100, metric.dim))
    report = flag_curvature(metric, x, y, profile=False)
    assert report.K_profile is None
    assert np.max(np.abs(np.asarray(report.K_formula) - K)) < tol


@pytest.mark.parametrize("name, params, K, tol", CURVATURE_FAMILIES)
def test_flag_curvature_at_a_point(name, params, K, tol):
    report = flag_curvature(closed_metric(name, **params), POINT, DIRECTION)
    assert report.K_formula == pytest.approx(K, abs=tol)
    assert report.K_profile == pytest.approx(K, abs=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize("name, params, K, tol", CURVATURE_FAMILIES)
def test_formula_and_profile_curvature_agree(name, params, K, tol, rng):
    metric = closed_metric(name, **params)
    x = metric.sample_points(rng, 50, fraction=0.5)
    y = rng.standard_normal((50, metric.dim))
    report = flag_curvature(metric, x, y)
    npt.assert_allclose(report.K_profile, report.K_formula, atol=1e-3)


def test_flag_curvature_of_constructed_metrics():
    F = build_km1(Euclidean(), 0.5 * Euclidean())
    assert flag_curvature(F, [0.1, 0.2], [1.0, 0.5], profile=False).K_formula == pytest.approx(-1.0, abs=1e-4)


def test_minkowski_geodesic_is_linear(minkowski):
    result = geodesic(minkowski, [0.1, 0.0], [1.0, 0.0], 1.0, curvature=0)
    npt.assert_allclose(result.f, result.t, atol=1e-12)
    assert result.profile.family == "k0_line"
    assert result.escape_time is None


def test_berwald_geodesic_is_fractional(berwald):
    result = geodesic(berwald, [0.0, 0.0], [1.0, 0.0], 1.0, curvature=0)
    assert result.profile.family == "k0_fractional"
    assert result.profile.c == pytest.approx(1.0)
    npt.assert_allclose(result.f, result.t / (1.0 + result.t), atol=1e-9)
    assert result.fit_residual < 1e-9


def test_sphere_geodesic_escapes_at_a_quarter_turn(sphere):
    result = geodesic(sphere, [0.0, 0.0], [1.0, 0.0], 2.0, curvature=1)
    assert result.profile.family == "k1"
    assert result.profile.c == pytest.approx(0.0, abs=1e-12)
    assert result.escape_time == pytest.approx(np.pi / 2, abs=1e-3)
    early = result.t < 1.0
    npt.assert_allclose(result.f[early], np.tan(result.t[early]), rtol=1e-8)


def test_unknown_curvature_picks_the_best_profile(berwald):
    result = geodesic(berwald, [0.2, 0.1], [0.5, -0.3], (-0.2, 0.3))
    assert result.profile.family == "k0_fractional"


def test_geodesic_profiles_start_like_a_line():
    for K in (0, -1, 1, 4, -0.25):
        for p_hat in (-0.7, 0.0, 0.4):
            prof = geodesic_profile(K, p_hat)
            s = 1e-4
            slope = (prof.f(s) - prof.f(-s)) / (2.0 * s)
            assert prof.f(0.0) == pytest.approx(0.0, abs=1e-14)
            assert slope == pytest.approx(1.0, rel=1e-6)
            curvature = (prof.f(s) - 2.0 * prof.f(0.0) + prof.f(-s)) / s**2
            assert curvature == pytest.approx(-2.0 * p_hat, abs=1e-4)


@pytest.mark.parametrize(
    "name, params, K, x2, expected",
    [
        ("berwald", {}, 0.0, [0.5, 0.0], 1.0),
        ("hilbert_ball", {}, -1.0, [0.5, 0.0], 0.5 * np.log(3.0)),
        ("riemann", {"lam": 1.0}, 1.0, [1.0, 0.0], np.pi / 4),
    ],
)
def test_distance_examples(name, params, K, x2, expected):
    result = distance(closed_metric(name, **params), K, [0.0, 0.0], x2)
    assert result.formula == pytest.approx(expected, rel=1e-12)
    assert result.integral == pytest.approx(expected, rel=1e-8)
    assert result.rel_err < 1e-6


def test_formula_and_integral_agree_off_the_origin(berwald, hilbert_ball, bryant):
    for metric, K in ((berwald, 0.0), (hilbert_ball, -1.0), (bryant, 1.0)):
        result = distance(metric, K, [0.2, -0.3], [-0.4, 0.1])
        assert result.rel_err < 1e-6


def test_funk_distance_by_rescaling(funk_ball):
    x1, x2 = np.array([0.1, 0.2]), np.array([0.5, -0.1])
    result = distance(funk_ball, -0.25, x1, x2)
    assert result.formula == pytest.approx(-np.log(1.0 - funk_ball(x1, x2 - x1)), rel=1e-10)
    assert result.rel_err < 1e-6


def test_distance_rejects_bad_segments(berwald):
    with pytest.raises(SegmentExitsDomain):
        distance(berwald, 0.0, [0.5, 0.0], [1.5, 0.0])
    with pytest.raises(DegenerateFormula):
        distance_formula(0, 1.0, 1.0)


def test_triangle_inequality(rng, berwald):
    points = berwald.sample_points(rng, 12)
    d = pairwise_distances(berwald, 0.0, points)
    # slack[i, j, k] = d(i, k) - d(i, j) - d(j, k)
    slack = d[:, None, :] - d[:, :, None] - d[None, :, :]
    assert np.all(np.diagonal(d) == 0.0)
    assert np.max(slack) <= 1e-8


def test_origin_distances():
    e = Euclidean()
    forward, backward = origin_distances(e, e, 0, [0.9, 0.0])
    assert forward == pytest.approx(9.0)
    assert backward == pytest.approx(0.9 / 1.9)
    forward, backward = origin_distances(e, Zero(), -1, [0.5, 0.0])
    assert forward == pytest.approx(0.5 * np.log(3.0))
    assert backward == pytest.approx(forward)
    forward, _ = origin_distances(e, Zero(), 1, [1.0, 0.0])
    assert forward == pytest.approx(np.pi / 4)


def test_straight_lines_of_positive_curvature_have_length_pi(sphere, bryant):
    for metric in (sphere, bryant):
        assert line_length(metric, [0.0, 0.0], [1.0, 0.0], T=1e6) == pytest.approx(np.pi, abs=1e-3)
    assert line_length(bryant, [0.3, -1.0], [0.2, 0.7], T=1e6) == pytest.approx(np.pi, abs=1e-3)


def test_positive_curvature_diameter(rng, bryant):
    points = rng.uniform(-5.0, 5.0, (25, 2))
    assert np.max(pairwise_distances(bryant, 1.0, points)) <= np.pi + 1e-9


def test_hilbert_projective_factor_is_bounded(rng, hilbert_ball):
    x = hilbert_ball.sample_points(rng, 500)
    y = rng.standard_normal((500, 2))
    assert np.all(np.abs(hilbert_ball.projective(x, y)) <= hilbert_ball.evaluate(x, y))


def test_reversibility(minkowski, funk_ball, hilbert_ball, rng):
    assert reversibility(minkowski, [[0.3, 0.1]]).value == pytest.approx(1.0)

    at_point = reversibility(funk_ball, [[0.5, 0.0]], directions=720, fractions=())
    assert 2.99 < at_point.value <= 3.0 + 1e-9
    assert funk_ball([0.5, 0.0], [1.0, 0.0]) / funk_ball([0.5, 0.0], [-1.0, 0.0]) == pytest.approx(3.0)

    towards_boundary = reversibility(funk_ball, [[0.5, 0.0]])
    assert towards_boundary.unbounded
    assert list(towards_boundary.trend.columns) == ["fraction", "sup_ratio"]

    hilbert = reversibility(hilbert_ball, hilbert_ball.sample_points(rng, 50))
    assert hilbert.value == pytest.approx(1.0, abs=1e-12)
    assert not hilbert.unbounded


def test_completeness_of_the_berwald_metric(berwald):
    e = Euclidean()
    report = completeness_probe(berwald, e, e, 0)
    assert report.frame["forward"].iloc[0] == pytest.approx(9.0)
    assert np.all(report.frame["backward"] < 1.0)
    assert report.forward_diverges and report.backward_bounded


def test_completeness_of_the_hilbert_metric(hilbert_ball):
    report = completeness_probe(hilbert_ball, Euclidean(), Zero(), -1)
    s = report.frame["fraction"].to_numpy()
    npt.assert_allclose(report.frame["forward"], 0.5 * np.log((1.0 + s) / (1.0 - s)))
    assert report.forward_diverges and not report.backward_bounded


def test_completeness_from_the_metric_itself(berwald):
    report = completeness_probe(berwald, curvature=0, fractions=(0.9, 0.99, 0.999))
    npt.assert_allclose(report.frame["forward"], [9.0, 99.0, 999.0], rtol=1e-8)


def test_busemann_mayer_recovery(berwald, hilbert_ball):
    def euclidean(a, b):
        return np.linalg.norm(b - a)

    assert busemann_mayer_recover(euclidean, [0.1, 0.2], [3.0, 4.0]) == pytest.approx(5.0)

    x, y = np.array([0.3, 0.0]), np.array([1.0, 0.0])
    for metric, K in ((berwald, 0), (hilbert_ball, -1)):

        def d(a, b):
            return distance_formula(K, metric.evaluate(a, b - a), projective_value(metric, a, b - a))

        assert busemann_mayer_recover(d, x, y) == pytest.approx(metric(x, y), rel=1e-3)

    with pytest.raises(ZeroVector):
        busemann_mayer_recover(euclidean, x, [0.0, 0.0])


def test_flag_curvature_outside_domain(berwald):
    with pytest.raises(OutsideDomain):
        flag_curvature(berwald, [1.5, 0.0], [1.0, 0.0])


def test_randers_k0_curvature():
    metric = closed_metric("randers_k0", a=[0.3, 0.4])
    report = flag_curvature(metric, [0.1, -0.2], [1.0, 1.0], profile=False)
    assert report.K_formula == pytest.approx(0.0, abs=1e-4)
    assert metric.projective([0.0, 0.0], [1.0, 0.0]) == pytest.approx(Randers([0.3, 0.4])([1.0, 0.0]))


def test_positive_curvature_formula_stays_before_the_escape():
    # F = 1, P = 2: the endpoint is reached at 3pi/4, the geodesic escapes at pi - arctan(1/2)
    assert distance_formula(1, 1.0, 2.0) == pytest.approx(0.75 * np.pi, rel=1e-12)
    assert distance_formula(4, 0.5, 0.0) == pytest.approx(0.5 * np.pi / 4.0, rel=1e-12)
    for P in (1e17, -1e17):
        with pytest.raises(DegenerateFormula):
            distance_formula(1, 1.0, P)
