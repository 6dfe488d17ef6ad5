import hypothesis as hyp
import hypothesis.extra.numpy as hyp_np
import hypothesis.strategies as hyp_st
import numpy as np
import numpy.testing as npt
import pytest

from src.errors import BadInput, BadParameter, NotUpperHemisphere
from src.metrics import closed_metric
from src.sphere import (
    antipodal_deviation,
    boundary_line,
    bryant_pullback,
    equator_extension_check,
    equator_limit,
    equator_metric,
    from_spherical,
    great_circle_length,
    great_circle_samples,
    jacobian,
    line_limits,
    line_plane_residual,
    project,
    pullback,
    sphere_metric,
    to_spherical,
    unproject,
)

planar = hyp_np.arrays(dtype=np.float64, shape=2, elements=hyp_st.floats(-50.0, 50.0))

E1 = np.array([1.0, 0.0, 0.0])
DOWN = np.array([0.0, 0.0, -1.0])


def chart_samples(rng, count, n=2):
    phi = rng.uniform(-1.4, 1.4, count)
    if n == 2:
        theta = rng.uniform(0.0, np.pi, (count, 1))
    else:
        theta = np.column_stack([rng.uniform(0.3, np.pi - 0.3, count), rng.uniform(0.0, np.pi, count)])
    return np.column_stack([phi, theta])


@pytest.mark.parametrize(
    "x, expected",
    [([0.0, 0.0], [0.0, 0.0, 1.0]), ([1.0, 0.0], [1.0 / np.sqrt(2.0), 0.0, 1.0 / np.sqrt(2.0)])],
)
def test_project(x, expected):
    npt.assert_allclose(project(x), expected, atol=1e-15)


@hyp.given(x=planar)
def test_project_lands_on_the_upper_hemisphere(x):
    w = project(x)
    assert np.linalg.norm(w) == pytest.approx(1.0, rel=1e-14)
    assert w[-1] > 0.0
    npt.assert_allclose(unproject(w), x, rtol=1e-12, atol=1e-12)


def test_unproject_rejects_the_lower_hemisphere():
    with pytest.raises(NotUpperHemisphere):
        unproject([0.6, 0.0, -0.8])


@pytest.mark.parametrize("n", [2, 3])
def test_spherical_coordinates_round_trip(rng, n):
    x = rng.uniform(-3.0, 3.0, (50, n))
    zeta = to_spherical(x)
    assert np.all(np.abs(zeta[:, 0]) < np.pi / 2)
    assert np.all((zeta[:, -1] >= 0.0) & (zeta[:, -1] < np.pi))
    npt.assert_allclose(from_spherical(zeta), x, atol=1e-12)


def test_axis_points():
    npt.assert_allclose(to_spherical([1.0, 0.0]), [np.pi / 4, 0.0], atol=1e-15)
    npt.assert_allclose(to_spherical([0.0, -1.0]), [-np.pi / 4, np.pi / 2], atol=1e-15)


@pytest.mark.parametrize("n", [2, 3])
def test_jacobian_matches_central_differences(rng, n):
    h = 1e-6
    for zeta in chart_samples(rng, 5, n):
        numeric = np.column_stack(
            [(from_spherical(zeta + h * e) - from_spherical(zeta - h * e)) / (2.0 * h) for e in np.eye(n)]
        )
        npt.assert_allclose(jacobian(zeta), numeric, atol=1e-6)


def test_planar_jacobian_closed_form():
    phi, theta = 0.4, 1.1
    sec2, tan = 1.0 / np.cos(phi) ** 2, np.tan(phi)
    expected = [[sec2 * np.cos(theta), -tan * np.sin(theta)], [sec2 * np.sin(theta), tan * np.cos(theta)]]
    npt.assert_allclose(jacobian([phi, theta]), expected, rtol=1e-14)


@pytest.mark.parametrize("n", [2, 3])
def test_riemann_pullback_is_the_round_metric(rng, n):
    chart = pullback(closed_metric("riemann", lam=1.0, n=n))
    zeta = chart_samples(rng, 40, n)
    V = rng.standard_normal((40, n))
    npt.assert_allclose(chart.pullback_eval(zeta, V), sphere_metric(zeta, V), rtol=1e-10)


def test_bryant_pullback_in_closed_form(rng):
    alpha = 0.3
    chart = pullback(closed_metric("bryant", alpha=alpha))
    zeta = chart_samples(rng, 40)
    V = rng.standard_normal((40, 2))
    npt.assert_allclose(chart.pullback_eval(zeta, V), bryant_pullback(alpha, zeta, V), rtol=1e-9)


def test_north_pole_sees_only_the_radial_component(sphere):
    chart = pullback(sphere)
    assert chart([0.0, 0.3], [1.0, 5.0]) == pytest.approx(1.0)


def test_degenerate_equator_at_a_quarter_turn():
    check = equator_extension_check(np.pi / 4)
    assert check.min_eig < 1e-6
    assert abs(check.degenerate_direction[0]) < 1e-6
    assert check.max_deviation < 1e-4
    assert list(check.limit_values.columns) == ["V1", "V2", "extrapolated", "closed_form", "deviation"]


def test_equator_stays_convex_below_a_quarter_turn():
    check = equator_extension_check(0.3)
    assert check.min_eig > 1e-3
    assert check.max_deviation < 1e-4


def test_equator_metric_at_a_quarter_turn():
    alpha = np.pi / 4
    assert equator_metric(alpha, [0.0, 1.0]) == pytest.approx(1.0)
    assert equator_metric(alpha, [1.0, 0.0]) == pytest.approx(np.sqrt(0.5))


def test_equator_metric_tends_to_the_round_metric():
    V = np.array([0.6, 0.8])
    assert equator_metric(1e-8, V) == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2])
def test_equator_check_needs_alpha_in_range(alpha):
    with pytest.raises(BadParameter):
        equator_extension_check(alpha)


@pytest.mark.parametrize("lam, x", [(0.0, [0.0, 0.0]), (2.0, [2.0, 0.0])])
def test_boundary_line(lam, x):
    point, direction = boundary_line(E1, DOWN, lam)
    npt.assert_allclose(point, x, atol=1e-15)
    npt.assert_allclose(direction, [1.0, 0.0], atol=1e-15)


@pytest.mark.parametrize(
    "w, V",
    [([1.0, 0.0, 0.1], DOWN), ([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]), ([1.0, 0.0, 0.0], [1.0, 0.0, -1.0])],
)
def test_boundary_line_rejects(w, V):
    with pytest.raises(BadInput):
        boundary_line(w, V)


def test_line_limits_reach_the_equator():
    x, y = boundary_line(E1, DOWN, 0.5)
    limits = line_limits(x, y)
    npt.assert_allclose(limits["plus_point"], E1, atol=1e-6)
    npt.assert_allclose(limits["minus_point"], -E1, atol=1e-6)
    npt.assert_allclose(limits["plus_tangent"], DOWN, atol=1e-6)


def test_lines_map_into_planes(rng):
    x, y = rng.standard_normal(2), rng.standard_normal(2)
    t = np.linspace(-20.0, 20.0, 101)[:, None]
    assert line_plane_residual(x + t * y) < 1e-8
    assert line_plane_residual(rng.standard_normal((20, 2))) > 1e-3


def test_great_circles_have_length_two_pi(sphere, bryant):
    V = np.array([0.0, 0.6, 0.8])
    for metric in (sphere, bryant):
        assert great_circle_length(metric, E1, V) == pytest.approx(2.0 * np.pi, abs=1e-3)


def test_antipodal_equator_limits(bryant, sphere):
    assert antipodal_deviation(bryant, count=8) < 1e-5
    assert antipodal_deviation(sphere, count=8) < 1e-5


def test_equator_limit_of_the_round_metric(sphere):
    V = np.array([0.0, 0.6, 0.8])
    assert equator_limit(sphere, E1, V) == pytest.approx(1.0, rel=1e-5)


def test_pullback_needs_the_whole_space(hilbert_ball):
    with pytest.raises(BadInput):
        pullback(hilbert_ball)


def test_great_circle_samples(sphere):
    frame = great_circle_samples(sphere, E1, [0.0, 0.6, 0.8], count=9)
    assert list(frame.columns) == ["s", "phi", "theta1", "speed"]
    assert np.isnan(frame["speed"].iloc[0])
    inside = frame["speed"].dropna()
    npt.assert_allclose(inside, 1.0, rtol=1e-10)
