import numpy as np
import numpy.testing as npt
import pytest

from src.errors import BadInput, BadParameter, Inadmissible, OutsideDomain, ParseError
from src.homogeneous import Euclidean, Linear, Randers, Zero
from src.metrics import (
    build_k0,
    build_km1,
    classify,
    closed_form,
    closed_metric,
    critical_lambda,
    funk_metric,
    hilbert_of,
    initial_data,
    metric_from_descriptor,
    reverse,
)


def km1_closed(c, x, y):
    """(Phi_+ - Phi_-) / 2 for psi = |.|, phi = c |.| along any pair (x, y)."""

    def funk(k):
        s, w, yy = k**2 * (x @ x), k * (x @ y), y @ y
        return k * (np.sqrt(yy - (s * yy - w**2)) + w) / (1.0 - s)

    return 0.5 * (funk(c + 1.0) - funk(c - 1.0))


def test_berwald_from_initial_data():
    F = build_k0(Euclidean(), Euclidean())
    assert F([0.5, 0.0], [1.0, 0.0]) == pytest.approx(4.0, rel=1e-12)
    assert F.curvature == 0.0


def test_berwald_builder_matches_closed_form(rng, berwald):
    F = build_k0(Euclidean(), Euclidean())
    x = berwald.sample_points(rng, 1000)
    y = rng.standard_normal((1000, 2))
    npt.assert_allclose(F.evaluate(x, y), berwald.evaluate(x, y), rtol=1e-8)


def test_builder_derivative_modes_agree(rng):
    phi = Randers([0.3, -0.2])
    implicit = build_k0(Euclidean(), phi)
    numeric = build_k0(Euclidean(), phi, derivative="central_difference")
    x = implicit.sample_points(rng, 50)
    y = rng.standard_normal((50, 2))
    npt.assert_allclose(numeric.evaluate(x, y), implicit.evaluate(x, y), rtol=1e-7)


def test_zero_phi_gives_minkowski(rng):
    psi = Randers([0.2, 0.3])
    F = build_k0(psi, Zero())
    x = rng.uniform(-5.0, 5.0, (20, 2))
    y = rng.standard_normal((20, 2))
    npt.assert_allclose(F.evaluate(x, y), psi(y))
    assert not F.domain.bounded


def test_randers_builder_matches_closed_form(rng):
    a = np.array([0.5, 0.0])
    built = build_k0(Randers(a), Randers(a))
    closed = closed_metric("randers_k0", a=a)
    x = closed.sample_points(rng, 500)
    y = rng.standard_normal((500, 2))
    npt.assert_allclose(built.evaluate(x, y), closed.evaluate(x, y), rtol=1e-8)
    npt.assert_allclose(built.projective(x, y), closed.projective(x, y), rtol=1e-9)


def test_hilbert_from_initial_data():
    F = build_km1(Euclidean(), Zero())
    assert F([0.5, 0.0], [1.0, 0.0]) == pytest.approx(4.0 / 3.0, rel=1e-10)
    assert F.params["case"] == 1


def test_hilbert_builder_matches_riemann_closed_form(rng, hilbert_ball):
    F = build_km1(Euclidean(), Zero())
    x = hilbert_ball.sample_points(rng, 1000)
    y = rng.standard_normal((1000, 2))
    npt.assert_allclose(F.evaluate(x, y), hilbert_ball.evaluate(x, y), rtol=1e-8)


def test_equal_initial_data_gives_funk_of_the_half_ball(rng):
    F = build_km1(Euclidean(), Euclidean())
    assert F.params["case"] == 2
    assert F([0.25, 0.0], [1.0, 0.0]) == pytest.approx(2.0, rel=1e-10)
    x = 0.5 * rng.uniform(-0.6, 0.6, (200, 2))
    y = rng.standard_normal((200, 2))
    half = closed_metric("euclid_funk")
    npt.assert_allclose(F.evaluate(x, y), half.evaluate(2.0 * x, y), rtol=1e-8)
    npt.assert_allclose(F.evaluate(x, y), closed_metric("euclid_km1", c=1.0).evaluate(x, y), rtol=1e-8)


@pytest.mark.parametrize("c", [2.0, 0.5])
def test_scaled_euclidean_initial_data(c):
    x, y = np.array([0.1, 0.0]), np.array([1.0, 0.0])
    F = build_km1(Euclidean(), c * Euclidean())
    assert F(x, y) == pytest.approx(km1_closed(c, x, y), rel=1e-9)
    assert closed_form("euclid_km1", x, y, c=c) == pytest.approx(km1_closed(c, x, y), rel=1e-12)


def test_dominant_case_value():
    F = build_km1(Euclidean(), 2.0 * Euclidean())
    assert F([0.1, 0.0], [1.0, 0.0]) == pytest.approx(0.5 * (3.0 / 0.7 - 1.0 / 0.9), rel=1e-10)


def test_randers_km1_builder_matches_closed_form(rng):
    a, c = np.array([0.5, 0.0]), 2.0
    built = build_km1(Randers(a), c * Randers(a))
    closed = closed_metric("randers_km1", a=a, c=c)
    x = closed.sample_points(rng, 200)
    y = rng.standard_normal((200, 2))
    npt.assert_allclose(built.evaluate(x, y), closed.evaluate(x, y), rtol=1e-8)


@pytest.mark.parametrize(
    "psi, phi",
    [
        (Euclidean(), Euclidean()),
        (Randers([0.3, 0.1]), Randers([0.1, -0.2])),
        (Euclidean(), Zero()),
    ],
)
def test_initial_data_recovery_k0(rng, psi, phi):
    F = build_k0(psi, phi)
    y = rng.standard_normal((100, 2))
    origin = np.zeros(2)
    npt.assert_allclose(F.evaluate(origin, y), psi(y), rtol=1e-9)
    npt.assert_allclose(F.projective(origin, y), phi(y), rtol=1e-9, atol=1e-14)


@pytest.mark.parametrize(
    "psi, phi",
    [
        (Euclidean(), 0.5 * Euclidean()),
        (Euclidean(), Linear([0.4, 0.2])),
        (Euclidean(), 3.0 * Euclidean()),
        (Randers([0.2, 0.0]), Randers([0.2, 0.0])),
    ],
)
def test_initial_data_recovery_km1(rng, psi, phi):
    F = build_km1(psi, phi)
    y = rng.standard_normal((100, 2))
    origin = np.zeros(2)
    npt.assert_allclose(F.evaluate(origin, y), psi(y), rtol=1e-9)
    npt.assert_allclose(F.projective(origin, y), phi(y), rtol=1e-9, atol=1e-12)


def test_closed_form_examples(rng):
    assert closed_form("euclid_funk", [0.5, 0.0], [1.0, 0.0]) == pytest.approx(2.0)
    y = rng.standard_normal((10, 2))
    npt.assert_allclose(closed_form("riemann", np.zeros(2), y, lam=1.0), np.linalg.norm(y, axis=-1))
    x = rng.uniform(-3.0, 3.0, (100, 2))
    y = rng.standard_normal((100, 2))
    npt.assert_allclose(closed_form("bryant", x, y, alpha=0.0), closed_form("riemann", x, y, lam=1.0), rtol=1e-12)


def test_bryant_in_three_dimensions_reduces_to_the_sphere(rng):
    x = rng.uniform(-2.0, 2.0, (50, 3))
    y = rng.standard_normal((50, 3))
    npt.assert_allclose(
        closed_form("bryant", x, y, alpha=0.0), closed_form("riemann", x, y, lam=1.0), rtol=1e-12
    )


def test_closed_metrics_carry_their_curvature():
    assert closed_metric("euclid_funk").curvature == -0.25
    assert closed_metric("riemann", lam=2.0).curvature == 2.0
    assert closed_metric("bryant", alpha=0.2).curvature == 1.0


@pytest.mark.parametrize(
    "kind, params",
    [("bryant", {"alpha": 2.0}), ("riemann", {}), ("randers_k0", {"a1": 1.2}), ("randers_km1", {"a1": 0.5}),
     ("spiral", {})],
)
def test_closed_metric_rejects_bad_parameters(kind, params):
    with pytest.raises(BadParameter):
        closed_metric(kind, **params)


def test_hilbert_of_funk_is_the_riemann_metric(rng, hilbert_ball):
    H = hilbert_of(funk_metric(Euclidean()))
    x = hilbert_ball.sample_points(rng, 1000)
    y = rng.standard_normal((1000, 2))
    npt.assert_allclose(H.evaluate(x, y), hilbert_ball.evaluate(x, y), rtol=1e-8)
    npt.assert_allclose(H.evaluate(x, y), H.evaluate(x, -y), rtol=1e-12)
    npt.assert_allclose(H.evaluate(np.zeros(2), y), np.linalg.norm(y, axis=-1), rtol=1e-12)
    npt.assert_allclose(H.projective(x, y), hilbert_ball.projective(x, y), rtol=1e-8, atol=1e-12)


def test_hilbert_of_closed_funk_ball(rng, funk_ball, hilbert_ball):
    H = hilbert_of(funk_ball)
    x = funk_ball.sample_points(rng, 200)
    y = rng.standard_normal((200, 2))
    npt.assert_allclose(H.evaluate(x, y), hilbert_ball.evaluate(x, y), rtol=1e-10)


def test_hilbert_of_needs_a_funk_metric(berwald):
    with pytest.raises(BadInput):
        hilbert_of(berwald)


def test_funk_metric_projective_factor(rng):
    F = funk_metric(Randers([0.3, 0.0]))
    x = F.sample_points(rng, 50)
    y = rng.standard_normal((50, 2))
    npt.assert_allclose(F.projective(x, y), 0.5 * F.evaluate(x, y))


def test_reverse_twice_is_the_identity(rng, berwald):
    back = reverse(reverse(berwald))
    x = berwald.sample_points(rng, 100)
    y = rng.standard_normal((100, 2))
    npt.assert_allclose(back.evaluate(x, y), berwald.evaluate(x, y))
    npt.assert_allclose(back.projective(x, y), berwald.projective(x, y))
    npt.assert_allclose(reverse(berwald).evaluate(x, y), berwald.evaluate(x, -y))


def test_positive_and_homogeneous_on_samples(rng, berwald, bryant):
    for F in (berwald, bryant, build_km1(Euclidean(), 0.5 * Euclidean())):
        x = F.sample_points(rng, 100)
        y = rng.standard_normal((100, 2))
        values = F.evaluate(x, y)
        assert np.all(values > 0.0)
        npt.assert_allclose(F.evaluate(x, 3.5 * y), 3.5 * values, rtol=1e-10)


def test_domain_check(berwald):
    with pytest.raises(OutsideDomain):
        berwald([1.0, 0.0], [1.0, 0.0])
    assert berwald.contains(np.array([0.999, 0.0]))
    assert not berwald.contains(np.array([0.0, 1.0]))


def test_classify_examples():
    k0 = classify(Euclidean(), Zero(), 0)
    assert (k0.case_label, k0.backward_complete, k0.reversibility_finite) == ("minkowski", True, True)

    inter = classify(Euclidean(), 0.5 * Euclidean(), -1)
    assert (inter.case_number, inter.case_label, inter.backward_complete) == (4, "intermediate", False)

    hilbert = classify(Euclidean(), Linear([0.3, -0.4]), -1)
    assert (hilbert.case_label, hilbert.backward_complete, hilbert.reversibility_finite) == ("hilbert", True, True)

    assert classify(Euclidean(), Euclidean(), -1).case_label == "funk"
    assert classify(Euclidean(), 2.0 * Euclidean(), -1).case_label == "dominant"
    assert classify(Euclidean(), Randers([0.5, 0.0]), 0).case_label == "funk_type"


def test_classify_rejects_inadmissible_data():
    with pytest.raises(Inadmissible):
        classify(Euclidean(), Linear([1.0, 0.0]), 0)
    with pytest.raises(BadParameter):
        classify(Euclidean(), Zero(), 1)


def test_critical_lambda():
    assert critical_lambda(2.0) == pytest.approx(0.94778, abs=1e-5)
    for c in (1.5, 2.0, 5.0, 50.0):
        assert critical_lambda(c) < 1.0
    with pytest.raises(BadParameter):
        critical_lambda(1.0)


def test_descriptor_round_trip(rng):
    F = build_k0(Randers([0.2, 0.1]), 0.5 * Euclidean())
    G = metric_from_descriptor(F.to_dict())
    x = F.sample_points(rng, 20)
    y = rng.standard_normal((20, 2))
    npt.assert_allclose(G.evaluate(x, y), F.evaluate(x, y))


@pytest.mark.parametrize(
    "desc",
    [
        {"family": "closed", "kind": "bryant", "alpha": 0.3},
        {"family": "km1", "psi": {"kind": "euclidean"}, "phi": {"kind": "zero"}},
        {"family": "hilbert", "phi": {"kind": "euclidean"}},
        {"family": "reverse", "of": {"family": "funk", "phi": {"kind": "euclidean"}}},
        {"family": "minkowski", "psi": {"kind": "randers", "a": [0.1, 0.2]}},
    ],
)
def test_descriptor_families(desc):
    F = metric_from_descriptor(desc)
    assert F([0.1, 0.2], [1.0, 0.0]) > 0.0


@pytest.mark.parametrize(
    "desc",
    [[], {"kind": "berwald"}, {"family": "closed"}, {"family": "closed", "kind": "nope"}, {"family": "k0"},
     {"family": "reverse"}, {"family": "unheard"}],
)
def test_bad_descriptors(desc):
    with pytest.raises(ParseError):
        metric_from_descriptor(desc)


def test_initial_data_of_closed_forms(berwald, hilbert_ball, bryant):
    psi, phi = initial_data(berwald)
    y = np.array([3.0, 4.0])
    assert (psi(y), phi(y)) == (5.0, 5.0)
    psi, phi = initial_data(hilbert_ball)
    assert phi.is_zero
    psi, phi = initial_data(closed_metric("randers_km1", a1=0.5, c=2.0))
    assert phi([1.0, 0.0]) == pytest.approx(3.0)
    with pytest.raises(BadInput):
        initial_data(bryant)
