# src/metrics.py

import copy
import logging
from dataclasses import dataclass

import numpy as np

from src import config
from src.errors import BadInput, BadParameter, Inadmissible, NotPositive, OutsideDomain, ParseError
from src.funk import solve_phi, solve_phi_signed
from src.homogeneous import Euclidean, Randers, Scaled, Zero, as_fn, norm_from_dict
from src.numerics import as_output, central_gradient, relative_step, unit_directions

logger = logging.getLogger(__name__)


# --- Domains ---
class DomainSpec:
    """Either all of R^n or the sublevel set {f < level}, f positive and homogeneous."""

    def __init__(self, kind="all_space", f=None, level=1.0):
        if kind not in ("all_space", "sublevel"):
            raise BadParameter(f"unknown domain kind '{kind}'")
        if kind == "sublevel" and f is None:
            raise BadParameter("sublevel domains need a function")
        self.kind = kind
        self.f = f
        self.level = float(level)

    @classmethod
    def all_space(cls):
        return cls("all_space")

    @classmethod
    def sublevel(cls, f, level=1.0):
        return cls("sublevel", as_fn(f), level)

    @property
    def bounded(self):
        return self.kind == "sublevel"

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "all_space":
            return np.ones(x.shape[:-1], dtype=bool)
        return self.f(x) < self.level - config.DOMAIN_MARGIN

    def boundary_parameter(self, u):
        """The t > 0 where the ray t*u meets the boundary, +inf if it never does."""
        u = np.asarray(u, dtype=float)
        if self.kind == "all_space":
            return np.full(u.shape[:-1], np.inf)
        fu = self.f(u)
        return np.divide(self.level, fu, out=np.full(fu.shape, np.inf), where=fu > 0)

    def sample(self, rng, count, dim, fraction=0.9, radius=1.0):
        """Random interior points; all-space domains sample the ball of `radius`."""
        dirs = rng.standard_normal((count, dim))
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        reach = np.minimum(self.boundary_parameter(dirs), radius if self.kind == "all_space" else np.inf)
        return dirs * (rng.uniform(0.0, fraction, count) * reach)[:, None]

    def __repr__(self):
        if self.kind == "all_space":
            return "DomainSpec(all_space)"
        return f"DomainSpec({self.f!r} < {self.level})"


# --- Metrics ---
class FinslerMetric:
    """
    F(x, y) on a domain, vectorised over leading axes of x and y.

    `projective`, when given, is the native projective factor P(x, y); the
    geometry module falls back to finite differences otherwise.
    """

    def __init__(
        self,
        evaluator,
        dim,
        domain=None,
        source="closed_form",
        projective=None,
        params=None,
        descriptor=None,
        is_funk=False,
        curvature=None,
    ):
        self._evaluator = evaluator
        self._projective = projective
        self.dim = int(dim)
        self.domain = domain or DomainSpec.all_space()
        self.source = source
        self.params = dict(params or {})
        self.descriptor = descriptor
        self.is_funk = is_funk
        self.curvature = curvature

    def _check(self, x):
        inside = self.domain.contains(x)
        if not np.all(inside):
            raise OutsideDomain(f"x outside the domain {self.domain!r}")

    def evaluate(self, x, y, check=True):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if check:
            self._check(x)
        return self._evaluator(x, y)

    def __call__(self, x, y):
        return as_output(self.evaluate(x, y))

    @property
    def has_projective_factor(self):
        return self._projective is not None

    def projective(self, x, y, check=True):
        if self._projective is None:
            raise BadInput(f"{self.name} has no closed-form projective factor")
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if check:
            self._check(x)
        return self._projective(x, y)

    def contains(self, x):
        return self.domain.contains(x)

    def sample_points(self, rng, count, fraction=0.9, radius=1.0):
        return self.domain.sample(rng, count, self.dim, fraction, radius)

    @property
    def name(self):
        if self.source == "closed_form":
            return self.params.get("kind", "closed_form")
        return self.source

    def to_dict(self):
        if self.descriptor is None:
            raise BadInput(f"{self.name} was built from callables and has no descriptor")
        return copy.deepcopy(self.descriptor)

    def __repr__(self):
        return f"FinslerMetric({self.name}, dim={self.dim}, {self.domain!r})"


# --- Closed-form helpers ---
def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _wedge_sq(x, y):
    """|x|^2 |y|^2 - <x, y>^2 as a sum of squared 2x2 minors."""
    iu, ju = np.triu_indices(x.shape[-1], k=1)
    return np.sum((x[..., iu] * y[..., ju] - x[..., ju] * y[..., iu]) ** 2, axis=-1)


def _safe_div(num, den):
    return np.divide(num, den, out=np.zeros(np.broadcast_shapes(np.shape(num), np.shape(den))), where=den != 0)


def euclid_funk_value(x, y):
    """Funk metric of the unit ball: (sqrt(|y|^2 - wedge^2) + <x,y>) / (1 - |x|^2)."""
    root = np.sqrt(np.maximum(_dot(y, y) - _wedge_sq(x, y), 0.0))
    return (root + _dot(x, y)) / (1.0 - _dot(x, x))


def _randers_terms(x, y, a):
    u = x @ a
    v = y @ a
    w = _dot(x, y)
    s = _dot(x, x)
    b = (1.0 - u) ** 2 - s
    big_a = b * (_dot(y, y) - v**2) + (w + (1.0 - u) * v) ** 2
    return u, v, w, s, b, np.sqrt(np.maximum(big_a, 0.0))


def randers_funk_value(x, y, a):
    """Solution of P = phi(y + x P) for phi = |.| + <a, .>."""
    u, v, w, _, b, root = _randers_terms(x, y, a)
    return (root + (1.0 - u) * v + w) / b


def _scaled_funk(value_fn, k, x, y, *args):
    """k * Q(k x, y): the solution for the base scaled by k."""
    if k == 0.0:
        return np.zeros(np.broadcast_shapes(x.shape, y.shape)[:-1])
    return k * value_fn(k * x, y, *args)


def _berwald(x, y):
    root = np.sqrt(np.maximum(_dot(y, y) - _wedge_sq(x, y), 0.0))
    s = _dot(x, x)
    return _safe_div((root + _dot(x, y)) ** 2, (1.0 - s) ** 2 * root)


def _riemann(lam):
    def evaluator(x, y):
        return np.sqrt(np.maximum(_dot(y, y) + lam * _wedge_sq(x, y), 0.0)) / (1.0 + lam * _dot(x, x))

    def projective(x, y):
        return -lam * _dot(x, y) / (1.0 + lam * _dot(x, x))

    return evaluator, projective


def _bryant(alpha):
    cos2, sin2 = np.cos(2.0 * alpha), np.sin(2.0 * alpha)

    def evaluator(x, y):
        yy = _dot(y, y)
        s = _dot(x, x)
        b = yy * cos2 + _wedge_sq(x, y)
        a = b**2 + (yy * sin2) ** 2
        c = _dot(x, y) * sin2
        d = s**2 + 2.0 * s * cos2 + 1.0
        return np.sqrt(np.maximum((np.sqrt(a) + b) / (2.0 * d) + (c / d) ** 2, 0.0)) + c / d

    return evaluator


def _randers_k0(a):
    def projective(x, y):
        return randers_funk_value(x, y, a)

    def evaluator(x, y):
        u, v, w, s, b, root = _randers_terms(x, y, a)
        p = (root + (1.0 - u) * v + w) / b
        factor = (1.0 - u) / b + _safe_div((1.0 - u) * w + v * s, root * b)
        return p * factor

    return evaluator, projective


def _km1_pair(value_fn, c, *args):
    def plus_minus(x, y):
        plus = _scaled_funk(value_fn, c + 1.0, x, y, *args)
        minus = _scaled_funk(value_fn, c - 1.0, x, y, *args)
        return plus, minus

    def evaluator(x, y):
        plus, minus = plus_minus(x, y)
        return 0.5 * (plus - minus)

    def projective(x, y):
        plus, minus = plus_minus(x, y)
        return 0.5 * (plus + minus)

    return evaluator, projective


def _drift(params, dim):
    if "a" in params:
        a = np.asarray(params["a"], dtype=float)
    elif "a1" in params:
        a = np.zeros(dim)
        a[0] = float(params["a1"])
    else:
        raise BadParameter("Randers families need 'a' or 'a1'")
    if np.linalg.norm(a) >= 1.0:
        raise BadParameter(f"Randers drift needs |a| < 1, got {np.linalg.norm(a):.6g}")
    return a


CLOSED_CURVATURE = {
    "euclid_funk": -0.25,
    "berwald": 0.0,
    "hilbert_ball": -1.0,
    "bryant": 1.0,
    "randers_k0": 0.0,
    "randers_km1": -1.0,
    "euclid_km1": -1.0,
}


def closed_metric(kind, **params):
    """
    Closed-form metric of the given kind.

    Kinds: euclid_funk, berwald, riemann (lam), bryant (alpha), randers_k0 (a or a1),
    randers_km1 (a or a1, c), euclid_km1 (c), hilbert_ball. `n` sets the dimension.
    """
    n = int(params.pop("n", 2))
    if n < 2:
        raise BadParameter(f"dimension must be at least 2, got {n}")
    ball = DomainSpec.sublevel(Euclidean(dim=n))
    stored = {"kind": kind, "n": n}
    projective = None
    is_funk = False
    curvature = CLOSED_CURVATURE.get(kind)

    if kind == "euclid_funk":
        evaluator, projective, domain, is_funk = euclid_funk_value, lambda x, y: 0.5 * euclid_funk_value(x, y), ball, True
    elif kind == "berwald":
        evaluator, projective, domain = _berwald, euclid_funk_value, ball
    elif kind in ("riemann", "hilbert_ball"):
        lam = -1.0 if kind == "hilbert_ball" else float(params.get("lam", params.get("lambda", np.nan)))
        if not np.isfinite(lam):
            raise BadParameter("riemann needs a finite 'lam'")
        evaluator, projective = _riemann(lam)
        domain = DomainSpec.all_space() if lam >= 0 else DomainSpec.sublevel(Scaled(Euclidean(dim=n), np.sqrt(-lam)))
        if kind == "riemann":
            stored["lam"] = lam
            curvature = lam
    elif kind == "bryant":
        alpha = float(params.get("alpha", np.nan))
        if not np.isfinite(alpha) or not 0.0 <= alpha < np.pi / 2:
            raise BadParameter(f"bryant needs alpha in [0, pi/2), got {params.get('alpha')}")
        evaluator, domain = _bryant(alpha), DomainSpec.all_space()
        stored["alpha"] = alpha
    elif kind == "randers_k0":
        a = _drift(params, n)
        evaluator, projective = _randers_k0(a)
        domain = DomainSpec.sublevel(Randers(a))
        stored["a"] = a.tolist()
    elif kind == "randers_km1":
        a = _drift(params, n)
        c = float(params.get("c", np.nan))
        if not c >= 1.0:
            raise BadParameter(f"randers_km1 needs c >= 1, got {params.get('c')}")
        evaluator, projective = _km1_pair(randers_funk_value, c, a)
        domain = DomainSpec.sublevel(Scaled(Randers(a), c + 1.0))
        stored.update(a=a.tolist(), c=c)
    elif kind == "euclid_km1":
        c = float(params.get("c", np.nan))
        if not c >= 0.0:
            raise BadParameter(f"euclid_km1 needs c >= 0, got {params.get('c')}")
        evaluator, projective = _km1_pair(lambda x, y: euclid_funk_value(x, y), c)
        domain = DomainSpec.sublevel(Scaled(Euclidean(dim=n), c + 1.0))
        stored["c"] = c
    else:
        raise BadParameter(f"unknown closed form '{kind}'")

    return FinslerMetric(
        evaluator,
        dim=n,
        domain=domain,
        source="closed_form",
        projective=projective,
        params=stored,
        descriptor={"family": "closed", **stored},
        is_funk=is_funk,
        curvature=curvature,
    )


def closed_form(kind, x, y, **params):
    """Value of a closed-form metric at (x, y)."""
    x = np.asarray(x, dtype=float)
    params.setdefault("n", x.shape[-1])
    return closed_metric(kind, **params)(x, y)


# --- Constructions from initial data ---
def _require_positive(f, name):
    values = f(unit_directions(config.REGULARITY_SAMPLES, f.dim))
    if np.any(values <= 0.0):
        raise NotPositive(f"{name} must be positive away from 0")
    return values


def build_k0(psi, phi, derivative="implicit", descriptor=None):
    """
    Metric with K = 0 and initial data F(0, .) = psi, P(0, .) = phi:
    F = psi(y + x P) (1 + x^k P_{y^k}) with P solving P = phi(y + x P).

    `derivative` picks how 1 + x^k P_{y^k} is obtained: "implicit" uses
    1 / (1 - x . grad phi(y + x P)), "central_difference" differentiates the
    solved P.
    """
    psi, phi = as_fn(psi), as_fn(phi)
    if psi.dim != phi.dim:
        raise BadParameter(f"dimension mismatch: {psi.dim} vs {phi.dim}")
    if derivative not in ("implicit", "central_difference"):
        raise BadParameter(f"unknown derivative mode '{derivative}'")
    _require_positive(psi, "psi")
    if descriptor is None and _describable(psi, phi):
        descriptor = {"family": "k0", "psi": psi.to_dict(), "phi": phi.to_dict()}

    if phi.is_zero or phi.vanishes():

        def minkowski(x, y):
            return psi(np.broadcast_to(y, np.broadcast_shapes(x.shape, y.shape)))

        def zero(x, y):
            return np.zeros(np.broadcast_shapes(x.shape, y.shape)[:-1])

        return FinslerMetric(minkowski, psi.dim, DomainSpec.all_space(), "k0_construction", zero,
                             {"psi": psi, "phi": phi}, descriptor, curvature=0.0)

    values = phi(unit_directions(config.REGULARITY_SAMPLES, phi.dim))
    if np.any(values <= 0.0):
        raise Inadmissible("K = 0 needs phi identically 0 or positive away from 0")

    def projective(x, y):
        return np.asarray(solve_phi(phi, x, y).value, dtype=float)

    def evaluator(x, y):
        p = projective(x, y)
        xi = y + x * p[..., None]
        if derivative == "implicit":
            factor = 1.0 / (1.0 - _dot(x, phi.gradient(xi)))
        else:
            xs = x[..., None, :]
            grad_p = central_gradient(lambda z: np.asarray(solve_phi(phi, xs, z).value), y,
                                      relative_step(y, config.FD_STEP_Y))
            factor = 1.0 + _dot(x, grad_p)
        return psi(xi) * factor

    return FinslerMetric(evaluator, psi.dim, DomainSpec.sublevel(phi), "k0_construction", projective,
                         {"psi": psi, "phi": phi}, descriptor, curvature=0.0)


def _km1_case(psi, phi):
    """Which admissible K = -1 configuration (psi, phi) is in, from samples."""
    dirs = unit_directions(config.REGULARITY_SAMPLES, psi.dim)
    psi_v, phi_v = psi(dirs), phi(dirs)
    if np.any(psi_v <= 0.0):
        raise NotPositive("psi must be positive away from 0")
    if np.max(np.abs(phi_v - psi_v)) <= 1e-14 * np.max(psi_v):
        return 2
    if np.all(phi_v > psi_v):
        return 3
    if np.all((phi_v < psi_v) & (phi_v > -psi_v)):
        return 1 if psi.is_reversible() and phi.is_odd() else 4
    raise Inadmissible("K = -1 needs phi = psi, psi < phi or -psi < phi < psi away from 0")


def build_km1(psi, phi, descriptor=None):
    """
    Metric with K = -1 and initial data (psi, phi): F = (Phi_+ - Phi_-) / 2,
    P = (Phi_+ + Phi_-) / 2, Phi_+- solving the equation for phi +- psi on
    {phi + psi < 1}.
    """
    psi, phi = as_fn(psi), as_fn(phi)
    if psi.dim != phi.dim:
        raise BadParameter(f"dimension mismatch: {psi.dim} vs {phi.dim}")
    case = _km1_case(psi, phi)
    plus_fn, minus_fn = phi + psi, phi - psi
    if descriptor is None and _describable(psi, phi):
        descriptor = {"family": "km1", "psi": psi.to_dict(), "phi": phi.to_dict()}

    def pair(x, y):
        plus = np.asarray(solve_phi(plus_fn, x, y).value, dtype=float)
        if case == 2:
            minus = np.zeros(plus.shape)
        elif case == 3:
            minus = np.asarray(solve_phi(minus_fn, x, y).value, dtype=float)
        else:
            minus = np.asarray(solve_phi_signed(minus_fn, plus_fn, x, y, branch="largest").value, dtype=float)
        return plus, minus

    def evaluator(x, y):
        plus, minus = pair(x, y)
        return 0.5 * (plus - minus)

    def projective(x, y):
        plus, minus = pair(x, y)
        return 0.5 * (plus + minus)

    logger.debug("K = -1 construction in configuration %d", case)
    return FinslerMetric(evaluator, psi.dim, DomainSpec.sublevel(plus_fn), "km1_construction", projective,
                         {"psi": psi, "phi": phi, "case": case}, descriptor, curvature=-1.0)


def funk_metric(phi, descriptor=None):
    """The Funk metric of {phi < 1}: F solves F = phi(y + x F), P = F / 2."""
    phi = as_fn(phi)
    _require_positive(phi, "phi")
    if descriptor is None and _describable(phi):
        descriptor = {"family": "funk", "phi": phi.to_dict()}

    def evaluator(x, y):
        return np.asarray(solve_phi(phi, x, y).value, dtype=float)

    return FinslerMetric(evaluator, phi.dim, DomainSpec.sublevel(phi), "funk",
                         lambda x, y: 0.5 * evaluator(x, y), {"phi": phi}, descriptor, is_funk=True,
                         curvature=-0.25)


def hilbert_of(funk):
    """H(x, y) = (F(x, y) + F(x, -y)) / 2 with P_H = (F(x, y) - F(x, -y)) / 2."""
    if not funk.is_funk:
        raise BadInput(f"hilbert_of needs a Funk metric, got {funk.name}")

    def evaluator(x, y):
        return 0.5 * (funk.evaluate(x, y, check=False) + funk.evaluate(x, -y, check=False))

    def projective(x, y):
        return 0.5 * (funk.evaluate(x, y, check=False) - funk.evaluate(x, -y, check=False))

    descriptor = None if funk.descriptor is None else {"family": "hilbert", "of": funk.to_dict()}
    return FinslerMetric(evaluator, funk.dim, funk.domain, "hilbert", projective, {"of": funk.name}, descriptor,
                        curvature=-1.0)


def reverse(metric):
    """Reverse metric F(x, -y); its projective factor is -P(x, -y)."""

    def evaluator(x, y):
        return metric.evaluate(x, -y, check=False)

    projective = None
    if metric.has_projective_factor:

        def projective(x, y):
            return -metric.projective(x, -y, check=False)

    descriptor = None if metric.descriptor is None else {"family": "reverse", "of": metric.to_dict()}
    return FinslerMetric(evaluator, metric.dim, metric.domain, "reverse", projective, {"of": metric.name}, descriptor,
                        curvature=metric.curvature)


# --- Classification ---
@dataclass(frozen=True)
class Classification:
    curvature_sign: int
    case_label: str
    case_number: int
    backward_complete: bool
    reversibility_finite: bool


KM1_CASES = {1: "hilbert", 2: "funk", 3: "dominant", 4: "intermediate"}


def classify(psi, phi, curvature):
    """
    Global type of the forward complete metric with initial data (psi, phi).

    K = 0:  1 minkowski (phi = 0), 2 funk_type (phi a weak Minkowski norm).
    K = -1: 1 hilbert, 2 funk (phi = psi), 3 dominant (psi < phi),
            4 intermediate (-psi < phi < psi, not the Hilbert case).
    """
    psi, phi = as_fn(psi), as_fn(phi)
    if curvature == 0:
        _require_positive(psi, "psi")
        if phi.is_zero or phi.vanishes():
            return Classification(0, "minkowski", 1, True, True)
        values = phi(unit_directions(config.REGULARITY_SAMPLES, phi.dim))
        if np.all(values > 0.0):
            return Classification(0, "funk_type", 2, False, False)
        raise Inadmissible("K = 0 needs phi identically 0 or positive away from 0")
    if curvature == -1:
        case = _km1_case(psi, phi)
        return Classification(-1, KM1_CASES[case], case, case == 1, case == 1)
    raise BadParameter(f"classification covers K = 0 and K = -1, got {curvature}")


def critical_lambda(c):
    """Threshold a1 below which the Randers K = -1 family is positive definite on all of its domain."""
    c = float(c)
    if not c > 1.0:
        raise BadParameter(f"critical_lambda needs c > 1, got {c}")
    p, m = (c + 1.0) ** (2.0 / 3.0), (c - 1.0) ** (2.0 / 3.0)
    return 0.5 * (p - m) * np.sqrt(p + m)


# --- Descriptors ---
def _describable(*fns):
    try:
        for f in fns:
            f.to_dict()
    except BadInput:
        return False
    return True


def _norm(desc, key, dim=None):
    if key not in desc:
        raise ParseError("missing field", field=key)
    return norm_from_dict(desc[key], dim)


def metric_from_descriptor(desc):
    """
    Builds a metric from a JSON descriptor such as
    {"family": "k0", "psi": {...}, "phi": {...}} or
    {"family": "closed", "kind": "bryant", "alpha": 0.3, "n": 2}.
    """
    if not isinstance(desc, dict) or "family" not in desc:
        raise ParseError("metric descriptor needs a 'family'", field="family")
    family = desc["family"]
    if family == "closed":
        params = {k: v for k, v in desc.items() if k not in ("family", "kind")}
        if "kind" not in desc:
            raise ParseError("missing field", field="kind")
        try:
            return closed_metric(desc["kind"], **params)
        except BadParameter as exc:
            raise ParseError(str(exc), field="kind")
    if family in ("k0", "km1"):
        psi = _norm(desc, "psi")
        phi = _norm(desc, "phi", psi.dim)
        return build_k0(psi, phi) if family == "k0" else build_km1(psi, phi)
    if family == "minkowski":
        psi = _norm(desc, "psi")
        return build_k0(psi, Zero(dim=psi.dim))
    if family == "funk":
        return funk_metric(_norm(desc, "phi"))
    if family == "hilbert":
        inner = desc.get("of") or {"family": "funk", "phi": desc.get("phi")}
        if inner.get("phi") is None and "of" not in desc:
            raise ParseError("hilbert needs 'of' or 'phi'", field="hilbert")
        return hilbert_of(metric_from_descriptor(inner))
    if family == "reverse":
        if "of" not in desc:
            raise ParseError("missing field", field="of")
        return reverse(metric_from_descriptor(desc["of"]))
    raise ParseError(f"unknown metric family '{family}'", field="family")


def initial_data(metric):
    """
    (psi, phi) = (F(0, .), P(0, .)) for metrics built from initial data or
    closed forms that have a known one.
    """
    if metric.source in ("k0_construction", "km1_construction"):
        return metric.params["psi"], metric.params["phi"]
    if metric.source != "closed_form":
        raise BadInput(f"no initial data recorded for {metric.name}")
    kind, n = metric.params["kind"], metric.params["n"]
    euclid = Euclidean(dim=n)
    if kind == "berwald":
        return euclid, euclid
    if kind == "hilbert_ball":
        return euclid, Zero(dim=n)
    if kind == "euclid_km1":
        return euclid, euclid * metric.params["c"]
    if kind in ("randers_k0", "randers_km1"):
        randers = Randers(np.asarray(metric.params["a"]))
        return randers, randers * metric.params.get("c", 1.0)
    raise BadInput(f"{kind} is not given by (psi, phi) with K = 0 or K = -1")
