# src/homogeneous.py

import logging
from dataclasses import dataclass

import numpy as np

from src import config
from src.errors import BadInput, BadParameter, NonFinite, NotPositive, ParseError, ZeroVector
from src.numerics import (
    as_output,
    central_gradient,
    central_hessian,
    relative_step,
    unit_directions,
)

logger = logging.getLogger(__name__)


class HomogeneousFn:
    """
    A positively 1-homogeneous function on R^n, evaluated over the last axis.

    Subclasses implement `_eval` and, when a closed form exists, `_grad`.
    Instances are immutable after construction.
    """

    kind = "custom"
    has_closed_gradient = False

    def __init__(self, dim=2, grad_mode="closed_form"):
        if dim < 2:
            raise BadParameter(f"dimension must be at least 2, got {dim}")
        if grad_mode not in ("closed_form", "central_difference"):
            raise BadParameter(f"unknown grad_mode '{grad_mode}'")
        self.dim = dim
        self.grad_mode = grad_mode

    def __call__(self, y):
        return self._eval(np.asarray(y, dtype=float))

    def _eval(self, y):
        raise NotImplementedError

    def _grad(self, y):
        raise NotImplementedError

    def gradient(self, y):
        y = np.asarray(y, dtype=float)
        if self.grad_mode == "closed_form" and self.has_closed_gradient:
            return self._grad(y)
        return central_gradient(self._eval, y, relative_step(y, config.FD_STEP_Y))

    def half_square_hessian(self, y):
        """Hessian of f^2 / 2 by central differences, shape (..., n, n)."""
        y = np.asarray(y, dtype=float)
        return central_hessian(
            lambda z: 0.5 * self._eval(z) ** 2, y, relative_step(y, config.FD_STEP_HESS)
        )

    @property
    def is_zero(self):
        return False

    # --- Sampled predicates ---
    def _extremes(self, samples):
        dirs = unit_directions(samples, self.dim)
        return self(dirs), self(-dirs)

    def is_reversible(self, samples=config.REGULARITY_SAMPLES, tol=1e-10):
        forward, backward = self._extremes(samples)
        scale = max(1.0, float(np.max(np.abs(forward))))
        return bool(np.max(np.abs(forward - backward)) <= tol * scale)

    def is_odd(self, samples=config.REGULARITY_SAMPLES, tol=1e-10):
        forward, backward = self._extremes(samples)
        scale = max(1.0, float(np.max(np.abs(forward))))
        return bool(np.max(np.abs(forward + backward)) <= tol * scale)

    def vanishes(self, samples=config.REGULARITY_SAMPLES, tol=1e-14):
        forward, _ = self._extremes(samples)
        return bool(np.max(np.abs(forward)) <= tol)

    # --- Arithmetic ---
    def __add__(self, other):
        return Combination(self, other, sign=1)

    def __sub__(self, other):
        return Combination(self, other, sign=-1)

    def __mul__(self, c):
        return Scaled(self, float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return Scaled(self, -1.0)

    def to_dict(self):
        raise BadInput(f"'{self.kind}' functions have no JSON descriptor")

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class Euclidean(HomogeneousFn):
    kind = "euclidean"
    has_closed_gradient = True

    def _eval(self, y):
        return np.linalg.norm(y, axis=-1)

    def _grad(self, y):
        r = np.linalg.norm(y, axis=-1)[..., None]
        return np.divide(y, r, out=np.zeros(np.broadcast_shapes(y.shape, r.shape)), where=r > 0)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}


class Randers(HomogeneousFn):
    """|y| + <a, y> with |a| < 1."""

    kind = "randers"
    has_closed_gradient = True

    def __init__(self, a, grad_mode="closed_form"):
        a = np.asarray(a, dtype=float)
        if a.ndim != 1:
            raise BadParameter("Randers drift must be a vector")
        if np.linalg.norm(a) >= 1.0:
            raise BadParameter(f"Randers drift needs |a| < 1, got |a| = {np.linalg.norm(a):.6g}")
        super().__init__(dim=a.size, grad_mode=grad_mode)
        self.a = a

    def _eval(self, y):
        return np.linalg.norm(y, axis=-1) + y @ self.a

    def _grad(self, y):
        return Euclidean._grad(self, y) + self.a

    def to_dict(self):
        return {"kind": self.kind, "a": self.a.tolist()}

    def __repr__(self):
        return f"Randers(a={self.a.tolist()})"


class Linear(HomogeneousFn):
    kind = "linear"
    has_closed_gradient = True

    def __init__(self, a, grad_mode="closed_form"):
        a = np.asarray(a, dtype=float)
        super().__init__(dim=a.size, grad_mode=grad_mode)
        self.a = a

    def _eval(self, y):
        return y @ self.a

    def _grad(self, y):
        return np.broadcast_to(self.a, y.shape).copy()

    def to_dict(self):
        return {"kind": self.kind, "a": self.a.tolist()}


class Zero(HomogeneousFn):
    kind = "zero"
    has_closed_gradient = True

    def _eval(self, y):
        return np.zeros(y.shape[:-1])

    def _grad(self, y):
        return np.zeros(y.shape)

    @property
    def is_zero(self):
        return True

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}


class Scaled(HomogeneousFn):
    kind = "scaled"
    has_closed_gradient = True

    def __init__(self, base, c):
        super().__init__(dim=base.dim, grad_mode=base.grad_mode)
        self.base = base
        self.c = float(c)

    def _eval(self, y):
        return self.c * self.base._eval(y)

    def _grad(self, y):
        return self.c * self.base.gradient(y)

    @property
    def is_zero(self):
        return self.c == 0.0 or self.base.is_zero

    def to_dict(self):
        return {"kind": self.kind, "c": self.c, "base": self.base.to_dict()}

    def __repr__(self):
        return f"{self.c}*{self.base!r}"


class Combination(HomogeneousFn):
    """Sum (sign=1) or difference (sign=-1) of two homogeneous functions."""

    has_closed_gradient = True

    def __init__(self, left, right, sign=1):
        if left.dim != right.dim:
            raise BadParameter(f"dimension mismatch: {left.dim} vs {right.dim}")
        super().__init__(dim=left.dim, grad_mode=left.grad_mode)
        self.left = left
        self.right = right
        self.sign = 1 if sign > 0 else -1

    @property
    def kind(self):
        return "sum" if self.sign > 0 else "difference"

    def _eval(self, y):
        return self.left._eval(y) + self.sign * self.right._eval(y)

    def _grad(self, y):
        return self.left.gradient(y) + self.sign * self.right.gradient(y)

    @property
    def is_zero(self):
        return self.left.is_zero and self.right.is_zero

    def to_dict(self):
        return {"kind": self.kind, "left": self.left.to_dict(), "right": self.right.to_dict()}

    def __repr__(self):
        op = "+" if self.sign > 0 else "-"
        return f"({self.left!r} {op} {self.right!r})"


class Custom(HomogeneousFn):
    """Wraps a vectorised callable; gradient by central differences unless given."""

    def __init__(self, func, dim=2, grad=None, grad_mode="closed_form"):
        super().__init__(dim=dim, grad_mode=grad_mode)
        self._func = func
        self._grad_func = grad
        self.has_closed_gradient = grad is not None

    def _eval(self, y):
        return np.asarray(self._func(y), dtype=float)

    def _grad(self, y):
        return np.asarray(self._grad_func(y), dtype=float)


@dataclass(frozen=True)
class RegularityReport:
    positive: bool
    quasi_regular: bool
    strictly_convex: bool
    pd_rate: float
    min_eig: float
    strength: str


@dataclass(frozen=True)
class MinkowskiNorm:
    base: HomogeneousFn
    strength: str

    @classmethod
    def from_fn(cls, f, samples=config.REGULARITY_SAMPLES):
        report = regularity_check(f, samples)
        return cls(base=f, strength=report.strength)

    @property
    def dim(self):
        return self.base.dim

    def __call__(self, y):
        return self.base(y)


def as_fn(f):
    """Accepts a HomogeneousFn or a MinkowskiNorm wrapper."""
    if isinstance(f, MinkowskiNorm):
        return f.base
    if isinstance(f, HomogeneousFn):
        return f
    raise BadInput(f"expected a homogeneous function, got {type(f).__name__}")


def eval_and_grad(f, y):
    """
    Value and gradient of `f` at nonzero `y`.

    Returns:
        (value, gradient); the value is a float for a single vector.
    """
    f = as_fn(f)
    y = np.asarray(y, dtype=float)
    if np.any(np.linalg.norm(y, axis=-1) == 0.0):
        raise ZeroVector("gradient requested at y = 0")
    with np.errstate(over="ignore", invalid="ignore"):
        value = f(y)
        grad = f.gradient(y)
    if not (np.all(np.isfinite(value)) and np.all(np.isfinite(grad))):
        raise NonFinite(f"non-finite value or gradient of {f!r}")
    return as_output(value), grad


def regularity_check(f, samples=config.REGULARITY_SAMPLES, seed=None):
    """
    Sampled regularity diagnostics: positivity, triangle inequality,
    strict convexity of the indicatrix and Hessian definiteness of f^2/2.
    """
    f = as_fn(f)
    dirs = unit_directions(samples, f.dim)
    values = f(dirs)
    if np.any(values <= 0.0):
        worst = dirs[np.argmin(values)]
        raise NotPositive(f"f(y) <= 0 at sampled direction {worst.round(6).tolist()}")

    rng = np.random.default_rng(config.SEED if seed is None else seed)
    first = rng.standard_normal((samples, f.dim)) * rng.uniform(0.1, 10.0, (samples, 1))
    second = rng.standard_normal((samples, f.dim)) * rng.uniform(0.1, 10.0, (samples, 1))
    slack = f(first) + f(second) - f(first + second)
    quasi_regular = bool(np.all(slack >= -1e-12 * (f(first) + f(second))))

    points = dirs / values[:, None]
    if f.dim == 2:
        edges = np.roll(points, -1, axis=0) - points
        turns = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
        scale = float(np.mean(np.linalg.norm(points, axis=-1))) ** 2
        strictly_convex = bool(np.all(turns > config.COLLINEAR_TOL * scale * (2 * np.pi / samples) ** 2))
    else:
        i, j = rng.integers(0, samples, (2, samples))
        keep = np.abs(np.einsum("ij,ij->i", dirs[i], dirs[j])) < 0.99
        mid = 0.5 * (points[i[keep]] + points[j[keep]])
        strictly_convex = bool(np.all(f(mid) < 1.0 - config.COLLINEAR_TOL))

    hess = f.half_square_hessian(dirs)
    eigs = np.linalg.eigvalsh(hess)
    eps = config.PD_EPS * np.trace(hess, axis1=-2, axis2=-1) / f.dim
    pd = eigs[:, 0] > eps
    pd_rate = float(np.mean(pd))

    if strictly_convex and pd_rate == 1.0:
        strength = "strong"
    elif strictly_convex:
        strength = "weak"
    elif quasi_regular:
        strength = "pseudo"
    else:
        strength = "none"
    logger.debug("regularity of %r: %s (pd rate %.3f)", f, strength, pd_rate)
    return RegularityReport(
        positive=True,
        quasi_regular=quasi_regular,
        strictly_convex=strictly_convex,
        pd_rate=pd_rate,
        min_eig=float(np.min(eigs[:, 0])),
        strength=strength,
    )


# --- Descriptors ---
def _vector(desc, key):
    if key not in desc:
        raise ParseError("missing field", field=key)
    try:
        return np.asarray(desc[key], dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"expected a list of numbers, got {desc[key]!r}", field=key)


def norm_from_dict(desc, dim=None):
    """Builds a HomogeneousFn from its JSON descriptor."""
    if not isinstance(desc, dict) or "kind" not in desc:
        raise ParseError("norm descriptor needs a 'kind'", field="kind")
    kind = desc["kind"]
    dim = int(desc.get("dim", dim or 2))
    if kind == "euclidean":
        return Euclidean(dim=dim)
    if kind == "randers":
        return Randers(_vector(desc, "a"))
    if kind == "linear":
        return Linear(_vector(desc, "a"))
    if kind == "zero":
        return Zero(dim=dim)
    if kind == "scaled":
        if "c" not in desc or "base" not in desc:
            raise ParseError("scaled norms need 'c' and 'base'", field="scaled")
        return Scaled(norm_from_dict(desc["base"], dim), float(desc["c"]))
    if kind in ("sum", "difference"):
        if "left" not in desc or "right" not in desc:
            raise ParseError(f"{kind} needs 'left' and 'right'", field=kind)
        left = norm_from_dict(desc["left"], dim)
        right = norm_from_dict(desc["right"], dim)
        return left + right if kind == "sum" else left - right
    raise ParseError(f"unknown norm kind '{kind}'", field="kind")
