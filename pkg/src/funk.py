# src/funk.py
"""
Solver for the implicit equation Phi(x, y) = phi(y + x * Phi(x, y)) and its
signed variants.

Every entry point broadcasts over leading axes of `x` and `y`: one call solves
a whole batch with a vectorised bracketed Newton iteration.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import elementwise

from src import config
from src.errors import BadInput, BranchMissing, NoConvergence, NotPositive, OutsideDomain
from src.homogeneous import HomogeneousFn, as_fn
from src.numerics import as_output, unit_directions

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FunkSolution:
    value: float | np.ndarray
    bracket: tuple
    iterations: int
    residual: float | np.ndarray
    crossings: int | np.ndarray | None = None

    @property
    def multiple(self):
        """True where the sign scan saw more than one root."""
        if self.crossings is None:
            return False
        return bool(np.any(np.asarray(self.crossings) > 1))


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _equation(phi, x, y):
    """h(t) = t - phi(y + x t) and its derivative 1 - x . grad phi(y + x t)."""

    def h(t):
        xi = y + x * t[..., None]
        return t - phi(xi), 1.0 - _dot(x, phi.gradient(xi))

    return h


def _bracketed_newton(h, lo, hi, start, tol=config.SOLVER_TOL, max_iter=config.SOLVER_MAX_ITER):
    """
    Newton's method kept inside a sign-change bracket, falling back to
    bisection whenever a step leaves it.

    Returns:
        (root, iterations used, mask of points that did not converge)
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    t = np.array(start, dtype=float)
    h_lo, _ = h(lo)
    val, der = h(t)
    active = np.abs(val) > tol * (1.0 + np.abs(t))
    iterations = 0
    while np.any(active) and iterations < max_iter:
        iterations += 1
        with np.errstate(divide="ignore", invalid="ignore"):
            t_new = t - val / der
        left, right = np.minimum(lo, hi), np.maximum(lo, hi)
        outside = ~np.isfinite(t_new) | (t_new <= left) | (t_new >= right)
        t_new = np.where(outside, 0.5 * (lo + hi), t_new)
        t_new = np.where(active, t_new, t)
        val, der = h(t_new)
        same = np.sign(val) == np.sign(h_lo)
        lo = np.where(active & same, t_new, lo)
        h_lo = np.where(active & same, val, h_lo)
        hi = np.where(active & ~same, t_new, hi)
        scale = tol * (1.0 + np.abs(t_new))
        done = (np.abs(val) <= scale) | (np.abs(hi - lo) <= scale)
        t = t_new
        active &= ~done
    return t, iterations, active


def _check_domain(phi, x, name="phi"):
    phi_x = phi(x)
    if np.any(phi_x >= 1.0 - config.DOMAIN_MARGIN):
        raise OutsideDomain(f"{name}(x) must be < 1, got {np.max(phi_x):.6g}")
    return phi_x


def _finish(phi, x, y, t, lo, hi, iterations, failed, check_roots):
    if np.any(failed):
        raise NoConvergence(
            f"implicit solve did not converge in {config.SOLVER_MAX_ITER} iterations "
            f"for {int(np.sum(failed))} point(s); phi may not be quasi-regular"
        )
    residual = np.abs(t - phi(y + x * t[..., None]))
    crossings = None
    if check_roots:
        crossings = root_count(phi, x, y)
        if np.any(crossings > 1):
            logger.warning("multiple roots of the implicit equation at %d point(s)", int(np.sum(crossings > 1)))
    logger.debug("implicit solve converged in %d iterations", iterations)
    return FunkSolution(
        value=as_output(t),
        bracket=(as_output(lo), as_output(hi)),
        iterations=iterations,
        residual=as_output(residual),
        crossings=None if crossings is None else as_output(crossings),
    )


def solve_phi(phi, x, y, check_roots=False):
    """
    Solves Phi(x, y) = phi(y + x Phi) for positive phi on {phi < 1}.

    The root lies in [0, phi(y) / (1 - phi(x))] for convex phi; Newton starts
    from the upper end. For non-convex phi the upper end is pushed out until h
    changes sign and `check_roots=True` reports the number of crossings.

    Returns:
        FunkSolution
    """
    phi = as_fn(phi)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    phi_x = _check_domain(phi, x)
    phi_y = phi(y)
    if np.any(phi_y < 0.0):
        raise NotPositive("solve_phi needs phi >= 0; use solve_phi_signed for signed data")
    h = _equation(phi, x, y)
    lo = np.zeros(phi_y.shape)
    hi = phi_y / (1.0 - phi_x)
    val_hi, _ = h(hi)
    for _ in range(config.BRACKET_EXPANSIONS):
        short = val_hi < 0.0
        if not np.any(short):
            break
        hi = np.where(short, 2.0 * hi + 1.0, hi)
        val_hi, _ = h(hi)
    t, iterations, failed = _bracketed_newton(h, lo, hi, hi)
    return _finish(phi, x, y, t, lo, hi, iterations, failed, check_roots)


def _signed_ratio_bounds(tilde, dominating):
    dirs = unit_directions(config.REGULARITY_SAMPLES, tilde.dim)
    dom = dominating(dirs)
    if np.any(dom <= 0.0):
        raise NotPositive("the dominating function must be positive")
    ratio = tilde(dirs) / dom
    if np.max(ratio) >= 1.0:
        raise BadInput(f"tilde_phi must stay below the dominating function (max ratio {np.max(ratio):.6g})")
    return max(0.0, -float(np.min(ratio))) + 1e-6


def solve_phi_signed(tilde_phi, dominating_phi, x, y, branch="largest", check_roots=False):
    """
    Root of t = tilde_phi(y + x t) for a signed tilde_phi bounded by a positive
    dominating function.

    branch:
        "nonneg"  - the root in [0, Phi_dom(x, y)]
        "nonpos"  - the root in [lo, 0], lo found by geometric expansion
        "largest" - nonneg where tilde_phi(y) >= 0, nonpos elsewhere
    """
    if branch not in ("nonneg", "nonpos", "largest"):
        raise BadInput(f"unknown branch '{branch}'")
    tilde = as_fn(tilde_phi)
    dom = as_fn(dominating_phi)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    dom_x = _check_domain(dom, x, "dominating_phi")
    eps = _signed_ratio_bounds(tilde, dom)

    h = _equation(tilde, x, y)
    tilde_y = tilde(y)
    if branch == "nonneg":
        upper = np.ones(tilde_y.shape, dtype=bool)
    elif branch == "nonpos":
        upper = np.zeros(tilde_y.shape, dtype=bool)
    else:
        upper = tilde_y >= 0.0

    dom_y = dom(y)
    # Upper branch: [0, Phi_dom(x, y)]
    top = np.asarray(solve_phi(dom, x, y).value, dtype=float)
    # Lower branch: [lo, 0], lo pushed out until h changes sign
    bottom = -eps * dom_y / np.maximum(1.0 - eps * dom(-x), 0.5) - 0.1 * dom_y
    h_zero, _ = h(np.zeros(tilde_y.shape))
    h_bottom, _ = h(bottom)
    for _ in range(config.BRACKET_EXPANSIONS):
        short = ~upper & (np.sign(h_bottom) == np.sign(h_zero)) & (h_zero != 0.0)
        if not np.any(short):
            break
        bottom = np.where(short, 2.0 * bottom, bottom)
        h_bottom, _ = h(bottom)

    lo = np.where(upper, 0.0, bottom)
    hi = np.where(upper, top, 0.0)
    h_lo, _ = h(lo)
    h_hi, _ = h(hi)
    missing = (np.sign(h_lo) == np.sign(h_hi)) & (h_lo != 0.0) & (h_hi != 0.0)
    if np.any(missing):
        raise BranchMissing(
            f"no root on the '{branch}' branch for {int(np.sum(missing))} point(s)"
        )
    start = np.where(upper, hi, lo)
    t, iterations, failed = _bracketed_newton(h, lo, hi, start)
    t = np.where(tilde_y == 0.0, 0.0, t)
    if np.any(tilde_y < 0.0) and np.max(-tilde_y / np.maximum(dom_y, 1e-300)) > eps:
        logger.warning("tilde_phi(y) fell below the sampled -eps bound; bracket may be loose")
    return _finish(tilde, x, y, t, lo, hi, iterations, failed, check_roots)


def root_count(phi, x, y, points=config.ROOT_SCAN_POINTS):
    """Sign changes of h(t) = t - phi(y + x t) on [0, phi(y)/(1 - phi(x)) + 1]."""
    phi = as_fn(phi)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    hi = phi(y) / (1.0 - phi(x)) + 1.0
    t = np.linspace(0.0, 1.0, points) * hi[..., None]
    h = t - phi(y[..., None, :] + x[..., None, :] * t[..., None])
    positive = h > 0.0
    return np.sum(positive[..., 1:] != positive[..., :-1], axis=-1)


def solution_gradient(phi, x, y, value=None):
    """
    Implicit derivative Phi_y = grad phi(xi) / (1 - x . grad phi(xi)) with
    xi = y + x Phi. Note 1 + x . Phi_y = 1 / (1 - x . grad phi(xi)).
    """
    phi = as_fn(phi)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if value is None:
        value = solve_phi(phi, x, y).value
    xi = y + x * np.asarray(value, dtype=float)[..., None]
    grad = phi.gradient(xi)
    return grad / (1.0 - _dot(x, grad))[..., None]


class TranslatedBase(HomogeneousFn):
    """phi_bar(y) = Phi(xbar, y), itself a positive homogeneous function."""

    kind = "translated"
    has_closed_gradient = True

    def __init__(self, phi, xbar):
        phi = as_fn(phi)
        super().__init__(dim=phi.dim, grad_mode=phi.grad_mode)
        self.phi = phi
        self.xbar = np.asarray(xbar, dtype=float)
        _check_domain(phi, self.xbar)

    def _eval(self, y):
        return np.asarray(solve_phi(self.phi, self.xbar, y).value, dtype=float)

    def _grad(self, y):
        return solution_gradient(self.phi, self.xbar, y)

    def __repr__(self):
        return f"TranslatedBase({self.phi!r}, xbar={self.xbar.tolist()})"


def translated_base(phi, xbar):
    return TranslatedBase(phi, xbar)


def translate_base_check(phi, xbar, samples=100, seed=None):
    """
    Max |Phi(x + xbar, y) - Phi_bar(x, y)| over sampled (x, y), where Phi_bar
    solves the equation with base phi_bar = Phi(xbar, .).
    """
    phi = as_fn(phi)
    phi_bar = translated_base(phi, xbar)
    rng = np.random.default_rng(config.SEED if seed is None else seed)
    dirs = unit_directions(samples, phi.dim, seed)
    radius = rng.uniform(0.0, 0.9, samples) / phi_bar(dirs)
    x = dirs * radius[:, None]
    y = rng.standard_normal((samples, phi.dim))
    lhs = np.asarray(solve_phi(phi, x + phi_bar.xbar, y).value)
    rhs = np.asarray(solve_phi(phi_bar, x, y).value)
    return float(np.max(np.abs(lhs - rhs)))


def indicatrix_translation_check(phi, x, samples=100):
    """
    Compares {Phi(x, .) = 1} with {phi = 1} - x along sampled rays and returns
    the max Euclidean deviation.
    """
    phi = as_fn(phi)
    x = np.asarray(x, dtype=float)
    phi_x = _check_domain(phi, x)
    dirs = unit_directions(samples, phi.dim)
    on_indicatrix = dirs / np.asarray(solve_phi(phi, x, dirs).value)[:, None]

    # phi(x + s u) = 1 on the ray from x
    coords = tuple(np.full(samples, c) for c in x) + tuple(dirs.T)
    n = phi.dim

    def level(s, *args):
        point = np.stack([args[k] + s * args[n + k] for k in range(n)], axis=-1)
        return phi(point) - 1.0

    upper = (1.0 + phi(-x)) / phi(dirs) + 1.0
    res = elementwise.find_root(
        level,
        (np.zeros(samples), upper),
        args=coords,
    )
    if not np.all(res.success):
        raise NoConvergence("indicatrix ray search did not converge")
    shifted = dirs * res.x[:, None]
    logger.debug("indicatrix check at phi(x) = %.6g", float(phi_x))
    return float(np.max(np.linalg.norm(on_indicatrix - shifted, axis=-1)))
