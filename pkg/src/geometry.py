# src/geometry.py

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial
from scipy import integrate

from src import config
from src.errors import (
    BadInput,
    DegenerateFormula,
    IntegrationFailure,
    LeftDomain,
    NonFinite,
    OutsideDomain,
    SegmentExitsDomain,
    ZeroVector,
)
from src.homogeneous import as_fn
from src.numerics import align, as_output, central_gradient, relative_step, unit_directions

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProjectiveData:
    P: float | np.ndarray
    dP_dx: np.ndarray
    dP_dy: np.ndarray


@dataclass(frozen=True)
class CurvatureReport:
    K_formula: float | np.ndarray
    K_profile: float | np.ndarray | None
    berwald_residuals: tuple


@dataclass(frozen=True)
class GeodesicProfile:
    family: str
    c: float
    f: Callable
    max_domain: tuple


@dataclass(frozen=True)
class GeodesicResult:
    t: np.ndarray
    f: np.ndarray
    fprime: np.ndarray
    points: np.ndarray
    profile: GeodesicProfile
    fit_residual: float
    escape_time: float | None


@dataclass(frozen=True)
class DistanceResult:
    formula: float
    integral: float
    rel_err: float


@dataclass(frozen=True)
class Reversibility:
    value: float
    trend: pd.DataFrame
    unbounded: bool


@dataclass(frozen=True)
class CompletenessReport:
    frame: pd.DataFrame
    forward_diverges: bool
    backward_bounded: bool


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _pair(x, y):
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if np.any(np.linalg.norm(y, axis=-1) == 0.0):
        raise ZeroVector("y must be nonzero")
    return x, y


# --- Projective factor ---
def _fd_projective(metric, x, y):
    """P = y^k F_{x^k} / (2F) with central differences in x."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    grad_x = central_gradient(lambda z: metric.evaluate(z, align(y, z), check=False), x, config.FD_STEP_X)
    return _dot(y, grad_x) / (2.0 * metric.evaluate(x, y, check=False))


def _grad_x(func, x, y, step):
    return central_gradient(lambda z: func(z, align(y, z)), x, step)


def _grad_y(func, x, y):
    return central_gradient(lambda z: func(align(x, z), z), y, relative_step(y, config.FD_STEP_Y))


def projective_factor(metric, x, y):
    """
    Projective factor and its first derivatives. The native P is
    differentiated when the metric has one; otherwise P itself comes from
    central differences and is differentiated with the coarser nested step.

    Returns:
        ProjectiveData
    """
    x, y = _pair(x, y)
    if metric.has_projective_factor:
        step = config.FD_STEP_X

        def P(a, b):
            return metric.projective(a, b, check=False)

    else:
        step = config.FD_STEP_XX

        def P(a, b):
            return _fd_projective(metric, a, b)

    return ProjectiveData(
        P=as_output(P(x, y)),
        dP_dx=_grad_x(P, x, y, step),
        dP_dy=_grad_y(P, x, y),
    )


def projective_value(metric, x, y):
    """Native projective factor when the metric has one, finite differences otherwise."""
    if metric.has_projective_factor:
        return metric.projective(x, y, check=False)
    return _fd_projective(metric, x, y)


def berwald_residuals(metric, K, x, y):
    """
    r1 = F_x - [P F]_y and r2 = P_x - P P_y + K F F_y; both vanish for a
    projectively flat metric of constant flag curvature K.
    """
    x, y = _pair(x, y)

    def F(a, b):
        return metric.evaluate(a, b, check=False)

    def P(a, b):
        return _fd_projective(metric, a, b)

    p, f = P(x, y), F(x, y)
    r1 = _grad_x(F, x, y, config.FD_STEP_X) - _grad_y(lambda a, b: P(a, b) * F(a, b), x, y)
    r2 = (
        _grad_x(P, x, y, config.FD_STEP_XX)
        - p[..., None] * _grad_y(P, x, y)
        + K * f[..., None] * _grad_y(F, x, y)
    )
    return r1, r2


# --- Curvature ---
def _rk4_profile(metric, x, y_hat, step, span):
    """
    Integrates f'' = -2 f'^2 P(x + f y_hat, y_hat), f(0) = 0, f'(0) = 1, on
    [-span, span] for a batch of lines.

    Returns:
        (s, f) with f of shape (batch, len(s))
    """
    count = int(round(span / step))

    def rhs(f, fp):
        p = projective_value(metric, x + f[..., None] * y_hat, y_hat)
        return fp, -2.0 * fp**2 * p

    halves = []
    for h in (step, -step):
        f = np.zeros(x.shape[:-1])
        fp = np.ones(x.shape[:-1])
        values = [f]
        for _ in range(count):
            k1f, k1p = rhs(f, fp)
            k2f, k2p = rhs(f + 0.5 * h * k1f, fp + 0.5 * h * k1p)
            k3f, k3p = rhs(f + 0.5 * h * k2f, fp + 0.5 * h * k2p)
            k4f, k4p = rhs(f + h * k3f, fp + h * k3p)
            f = f + h * (k1f + 2.0 * k2f + 2.0 * k3f + k4f) / 6.0
            fp = fp + h * (k1p + 2.0 * k2p + 2.0 * k3p + k4p) / 6.0
            values.append(f)
        halves.append(np.stack(values, axis=-1))
    s = np.arange(-count, count + 1) * step
    f = np.concatenate([halves[1][..., :0:-1], halves[0]], axis=-1)
    if not np.all(np.isfinite(f)):
        raise IntegrationFailure("geodesic profile blew up inside the fitting window")
    return s, f


def _profile_curvature(s, f):
    """K F^2 = (2 f''' f' - 3 f''^2) / (4 f'^2) at s = 0 from a polynomial fit."""
    out = []
    for row in np.atleast_2d(f):
        poly = Polynomial.fit(s, row, config.PROFILE_DEGREE)
        d1, d2, d3 = (poly.deriv(k)(0.0) for k in (1, 2, 3))
        out.append((2.0 * d3 * d1 - 3.0 * d2**2) / (4.0 * d1**2))
    return np.asarray(out)


def flag_curvature(metric, x, y, profile=True):
    """
    Flag curvature from K = (P^2 - y^i P_{x^i}) / F^2 and, independently, from
    the reparametrisation profile of the straight-line geodesic.

    Returns:
        CurvatureReport
    """
    x, y = _pair(x, y)
    if not np.all(metric.contains(x)):
        raise OutsideDomain(f"x outside the domain of {metric.name}")
    data = projective_factor(metric, x, y)
    p = np.asarray(data.P)
    f = np.asarray(metric.evaluate(x, y, check=False))
    k_formula = (p**2 - _dot(y, data.dP_dx)) / f**2

    k_profile = None
    if profile:
        batch_x = np.atleast_2d(x)
        y_hat = np.atleast_2d(y / f[..., None])
        s, fs = _rk4_profile(metric, batch_x, y_hat, config.RK4_STEP, config.PROFILE_WINDOW)
        k_profile = as_output(_profile_curvature(s, fs).reshape(np.shape(k_formula)))

    r1, r2 = berwald_residuals(metric, k_formula[..., None] if np.ndim(k_formula) else k_formula, x, y)
    return CurvatureReport(K_formula=as_output(k_formula), K_profile=k_profile, berwald_residuals=(r1, r2))


# --- Geodesics ---
def geodesic_profile(curvature, p_hat):
    """
    Closed-form unit-speed profile f(s) with f(0) = 0, f'(0) = 1 and
    f''(0) = -2 p_hat, p_hat = P / F, for constant flag curvature.

    Returns:
        GeodesicProfile
    """
    p_hat = float(p_hat)
    if curvature == 0:
        if p_hat == 0.0:
            return GeodesicProfile("k0_line", np.inf, lambda s: np.asarray(s, dtype=float), (-np.inf, np.inf))
        c = 1.0 / p_hat
        dom = (-c, np.inf) if c > 0 else (-np.inf, -c)
        return GeodesicProfile("k0_fractional", c, lambda s: c * s / (c + s), dom)

    kappa = np.sqrt(abs(curvature))
    q = p_hat / kappa
    if curvature < 0:
        if np.isclose(q, -1.0, rtol=0.0, atol=1e-12):
            family, c, unit, dom = "km1_a", -1.0, lambda s: 0.5 * np.expm1(2.0 * s), (-np.inf, np.inf)
        elif np.isclose(q, 1.0, rtol=0.0, atol=1e-12):
            family, c, unit, dom = "km1_b", 1.0, lambda s: -0.5 * np.expm1(-2.0 * s), (-np.inf, np.inf)
        else:
            c = (q + 1.0) / (q - 1.0)
            family = "km1_c"

            def unit(s, c=c):
                e = np.exp(2.0 * s)
                return (c - 1.0) * (e - 1.0) / (2.0 * (c * e - 1.0))

            if c > 1.0:
                dom = (-0.5 * np.log(c), np.inf)
            elif c > 0.0:
                dom = (-np.inf, -0.5 * np.log(c))
            else:
                dom = (-np.inf, np.inf)
    else:
        c = float(np.arctan(-q))
        family = "k1"

        def unit(s, c=c):
            return np.cos(c) ** 2 * (np.tan(s + c) - np.tan(c))

        dom = (-np.pi / 2 - c, np.pi / 2 - c)

    if kappa == 1.0:
        return GeodesicProfile(family, c, unit, dom)
    return GeodesicProfile(
        family, c, lambda s: unit(kappa * np.asarray(s, dtype=float)) / kappa, (dom[0] / kappa, dom[1] / kappa)
    )


def _integrate_line(metric, x, y, t_end, step):
    """RK4 on f'' = -2 f'^2 P(x + f y, y) from 0 to t_end (either sign)."""
    h = np.sign(t_end) * step
    count = int(np.ceil(abs(t_end) / step))
    f, fp = 0.0, 1.0
    ts, fs, fps = [0.0], [f], [fp]

    def rhs(f, fp):
        p = float(projective_value(metric, x + f * y, y))
        return fp, -2.0 * fp**2 * p

    escape = None
    for k in range(count):
        k1f, k1p = rhs(f, fp)
        k2f, k2p = rhs(f + 0.5 * h * k1f, fp + 0.5 * h * k1p)
        k3f, k3p = rhs(f + 0.5 * h * k2f, fp + 0.5 * h * k2p)
        k4f, k4p = rhs(f + h * k3f, fp + h * k3p)
        f += h * (k1f + 2.0 * k2f + 2.0 * k3f + k4f) / 6.0
        fp += h * (k1p + 2.0 * k2p + 2.0 * k3p + k4p) / 6.0
        t = (k + 1) * h
        if not np.isfinite(f) or abs(fp) > config.ESCAPE_SPEED:
            escape = t
            break
        if not metric.contains(x + f * y):
            raise LeftDomain(f"geodesic left the domain at t = {t:.6g}", t=t)
        ts.append(t)
        fs.append(f)
        fps.append(fp)
    return np.asarray(ts), np.asarray(fs), np.asarray(fps), escape


def geodesic(metric, x, y, t_span, curvature=None, step=config.RK4_STEP):
    """
    Integrates the geodesic x + f(t) y for t in t_span (a pair around 0, or
    an end time) and fits the closed-form profile of the given curvature, or
    the best of K = 0, -1, 1 when `curvature` is None.

    Returns:
        GeodesicResult
    """
    x, y = _pair(x, y)
    if not metric.contains(x):
        raise OutsideDomain(f"x outside the domain of {metric.name}")
    t_lo, t_hi = (0.0, float(t_span)) if np.isscalar(t_span) else map(float, t_span)
    pieces, escape = [], None
    for end in (t_lo, t_hi):
        if end == 0.0:
            continue
        ts, fs, fps, esc = _integrate_line(metric, x, y, end, step)
        if esc is not None and end > 0:
            escape = esc
        pieces.append((ts, fs, fps))
    if not pieces:
        raise BadInput("t_span must extend away from 0")
    t = np.concatenate([p[0][::-1] if p[0][-1] < 0 else p[0] for p in pieces])
    f = np.concatenate([p[1][::-1] if p[0][-1] < 0 else p[1] for p in pieces])
    fp = np.concatenate([p[2][::-1] if p[0][-1] < 0 else p[2] for p in pieces])
    t, idx = np.unique(t, return_index=True)
    f, fp = f[idx], fp[idx]

    speed = float(metric.evaluate(x, y, check=False))
    p_hat = float(projective_value(metric, x, y)) / speed
    candidates = (0, -1, 1) if curvature is None else (curvature,)
    best = None
    for k in candidates:
        prof = geodesic_profile(k, p_hat)
        s = speed * t
        valid = (s > prof.max_domain[0]) & (s < prof.max_domain[1])
        with np.errstate(over="ignore", invalid="ignore"):
            model = prof.f(s[valid]) / speed
        resid = float(np.max(np.abs(model - f[valid]))) if np.any(valid) else np.inf
        if best is None or resid < best[1]:
            best = (prof, resid)
    if escape is not None:
        logger.info("geodesic escaped to infinity at t = %.6g", escape)
    points = x + f[:, None] * y
    return GeodesicResult(t=t, f=f, fprime=fp, points=points, profile=best[0], fit_residual=best[1], escape_time=escape)


# --- Distances ---
def distance_formula(curvature, F, P):
    """
    Distance along a segment from F(x1, x2 - x1) and P(x1, x2 - x1) for
    constant flag curvature, by rescaling to K in {0, -1, 1}.
    """
    F, P = np.asarray(F, dtype=float), np.asarray(P, dtype=float)
    if curvature == 0:
        den = 1.0 - P
        if np.any(den <= config.K0_DEGENERACY):
            raise DegenerateFormula(f"1 - P = {np.min(den):.3g} leaves the reachable range")
        return as_output(F / den)
    kappa = np.sqrt(abs(curvature))
    G = kappa * F
    if curvature < 0:
        num, den = 1.0 - P + G, 1.0 - P - G
        if np.any(den <= 0.0) or np.any(num <= 0.0):
            raise DegenerateFormula("the K < 0 formula needs 1 - P > kappa F")
        return as_output(0.5 * np.log(num / den) / kappa)
    d = np.arctan((G**2 + P**2 - P) / G) + np.arctan(P / G)
    # the unit profile sin s / (G cos s + P sin s) escapes where G cos s + P sin s = 0
    escape = np.arctan2(G, -P)
    if np.any(d <= 0.0) or np.any(d >= escape):
        raise DegenerateFormula("the segment end is not reached before the geodesic escapes")
    return as_output(d / kappa)


def _check_segment(metric, x1, x2):
    t = np.linspace(0.0, 1.0, config.SEGMENT_CHECKS)[:, None]
    if not np.all(metric.contains(x1 + t * (x2 - x1))):
        raise SegmentExitsDomain("segment leaves the domain")


def distance(metric, curvature, x1, x2):
    """
    Closed-form distance d(x1, x2) against the adaptive line integral of F
    along the segment.

    Returns:
        DistanceResult
    """
    x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
    u = x2 - x1
    if np.linalg.norm(u) == 0.0:
        raise BadInput("distance needs x1 != x2")
    _check_segment(metric, x1, x2)
    F = float(metric.evaluate(x1, u, check=False))
    P = float(projective_value(metric, x1, u))
    formula = float(distance_formula(curvature, F, P))

    integral, err = integrate.quad(
        lambda t: float(metric.evaluate(x1 + t * u, u, check=False)),
        0.0,
        1.0,
        epsrel=config.QUAD_EPSREL,
        limit=config.QUAD_LIMIT,
    )
    if not np.isfinite(integral):
        raise IntegrationFailure("segment integral is not finite")
    return DistanceResult(formula=formula, integral=integral, rel_err=abs(formula - integral) / max(formula, 1e-300))


def origin_distances(psi, phi, curvature, x):
    """
    d(0, x) and d(x, 0) from the initial data psi = F(0, .), phi = P(0, .).

    Returns:
        (forward, backward)
    """
    psi, phi = as_fn(psi), as_fn(phi)
    x = np.asarray(x, dtype=float)
    a, b = psi(x), phi(x)
    ar, br = psi(-x), phi(-x)
    if curvature == 0:
        return as_output(a / (1.0 - b)), as_output(ar / (1.0 + br))
    if curvature == -1:
        forward = 0.5 * np.log((1.0 - b + a) / (1.0 - b - a))
        backward = 0.5 * np.log((1.0 + br + ar) / (1.0 + br - ar))
        return as_output(forward), as_output(backward)
    if curvature == 1:
        forward = np.arctan((a**2 + b**2 - b) / a) + np.arctan(b / a)
        backward = np.arctan((ar**2 + br**2 + br) / ar) - np.arctan(br / ar)
        return as_output(forward), as_output(backward)
    raise BadInput(f"origin formulas cover K = 0, -1, 1, got {curvature}")


def reversibility(metric, region_samples, directions=config.SCAN_DIRECTIONS, fractions=config.BOUNDARY_FRACTIONS):
    """
    sup F(x, -y) / F(x, y) over the sampled points and directions, plus the
    same supremum on shells approaching the boundary of a bounded domain.

    Returns:
        Reversibility
    """
    points = np.atleast_2d(np.asarray(region_samples, dtype=float))
    dirs = unit_directions(directions, metric.dim)

    def sup_ratio(pts):
        xs, ys = pts[:, None, :], dirs[None, :, :]
        return float(np.max(metric.evaluate(xs, -ys) / metric.evaluate(xs, ys)))

    value = sup_ratio(points)
    rows = []
    if metric.domain.bounded:
        rays = unit_directions(directions, metric.dim)
        reach = metric.domain.boundary_parameter(rays)
        for frac in fractions:
            rows.append({"fraction": frac, "sup_ratio": sup_ratio(rays * (frac * reach)[:, None])})
    trend = pd.DataFrame(rows, columns=["fraction", "sup_ratio"])
    unbounded = bool(
        len(trend) > 1 and np.all(np.diff(trend["sup_ratio"]) > 0) and trend["sup_ratio"].iloc[-1] > 2.0 * trend["sup_ratio"].iloc[0]
    )
    return Reversibility(value=max(value, float(trend["sup_ratio"].max()) if len(trend) else value), trend=trend, unbounded=unbounded)


def completeness_probe(metric, psi=None, phi=None, curvature=0, direction=None, fractions=config.BOUNDARY_FRACTIONS):
    """
    d(0, x) and d(x, 0) along a ray at fractions of the boundary parameter.
    Uses the initial-data formulas when psi and phi are given, the metric's
    own F and P otherwise.

    Returns:
        CompletenessReport
    """
    if not metric.domain.bounded:
        raise BadInput("completeness probes need a bounded domain")
    u = np.zeros(metric.dim)
    u[0] = 1.0
    if direction is not None:
        u = np.asarray(direction, dtype=float) / np.linalg.norm(direction)
    reach = float(metric.domain.boundary_parameter(u))
    rows = []
    for frac in fractions:
        x = frac * reach * u
        if psi is not None and phi is not None:
            forward, backward = origin_distances(psi, phi, curvature, x)
        else:
            origin = np.zeros(metric.dim)
            forward = distance_formula(curvature, metric.evaluate(origin, x), projective_value(metric, origin, x))
            backward = distance_formula(curvature, metric.evaluate(x, -x), projective_value(metric, x, -x))
        rows.append({"fraction": frac, "forward": float(forward), "backward": float(backward)})
    frame = pd.DataFrame(rows)

    def diverges(column):
        steps = np.diff(frame[column].to_numpy())
        return bool(steps[-1] >= 0.5 * steps[0])

    return CompletenessReport(frame=frame, forward_diverges=diverges("forward"), backward_bounded=not diverges("backward"))


def busemann_mayer_recover(d, x, y, steps=config.BUSEMANN_STEPS):
    """
    F(x, y) = lim_{t -> 0+} d(x, x + t y) / t, extrapolated to t = 0 with the
    quadratic through the sampled quotients.
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.linalg.norm(y) == 0.0:
        raise ZeroVector("y must be nonzero")
    ts = np.asarray(steps, dtype=float)
    quotients = np.array([d(x, x + t * y) / t for t in ts], dtype=float)
    if not np.all(np.isfinite(quotients)):
        raise NonFinite("distance quotients are not finite; d is not locally Lipschitz at x")
    coeffs = np.polyfit(ts, quotients, len(ts) - 1)
    return float(coeffs[-1])


def line_length(metric, x, u, T=None):
    """
    Length of the straight line x + t u over t in [-T, T] (the whole line when
    T is None), via t = tan(theta).
    """
    x, u = np.asarray(x, dtype=float), np.asarray(u, dtype=float)
    bound = np.pi / 2 if T is None else float(np.arctan(T))

    def integrand(theta):
        t = np.tan(theta)
        return float(metric.evaluate(x + t * u, u, check=False)) / np.cos(theta) ** 2

    value, _ = integrate.quad(integrand, -bound, bound, epsrel=config.QUAD_EPSREL, limit=config.QUAD_LIMIT)
    return value


def pairwise_distances(metric, curvature, points):
    """Formula distances between every ordered pair of distinct points."""
    points = np.asarray(points, dtype=float)
    m = len(points)
    out = np.zeros((m, m))
    for i in range(m):
        u = points - points[i]
        mask = np.linalg.norm(u, axis=-1) > 0
        F = metric.evaluate(points[i], u[mask], check=False)
        P = projective_value(metric, np.broadcast_to(points[i], u[mask].shape), u[mask])
        out[i, mask] = distance_formula(curvature, F, P)
    return out