# src/sphere.py
"""Upper-hemisphere chart of R^n and pull-backs of planar metrics.

A point x of R^n is sent to p(x) = (x, 1) / sqrt(1 + |x|^2) on the open upper
hemisphere. Spherical coordinates are zeta = (phi, theta_1, ..., theta_{n-1})
with x = tan(phi) u(theta), u the unit vector of the hyperspherical angles.
theta_{n-1} is kept in [0, pi) and phi carries the sign, so the chart covers
the hemisphere once away from the poles of the angle system.
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import integrate

from src import config
from src.errors import BadInput, BadParameter, CoordinateSingularity, NotUpperHemisphere
from src.metrics import closed_metric
from src.numerics import as_output, central_hessian, relative_step, unit_directions

logger = logging.getLogger(__name__)


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


# --- Hemisphere map ---
def project(x):
    """p(x) = (x, 1) / sqrt(1 + |x|^2)."""
    x = np.asarray(x, dtype=float)
    lifted = np.concatenate([x, np.ones(x.shape[:-1] + (1,))], axis=-1)
    return lifted / np.sqrt(1.0 + _dot(x, x))[..., None]


def unproject(w):
    """Inverse of `project` on the open upper hemisphere."""
    w = np.asarray(w, dtype=float)
    if np.any(w[..., -1] <= 0.0):
        raise NotUpperHemisphere("the chart only covers points with w_{n+1} > 0")
    return w[..., :-1] / w[..., -1:]


def push_forward(x, y):
    """Tangent vector d p_x (y) in R^{n+1}."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    z = np.concatenate([x, np.ones(x.shape[:-1] + (1,))], axis=-1)
    dz = np.concatenate([y, np.zeros(y.shape[:-1] + (1,))], axis=-1)
    norm = np.sqrt(_dot(z, z))[..., None]
    return dz / norm - z * _dot(z, dz)[..., None] / norm**3


def pull_back(w, V):
    """Planar (x, y) of a sphere point in the upper hemisphere and a tangent vector there."""
    w, V = np.broadcast_arrays(np.asarray(w, dtype=float), np.asarray(V, dtype=float))
    x = unproject(w)
    last = w[..., -1:]
    y = (V[..., :-1] * last - w[..., :-1] * V[..., -1:]) / last**2
    return x, y


# --- Spherical coordinates ---
def _angles(u):
    """Hyperspherical angles of unit vectors, last angle in (-pi, pi]."""
    n = u.shape[-1]
    theta = np.zeros(u.shape[:-1] + (n - 1,))
    for i in range(n - 2):
        tail = np.linalg.norm(u[..., i:], axis=-1)
        ratio = np.divide(u[..., i], tail, out=np.ones(tail.shape), where=tail > 0)
        theta[..., i] = np.arccos(np.clip(ratio, -1.0, 1.0))
    theta[..., n - 2] = np.arctan2(u[..., n - 1], u[..., n - 2])
    return theta


def _frame(theta):
    """
    u(theta) and its derivatives du/dtheta.

    Returns:
        (u of shape (..., n), du of shape (..., n, n - 1))
    """
    theta = np.asarray(theta, dtype=float)
    m = theta.shape[-1]
    n = m + 1
    s, c = np.sin(theta), np.cos(theta)

    def sines(upto, skip=None):
        out = np.ones(theta.shape[:-1])
        for a in range(upto):
            if a != skip:
                out = out * s[..., a]
        return out

    u = np.zeros(theta.shape[:-1] + (n,))
    du = np.zeros(theta.shape[:-1] + (n, m))
    for k in range(n):
        if k < m:
            u[..., k] = c[..., k] * sines(k)
            du[..., k, k] = -s[..., k] * sines(k)
            for j in range(k):
                du[..., k, j] = c[..., k] * c[..., j] * sines(k, skip=j)
        else:
            u[..., k] = sines(m)
            for j in range(m):
                du[..., k, j] = c[..., j] * sines(m, skip=j)
    return u, du


def to_spherical(x):
    """zeta = (phi, theta) with sec(phi) = sqrt(1 + |x|^2) up to the sign convention."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        raise BadInput("spherical coordinates need n >= 2")
    r = np.linalg.norm(x, axis=-1)
    u = np.zeros(x.shape)
    u[..., 0] = 1.0
    u = np.where((r > 0)[..., None], x / np.where(r > 0, r, 1.0)[..., None], u)
    phi = np.arctan(r)
    last = _angles(u)[..., -1]
    flip = (last < 0.0) | (last >= np.pi)
    u = np.where(flip[..., None], -u, u)
    phi = np.where(flip, -phi, phi)
    theta = np.where((r > 0)[..., None], _angles(u), 0.0)
    return np.concatenate([phi[..., None], theta], axis=-1)


def _check_chart(zeta):
    zeta = np.asarray(zeta, dtype=float)
    if np.any(np.abs(zeta[..., 0]) >= np.pi / 2):
        raise CoordinateSingularity("phi must lie in (-pi/2, pi/2)")
    inner = zeta[..., 1:-1]
    if inner.size and np.any(np.abs(np.sin(inner)) < config.ANGLE_TOL):
        raise CoordinateSingularity("theta_s in {0, pi} is excluded for n >= 3")
    return zeta


def from_spherical(zeta):
    zeta = _check_chart(zeta)
    u, _ = _frame(zeta[..., 1:])
    return np.tan(zeta[..., :1]) * u


def jacobian(zeta):
    """
    J[k, i] = dx^k / dzeta^i: the first column is sec^2(phi) u, the others
    tan(phi) du/dtheta. For n = 2 this is
    [[sec^2 cos, -tan sin], [sec^2 sin, tan cos]].
    """
    zeta = _check_chart(zeta)
    phi = zeta[..., 0]
    u, du = _frame(zeta[..., 1:])
    first = (u / np.cos(phi)[..., None] ** 2)[..., None]
    return np.concatenate([first, np.tan(phi)[..., None, None] * du], axis=-1)


def angle_metric(theta, dtheta):
    """Round metric of S^{n-1} squared: sum_i prod_{a<i} sin^2(theta_a) dtheta_i^2."""
    _, du = _frame(theta)
    v = np.einsum("...ij,...j->...i", du, np.asarray(dtheta, dtype=float))
    return _dot(v, v)


def sphere_metric(zeta, V):
    """Standard metric of the sphere in the chart: sqrt(dphi^2 + sin^2(phi) g_{S^{n-1}})."""
    zeta, V = np.broadcast_arrays(np.asarray(zeta, dtype=float), np.asarray(V, dtype=float))
    g = angle_metric(zeta[..., 1:], V[..., 1:])
    return as_output(np.sqrt(V[..., 0] ** 2 + np.sin(zeta[..., 0]) ** 2 * g))


# --- Pull-backs ---
@dataclass(frozen=True)
class SphereChart:
    """A planar metric on R^n read through the hemisphere chart."""

    metric: object

    @property
    def dim(self):
        return self.metric.dim

    def to_sphere(self, x):
        return to_spherical(x)

    def jacobian(self, zeta):
        return jacobian(zeta)

    def pullback_eval(self, zeta, V):
        zeta, V = np.broadcast_arrays(np.asarray(zeta, dtype=float), np.asarray(V, dtype=float))
        x = from_spherical(zeta)
        y = np.einsum("...ki,...i->...k", jacobian(zeta), V)
        return self.metric.evaluate(x, y, check=False)

    def __call__(self, zeta, V):
        return as_output(self.pullback_eval(zeta, V))


def pullback(metric):
    if metric.domain.bounded:
        raise BadInput(f"{metric.name} is not defined on all of R^n")
    return SphereChart(metric)


def bryant_pullback(alpha, zeta, V):
    """Pull-back of the Bryant metric written directly in (phi, theta)."""
    zeta, V = np.broadcast_arrays(np.asarray(zeta, dtype=float), np.asarray(V, dtype=float))
    zeta = _check_chart(zeta)
    phi, dphi = zeta[..., 0], V[..., 0]
    g = angle_metric(zeta[..., 1:], V[..., 1:])
    cos2, sin2 = np.cos(2.0 * alpha), np.sin(2.0 * alpha)
    s, c, t = np.sin(phi), np.cos(phi), np.tan(phi)
    a = (dphi**2 + s**2 * (cos2 * s**2 + c**2) * g) ** 2 / c**8 + t**8 * sin2**2 * g**2
    b = cos2 * dphi**2 / c**4 + t**2 * (cos2 + t**2) * g
    cc = sin2 * s * dphi / c**3
    d = 2.0 * cos2 * t**2 + t**4 + 1.0
    return as_output(np.sqrt((np.sqrt(a) + b) / (2.0 * d) + (cc / d) ** 2) + cc / d)


def equator_metric(alpha, V, theta=None):
    """
    Limit of the Bryant pull-back on the equator:
    sqrt((cos 2a dphi^2 + g + sqrt((dphi^2 + cos 2a g)^2 + sin^2 2a g^2)) / 2).
    """
    V = np.asarray(V, dtype=float)
    if theta is None:
        theta = np.full(V.shape[:-1] + (V.shape[-1] - 1,), np.pi / 2)
    g = angle_metric(theta, V[..., 1:])
    a = V[..., 0] ** 2
    cos2, sin2 = np.cos(2.0 * alpha), np.sin(2.0 * alpha)
    root = np.sqrt((a + cos2 * g) ** 2 + sin2**2 * g**2)
    return as_output(np.sqrt(np.maximum((cos2 * a + g + root) / 2.0, 0.0)))


def _extrapolate(offsets, values):
    """Intercept at offset 0 of the least-squares line through the samples."""
    coeffs = np.polyfit(np.asarray(offsets, dtype=float), np.asarray(values, dtype=float), 1)
    return coeffs[-1]


@dataclass(frozen=True)
class EquatorCheck:
    limit_values: pd.DataFrame
    max_deviation: float
    min_eig: float
    degenerate_direction: np.ndarray


def equator_extension_check(alpha, n=2, directions=config.SCAN_DIRECTIONS):
    """
    Extends the Bryant pull-back to the equator from phi = pi/2 - delta,
    compares the extrapolation with the closed-form limit and returns the
    smallest eigenvalue of the limit's fundamental tensor.

    Returns:
        EquatorCheck
    """
    alpha = float(alpha)
    if not 0.0 < alpha <= np.pi / 4 + 1e-15:
        raise BadParameter(f"alpha must lie in (0, pi/4], got {alpha}")
    chart = pullback(closed_metric("bryant", alpha=alpha, n=n))
    theta = np.full(n - 1, np.pi / 2)
    theta[-1] = 0.7
    dirs = np.concatenate([unit_directions(directions, n), np.eye(n)])

    offsets = np.asarray(config.EQUATOR_OFFSETS)
    samples = []
    for delta in offsets:
        zeta = np.concatenate([[np.pi / 2 - delta], theta])
        samples.append(chart.pullback_eval(np.broadcast_to(zeta, dirs.shape), dirs))
    samples = np.stack(samples)
    limits = np.array([_extrapolate(offsets, samples[:, j]) for j in range(len(dirs))])
    closed = np.asarray(equator_metric(alpha, dirs, np.broadcast_to(theta, (len(dirs), n - 1))))
    frame = pd.DataFrame({f"V{i + 1}": dirs[:, i] for i in range(n)})
    frame["extrapolated"] = limits
    frame["closed_form"] = closed
    frame["deviation"] = np.abs(limits - closed)

    def half_square(v):
        t = np.broadcast_to(theta, v.shape[:-1] + (n - 1,))
        return 0.5 * np.asarray(equator_metric(alpha, v, t)) ** 2

    hess = central_hessian(half_square, dirs, relative_step(dirs, config.FD_STEP_HESS))
    eigs = np.linalg.eigvalsh(hess)[:, 0]
    worst = int(np.argmin(eigs))
    logger.info("equator check alpha=%.4g: min eigenvalue %.3g at %s", alpha, eigs[worst], dirs[worst])
    return EquatorCheck(
        limit_values=frame,
        max_deviation=float(frame["deviation"].max()),
        min_eig=float(eigs[worst]),
        degenerate_direction=dirs[worst],
    )


# --- Lines and great circles ---
def boundary_line(w, V, lam=0.0):
    """
    Straight line whose image under p is the upper half of the great circle
    through w in the direction V: x = (V' - lam w') / V_{n+1}, y = -w' / V_{n+1}.
    """
    w, V = np.asarray(w, dtype=float), np.asarray(V, dtype=float)
    if abs(w[-1]) > 1e-12 or abs(np.linalg.norm(w) - 1.0) > 1e-12:
        raise BadInput("w must be a unit vector on the equator")
    if abs(w @ V) > 1e-12:
        raise BadInput("V must be tangent to the sphere at w")
    if not V[-1] < 0.0:
        raise BadInput("V must point into the upper hemisphere side, V_{n+1} < 0")
    x = (V[:-1] - lam * w[:-1]) / V[-1]
    y = -w[:-1] / V[-1]
    return x, y


def line_limits(x, y, t=1e7):
    """
    Images of x + t y and x - t y under p with unit tangents there.

    Returns:
        dict with plus_point, minus_point, plus_tangent, minus_tangent
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    out = {}
    for key, sign in (("plus", 1.0), ("minus", -1.0)):
        point = x + sign * t * y
        tangent = push_forward(point, y)
        out[f"{key}_point"] = project(point)
        out[f"{key}_tangent"] = tangent / np.linalg.norm(tangent)
    return out


def glued_speed(metric, w, V):
    """
    Speed of V at w for the metric glued from two copies of the upper
    hemisphere, with (w, V) on the lower half read as (-w, -V).
    """
    w, V = np.asarray(w, dtype=float), np.asarray(V, dtype=float)
    if w[-1] < 0.0:
        w, V = -w, -V
    x, y = pull_back(w, V)
    return float(metric.evaluate(x, y, check=False))


def _great_circle(w, V):
    w, V = np.asarray(w, dtype=float), np.asarray(V, dtype=float)
    if abs(w[-1]) > 1e-12 or abs(np.linalg.norm(w) - 1.0) > 1e-12:
        raise BadInput("w must be a unit vector on the equator")
    V = V - (w @ V) * w
    norm = np.linalg.norm(V)
    if norm == 0.0:
        raise BadInput("V must not be parallel to w")
    if V[-1] == 0.0:
        raise BadInput("the great circle lies in the equator")
    return w, V / norm


def great_circle_length(metric, w, V):
    """Length of the great circle cos(s) w + sin(s) V over s in [0, 2 pi)."""
    w, V = _great_circle(w, V)

    def speed(s):
        return glued_speed(metric, np.cos(s) * w + np.sin(s) * V, -np.sin(s) * w + np.cos(s) * V)

    total = 0.0
    for lo, hi in ((0.0, np.pi), (np.pi, 2.0 * np.pi)):
        part, _ = integrate.quad(speed, lo, hi, epsrel=config.QUAD_EPSREL, limit=config.QUAD_LIMIT)
        total += part
    return total


def great_circle_samples(metric, w, V, count=721):
    """Sampled great circle as a frame of s, phi, theta_1..theta_{n-1} and speed."""
    w, V = _great_circle(w, V)
    s = np.linspace(0.0, 2.0 * np.pi, count)
    points = np.cos(s)[:, None] * w + np.sin(s)[:, None] * V
    tangents = -np.sin(s)[:, None] * w + np.cos(s)[:, None] * V
    frame = pd.DataFrame({"s": s, "phi": np.arccos(np.clip(points[:, -1], -1.0, 1.0))})
    planar = points[:, :-1]
    r = np.linalg.norm(planar, axis=-1, keepdims=True)
    theta = _angles(np.divide(planar, r, out=np.zeros_like(planar), where=r > 0))
    for i in range(theta.shape[-1]):
        frame[f"theta{i + 1}"] = theta[:, i]
    speeds = []
    for p, v in zip(points, tangents):
        # the equator itself is only reachable as a limit
        speeds.append(glued_speed(metric, p, v) if abs(p[-1]) > 1e-9 else np.nan)
    frame["speed"] = speeds
    return frame


def save_great_circle(frame, path):
    frame.to_csv(path, index=False)
    logger.info("great-circle samples written to %s", path)


def line_plane_residual(points):
    """
    Smallest singular value of p(points) stacked as rows, scaled by the
    sample count: zero when the images lie on one plane through the origin.
    """
    w = project(np.asarray(points, dtype=float))
    return float(np.linalg.svd(w, compute_uv=False)[-1] / np.sqrt(len(w)))


def equator_limit(metric, w, V, offsets=config.EQUATOR_OFFSETS):
    """Limit of the pulled-back metric at an equator point, approached along the meridian."""
    w, V = np.asarray(w, dtype=float), np.asarray(V, dtype=float)
    north = np.zeros_like(w)
    north[-1] = 1.0
    values = []
    for delta in offsets:
        wd = np.cos(delta) * w + np.sin(delta) * north
        vd = V - (V @ wd) * wd
        values.append(glued_speed(metric, wd, vd))
    return float(_extrapolate(offsets, values))


def antipodal_deviation(metric, count=32, seed=None):
    """max |F+(w, V) - F+(-w, -V)| over random equator points and tangents."""
    rng = np.random.default_rng(config.SEED if seed is None else seed)
    n = metric.dim
    worst = 0.0
    for _ in range(count):
        w = np.zeros(n + 1)
        w[:-1] = rng.standard_normal(n)
        w /= np.linalg.norm(w)
        V = rng.standard_normal(n + 1)
        V -= (V @ w) * w
        worst = max(worst, abs(equator_limit(metric, w, V) - equator_limit(metric, -w, -V)))
    return worst
