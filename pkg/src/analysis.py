# src/analysis.py

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import optimize

from src import config
from src.errors import BadParameter, OriginExcluded, OutsideDomain, WrongClass, ZeroVector
from src.geometry import projective_value
from src.homogeneous import as_fn, eval_and_grad
from src.metrics import build_k0, build_km1, classify
from src.numerics import angle_directions, as_output, unit_directions
from src.tensor import tensor_field

logger = logging.getLogger(__name__)

FAMILIES = ("k0", "km1")


@dataclass(frozen=True)
class CoMetricValue:
    value: float
    maximizer: np.ndarray


@dataclass(frozen=True)
class AnalyticReport:
    grad_r: np.ndarray
    S: float
    distortion_rate: float
    bound_ratio: float


# --- Co-metric ---
def co_metric(metric, x, xi):
    """
    F*(x, xi) = sup <y, xi> / F(x, y).

    In the plane: 720 sampled angles, then a bounded scalar search around the
    best one. In higher dimensions: Nelder-Mead from every restart direction.

    Returns:
        CoMetricValue
    """
    x, xi = np.asarray(x, dtype=float), np.asarray(xi, dtype=float)
    if not metric.contains(x):
        raise OutsideDomain(f"x outside the domain of {metric.name}")
    if np.linalg.norm(xi) == 0.0:
        raise ZeroVector("co-metric of the zero covector")

    def ratio(y):
        return (y @ xi) / metric.evaluate(x, y, check=False)

    if metric.dim == 2:
        theta = np.linspace(0.0, 2.0 * np.pi, config.DUAL_SCAN_ANGLES, endpoint=False)
        values = ratio(angle_directions(theta))
        k = int(np.argmax(values))
        step = 2.0 * np.pi / config.DUAL_SCAN_ANGLES
        res = optimize.minimize_scalar(
            lambda t: -float(ratio(angle_directions(t))),
            bounds=(theta[k] - step, theta[k] + step),
            method="bounded",
            options={"xatol": config.DUAL_XATOL},
        )
        if -res.fun >= values[k]:
            return CoMetricValue(value=float(-res.fun), maximizer=angle_directions(res.x))
        return CoMetricValue(value=float(values[k]), maximizer=angle_directions(theta[k]))

    def objective(y):
        norm = np.linalg.norm(y)
        return -float(ratio(y / norm)) + (norm - 1.0) ** 2

    best = None
    for start in unit_directions(config.DUAL_RESTARTS, metric.dim):
        res = optimize.minimize(objective, start, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        if best is None or res.fun < best.fun:
            best = res
    y = best.x / np.linalg.norm(best.x)
    return CoMetricValue(value=float(ratio(y)), maximizer=y)


# --- Distance from the origin ---
def _family(family):
    if family not in FAMILIES:
        raise BadParameter(f"family must be one of {FAMILIES}, got '{family}'")
    return family


def _initial(psi, phi, x):
    x = np.asarray(x, dtype=float)
    if np.any(np.linalg.norm(x, axis=-1) == 0.0):
        raise OriginExcluded("r is not differentiable at the origin")
    a, da = eval_and_grad(psi, x)
    b, db = eval_and_grad(phi, x)
    return x, np.asarray(a), da, np.asarray(b), db


def distance_from_origin(family, psi, phi, x):
    """r(x) = d(0, x): psi / (1 - phi) for K = 0, artanh-type log for K = -1."""
    family = _family(family)
    x, a, _, b, _ = _initial(as_fn(psi), as_fn(phi), x)
    if family == "k0":
        return as_output(a / (1.0 - b))
    return as_output(0.5 * np.log((1.0 - b + a) / (1.0 - b - a)))


def dr(family, psi, phi, x):
    """Euclidean gradient of r, i.e. the covector dr."""
    family = _family(family)
    x, a, da, b, db = _initial(as_fn(psi), as_fn(phi), x)
    a, b = a[..., None], b[..., None]
    if family == "k0":
        return (da * (1.0 - b) + a * db) / (1.0 - b) ** 2
    return 0.5 * ((da - db) / (1.0 - b + a) + (da + db) / (1.0 - b - a))


def grad_r(family, psi, phi, x):
    """
    Gradient vector of r(x) = d(0, x); always a multiple of x.

    K = 0:  psi / (psi + r phi)^2 x
    K = -1: (1 - phi + psi)(1 - phi - psi) / psi x
    """
    family = _family(family)
    x, a, _, b, _ = _initial(as_fn(psi), as_fn(phi), x)
    if family == "k0":
        r = a / (1.0 - b)
        scale = a / (a + r * b) ** 2
    else:
        scale = (1.0 - b + a) * (1.0 - b - a) / a
    return scale[..., None] * x


# --- S-curvature ---
def distortion(metric, x, y):
    """tau = ln sqrt(det g) for the Lebesgue measure."""
    g = tensor_field(metric, x, y)
    sign, logdet = np.linalg.slogdet(g)
    if np.any(sign <= 0):
        logger.warning("fundamental tensor is not positive definite; distortion is undefined there")
    return as_output(np.where(sign > 0, 0.5 * logdet, np.nan))


def s_curvature(metric, x, y):
    """
    S = (n + 1) P for the Lebesgue measure, and independently the derivative
    of tau along the geodesic through (x, y).

    Returns:
        (S, distortion_rate)
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.linalg.norm(y) == 0.0:
        raise ZeroVector("S-curvature needs y != 0")
    if not metric.contains(x):
        raise OutsideDomain(f"x outside the domain of {metric.name}")
    S = (metric.dim + 1) * float(projective_value(metric, x, y))

    # tau is 0-homogeneous in y, so only the base point moves to first order
    def slope(h):
        return (float(distortion(metric, x + h * y, y)) - float(distortion(metric, x - h * y, y))) / (2.0 * h)

    h = config.FD_STEP_X
    rate = (4.0 * slope(h / 2.0) - slope(h)) / 3.0
    return S, rate


# --- Growth of the co-metric of -dr ---
def _build(family, psi, phi):
    if family == "k0":
        if classify(psi, phi, 0).backward_complete:
            raise WrongClass("the K = 0 family is backward complete (Minkowski)")
        return build_k0(psi, phi)
    label = classify(psi, phi, -1)
    if label.backward_complete:
        raise WrongClass(f"the K = -1 family is backward complete ({label.case_label})")
    return build_km1(psi, phi)


def _reference(family, r):
    return r**2 if family == "k0" else np.exp(2.0 * r)


def growth_check(family, psi, phi, ray=None, fractions=config.BOUNDARY_FRACTIONS[:3], threads=None):
    """
    F*(x, -dr) against r^2 (K = 0) or e^{2r} (K = -1) along a ray towards
    the boundary. Fractions are evaluated on a pool of `threads` workers.

    Returns:
        DataFrame with columns fraction, r, Fstar, ratio
    """
    family = _family(family)
    psi, phi = as_fn(psi), as_fn(phi)
    metric = _build(family, psi, phi)
    u = np.zeros(metric.dim)
    u[0] = 1.0
    if ray is not None:
        u = np.asarray(ray, dtype=float) / np.linalg.norm(ray)
    reach = float(metric.domain.boundary_parameter(u))

    def row(frac):
        x = frac * reach * u
        r = float(distance_from_origin(family, psi, phi, x))
        fstar = co_metric(metric, x, -dr(family, psi, phi, x)).value
        ratio = fstar / _reference(family, r)
        logger.info("growth %s: fraction %.6g r=%.6g ratio=%.6g", family, frac, r, ratio)
        return {"fraction": frac, "r": r, "Fstar": fstar, "ratio": ratio}

    with ThreadPoolExecutor(max_workers=threads or config.THREADS) as pool:
        rows = list(pool.map(row, fractions))
    return pd.DataFrame(rows, columns=["fraction", "r", "Fstar", "ratio"])


def analytic_report(family, psi, phi, x):
    """grad r, S and tau' at (x, grad r), and F*(x, -dr) over its reference growth."""
    family = _family(family)
    psi, phi = as_fn(psi), as_fn(phi)
    metric = _build(family, psi, phi)
    x = np.asarray(x, dtype=float)
    g = grad_r(family, psi, phi, x)
    S, rate = s_curvature(metric, x, g)
    r = float(distance_from_origin(family, psi, phi, x))
    fstar = co_metric(metric, x, -dr(family, psi, phi, x)).value
    return AnalyticReport(grad_r=g, S=S, distortion_rate=rate, bound_ratio=fstar / _reference(family, r))
