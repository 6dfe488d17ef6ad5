# src/tensor.py

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import ndimage
from scipy.optimize import elementwise

from src import config
from src.errors import BadInput, BadParameter, OutsideDomain, ZeroVector
from src.numerics import (
    align,
    angle_directions,
    as_output,
    central_gradient,
    central_hessian,
    golden_angles,
    relative_step,
    unit_directions,
)

logger = logging.getLogger(__name__)

LABELS = ("outside", "degenerate", "strong")
OUTSIDE, DEGENERATE, STRONG = range(3)


@dataclass(frozen=True)
class FundamentalTensor:
    g: np.ndarray
    min_eig: float | np.ndarray
    y_direction: np.ndarray


@dataclass(frozen=True)
class DirectionalMin:
    """Smallest eigenvalue of g(x, .) over unit directions, per base point."""

    ratio: np.ndarray  # min_eig / (trace / n)
    min_eig: np.ndarray
    direction: np.ndarray


def tensor_field(metric, x, y):
    """g_ij = 1/2 [F^2]_{y^i y^j} by central differences, no domain checks."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def half_square(z):
        return 0.5 * metric.evaluate(align(x, z), z, check=False) ** 2

    g = central_hessian(half_square, y, relative_step(y, config.FD_STEP_HESS))
    return 0.5 * (g + np.swapaxes(g, -1, -2))


def _ratio(g):
    eigs = np.linalg.eigvalsh(g)[..., 0]
    scale = np.trace(g, axis1=-2, axis2=-1) / g.shape[-1]
    return eigs / scale, eigs


def fundamental_tensor(metric, x, y):
    """
    Returns:
        FundamentalTensor with g, its smallest eigenvalue and y / |y|.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    norms = np.linalg.norm(y, axis=-1)
    if np.any(norms == 0.0):
        raise ZeroVector("fundamental tensor needs y != 0")
    if not np.all(metric.contains(x)):
        raise OutsideDomain(f"x outside the domain of {metric.name}")
    g = tensor_field(metric, x, y)
    _, eigs = _ratio(g)
    return FundamentalTensor(g=g, min_eig=as_output(eigs), y_direction=y / norms[..., None])


def directional_min(metric, x, directions=config.SCAN_DIRECTIONS, refine=False):
    """
    Minimises the normalised smallest eigenvalue of g(x, y) over unit y.

    In the plane the golden-angle samples are refined with a bracketed scalar
    minimisation around the best sample; in higher dimensions the sampled
    minimum is returned.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[-1]
    if n == 2:
        theta = golden_angles(directions)
        dirs = angle_directions(theta)
    else:
        dirs = unit_directions(directions, n)
    ratio, eigs = _ratio(tensor_field(metric, x[:, None, :], dirs[None, :, :]))
    best = np.argmin(ratio, axis=-1)
    rows = np.arange(x.shape[0])
    out_ratio, out_eig, out_dir = ratio[rows, best], eigs[rows, best], dirs[best]

    if refine and n == 2:
        ext = np.concatenate([theta[-1:] - 2.0 * np.pi, theta, theta[:1] + 2.0 * np.pi])

        def objective(t, x1, x2):
            point = np.stack([x1, x2], axis=-1)
            r, _ = _ratio(tensor_field(metric, point, angle_directions(t)))
            return r

        res = elementwise.find_minimum(
            objective,
            (ext[best], ext[best + 1], ext[best + 2]),
            args=(x[:, 0], x[:, 1]),
            tolerances={"xatol": 1e-10},
        )
        better = res.success & (res.f_x < out_ratio)
        if np.any(better):
            refined_dir = angle_directions(res.x)
            r, e = _ratio(tensor_field(metric, x, refined_dir))
            out_ratio = np.where(better, r, out_ratio)
            out_eig = np.where(better, e, out_eig)
            out_dir = np.where(better[:, None], refined_dir, out_dir)
    return DirectionalMin(ratio=out_ratio, min_eig=out_eig, direction=out_dir)


def is_strongly_convex(metric, x, directions=config.VERDICT_DIRECTIONS):
    """
    Returns:
        (verdict, min_eig): verdict is True iff min_eig > 1e-9 * trace(g) / n
        at the minimising direction.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(metric.contains(x)):
        raise OutsideDomain(f"x outside the domain of {metric.name}")
    result = directional_min(metric, x, directions, refine=True)
    return bool(result.ratio[0] > config.PD_EPS), float(result.min_eig[0])


def hyperbola_residual(a1, x):
    """
    Conic bounding the degenerate band of the Randers K = 0 family:
    8(1 - a1^2)(x1 + a1 / (4(1 - a1^2)))^2 - (9 a1^2 - 8) x2^2 - (9 a1^2 - 8) / (2(1 - a1^2)).
    """
    a1 = float(a1)
    if not 2.0 * np.sqrt(2.0) / 3.0 < a1 < 1.0:
        raise BadParameter(f"a1 must lie in (2*sqrt(2)/3, 1), got {a1}")
    x = np.asarray(x, dtype=float)
    q = 1.0 - a1**2
    k = 9.0 * a1**2 - 8.0
    return as_output(8.0 * q * (x[..., 0] + a1 / (4.0 * q)) ** 2 - k * x[..., 1] ** 2 - k / (2.0 * q))


# --- Domain scans ---
@dataclass
class DomainScan:
    xs: np.ndarray
    ys: np.ndarray
    labels: np.ndarray
    ratio: np.ndarray
    min_eig: np.ndarray
    component_map: np.ndarray
    components: int
    topology: str
    boundary: list = field(default_factory=list)
    boundary_components: list = field(default_factory=list)
    tangency: list = field(default_factory=list)  # degrees, per boundary point
    failed: int = 0

    @property
    def resolution(self):
        return self.labels.shape[0]

    @property
    def spacing(self):
        return (self.xs[1] - self.xs[0], self.ys[1] - self.ys[0])

    @property
    def boundary_points(self):
        if not self.boundary:
            return np.empty((0, 2))
        return np.concatenate(self.boundary)

    @property
    def max_tangency_deviation(self):
        """Largest angle in degrees between a degenerate direction and the traced frontier."""
        if not self.tangency:
            return float("nan")
        angles = np.concatenate(self.tangency)
        if np.all(np.isnan(angles)):
            return float("nan")
        return float(np.nanmax(angles))

    def cell_centres(self, mask=None):
        X, Y = np.meshgrid(self.xs, self.ys, indexing="ij")
        centres = np.stack([X, Y], axis=-1)
        return centres if mask is None else centres[mask]

    def to_frame(self):
        centres = self.cell_centres().reshape(-1, 2)
        return pd.DataFrame(
            {
                "x1": centres[:, 0],
                "x2": centres[:, 1],
                "label": np.asarray(LABELS)[self.labels.ravel()],
                "min_eig": self.min_eig.ravel(),
            }
        )

    def to_dict(self):
        return {
            "components": self.components,
            "topology": self.topology,
            "resolution": self.resolution,
            "bounds": [[float(self.xs[0]), float(self.xs[-1])], [float(self.ys[0]), float(self.ys[-1])]],
            "failed_bisections": self.failed,
            "max_tangency_deviation": None if np.isnan(self.max_tangency_deviation) else self.max_tangency_deviation,
            "boundary_polylines": [
                {"component": int(c), "points": pts.tolist()}
                for c, pts in zip(self.boundary_components, self.boundary)
            ],
        }

    def save(self, csv_path, json_path):
        self.to_frame().to_csv(csv_path, index=False)
        with open(json_path, "w") as f:
            json.dump(self.to_dict(), f, indent=4)


def _bounding_box(metric, extent):
    if not metric.domain.bounded:
        return np.array([-extent, -extent]), np.array([extent, extent])
    u = angle_directions(np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False))
    rim = u * metric.domain.boundary_parameter(u)[:, None]
    lo, hi = rim.min(axis=0), rim.max(axis=0)
    centre, half = 0.5 * (lo + hi), 0.5 * (hi - lo) * 1.02
    return centre - half, centre + half


def _evaluate_cells(metric, points, directions, threads):
    ratio = np.full(points.shape[0], np.nan)
    min_eig = np.full(points.shape[0], np.nan)
    idx = np.flatnonzero(metric.contains(points))
    if idx.size == 0:
        return ratio, min_eig
    chunks = np.array_split(idx, int(np.ceil(idx.size / config.SCAN_CHUNK)))

    def work(chunk):
        return directional_min(metric, points[chunk], directions)

    with ThreadPoolExecutor(max_workers=threads or config.THREADS) as pool:
        for chunk, res in zip(chunks, pool.map(work, chunks)):
            ratio[chunk] = res.ratio
            min_eig[chunk] = res.min_eig
    return ratio, min_eig


def _topology(strong, ratio, count):
    if count == 0:
        return "empty"
    if count > 1:
        return "split"
    core = strong & (ratio >= config.PINCH_RATIO)
    core_map, _ = ndimage.label(core)
    sizes = np.bincount(core_map.ravel())[1:]
    if np.sum(sizes >= config.MIN_COMPONENT_CELLS) > 1:
        return "line_split"
    return "connected"


def _frontier_pairs(labels):
    starts, ends = [], []
    for axis in (0, 1):
        a = labels.take(np.arange(labels.shape[axis] - 1), axis=axis)
        b = labels.take(np.arange(1, labels.shape[axis]), axis=axis)
        for first, second in ((a, b), (b, a)):
            hit = np.argwhere((first == STRONG) & (second == DEGENERATE))
            if hit.size == 0:
                continue
            other = hit.copy()
            if first is a:
                other[:, axis] += 1
            else:
                hit[:, axis] += 1
            starts.append(hit)
            ends.append(other)
    if not starts:
        return np.empty((0, 2), dtype=int), np.empty((0, 2), dtype=int)
    return np.concatenate(starts), np.concatenate(ends)


def _tangency(metric, points, directions):
    """
    Angle in degrees between the degenerate direction at each frontier point
    and the frontier tangent, the tangent being orthogonal to the x-gradient of
    the smallest normalised eigenvalue. NaN where the stencil leaves the domain.
    """
    h = config.FD_STEP_X
    deviation = np.full(len(points), np.nan)
    stencil = points[:, None, :] + h * np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    inside = np.all(metric.contains(stencil), axis=-1)
    if not np.any(inside):
        return deviation
    p = points[inside]

    def level(z):
        return directional_min(metric, z.reshape(-1, 2), directions, refine=True).ratio.reshape(z.shape[:-1])

    normal = central_gradient(level, p, h)
    degenerate = directional_min(metric, p, config.VERDICT_DIRECTIONS, refine=True).direction
    cos = np.abs(np.sum(normal * degenerate, axis=-1)) / (
        np.linalg.norm(normal, axis=-1) * np.linalg.norm(degenerate, axis=-1)
    )
    deviation[inside] = np.degrees(np.arcsin(np.clip(cos, 0.0, 1.0)))
    return deviation


def _trace_frontier(metric, scan, directions):
    strong_idx, weak_idx = _frontier_pairs(scan.labels)
    if strong_idx.size == 0:
        return [], [], [], 0
    centres = scan.cell_centres()
    a = centres[strong_idx[:, 0], strong_idx[:, 1]]
    b = centres[weak_idx[:, 0], weak_idx[:, 1]]
    length = np.linalg.norm(b - a, axis=-1)

    def gap(t, a1, a2, b1, b2):
        point = np.stack([a1 + t * (b1 - a1), a2 + t * (b2 - a2)], axis=-1)
        return directional_min(metric, point, directions, refine=True).ratio - config.PD_EPS

    res = elementwise.find_root(
        gap,
        (np.zeros(len(a)), np.ones(len(a))),
        args=(a[:, 0], a[:, 1], b[:, 0], b[:, 1]),
        tolerances={"xatol": float(config.FRONTIER_TOL / np.max(length))},
    )
    ok = res.success
    failed = int(np.sum(~ok))
    if failed:
        logger.warning("frontier bisection failed on %d of %d edges", failed, len(ok))
    points = a[ok] + res.x[ok, None] * (b[ok] - a[ok])
    owners = scan.component_map[strong_idx[ok, 0], strong_idx[ok, 1]]
    deviation = _tangency(metric, points, directions)

    polylines, ids, angles = [], [], []
    for comp in np.unique(owners):
        mine = points[owners == comp]
        centroid = centres[scan.component_map == comp].mean(axis=0)
        order = np.argsort(np.arctan2(mine[:, 1] - centroid[1], mine[:, 0] - centroid[0]))
        polylines.append(mine[order])
        angles.append(deviation[owners == comp][order])
        ids.append(int(comp))
    return polylines, ids, angles, failed


def scan_domain_2d(metric, resolution=200, directions=config.SCAN_DIRECTIONS, threads=None, extent=2.0, trace=True):
    """
    Classifies a resolution x resolution grid over the domain as strong,
    degenerate or outside, labels the strong components and, with
    `trace=True`, locates the degeneracy frontier on every strong/degenerate
    grid edge.

    Returns:
        DomainScan
    """
    if metric.dim != 2:
        raise BadParameter(f"domain scans are planar, got dim = {metric.dim}")
    lo, hi = _bounding_box(metric, extent)
    xs = np.linspace(lo[0], hi[0], resolution)
    ys = np.linspace(lo[1], hi[1], resolution)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    points = np.stack([X.ravel(), Y.ravel()], axis=-1)
    ratio, min_eig = _evaluate_cells(metric, points, directions, threads)
    ratio = ratio.reshape(resolution, resolution)
    min_eig = min_eig.reshape(resolution, resolution)

    labels = np.full(ratio.shape, OUTSIDE, dtype=int)
    inside = ~np.isnan(ratio)
    labels[inside] = np.where(ratio[inside] > config.PD_EPS, STRONG, DEGENERATE)
    strong = labels == STRONG
    component_map, count = ndimage.label(strong)
    scan = DomainScan(
        xs=xs,
        ys=ys,
        labels=labels,
        ratio=ratio,
        min_eig=min_eig,
        component_map=component_map,
        components=int(count),
        topology=_topology(strong, np.nan_to_num(ratio, nan=-1.0), count),
    )
    logger.info("scan of %s at %d^2: %d component(s), %s", metric.name, resolution, count, scan.topology)
    if trace:
        scan.boundary, scan.boundary_components, scan.tangency, scan.failed = _trace_frontier(
            metric, scan, directions
        )
        logger.info("largest tangency deviation %.3g deg", scan.max_tangency_deviation)
    return scan


def transition_search(builder, lo, hi, resolution=120, directions=config.SCAN_DIRECTIONS, tol=0.01, threads=None):
    """
    Bisects the parameter at which the strong region splits.

    `builder(value)` returns the metric for a parameter value; the scan at `lo`
    must be connected and the scan at `hi` split.
    """

    def split(value):
        scan = scan_domain_2d(builder(value), resolution, directions, threads, trace=False)
        return scan.components > 1

    if split(lo) or not split(hi):
        raise BadInput(f"no split transition inside [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if split(mid):
            hi = mid
        else:
            lo = mid
        logger.info("transition bracket [%.6f, %.6f]", lo, hi)
    return 0.5 * (lo + hi)


def midpoint_violations(scan, pairs=200, seed=None):
    """
    Convexity test of every strong component: midpoints of random in-component
    cell pairs must touch the same component.
    """
    rng = np.random.default_rng(config.SEED if seed is None else seed)
    violations = 0
    for comp in range(1, scan.components + 1):
        cells = np.argwhere(scan.component_map == comp)
        if len(cells) < 2:
            continue
        i, j = rng.integers(0, len(cells), (2, pairs))
        mid = 0.5 * (cells[i] + cells[j])
        lo, hi = np.floor(mid).astype(int), np.ceil(mid).astype(int)
        touching = np.zeros(pairs, dtype=bool)
        for r in (lo[:, 0], hi[:, 0]):
            for c in (lo[:, 1], hi[:, 1]):
                touching |= scan.component_map[r, c] == comp
        violations += int(np.sum(~touching))
    return violations
