# src/numerics.py
"""Finite-difference and sampling helpers shared by every module.

All helpers work on arrays of shape (..., n) and call the wrapped function once
per stencil offset with every point stacked along new axes, so a vectorised
evaluator is evaluated in a handful of numpy calls.
"""

import numpy as np

from src import config

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def relative_step(y, rel):
    """Step h = rel * max(1, |y|) per point."""
    y = np.asarray(y, dtype=float)
    return rel * np.maximum(1.0, np.linalg.norm(y, axis=-1))


def central_gradient(func, y, step):
    """
    Central differences of a scalar function over the last axis, with one
    Richardson pass (fourth order).

    Returns:
        Array with the shape of `y`.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    h = np.broadcast_to(np.asarray(step, dtype=float), y.shape[:-1])[..., None, None]
    eye = np.eye(n)

    def _diff(h):
        shift = h * eye
        upper = func(y[..., None, :] + shift)
        lower = func(y[..., None, :] - shift)
        return (upper - lower) / (2.0 * h[..., 0])

    return (4.0 * _diff(h / 2.0) - _diff(h)) / 3.0


def central_hessian(func, y, step):
    """
    Symmetric Hessian of a scalar function over the last axis, Richardson
    extrapolated once.

    Returns:
        Array of shape (..., n, n).
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    h = np.broadcast_to(np.asarray(step, dtype=float), y.shape[:-1])[..., None]
    eye = np.eye(n)
    iu, ju = np.triu_indices(n, k=1)
    diag_idx = np.arange(n)

    def _second(h):
        centre = func(y)[..., None]
        shift = 2.0 * h[..., None] * eye
        upper = func(y[..., None, :] + shift)
        lower = func(y[..., None, :] - shift)
        hess = np.zeros(y.shape + (n,))
        hess[..., diag_idx, diag_idx] = (upper - 2.0 * centre + lower) / (4.0 * h**2)
        if len(iu):
            plus = eye[iu] + eye[ju]
            minus = eye[iu] - eye[ju]
            hh = h[..., None]
            pp = func(y[..., None, :] + hh * plus)
            pm = func(y[..., None, :] + hh * minus)
            mp = func(y[..., None, :] - hh * minus)
            mm = func(y[..., None, :] - hh * plus)
            off = (pp - pm - mp + mm) / (4.0 * h**2)
            hess[..., iu, ju] = off
            hess[..., ju, iu] = off
        return hess

    return (4.0 * _second(h / 2.0) - _second(h)) / 3.0


def golden_angles(count):
    """Golden-angle spaced angles in [0, 2pi), sorted."""
    return np.sort(np.mod(np.arange(count) * GOLDEN_ANGLE, 2.0 * np.pi))


def angle_directions(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def unit_directions(count, dim=2, seed=None):
    """
    Well-spread unit vectors: golden angles in the plane, a Fibonacci lattice
    on the 2-sphere and seeded Gaussian samples in higher dimensions.
    """
    if dim == 2:
        return angle_directions(golden_angles(count))
    if dim == 3:
        k = np.arange(count) + 0.5
        z = 1.0 - 2.0 * k / count
        r = np.sqrt(1.0 - z**2)
        theta = k * GOLDEN_ANGLE
        return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=-1)
    rng = np.random.default_rng(config.SEED if seed is None else seed)
    dirs = rng.standard_normal((count, dim))
    return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)


def random_directions(rng, count, dim=2):
    dirs = rng.standard_normal((count, dim))
    return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)


def as_output(value):
    """Unwraps 0-d arrays into Python floats, leaves batches alone."""
    value = np.asarray(value)
    if value.ndim == 0:
        return value.item()
    return value


def align(x, z):
    """Inserts axes into `x` before its last one so it broadcasts against stencil points `z`."""
    x = np.asarray(x, dtype=float)
    extra = np.ndim(z) - x.ndim
    if extra <= 0:
        return x
    return x.reshape(x.shape[:-1] + (1,) * extra + x.shape[-1:])
