"""Scalar kernels: Gaussian spatial window, color guide weight, exponential norm.

All functions broadcast over numpy arrays so the solver can evaluate a whole
patch offset at once.
"""

from __future__ import annotations

import numpy as np


def spatial_weight(i, j, sigma_s: float):
    """Gaussian window ``exp(-|i - j|^2 / (2 sigma_s^2))`` for ``(x, y)`` coordinates."""
    i = np.asarray(i, dtype=np.float64)
    j = np.asarray(j, dtype=np.float64)
    dist_sq = np.sum((i - j) ** 2, axis=-1)
    return np.exp(-dist_sq / (2.0 * sigma_s**2))


def offset_weight(dy: int, dx: int, sigma_s: float) -> float:
    """Spatial weight of a patch offset; equals ``spatial_weight`` for any pair at that offset."""
    return float(np.exp(-(dy * dy + dx * dx) / (2.0 * sigma_s**2)))


def color_affinity(ci, cj, sigma_c: float):
    """Color factor of the guide weight.

    ``ci`` and ``cj`` have a trailing axis of 3 channels; the squared
    differences are summed over channels and scaled by ``3 * 2 sigma_c^2``.
    """
    diff = np.asarray(ci, dtype=np.float64) - np.asarray(cj, dtype=np.float64)
    return np.exp(-np.sum(diff * diff, axis=-1) / (6.0 * sigma_c**2))


def guide_weight(i, j, color, sigma_s: float, sigma_c: float) -> float:
    """Color-guided weight between grid coordinates ``i`` and ``j`` (``(x, y)`` tuples)."""
    values = getattr(color, "values", color)
    ci = values[i[1], i[0]]
    cj = values[j[1], j[0]]
    return float(spatial_weight(i, j, sigma_s) * color_affinity(ci, cj, sigma_c))


def robust_norm(x_sq, lam):
    """Exponential error norm ``2 lam^2 (1 - exp(-x_sq / (2 lam^2)))``.

    Bounded by ``2 lam^2``; ``-expm1`` keeps small arguments accurate.
    """
    two_lam_sq = 2.0 * np.square(lam)
    return -two_lam_sq * np.expm1(-np.asarray(x_sq, dtype=np.float64) / two_lam_sq)


def robust_norm_deriv(x_sq, lam):
    """Derivative of :func:`robust_norm` with respect to ``x_sq``, in ``(0, 1]``."""
    return np.exp(-np.asarray(x_sq, dtype=np.float64) / (2.0 * np.square(lam)))


def robust_norm_dlambda(x_sq, lam):
    """Derivative of :func:`robust_norm` with respect to the bandwidth.

    ``4 lam (1 - w) - 2 x_sq w / lam`` with ``w = robust_norm_deriv(x_sq, lam)``.
    """
    x_sq = np.asarray(x_sq, dtype=np.float64)
    two_lam_sq = 2.0 * np.square(lam)
    w = np.exp(-x_sq / two_lam_sq)
    return -4.0 * lam * np.expm1(-x_sq / two_lam_sq) - 2.0 * x_sq * w / lam
