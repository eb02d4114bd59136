"""Data-driven per-pixel bandwidth selection.

The bandwidth map minimizes the restoration energy plus
``beta * sum_i |grad lam_i|^2`` by steepest descent, alternating with the
depth updates.  The gradient operator uses forward differences with a
replicate boundary, so its exact adjoint gives ``-2 beta * laplacian(lam)``.
"""

from __future__ import annotations

import numpy as np

from ._stencil import Stencil, as_array, hole_mask
from .core import LAMBDA_MIN, BandwidthMap, ConfigError, check_same_shape
from .weights import robust_norm_dlambda


def laplacian(bw) -> np.ndarray:
    """Four-neighbor Laplacian ``sum_j (lam_j - lam_i)``; missing neighbors contribute 0."""
    lam = as_array(bw)
    out = np.zeros_like(lam)
    dv = lam[1:, :] - lam[:-1, :]
    dh = lam[:, 1:] - lam[:, :-1]
    out[:-1, :] += dv
    out[1:, :] -= dv
    out[:, :-1] += dh
    out[:, 1:] -= dh
    return out


def smoothness_penalty(bw) -> float:
    """``sum_i |grad lam_i|^2`` with forward differences (zero past the last row/column)."""
    lam = as_array(bw)
    return float(np.sum(np.diff(lam, axis=0) ** 2) + np.sum(np.diff(lam, axis=1) ** 2))


def bandwidth_objective(D, D0, color, bw, cfg, stencil: Stencil | None = None) -> float:
    from .irls import total_energy

    return total_energy(D, D0, color, bw, cfg, stencil) + cfg.beta * smoothness_penalty(bw)


def bandwidth_gradient(D, D0, color, bw, cfg, stencil: Stencil | None = None) -> np.ndarray:
    """Derivative of :func:`bandwidth_objective` with respect to every ``lam_i``."""
    d, d0, lam = as_array(D), as_array(D0), as_array(bw)
    check_same_shape(d, d0, lam, np.empty(color.shape))
    if lam.min() < LAMBDA_MIN * (1 - 1e-12):
        raise ConfigError("bandwidth below the floor")
    st = stencil or Stencil.from_config(d.shape, color, cfg)
    mask0 = hole_mask(D0)

    data = np.zeros_like(d)
    for ci, cj, w in st.data if cfg.robust_data else ():
        g = robust_norm_dlambda((d[ci] - d0[cj]) ** 2, lam[ci])
        data[ci] += w * np.where(mask0[cj], g, 0.0)
    smooth = np.zeros_like(d)
    for _, _, ci, cj, wc in st.smooth:
        smooth[ci] += wc * robust_norm_dlambda((d[ci] - d[cj]) ** 2, lam[ci])
    return (1.0 - cfg.alpha) * data + cfg.alpha * smooth - 2.0 * cfg.beta * laplacian(lam)


def bandwidth_step(bw, grad, tau: float) -> BandwidthMap:
    lam = as_array(bw)
    return BandwidthMap(np.maximum(LAMBDA_MIN, lam - tau * np.asarray(grad)))
