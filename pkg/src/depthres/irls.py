"""Robust energy, its normal equation, and the reweighted least-squares solver.

The energy of an estimate ``D`` given the initialization ``D0`` is

    (1 - alpha) * sum_i sum_{j in N(i)} w_ij phi(|D_i - D0_j|^2, lam_i)
  + alpha * sum_i sum_{j in N(i), j != i} wc_ij phi(|D_i - D_j|^2, lam_i)

Each IRLS iteration freezes the derivative weights of ``phi`` at the current
estimate and solves the resulting sparse quadratic problem with PCG.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from ._stencil import Stencil, as_array, hole_mask
from .bandwidth import bandwidth_gradient, bandwidth_step
from .core import BandwidthMap, ConfigError, DepthMap, GuidanceImage, RestorationConfig, check_same_shape
from .sparse_linear import SparseSystem, pcg_solve
from .weights import robust_norm, robust_norm_deriv

log = logging.getLogger(__name__)


class UnderdeterminedError(ConfigError):
    """A pixel has neither a data anchor nor smoothness neighbors."""


@dataclass
class IterationRecord:
    iteration: int
    energy: float
    rel_change: float | None
    rmse: float | None = None
    pcg_iterations: int = 0
    pcg_residual: float = 0.0
    elapsed: float = 0.0


@dataclass
class IrlsState:
    iteration: int
    current: DepthMap
    initial: DepthMap
    bandwidth: BandwidthMap
    energy: float
    history: list[IterationRecord] = field(default_factory=list)
    converged: bool = False


def _lam(bw) -> np.ndarray:
    return as_array(bw)


def _check_inputs(D, D0, bw, color=None):
    grids = [as_array(D), as_array(D0), _lam(bw)]
    if color is not None:
        grids.append(np.empty(color.shape))
    check_same_shape(*grids)


def data_penalty(x_sq, lam, robust: bool = True):
    return robust_norm(x_sq, lam) if robust else np.asarray(x_sq, dtype=np.float64)


def data_weight(x_sq, lam, robust: bool = True):
    return robust_norm_deriv(x_sq, lam) if robust else np.ones_like(x_sq, dtype=np.float64)


def _data_energy(st: Stencil, d, d0, mask0, lam, robust=True) -> float:
    total = 0.0
    for ci, cj, w in st.data:
        terms = data_penalty((d[ci] - d0[cj]) ** 2, lam[ci], robust)
        total += w * float(np.sum(terms, where=mask0[cj]))
    return total


def _smoothness_energy(st: Stencil, d, lam) -> float:
    total = 0.0
    for _, _, ci, cj, wc in st.smooth:
        total += float(np.sum(wc * robust_norm((d[ci] - d[cj]) ** 2, lam[ci])))
    return total


def data_energy(D, D0: DepthMap, bw, cfg: RestorationConfig) -> float:
    """Robust pixel-to-patch data energy; hole pixels of ``D0`` are skipped."""
    _check_inputs(D, D0, bw)
    d = as_array(D)
    st = Stencil.from_config(d.shape, None, cfg)
    return _data_energy(st, d, as_array(D0), hole_mask(D0), _lam(bw), cfg.robust_data)


def smoothness_energy(D, color: GuidanceImage, bw, cfg: RestorationConfig) -> float:
    """Color-guided robust smoothness energy over ordered neighbor pairs."""
    _check_inputs(D, D, bw, color)
    d = as_array(D)
    st = Stencil.from_config(d.shape, color, cfg)
    return _smoothness_energy(st, d, _lam(bw))


def total_energy(D, D0: DepthMap, color: GuidanceImage, bw, cfg: RestorationConfig, stencil: Stencil | None = None) -> float:
    _check_inputs(D, D0, bw, color)
    d = as_array(D)
    st = stencil or Stencil.from_config(d.shape, color, cfg)
    lam = _lam(bw)
    e_data = _data_energy(st, d, as_array(D0), hole_mask(D0), lam, cfg.robust_data)
    e_smooth = _smoothness_energy(st, d, lam)
    return (1.0 - cfg.alpha) * e_data + cfg.alpha * e_smooth


def _symmetric_smooth_weight(delta_sq, lam_i, lam_j):
    # Average of the two directed weights; keeps the system symmetric when
    # the bandwidth varies per pixel.
    return 0.5 * (robust_norm_deriv(delta_sq, lam_i) + robust_norm_deriv(delta_sq, lam_j))


def normal_residual(D, D0: DepthMap, color: GuidanceImage, bw, cfg: RestorationConfig, stencil: Stencil | None = None) -> np.ndarray:
    """Left side of the normal equation, per pixel.

    ``(1-alpha) sum w d (D_i - D0_j) + 2 alpha sum wc s (D_i - D_j)`` with
    the weights evaluated at ``D`` itself.  It is exactly half the gradient
    of :func:`total_energy`.
    """
    _check_inputs(D, D0, bw, color)
    d = as_array(D)
    st = stencil or Stencil.from_config(d.shape, color, cfg)
    d0, mask0, lam = as_array(D0), hole_mask(D0), _lam(bw)
    res = np.zeros_like(d)
    for ci, cj, w in st.data:
        diff = d[ci] - d0[cj]
        res[ci] += (1.0 - cfg.alpha) * w * np.where(mask0[cj], data_weight(diff**2, lam[ci], cfg.robust_data) * diff, 0.0)
    for _, _, ci, cj, wc in st.smooth:
        diff = d[ci] - d[cj]
        res[ci] += 2.0 * cfg.alpha * wc * _symmetric_smooth_weight(diff**2, lam[ci], lam[cj]) * diff
    return res


def energy_gradient(D, D0, color, bw, cfg, stencil=None) -> np.ndarray:
    return 2.0 * normal_residual(D, D0, color, bw, cfg, stencil)


def assemble_system(D_prev, D0: DepthMap, color: GuidanceImage, bw, cfg: RestorationConfig, stencil: Stencil | None = None) -> SparseSystem:
    """Linear system of one reweighted least-squares step, weights frozen at ``D_prev``.

    Row ``i``: diagonal ``(1-alpha) sum_j w d + 2 alpha sum_{j!=i} wc s``,
    off-diagonals ``-2 alpha wc s`` and right side ``(1-alpha) sum_j w d D0_j``.
    """
    _check_inputs(D_prev, D0, bw, color)
    d = as_array(D_prev)
    h, w = d.shape
    n = h * w
    st = stencil or Stencil.from_config(d.shape, color, cfg)
    d0, mask0, lam = as_array(D0), hole_mask(D0), _lam(bw)
    a = cfg.alpha

    data_diag = np.zeros((h, w))
    rhs = np.zeros((h, w))
    for ci, cj, wt in st.data:
        dw = np.where(mask0[cj], wt * data_weight((d[ci] - d0[cj]) ** 2, lam[ci], cfg.robust_data), 0.0)
        data_diag[ci] += dw
        rhs[ci] += dw * d0[cj]

    rs = st.smooth_radius
    side = 2 * rs + 1
    k_center = rs * side + rs
    vals = np.zeros((h, w, side * side))
    present = np.zeros((h, w, side * side), dtype=bool)
    smooth_sum = np.zeros((h, w))
    for dy, dx, ci, cj, wc in st.smooth:
        k = (dy + rs) * side + (dx + rs)
        coupling = 2.0 * a * wc * _symmetric_smooth_weight((d[ci] - d[cj]) ** 2, lam[ci], lam[cj])
        vals[ci + (k,)] = -coupling
        present[ci + (k,)] = True
        smooth_sum[ci] += coupling

    empty = (data_diag <= 0.0) & (smooth_sum <= 0.0)
    if np.any(empty):
        y, x = np.argwhere(empty)[0]
        raise UnderdeterminedError(f"underdetermined pixel at (x={x}, y={y}): no data support and no smoothness neighbors")

    vals[:, :, k_center] = (1.0 - a) * data_diag + smooth_sum
    present[:, :, k_center] = True

    offsets = np.array([dy * w + dx for dy in range(-rs, rs + 1) for dx in range(-rs, rs + 1)])
    vals = vals.reshape(n, -1)
    present = present.reshape(n, -1)
    cols = np.arange(n)[:, None] + offsets[None, :]
    indptr = np.concatenate([[0], np.cumsum(present.sum(axis=1))])
    return SparseSystem(indptr, cols[present].astype(np.int64), vals[present], ((1.0 - a) * rhs).ravel())


def _fill_holes(d0: DepthMap) -> np.ndarray:
    values = np.array(d0.values)
    if not d0.has_holes:
        return values
    if not d0.mask.any():
        raise UnderdeterminedError("initial depth map has no valid pixels")
    _, (iy, ix) = ndimage.distance_transform_edt(~d0.mask, return_indices=True)
    return values[iy, ix]


def _rmse(a: np.ndarray, reference: DepthMap) -> float:
    diff = (a - reference.values)[reference.mask]
    return float(255.0 * np.sqrt(np.mean(diff**2)))


def restore(
    D0: DepthMap,
    color: GuidanceImage,
    cfg: RestorationConfig,
    reference: DepthMap | None = None,
    *,
    bandwidth: BandwidthMap | None = None,
    callback: Callable[[IterationRecord], None] | None = None,
):
    """Restore a depth map already interpolated to the guidance resolution.

    Alternates reweighted least-squares depth updates with bandwidth gradient
    steps (when adaptive), starting with a depth update.  Stops once the
    relative change drops below ``cfg.irls_rel_tol`` or after
    ``cfg.irls_max_iters`` updates.

    Returns ``(depth, bandwidth, state)``; the depth is clamped to ``[0, 1]``.
    ``state.history[0]`` describes the starting point.
    """
    check_same_shape(D0, color)
    if reference is not None:
        check_same_shape(D0, reference)
    st = Stencil.from_config(D0.shape, color, cfg)
    bw = bandwidth or BandwidthMap.uniform(D0.shape, cfg.lambda_init)
    check_same_shape(D0, bw)

    t0 = time.perf_counter()
    d = _fill_holes(D0)
    energy = total_energy(d, D0, color, bw, cfg, st)
    state = IrlsState(0, DepthMap(d), D0, bw, energy)
    record = IterationRecord(0, energy, None, _rmse(d, reference) if reference is not None else None)
    state.history.append(record)
    if callback:
        callback(record)

    for n in range(1, cfg.irls_max_iters + 1):
        # The first solve uses the initial bandwidth; afterwards each depth
        # update is preceded by bandwidth steps at the latest estimate.
        if cfg.adaptive_bandwidth and n > 1:
            for _ in range(cfg.lambda_steps_per_iter):
                grad = bandwidth_gradient(d, D0, color, bw, cfg, stencil=st)
                bw = bandwidth_step(bw, grad, cfg.tau)
        system = assemble_system(d, D0, color, bw, cfg, st)
        sol = pcg_solve(system, d.ravel(), cfg.pcg_rel_tol, cfg.pcg_max_iters)
        if not sol.converged:
            log.warning("PCG stopped at residual %.3g after %d iterations", sol.residual, sol.iterations)
        d_new = sol.x.reshape(d.shape)
        norm_prev = np.linalg.norm(d)
        change = np.linalg.norm(d_new - d)
        rel = change / norm_prev if norm_prev > 0 else change
        d = d_new
        energy = total_energy(d, D0, color, bw, cfg, st)
        if not np.isfinite(energy):
            raise ArithmeticError(f"energy became non-finite at iteration {n}")
        record = IterationRecord(
            n,
            energy,
            float(rel),
            _rmse(np.clip(d, 0.0, 1.0), reference) if reference is not None else None,
            sol.iterations,
            sol.residual,
            time.perf_counter() - t0,
        )
        state.history.append(record)
        state.iteration, state.energy = n, energy
        if callback:
            callback(record)
        if rel < cfg.irls_rel_tol:
            state.converged = True
            break

    state.current = DepthMap(np.clip(d, 0.0, 1.0))
    state.bandwidth = bw
    return state.current, bw, state
