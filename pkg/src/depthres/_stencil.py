"""Per-offset weight tables for the data and smoothness neighborhoods."""

from __future__ import annotations

import numpy as np

from .core import offset_slices, patch_offsets
from .weights import color_affinity, offset_weight


class Stencil:
    """Precomputed spatial and guide weights for one grid, color image and config.

    ``data`` holds ``(centers, neighbors, weight)`` for every in-bounds offset
    of the data patch including the center.  ``smooth`` holds
    ``(dy, dx, centers, neighbors, guide_weights)`` for the smoothness patch
    without the center; ``guide_weights`` is an array over the slice.
    """

    def __init__(self, shape, color, radius: int, smooth_radius: int, sigma_s: float, sigma_c: float,
                 normalize: bool = False):
        h, w = shape
        self.shape = (h, w)
        self.radius = radius
        self.smooth_radius = smooth_radius
        self.data_scale = 1.0 / window_mass(radius, sigma_s) if normalize else 1.0
        self.smooth_scale = 1.0 / window_mass(smooth_radius, sigma_s) if normalize else 1.0
        self.data = []
        for dy, dx in patch_offsets(radius):
            sl = offset_slices(h, w, dy, dx)
            if sl is not None:
                self.data.append((sl[0], sl[1], self.data_scale * offset_weight(dy, dx, sigma_s)))
        self.smooth = []
        if color is not None:
            img = color.values
            for dy, dx in patch_offsets(smooth_radius, include_center=False):
                sl = offset_slices(h, w, dy, dx)
                if sl is None:
                    continue
                ci, cj = sl
                wc = self.smooth_scale * offset_weight(dy, dx, sigma_s) * color_affinity(img[ci], img[cj], sigma_c)
                self.smooth.append((dy, dx, ci, cj, wc))

    @classmethod
    def from_config(cls, shape, color, cfg) -> Stencil:
        return cls(shape, color, cfg.radius, cfg.smooth_radius, cfg.sigma_s, cfg.sigma_c, cfg.normalize_window)


def window_mass(radius: int, sigma_s: float) -> float:
    """Sum of the Gaussian window over a full, unclipped patch."""
    return sum(offset_weight(dy, dx, sigma_s) for dy, dx in patch_offsets(radius))


def as_array(grid) -> np.ndarray:
    return np.asarray(getattr(grid, "values", grid), dtype=np.float64)


def hole_mask(depth) -> np.ndarray:
    mask = getattr(depth, "mask", None)
    if mask is None:
        return np.ones(np.shape(as_array(depth)), dtype=bool)
    return mask
