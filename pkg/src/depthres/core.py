"""Domain types, grid conventions and configuration shared by the solver modules.

Grids are stored as ``(height, width)`` numpy arrays in row-major order with
the origin at the top-left corner; pixel ``(x, y)`` has linear index
``y * width + x``.  Depth and color are normalized to ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

# One quantization step on the 8-bit scale; guards the 1/lambda term in the
# bandwidth gradient.
LAMBDA_MIN = 1.0 / 255.0

_ALPHA_BY_FACTOR = {2: 0.7, 4: 0.75, 8: 0.8, 16: 0.9}


class ConfigError(ValueError):
    """A configuration or input violates a documented invariant."""


def pixel_index(x: int, y: int, width: int) -> int:
    assert 0 <= x < width and y >= 0, (x, y, width)
    return y * width + x


def pixel_coords(index: int, width: int) -> tuple[int, int]:
    """Inverse of :func:`pixel_index`, returns ``(x, y)``."""
    assert index >= 0 and width > 0
    y, x = divmod(index, width)
    return x, y


def patch_offsets(radius: int, include_center: bool = True) -> list[tuple[int, int]]:
    """Offsets ``(dy, dx)`` of a square patch in lexicographic order.

    The lexicographic order makes the resulting column indices strictly
    increasing within each row of an assembled matrix.
    """
    return [
        (dy, dx)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
        if include_center or (dy, dx) != (0, 0)
    ]


def offset_slices(height: int, width: int, dy: int, dx: int):
    """Slices ``(centers, neighbors)`` pairing each pixel with its neighbor at ``(dy, dx)``.

    ``a[centers]`` and ``a[neighbors]`` are equally shaped views where element
    ``k`` of the first is pixel ``i`` and element ``k`` of the second is
    ``i + (dy, dx)``.  Pixels whose neighbor falls outside the grid are left
    out, which clips patches at the image border.  Returns ``None`` when no
    pixel has that neighbor.
    """
    if abs(dy) >= height or abs(dx) >= width:
        return None
    ci = (slice(max(0, -dy), height - max(0, dy)), slice(max(0, -dx), width - max(0, dx)))
    cj = (slice(max(0, dy), height + min(0, dy)), slice(max(0, dx), width + min(0, dx)))
    return ci, cj


@dataclass(frozen=True)
class DepthMap:
    """Depth values on a grid with a validity mask (``False`` marks a hole)."""

    values: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise ConfigError(f"depth map must be a non-empty 2-D grid, got shape {values.shape}")
        if self.mask is None:
            mask = np.ones(values.shape, dtype=bool)
        else:
            mask = np.array(self.mask, dtype=bool)
            if mask.shape != values.shape:
                raise ConfigError("mask shape does not match depth values")
        valid = values[mask]
        if not np.all(np.isfinite(valid)) or np.any(valid < 0.0) or np.any(valid > 1.0):
            raise ConfigError("valid depth values must be finite and inside [0, 1]")
        values[~mask] = 0.0
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def has_holes(self) -> bool:
        return not bool(self.mask.all())


@dataclass(frozen=True)
class GuidanceImage:
    """Registered color image, stored as ``(height, width, 3)``."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 3 or values.shape[2] != 3 or values.size == 0:
            raise ConfigError(f"guidance image must have shape (h, w, 3), got {values.shape}")
        if not np.all(np.isfinite(values)) or values.min() < 0.0 or values.max() > 1.0:
            raise ConfigError("guidance intensities must be finite and inside [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[:2]


@dataclass(frozen=True)
class BandwidthMap:
    """Per-pixel bandwidth of the robust norm, floored at :data:`LAMBDA_MIN`."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ConfigError("bandwidth map must be a 2-D grid")
        if not np.all(np.isfinite(values)) or values.min() < LAMBDA_MIN * (1 - 1e-12):
            raise ConfigError(f"bandwidth values must be finite and >= {LAMBDA_MIN}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def uniform(cls, shape: tuple[int, int], value: float) -> BandwidthMap:
        return cls(np.full(shape, float(value)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class RestorationConfig:
    """Scalar hyperparameters of the model and the solvers.

    ``radius`` sets the data-term patch.  ``smoothness_radius`` sets the
    neighborhood of the smoothness term and defaults to ``radius``; giving it
    separately lets the data patch shrink to a single pixel while the
    smoothness prior keeps its support.  ``robust_data=False`` swaps the
    exponential norm of the data term for the plain squared difference, which
    together with ``radius=0`` gives the conventional pixel-to-pixel L2 term.
    """

    alpha: float
    beta: float = 0.5
    radius: int = 4
    sigma_s: float = 4.0
    sigma_c: float = 10.0 / 255.0
    lambda_init: float = 7.0 / 255.0
    tau: float = 0.3
    irls_max_iters: int = 20
    irls_rel_tol: float = 1e-4
    pcg_max_iters: int = 2000
    pcg_rel_tol: float = 1e-6
    lambda_steps_per_iter: int = 1
    adaptive_bandwidth: bool = True
    smoothness_radius: int | None = None
    robust_data: bool = True
    normalize_window: bool = True

    def __post_init__(self):
        checks = [
            (0.0 < self.alpha < 1.0, "alpha must lie in (0, 1)"),
            (self.beta >= 0.0, "beta must be >= 0"),
            (self.radius >= 0, "radius must be >= 0"),
            (self.smoothness_radius is None or self.smoothness_radius >= 0, "smoothness_radius must be >= 0"),
            (self.sigma_s > 0.0, "sigma_s must be > 0"),
            (self.sigma_c > 0.0, "sigma_c must be > 0"),
            (self.lambda_init >= LAMBDA_MIN, f"lambda_init must be >= {LAMBDA_MIN:.6g}"),
            (self.tau > 0.0, "tau must be > 0"),
            (self.irls_max_iters >= 1, "irls_max_iters must be >= 1"),
            (self.irls_rel_tol >= 0.0, "irls_rel_tol must be >= 0"),
            (self.pcg_max_iters >= 1, "pcg_max_iters must be >= 1"),
            (self.pcg_rel_tol > 0.0, "pcg_rel_tol must be > 0"),
            (self.lambda_steps_per_iter >= 0, "lambda_steps_per_iter must be >= 0"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, float) and not np.isfinite(value):
                raise ConfigError(f"{f.name} must be finite")

    @property
    def smooth_radius(self) -> int:
        return self.radius if self.smoothness_radius is None else self.smoothness_radius

    def replace(self, **changes) -> RestorationConfig:
        return replace(self, **changes)


def default_config(upsampling_factor: int) -> RestorationConfig:
    """Published parameter set for a 2x, 4x, 8x or 16x upsampling."""
    try:
        alpha = _ALPHA_BY_FACTOR[int(upsampling_factor)]
    except (KeyError, ValueError, TypeError):
        raise ConfigError(
            f"no published default for upsampling factor {upsampling_factor!r} "
            f"(supported: {sorted(_ALPHA_BY_FACTOR)})"
        ) from None
    return RestorationConfig(alpha=alpha)


def check_same_shape(*grids) -> tuple[int, int]:
    shapes = {tuple(g.shape) for g in grids}
    if len(shapes) != 1:
        raise ConfigError(f"grid dimensions do not match: {sorted(shapes)}")
    return shapes.pop()
