"""Degradation, bicubic initialization, RMSE evaluation and experiment runs."""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError, DepthMap, GuidanceImage, RestorationConfig, check_same_shape
from .irls import IterationRecord, restore

FACTORS = (1, 2, 4, 8, 16)


@dataclass(frozen=True)
class DegradationSpec:
    factor: int = 8
    noise_sigma: float = 5.0 / 255.0
    noise_seed: int = 0
    hole_fraction: float = 0.0
    hole_seed: int = 1

    def __post_init__(self):
        if self.factor not in FACTORS:
            raise ConfigError(f"factor must be one of {FACTORS}")
        if not (self.noise_sigma >= 0.0 and np.isfinite(self.noise_sigma)):
            raise ConfigError("noise_sigma must be a finite value >= 0")
        if not 0.0 <= self.hole_fraction < 1.0:
            raise ConfigError("hole_fraction must lie in [0, 1)")
        for name in ("noise_seed", "hole_seed"):
            if not 0 <= getattr(self, name) < 2**64:
                raise ConfigError(f"{name} must be a 64-bit unsigned integer")


def center_crop(grid, factor: int):
    """Crop a depth map or guidance image symmetrically to multiples of ``factor``."""
    h, w = grid.shape
    nh, nw = (h // factor) * factor, (w // factor) * factor
    if nh == 0 or nw == 0:
        raise ConfigError(f"grid {h}x{w} is smaller than the factor {factor}")
    y0, x0 = (h - nh) // 2, (w - nw) // 2
    if isinstance(grid, DepthMap):
        return DepthMap(grid.values[y0:y0 + nh, x0:x0 + nw], grid.mask[y0:y0 + nh, x0:x0 + nw])
    return GuidanceImage(grid.values[y0:y0 + nh, x0:x0 + nw])


def degrade(gt: DepthMap, spec: DegradationSpec) -> DepthMap:
    """Point-sample every ``factor``-th pixel, add seeded Gaussian noise, knock out holes."""
    f = spec.factor
    if gt.height % f or gt.width % f:
        raise ConfigError(f"factor {f} does not divide the {gt.width}x{gt.height} grid")
    values = gt.values[::f, ::f].copy()
    mask = gt.mask[::f, ::f].copy()
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.noise_seed)
        values = np.clip(values + rng.normal(0.0, spec.noise_sigma, values.shape), 0.0, 1.0)
    n_holes = int(round(spec.hole_fraction * values.size))
    if n_holes:
        rng = np.random.default_rng(spec.hole_seed)
        idx = rng.choice(values.size, size=n_holes, replace=False)
        mask.ravel()[idx] = False
    return DepthMap(values, mask)


def catmull_rom(t):
    """Cubic convolution kernel with ``a = -0.5``."""
    a = -0.5
    t = np.abs(np.asarray(t, dtype=np.float64))
    near = (a + 2) * t**3 - (a + 3) * t**2 + 1
    far = a * t**3 - 5 * a * t**2 + 8 * a * t - 4 * a
    return np.where(t <= 1, near, np.where(t < 2, far, 0.0))


def _taps(n_low: int, n_out: int, factor: int):
    pos = np.arange(n_out) / factor
    base = np.floor(pos).astype(int)
    t = pos - base
    idx = np.stack([np.clip(base + k, 0, n_low - 1) for k in (-1, 0, 1, 2)])
    wts = np.stack([catmull_rom(t - k) for k in (-1, 0, 1, 2)])
    return idx, wts


def bicubic_upsample(low: DepthMap, factor: int) -> DepthMap:
    """Catmull-Rom upsampling with replicate boundary.

    Output pixel ``X`` samples the low-resolution grid at ``X / factor``, the
    inverse of top-left point sampling.  Hole taps are dropped and the
    remaining weights renormalized; if the renormalized weights are
    ill-conditioned (sum below 0.25) the valid taps are averaged instead.  A
    pixel with no valid tap stays a hole.
    """
    if factor < 1:
        raise ConfigError("factor must be >= 1")
    h, w = low.shape
    H, W = h * factor, w * factor
    iy, wy = _taps(h, H, factor)
    ix, wx = _taps(w, W, factor)
    vals, valid = low.values, low.mask.astype(np.float64)

    acc = np.zeros((H, W))
    wsum = np.zeros((H, W))
    vsum = np.zeros((H, W))
    count = np.zeros((H, W))
    for a in range(4):
        rows = iy[a][:, None]
        for b in range(4):
            cols = ix[b][None, :]
            wt = wy[a][:, None] * wx[b][None, :]
            m = valid[rows, cols]
            v = vals[rows, cols]
            acc += wt * m * v
            wsum += wt * m
            vsum += m * v
            count += m

    out = np.zeros((H, W))
    good = wsum >= 0.25
    out[good] = acc[good] / wsum[good]
    fallback = ~good & (count > 0)
    out[fallback] = vsum[fallback] / count[fallback]
    return DepthMap(np.clip(out, 0.0, 1.0), count > 0)


def rmse(a: DepthMap, b: DepthMap) -> float:
    """Root mean square error on the 0-255 scale over jointly valid pixels."""
    check_same_shape(a, b)
    support = a.mask & b.mask
    if not support.any():
        raise ConfigError("no jointly valid pixels to compare")
    diff = (a.values - b.values)[support]
    return float(255.0 * np.sqrt(np.mean(diff * diff)))


@dataclass
class EvaluationReport:
    rmse_restored: float
    rmse_bicubic: float
    config: RestorationConfig
    degradation: DegradationSpec
    history: list[IterationRecord] = field(default_factory=list)
    rmse_ablation: float | None = None
    runtime: float = 0.0
    extra: dict[str, float] = field(default_factory=dict)

    def metrics(self) -> dict[str, float]:
        out = {"rmse_restored": self.rmse_restored, "rmse_bicubic": self.rmse_bicubic}
        if self.rmse_ablation is not None:
            out["rmse_ablation_r0"] = self.rmse_ablation
        out.update(self.extra)
        out["irls_iterations"] = float(len(self.history) - 1)
        if self.history:
            out["final_energy"] = self.history[-1].energy
        return out

    def to_key_values(self) -> str:
        """Deterministic ``name=value`` lines (runtime excluded)."""
        lines = [f"{k}={format_value(v)}" for k, v in self.metrics().items()]
        lines += [f"config.{k}={format_value(v)}" for k, v in dataclasses.asdict(self.config).items()]
        lines += [f"degradation.{k}={format_value(v)}" for k, v in dataclasses.asdict(self.degradation).items()]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        lines = [
            f"restored RMSE (0-255): {self.rmse_restored:.4f}",
            f"bicubic RMSE (0-255):  {self.rmse_bicubic:.4f}",
        ]
        if self.rmse_ablation is not None:
            lines.append(f"r=0 data term RMSE:    {self.rmse_ablation:.4f}")
        for k, v in self.extra.items():
            lines.append(f"{k}: {format_value(v)}")
        lines.append("iteration  energy  rel_change  rmse")
        for rec in self.history:
            lines.append(
                f"{rec.iteration:3d}  {rec.energy:.10g}  "
                f"{'-' if rec.rel_change is None else format(rec.rel_change, '.3e')}  "
                f"{'-' if rec.rmse is None else format(rec.rmse, '.4f')}"
            )
        lines.append(f"runtime_seconds: {self.runtime:.2f}")
        return "\n".join(lines) + "\n"


def format_value(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run_experiment(
    gt: DepthMap,
    color: GuidanceImage,
    spec: DegradationSpec,
    cfg: RestorationConfig,
    *,
    ablation: bool = False,
    callback=None,
):
    """Degrade, interpolate, restore and score against the ground truth.

    With ``ablation=True`` the same input is also restored with the
    conventional pixel-to-pixel L2 data term (``radius=0``, non-robust) while
    the smoothness term is kept, and its RMSE is reported.  Returns ``(report, restored, bandwidth)``.
    """
    t0 = time.perf_counter()
    gt = center_crop(gt, spec.factor)
    color = center_crop(color, spec.factor)
    low = degrade(gt, spec)
    init = bicubic_upsample(low, spec.factor)
    check_same_shape(init, color)
    restored, bw, state = restore(init, color, cfg, reference=gt, callback=callback)
    report = EvaluationReport(
        rmse_restored=rmse(restored, gt),
        rmse_bicubic=rmse(init, gt),
        config=cfg,
        degradation=spec,
        history=state.history,
    )
    if ablation:
        cfg0 = cfg.replace(radius=0, smoothness_radius=cfg.smooth_radius, robust_data=False)
        ablated, _, _ = restore(init, color, cfg0)
        report.rmse_ablation = rmse(ablated, gt)
    report.runtime = time.perf_counter() - t0
    return report, restored, bw


# Synthetic scenes: each returns (ground truth, guidance image) on an h x w grid.

def _grid(h, w):
    y, x = np.mgrid[0:h, 0:w]
    return y.astype(np.float64), x.astype(np.float64)


def _region_color(labels, palette):
    palette = np.asarray(palette, dtype=np.float64)
    return palette[labels]


def scene_step_edge(h=96, w=96):
    y, x = _grid(h, w)
    edge = int(round(0.55 * w)) - 1
    labels = (x >= edge).astype(int)
    depth = np.where(labels == 1, 0.7, 0.3)
    color = _region_color(labels, [(0.8, 0.3, 0.2), (0.2, 0.4, 0.8)])
    return DepthMap(depth), GuidanceImage(color)


def scene_ramp(h=96, w=96):
    y, x = _grid(h, w)
    depth = 0.2 + 0.6 * (x + y) / (h + w - 2)
    color = np.stack([0.3 + 0.4 * x / (w - 1), 0.5 * np.ones_like(x), 0.3 + 0.4 * y / (h - 1)], axis=-1)
    return DepthMap(depth), GuidanceImage(color)


def scene_boxes(h=96, w=96):
    y, x = _grid(h, w)
    labels = np.zeros((h, w), dtype=int)
    labels[(y >= 0.15 * h) & (y < 0.55 * h) & (x >= 0.1 * w) & (x < 0.45 * w)] = 1
    labels[(y >= 0.4 * h) & (y < 0.85 * h) & (x >= 0.55 * w) & (x < 0.9 * w)] = 2
    depth = np.array([0.25, 0.55, 0.8])[labels]
    color = _region_color(labels, [(0.5, 0.5, 0.45), (0.9, 0.7, 0.1), (0.1, 0.6, 0.3)])
    return DepthMap(depth), GuidanceImage(color)


def scene_textured_flat(h=96, w=96):
    """Flat slanted depth under a strongly textured color image."""
    y, x = _grid(h, w)
    depth = 0.4 + 0.2 * y / (h - 1)
    check = ((x // 6 + y // 6) % 2).astype(int)
    stripes = (np.sin(x * 0.9) > 0).astype(int)
    labels = check + 2 * stripes * (1 - check)
    color = _region_color(labels, [(0.9, 0.9, 0.9), (0.1, 0.1, 0.2), (0.8, 0.2, 0.2)])
    return DepthMap(depth), GuidanceImage(color)


def scene_flat_color_edge(h=96, w=96):
    """Depth discontinuity with no matching color edge."""
    y, x = _grid(h, w)
    depth = np.where(y + 0.5 * x >= 0.6 * (h + 0.5 * w), 0.75, 0.35)
    color = np.full((h, w, 3), 0.5)
    return DepthMap(depth), GuidanceImage(color)


def scene_fine_detail(h=96, w=96):
    """Thin bars and small blocks in front of a background plane (layout drawn on a 96-pixel grid)."""
    labels = np.zeros((h, w), dtype=int)

    def sy(v):
        return int(round(v * h / 96))

    def sx(v):
        return int(round(v * w / 96))

    for k, x0 in enumerate((12, 30, 48)):
        labels[sy(10):sy(86), sx(x0):sx(x0) + max(1, sx(3 + k))] = 1
    for y0 in (18, 42, 66):
        labels[sy(y0):sy(y0 + 8), sx(66):sx(74)] = 2
        labels[sy(y0 + 4):sy(y0 + 8), sx(80):sx(86)] = 2
    depth = np.array([0.3, 0.7, 0.55])[labels]
    color = _region_color(labels, [(0.3, 0.35, 0.4), (0.9, 0.8, 0.3), (0.7, 0.2, 0.6)])
    return DepthMap(depth), GuidanceImage(color)


SCENES = {
    "step_edge": scene_step_edge,
    "ramp": scene_ramp,
    "boxes": scene_boxes,
    "textured_flat": scene_textured_flat,
    "flat_color_edge": scene_flat_color_edge,
    "fine_detail": scene_fine_detail,
}

SYNTHETIC_SUITE = ("step_edge", "ramp", "boxes", "textured_flat", "flat_color_edge")


def synthetic_scene(name: str, h: int = 96, w: int = 96):
    try:
        return SCENES[name](h, w)
    except KeyError:
        raise ConfigError(f"unknown scene {name!r}; choose from {sorted(SCENES)}") from None
