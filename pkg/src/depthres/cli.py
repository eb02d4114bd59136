"""Command-line interface: ``depthres {restore,degrade,evaluate,ablate}``.

Exit status:
  0  success
  2  usage error (unknown flag, missing argument)
  3  invalid parameter value
  4  file could not be read, parsed or written
  5  solver failure (divergence, non-finite energy)
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import image_io
from .core import _ALPHA_BY_FACTOR, ConfigError, RestorationConfig, default_config
from .image_io import ImageFormatError
from .irls import restore
from .pipeline import DegradationSpec, EvaluationReport, bicubic_upsample, degrade, format_value, rmse, run_experiment
from .sparse_linear import SolverDivergedError

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_IO, EXIT_SOLVER = 0, 2, 3, 4, 5

log = logging.getLogger("depthres")

_DEFAULTS = RestorationConfig(alpha=0.5)
_ALPHAS = "/".join(format(a, "g") for a in _ALPHA_BY_FACTOR.values())
_FACTORS = "/".join(str(f) for f in _ALPHA_BY_FACTOR)

# (flag, config field, type, help text); defaults in help come from RestorationConfig.
_CONFIG_FLAGS = [
    ("--alpha", "alpha", float, f"smoothness weight in (0,1), unitless [default: {_ALPHAS} for factor {_FACTORS}]"),
    ("--beta", "beta", float, "bandwidth regularizer weight, unitless"),
    ("--radius", "radius", int, "data patch radius in pixels (patch side 2r+1)"),
    ("--smoothness-radius", "smoothness_radius", int, "smoothness neighborhood radius in pixels [default: same as --radius]"),
    ("--sigma-s", "sigma_s", float, "spatial Gaussian width in pixels"),
    ("--sigma-c", "sigma_c", float, "color affinity width, normalized intensity"),
    ("--lambda-init", "lambda_init", float, "initial bandwidth, normalized depth"),
    ("--tau", "tau", float, "bandwidth step size, unitless"),
    ("--irls-iters", "irls_max_iters", int, "maximum reweighting iterations"),
    ("--irls-tol", "irls_rel_tol", float, "stop when the relative depth change falls below this"),
    ("--pcg-iters", "pcg_max_iters", int, "maximum conjugate gradient iterations per solve"),
    ("--pcg-tol", "pcg_rel_tol", float, "relative residual tolerance of each linear solve"),
    ("--lambda-steps", "lambda_steps_per_iter", int, "bandwidth gradient steps per depth update"),
]
_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RestorationConfig)}


def _default_text(name: str) -> str:
    value = getattr(_DEFAULTS, name)
    return format(value, ".6g") if isinstance(value, float) else str(value)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model parameters (unset values fall back to the factor's defaults)")
    for flag, name, typ, text in _CONFIG_FLAGS:
        if name not in ("alpha", "smoothness_radius"):
            text += f" [default: {_default_text(name)}]"
        g.add_argument(flag, dest=name, type=typ, default=None, help=text)
    g.add_argument("--no-adaptive-bandwidth", dest="adaptive_bandwidth", action="store_const", const=False, default=None,
                   help="keep the bandwidth fixed at --lambda-init [default: adaptive]")
    g.add_argument("--config", type=Path, help="file of 'key = value' lines using config field names; flags take precedence")


def _add_degradation_flags(p: argparse.ArgumentParser) -> None:
    d = DegradationSpec()
    g = p.add_argument_group("degradation")
    g.add_argument("--noise-sigma", type=float, default=d.noise_sigma,
                   help=f"Gaussian noise std-dev, normalized depth [default: {d.noise_sigma:.6g} = 5/255]")
    g.add_argument("--seed", "--noise-seed", dest="noise_seed", type=int, default=d.noise_seed,
                   help=f"noise seed [default: {d.noise_seed}]")
    g.add_argument("--hole-fraction", type=float, default=d.hole_fraction,
                   help=f"fraction of low-resolution pixels knocked out, in [0,1) [default: {d.hole_fraction:g}]")
    g.add_argument("--hole-seed", type=int, default=d.hole_seed, help=f"hole pattern seed [default: {d.hole_seed}]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depthres",
        description="Color-guided depth map upsampling and restoration.",
        epilog="exit status: 0 success, 2 usage error, 3 invalid parameter, 4 file error, 5 solver failure. "
        "Depth maps are P5 PGM (8 or 16 bit), guidance images P6 PPM (8 bit). RMSE is reported on the 0-255 scale.",
    )
    # Verbosity flags are accepted before or after the subcommand.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS, help="more logging")
    common.add_argument("-q", "--quiet", action="store_true", default=argparse.SUPPRESS, help="suppress the per-iteration trace")
    parser._add_container_actions(common)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("restore", parents=[common], help="upsample and restore a low-resolution depth map")
    p.add_argument("--depth", type=Path, required=True, help="low-resolution depth map (PGM)")
    p.add_argument("--color", type=Path, required=True, help="guidance image at the target resolution (PPM)")
    p.add_argument("--factor", type=int, required=True, help=f"upsampling factor, one of {_FACTORS}")
    p.add_argument("--out", type=Path, required=True, help="restored depth map (16-bit PGM)")
    p.add_argument("--out-bandwidth", type=Path, help="final bandwidth map (16-bit PGM plus .scale.txt)")
    p.add_argument("--report", type=Path, help="key-value report")
    p.add_argument("--zero-is-hole", action="store_true", help="treat 0 samples of the input as missing")
    p.add_argument("--seed", type=int, default=0, help="recorded in the report; restoration itself is deterministic [default: 0]")
    _add_config_flags(p)

    p = sub.add_parser("degrade", parents=[common], help="simulate a low-resolution noisy capture of a ground-truth map")
    p.add_argument("--gt", type=Path, required=True, help="ground-truth depth map (PGM)")
    p.add_argument("--factor", type=int, required=True, help="downsampling factor")
    p.add_argument("--out", type=Path, required=True, help="degraded depth map (16-bit PGM, 0 marks holes)")
    _add_degradation_flags(p)

    p = sub.add_parser("evaluate", parents=[common], help="RMSE between two depth maps on the 0-255 scale")
    p.add_argument("a", type=Path)
    p.add_argument("b", type=Path)
    p.add_argument("--zero-is-hole", action="store_true", help="exclude pixels that are 0 in either map")

    p = sub.add_parser("ablate", parents=[common], help="compare data-term and bandwidth variants against a ground truth")
    p.add_argument("--gt", type=Path, required=True, help="ground-truth depth map (PGM)")
    p.add_argument("--color", type=Path, required=True, help="guidance image (PPM)")
    p.add_argument("--factor", type=int, required=True, help=f"upsampling factor, one of {_FACTORS}")
    p.add_argument("--report", type=Path, help="write the key-value comparison here instead of stdout")
    _add_degradation_flags(p)
    _add_config_flags(p)
    return parser


def _parse_config_file(path: Path) -> dict:
    out = {}
    for number, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{number}: unknown parameter {key!r}")
        out[key] = _convert(key, value, f"{path}:{number}")
    return out


def _convert(key: str, value: str, where: str):
    kind = _FIELD_TYPES[key]
    try:
        if "bool" in str(kind):
            if value.lower() not in ("true", "false", "1", "0"):
                raise ValueError(value)
            return value.lower() in ("true", "1")
        if "int" in str(kind):
            return None if value.lower() == "none" else int(value)
        return float(value)
    except ValueError:
        raise ConfigError(f"{where}: bad value {value!r} for {key}") from None


def config_from_args(args) -> RestorationConfig:
    cfg = default_config(args.factor)
    changes = _parse_config_file(args.config) if args.config else {}
    for _, name, _, _ in _CONFIG_FLAGS:
        if getattr(args, name) is not None:
            changes[name] = getattr(args, name)
    if args.adaptive_bandwidth is not None:
        changes["adaptive_bandwidth"] = args.adaptive_bandwidth
    return cfg.replace(**changes)


def _degradation_from_args(args) -> DegradationSpec:
    return DegradationSpec(args.factor, args.noise_sigma, args.noise_seed, args.hole_fraction, args.hole_seed)


def _trace(quiet: bool):
    if quiet:
        return None

    def emit(rec):
        change = "-" if rec.rel_change is None else f"{rec.rel_change:.3e}"
        print(f"iter {rec.iteration:3d}  energy {rec.energy:.8g}  rel_change {change}  elapsed {rec.elapsed:.2f}s",
              file=sys.stderr, flush=True)

    return emit


def _cmd_restore(args) -> int:
    cfg = config_from_args(args)
    low = image_io.read_depth(args.depth, zero_is_hole=args.zero_is_hole)
    color = image_io.read_color(args.color)
    expected = (low.height * args.factor, low.width * args.factor)
    if color.shape != expected:
        raise ConfigError(f"guidance image is {color.shape[1]}x{color.shape[0]}, expected "
                          f"{expected[1]}x{expected[0]} for factor {args.factor}")
    init = bicubic_upsample(low, args.factor)
    restored, bw, state = restore(init, color, cfg, callback=_trace(args.quiet))
    image_io.write_depth(restored, args.out)
    if args.out_bandwidth:
        image_io.write_bandwidth(bw, args.out_bandwidth)
    if args.report:
        lines = [
            f"irls_iterations={state.iteration}",
            f"converged={format_value(state.converged)}",
            f"final_energy={format_value(state.energy)}",
            f"seed={args.seed}",
        ]
        lines += [f"config.{k}={format_value(v)}" for k, v in dataclasses.asdict(cfg).items()]
        image_io.atomic_write_bytes(args.report, ("\n".join(lines) + "\n").encode())
    return EXIT_OK


def _cmd_degrade(args) -> int:
    spec = _degradation_from_args(args)
    gt = image_io.read_depth(args.gt)
    image_io.write_depth(degrade(gt, spec), args.out)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    a = image_io.read_depth(args.a, zero_is_hole=args.zero_is_hole)
    b = image_io.read_depth(args.b, zero_is_hole=args.zero_is_hole)
    print(f"rmse={rmse(a, b):.6g}")
    return EXIT_OK


def _cmd_ablate(args) -> int:
    cfg = config_from_args(args)
    spec = _degradation_from_args(args)
    gt = image_io.read_depth(args.gt)
    color = image_io.read_color(args.color)
    trace = _trace(args.quiet)
    adaptive, _, _ = run_experiment(gt, color, spec, cfg.replace(adaptive_bandwidth=True), ablation=True, callback=trace)
    fixed, _, _ = run_experiment(gt, color, spec, cfg.replace(adaptive_bandwidth=False), ablation=True, callback=trace)
    lines = [
        f"rmse_bicubic={format_value(adaptive.rmse_bicubic)}",
        f"rmse_r{cfg.radius}_adaptive={format_value(adaptive.rmse_restored)}",
        f"rmse_r0_adaptive={format_value(adaptive.rmse_ablation)}",
        f"rmse_r{cfg.radius}_fixed={format_value(fixed.rmse_restored)}",
        f"rmse_r0_fixed={format_value(fixed.rmse_ablation)}",
    ]
    summary = EvaluationReport(adaptive.rmse_restored, adaptive.rmse_bicubic, cfg, spec)
    lines += [line for line in summary.to_key_values().splitlines() if line.startswith(("config.", "degradation."))]
    text = "\n".join(lines) + "\n"
    if args.report:
        image_io.atomic_write_bytes(args.report, text.encode())
    else:
        sys.stdout.write(text)
    return EXIT_OK


_COMMANDS = {"restore": _cmd_restore, "degrade": _cmd_degrade, "evaluate": _cmd_evaluate, "ablate": _cmd_ablate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    args.verbose = getattr(args, "verbose", 0)
    args.quiet = getattr(args, "quiet", False)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s: %(message)s")
    # DEPTHRES_THREADS is accepted but has no effect: all kernels run single-threaded.
    try:
        return _COMMANDS[args.command](args)
    except ImageFormatError as exc:
        print(f"depthres: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"depthres: error: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=sys.stderr)
        return EXIT_IO
    except (SolverDivergedError, ArithmeticError) as exc:
        print(f"depthres: error: solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ValueError) as exc:
        print(f"depthres: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
