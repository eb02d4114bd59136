"""Binary PGM (P5) and PPM (P6) reading and writing.

16-bit samples are big-endian.  Values are normalized by ``maxval`` on read
and quantized with round-half-up on write.  Writes go through a temporary
file in the target directory followed by an atomic rename.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .core import LAMBDA_MIN, BandwidthMap, DepthMap, GuidanceImage


class ImageFormatError(ValueError):
    """The file is not a well-formed binary PGM/PPM."""


class TruncatedImageError(ImageFormatError):
    """The pixel payload is shorter than the header promises."""


class UnsupportedMaxvalError(ImageFormatError):
    """``maxval`` is outside the supported set."""


def _parse_header(data: bytes):
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageFormatError("incomplete header")
        tokens.append(data[start:pos])
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise ImageFormatError("missing whitespace after maxval")
    magic = tokens[0].decode("ascii", "replace")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ImageFormatError(f"non-numeric header field in {tokens[1:]!r}") from None
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"invalid dimensions {width}x{height}")
    return magic, width, height, maxval, pos + 1


def _read_netpbm(path, magic_expected: str, channels: int, allowed_maxvals):
    data = Path(path).read_bytes()
    magic, width, height, maxval, offset = _parse_header(data)
    if magic != magic_expected:
        raise ImageFormatError(f"{path}: expected {magic_expected} file, found {magic!r}")
    if maxval not in allowed_maxvals:
        raise UnsupportedMaxvalError(f"{path}: unsupported maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    payload = data[offset:offset + count * dtype.itemsize]
    if len(payload) < count * dtype.itemsize:
        raise TruncatedImageError(f"{path}: payload has {len(payload)} bytes, expected {count * dtype.itemsize}")
    samples = np.frombuffer(payload, dtype=dtype).astype(np.int64)
    shape = (height, width, channels) if channels > 1 else (height, width)
    return samples.reshape(shape), maxval


def _quantize(values: np.ndarray, maxval: int) -> np.ndarray:
    return np.floor(np.clip(values, 0.0, 1.0) * maxval + 0.5).astype(np.int64)


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_pgm(samples: np.ndarray, maxval: int) -> bytes:
    h, w = samples.shape
    dtype = ">u2" if maxval > 255 else "u1"
    return f"P5\n{w} {h}\n{maxval}\n".encode("ascii") + samples.astype(dtype).tobytes()


def read_depth(path, zero_is_hole: bool = False) -> DepthMap:
    """Read an 8- or 16-bit P5 depth map; with ``zero_is_hole`` a 0 sample marks a hole."""
    samples, maxval = _read_netpbm(path, "P5", 1, (255, 65535))
    mask = samples != 0 if zero_is_hole else None
    return DepthMap(samples / maxval, mask)


def write_depth(depth: DepthMap, path, bit_depth: int = 16) -> None:
    if bit_depth not in (8, 16):
        raise ValueError("bit_depth must be 8 or 16")
    maxval = 255 if bit_depth == 8 else 65535
    samples = _quantize(depth.values, maxval)
    samples[~depth.mask] = 0
    atomic_write_bytes(path, encode_pgm(samples, maxval))


def read_color(path) -> GuidanceImage:
    samples, maxval = _read_netpbm(path, "P6", 3, (255,))
    return GuidanceImage(samples / maxval)


def write_color(image: GuidanceImage, path) -> None:
    h, w = image.shape
    samples = _quantize(image.values, 255).astype("u1")
    atomic_write_bytes(path, f"P6\n{w} {h}\n255\n".encode("ascii") + samples.tobytes())


def bandwidth_sidecar(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".scale.txt")


def write_bandwidth(bw: BandwidthMap, path) -> None:
    """16-bit PGM of the bandwidth map scaled from ``[LAMBDA_MIN, max]`` to ``[0, 65535]``.

    The scale goes to ``<path>.scale.txt`` as ``lambda_min=`` / ``lambda_max=`` lines.
    """
    lam = bw.values
    lo, hi = LAMBDA_MIN, float(lam.max())
    span = hi - lo
    scaled = (lam - lo) / span if span > 0 else np.zeros_like(lam)
    atomic_write_bytes(path, encode_pgm(_quantize(scaled, 65535), 65535))
    atomic_write_bytes(bandwidth_sidecar(path), f"lambda_min={lo!r}\nlambda_max={hi!r}\n".encode("ascii"))


def read_bandwidth(path) -> BandwidthMap:
    scale = {}
    for line in bandwidth_sidecar(path).read_text().splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            scale[key.strip()] = float(value)
    samples, maxval = _read_netpbm(path, "P5", 1, (65535,))
    lo, hi = scale["lambda_min"], scale["lambda_max"]
    return BandwidthMap(np.maximum(LAMBDA_MIN, lo + samples / maxval * (hi - lo)))
