"""File formats: binary PGM renders, the measurement-set codec, a float
image codec, and CSV emission.

Measurement files ("ISARMEAS", version 1):
    magic     8 bytes  b"ISARMEAS"
    version   u16 LE
    N, M      u32 LE   (frequency steps, angle steps)
    f0, df, r0, omega, dt   f64 LE
    mask      ceil(N*M/8) bytes; bit l (l = m*N + n) lives in byte l//8,
              most significant bit first (numpy packbits order); padding
              bits must be zero
    samples   n_kept (re, im) f64 LE pairs in linear-index order

Image files ("ISARIMAG", version 1):
    magic     8 bytes  b"ISARIMAG"
    version   u16 LE
    kind      u8       (0 real, 1 complex)
    nx, ny    u32 LE
    dx, dy    f64 LE
    values    f64 LE, row-major; complex images interleave (re, im)
"""

from __future__ import annotations

import math
import struct
from pathlib import Path
from typing import Iterable

import numpy as np

from .grid import ComplexImage, ImageGrid, RealImage, build_grid
from .operator import MeasurementSet, RadarConfig, SamplingMask

__all__ = [
    "FormatError",
    "emit_pgm",
    "write_measurements",
    "read_measurements",
    "write_image",
    "read_image",
    "emit_csv",
    "format_float",
]

MEAS_MAGIC = b"ISARMEAS"
IMAGE_MAGIC = b"ISARIMAG"
FORMAT_VERSION = 1


class FormatError(ValueError):
    """Raised on malformed binary files; carries the failing byte offset."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def format_float(v: float) -> str:
    """Float to text with 9 significant digits (CSV convention)."""
    return f"{v:.9g}"


# ---------------------------------------------------------------------------
# PGM rendering


def emit_pgm(image, path, scale: str = "linear", db_floor: float = -40.0) -> None:
    """Render magnitudes to 8-bit binary PGM (P5).

    Linear scale maps the peak-normalized magnitude v to round(255 v);
    "db" maps 20 log10(v) on [db_floor, 0] linearly to [0, 255].  A
    uniformly zero image renders as all-zero bytes.  Output is bit-exact
    for a given image and flags.
    """
    if scale not in ("linear", "db"):
        raise ValueError(f"unknown PGM scale {scale!r}")
    if db_floor >= 0:
        raise ValueError("db_floor must be negative")
    mag = np.abs(np.asarray(image.values))
    peak = mag.max()
    if peak > 0:
        v = mag / peak
        if scale == "db":
            with np.errstate(divide="ignore"):
                level = 20.0 * np.log10(v, out=np.full_like(v, -np.inf), where=v > 0)
            v = np.clip((level - db_floor) / (-db_floor), 0.0, 1.0)
        data = np.floor(255.0 * v + 0.5).astype(np.uint8)
    else:
        data = np.zeros(mag.shape, dtype=np.uint8)
    h, w = data.shape
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


# ---------------------------------------------------------------------------
# Measurement codec


def write_measurements(meas: MeasurementSet, path) -> None:
    cfg = meas.config
    header = MEAS_MAGIC + struct.pack(
        "<HII5d", FORMAT_VERSION, cfg.n_freq, cfg.n_angle,
        cfg.f0, cfg.df, cfg.r0, cfg.omega, cfg.dt)
    mask_bytes = np.packbits(meas.mask.kept.ravel()).tobytes()
    body = np.empty(2 * meas.samples.size)
    body[0::2] = meas.samples.real
    body[1::2] = meas.samples.imag
    with Path(path).open("wb") as fh:
        fh.write(header)
        fh.write(mask_bytes)
        fh.write(body.astype("<f8").tobytes())


def _take(blob: bytes, offset: int, count: int, what: str) -> tuple[bytes, int]:
    if offset + count > len(blob):
        raise FormatError(f"truncated file while reading {what}", offset)
    return blob[offset:offset + count], offset + count


def read_measurements(path) -> MeasurementSet:
    blob = Path(path).read_bytes()
    magic, off = _take(blob, 0, 8, "magic")
    if magic != MEAS_MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    raw, off = _take(blob, off, 2, "version")
    version = struct.unpack("<H", raw)[0]
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", 8)
    raw, off = _take(blob, off, 8 + 40, "header")
    n_freq, n_angle, f0, df, r0, omega, dt = struct.unpack("<II5d", raw)
    try:
        config = RadarConfig(f0, df, n_freq, r0, omega, dt, n_angle)
    except ValueError as exc:
        raise FormatError(f"invalid radar parameters: {exc}", 10) from exc
    n_cells = n_freq * n_angle
    n_mask_bytes = (n_cells + 7) // 8
    mask_off = off
    raw, off = _take(blob, off, n_mask_bytes, "mask")
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    if bits[n_cells:].any():
        raise FormatError("nonzero padding bits in mask", mask_off)
    kept = bits[:n_cells].astype(bool).reshape(n_angle, n_freq)
    if not kept.any():
        raise FormatError("mask keeps no cells", mask_off)
    mask = SamplingMask(kept)
    n_kept = mask.n_kept
    sample_off = off
    raw, off = _take(blob, off, 16 * n_kept, "samples")
    if off != len(blob):
        raise FormatError("trailing bytes after samples", off)
    flat = np.frombuffer(raw, dtype="<f8")
    samples = flat[0::2] + 1j * flat[1::2]
    del sample_off
    return MeasurementSet(config, mask, samples)


# ---------------------------------------------------------------------------
# Image codec


def write_image(image, path) -> None:
    kind = 1 if isinstance(image, ComplexImage) else 0
    grid = image.grid
    header = IMAGE_MAGIC + struct.pack("<HBII2d", FORMAT_VERSION, kind,
                                       grid.nx, grid.ny, grid.dx, grid.dy)
    if kind:
        body = np.empty(2 * grid.n_pixels)
        body[0::2] = image.values.real.ravel()
        body[1::2] = image.values.imag.ravel()
    else:
        body = image.values.ravel()
    with Path(path).open("wb") as fh:
        fh.write(header)
        fh.write(body.astype("<f8").tobytes())


def read_image(path) -> RealImage | ComplexImage:
    blob = Path(path).read_bytes()
    magic, off = _take(blob, 0, 8, "magic")
    if magic != IMAGE_MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    raw, off = _take(blob, off, 2 + 1 + 8 + 16, "header")
    version, kind, nx, ny, dx, dy = struct.unpack("<HBII2d", raw)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", 8)
    if kind not in (0, 1):
        raise FormatError(f"unknown image kind {kind}", 10)
    grid = build_grid(nx, ny, dx, dy)
    n_vals = grid.n_pixels * (2 if kind else 1)
    raw, off = _take(blob, off, 8 * n_vals, "values")
    if off != len(blob):
        raise FormatError("trailing bytes after values", off)
    flat = np.frombuffer(raw, dtype="<f8")
    if kind:
        return ComplexImage(grid, flat[0::2] + 1j * flat[1::2])
    return RealImage(grid, flat)


# ---------------------------------------------------------------------------
# CSV emission

RESULT_COLUMNS = ("algorithm", "ratio", "snr_db", "trial", "seed", "status",
                  "iterations", "rmse", "rmse_db", "entropy_bits", "support_size")

TRACE_COLUMNS = ("iteration", "objective", "rel_change", "support_size")


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format_float(value)
    return str(value)


def _write_rows(path, columns: tuple[str, ...], rows: Iterable[dict]) -> None:
    with Path(path).open("w", encoding="ascii", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(row.get(c)) for c in columns) + "\n")


def emit_csv(obj, path) -> None:
    """Write trial results (list of TrialResult) or a SolveTrace to CSV.

    Floats carry 9 significant digits; wall-clock timings are deliberately
    not emitted so that output files are a pure function of config + seed.
    """
    from .experiment import TrialResult  # local import to avoid a cycle
    from .solvers import SolveTrace

    if isinstance(obj, SolveTrace):
        rows = ({"iteration": k + 1, "objective": obj.objective[k],
                 "rel_change": obj.rel_change[k], "support_size": obj.support_size[k]}
                for k in range(obj.iterations))
        _write_rows(path, TRACE_COLUMNS, rows)
        return
    results = list(obj)
    if results and not isinstance(results[0], TrialResult):
        raise TypeError("emit_csv expects a SolveTrace or TrialResult records")
    results.sort(key=lambda r: (r.algorithm, r.ratio, r.snr_db, r.trial))
    _write_rows(path, RESULT_COLUMNS, (r.csv_row() for r in results))
