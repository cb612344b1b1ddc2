"""Image-quality measures: magnitude RMSE (linear and dB) and Shannon
entropy of the magnitude histogram."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import ComplexImage, RealImage

__all__ = ["MetricReport", "rmse", "rmse_db", "entropy", "compute_report"]


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    rmse_db: float
    entropy_bits: float
    bins: int


def _magnitude(image) -> np.ndarray:
    return np.abs(image.values)


def rmse(reference: RealImage, estimate, normalize: bool = False) -> float:
    """Root mean squared magnitude difference.

    With normalize=True both magnitudes are first peak-normalized to 1,
    which is how reported dB values are made scale-free; the raw variant
    is the plain per-pixel metric.
    """
    if reference.grid != estimate.grid:
        raise ValueError("images live on different grids")
    ref = _magnitude(reference)
    est = _magnitude(estimate)
    if normalize:
        if ref.max() > 0:
            ref = ref / ref.max()
        if est.max() > 0:
            est = est / est.max()
    return float(np.sqrt(np.mean((ref - est) ** 2)))


def rmse_db(rmse_linear: float) -> float:
    """20 log10 of a linear RMSE; requires a positive argument."""
    if rmse_linear <= 0:
        raise ValueError("rmse must be positive for a dB conversion")
    return 20.0 * math.log10(rmse_linear)


def entropy(image, bins: int = 256) -> float:
    """Shannon entropy (bits) of the magnitude histogram.

    Magnitudes are normalized to [0, 1] by the image peak and counted in
    `bins` uniform bins; an all-zero image returns 0 by convention.
    """
    if bins < 2:
        raise ValueError("need at least 2 histogram bins")
    mag = _magnitude(image)
    peak = mag.max()
    if peak == 0:
        return 0.0
    counts, _ = np.histogram(mag / peak, bins=bins, range=(0.0, 1.0))
    p = counts[counts > 0] / mag.size
    return float(-(p * np.log2(p)).sum())


def compute_report(reference: RealImage, estimate: ComplexImage,
                   bins: int = 256) -> MetricReport:
    """Peak-normalized RMSE (linear + dB) and estimate entropy in one row.

    A perfect reconstruction has rmse 0; its dB value is reported as -inf
    rather than raising.
    """
    r = rmse(reference, estimate, normalize=True)
    r_db = rmse_db(r) if r > 0 else float("-inf")
    return MetricReport(r, r_db, entropy(estimate, bins), bins)
