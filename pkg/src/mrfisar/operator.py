"""Stepped-frequency ISAR measurement physics.

A scene rotating at constant rate omega is observed at N frequencies
f_n = f0 + n*df and M slow-time instants t_m = m*dt.  The sensing operator
maps pixel reflectivities to the kept subset of the N x M complex samples

    phi[l, i] = exp(-j 2 pi f_n * 2 R_i(t_m) / c)

with the measurement cells linearized frequency-fastest, l = m*N + n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .grid import ComplexImage, ImageGrid, RealImage, build_grid, pixel_coords

__all__ = [
    "C_LIGHT",
    "RadarConfig",
    "SamplingMask",
    "MeasurementSet",
    "SensingOperator",
    "LipschitzEstimate",
    "instantaneous_range",
    "far_field_range",
    "sensing_entry",
    "make_mask",
    "full_mask",
    "simulate_measurements",
    "estimate_lipschitz",
    "power_iteration",
    "resolution_spacing",
    "default_grid",
]

C_LIGHT = 299_792_458.0

# materialize the sensing matrix while N*M*I stays at or below this
DENSE_THRESHOLD = 2**24


@dataclass(frozen=True)
class RadarConfig:
    """Acquisition geometry and waveform: f_n = f0 + n*df, t_m = m*dt."""

    f0: float
    df: float
    n_freq: int
    r0: float
    omega: float
    dt: float
    n_angle: int

    def __post_init__(self) -> None:
        if self.f0 <= 0:
            raise ValueError("start frequency must be positive")
        if self.df < 0:
            raise ValueError("frequency step must be >= 0")
        if self.n_freq < 1 or self.n_angle < 1:
            raise ValueError("need n_freq >= 1 and n_angle >= 1")
        if self.r0 <= 0:
            raise ValueError("standoff distance must be positive")
        if self.dt <= 0:
            raise ValueError("slow-time step must be positive")
        if self.omega < 0:
            raise ValueError("rotation rate must be >= 0")
        if not self.total_angle < math.pi / 2:
            raise ValueError("total rotation angle must stay below pi/2")

    @property
    def total_angle(self) -> float:
        return self.omega * self.dt * (self.n_angle - 1)

    @property
    def bandwidth(self) -> float:
        return self.df * (self.n_freq - 1)

    @property
    def n_cells(self) -> int:
        return self.n_freq * self.n_angle

    def frequencies(self) -> np.ndarray:
        return self.f0 + np.arange(self.n_freq) * self.df

    def slow_times(self) -> np.ndarray:
        return np.arange(self.n_angle) * self.dt

    @classmethod
    def from_scan(cls, f0: float, bandwidth: float, n_freq: int, r0: float,
                  total_angle_deg: float, n_angle: int, dt: float = 1e-3) -> "RadarConfig":
        """Build from start frequency / bandwidth / total rotation angle."""
        df = bandwidth / (n_freq - 1) if n_freq > 1 else 0.0
        theta = math.radians(total_angle_deg)
        omega = theta / (dt * (n_angle - 1)) if n_angle > 1 else 0.0
        return cls(f0, df, n_freq, r0, omega, dt, n_angle)

    @classmethod
    def table_defaults(cls) -> "RadarConfig":
        """The full-data simulation scenario: 35-36 GHz in 64 steps, 1.7 deg
        of rotation in 64 steps, 5 km standoff."""
        return cls.from_scan(35e9, 1e9, 64, 5000.0, 1.7, 64)


def resolution_spacing(config: RadarConfig) -> tuple[float, float]:
    """Classical resolution cells (dx, dy) = (lambda0/(2*dtheta), c/(2*B))."""
    if config.bandwidth <= 0 or config.total_angle <= 0:
        raise ValueError("resolution spacing needs bandwidth > 0 and rotation > 0")
    dy = C_LIGHT / (2 * config.bandwidth)
    dx = (C_LIGHT / config.f0) / (2 * config.total_angle)
    return dx, dy


def alias_free_spacing(config: RadarConfig) -> tuple[float, float]:
    """Resolution-cell spacing shrunk by (steps-1)/steps per axis so that an
    n_angle x n_freq grid spans strictly less than one alias period.

    At the classical spacing the extreme rows/columns of a full-size grid
    sit exactly one phase-wrap period apart and steer identically, which
    makes the full-data operator rank deficient at the edges; this spacing
    removes that degeneracy (useful for exact-recovery studies).
    """
    dx, dy = resolution_spacing(config)
    return (dx * (config.n_angle - 1) / config.n_angle,
            dy * (config.n_freq - 1) / config.n_freq)


def default_grid(config: RadarConfig, nx: int | None = None, ny: int | None = None,
                 dx: float | None = None, dy: float | None = None) -> ImageGrid:
    """Grid matched to the acquisition: n_angle x n_freq pixels at the
    classical resolution-cell spacing unless overridden."""
    if dx is None or dy is None:
        rx, ry = resolution_spacing(config)
        dx = rx if dx is None else dx
        dy = ry if dy is None else dy
    return build_grid(nx or config.n_angle, ny or config.n_freq, dx, dy)


def instantaneous_range(config: RadarConfig, x, y, t_m):
    """Exact scatterer-to-radar range at slow time t_m (meters)."""
    theta = config.omega * np.asarray(t_m, dtype=float)
    arg = (config.r0**2 + np.asarray(x, dtype=float) ** 2 + np.asarray(y, dtype=float) ** 2
           + 2 * config.r0 * (-np.asarray(x, dtype=float) * np.sin(theta)
                              + np.asarray(y, dtype=float) * np.cos(theta)))
    if np.any(arg <= 0):
        raise ValueError("range argument not positive; pixel behind the radar")
    out = np.sqrt(arg)
    return float(out) if out.ndim == 0 else out


def far_field_range(config: RadarConfig, x, y, t_m):
    """Linearized range R0 - x sin(omega t) + y cos(omega t)."""
    theta = config.omega * np.asarray(t_m, dtype=float)
    out = (config.r0 - np.asarray(x, dtype=float) * np.sin(theta)
           + np.asarray(y, dtype=float) * np.cos(theta))
    return float(out) if out.ndim == 0 else out


@dataclass(eq=False)
class SamplingMask:
    """Kept cells of the N x M (frequency, angle) grid.

    Stored angle-major, shape (n_angle, n_freq), so ravel() order matches
    the linear cell index l = m*N + n.
    """

    kept: np.ndarray

    def __post_init__(self) -> None:
        self.kept = np.asarray(self.kept, dtype=bool).copy()
        if self.kept.ndim != 2:
            raise ValueError("mask must be 2-D (n_angle, n_freq)")
        if not self.kept.any():
            raise ValueError("mask keeps no cells")

    @property
    def n_angle(self) -> int:
        return self.kept.shape[0]

    @property
    def n_freq(self) -> int:
        return self.kept.shape[1]

    @property
    def n_kept(self) -> int:
        return int(self.kept.sum())

    @property
    def ratio(self) -> float:
        return self.n_kept / self.kept.size

    def kept_indices(self) -> np.ndarray:
        """Linear cell indices l = m*N + n of kept cells, ascending."""
        return np.flatnonzero(self.kept.ravel())


def full_mask(n_freq: int, n_angle: int) -> SamplingMask:
    return SamplingMask(np.ones((n_angle, n_freq), dtype=bool))


def make_mask(n_freq: int, n_angle: int, ratio: float, seed: int) -> SamplingMask:
    """Uniform random subsampling keeping exactly round(ratio*N*M) cells."""
    if not 0 < ratio <= 1:
        raise ValueError(f"sampling ratio must lie in (0, 1], got {ratio}")
    total = n_freq * n_angle
    k = int(round(ratio * total))
    if k < 1:
        raise ValueError(f"ratio {ratio} keeps no cells on a {n_freq}x{n_angle} grid")
    rng = np.random.default_rng(seed)
    idx = rng.choice(total, size=k, replace=False)
    kept = np.zeros(total, dtype=bool)
    kept[idx] = True
    return SamplingMask(kept.reshape(n_angle, n_freq))


@dataclass(eq=False)
class MeasurementSet:
    """Complex samples on the kept cells, ordered by linear cell index."""

    config: RadarConfig
    mask: SamplingMask
    samples: np.ndarray

    def __post_init__(self) -> None:
        if (self.mask.n_freq, self.mask.n_angle) != (self.config.n_freq, self.config.n_angle):
            raise ValueError("mask shape does not match radar config")
        self.samples = np.asarray(self.samples, dtype=np.complex128).ravel().copy()
        if self.samples.size != self.mask.n_kept:
            raise ValueError(
                f"expected {self.mask.n_kept} samples, got {self.samples.size}")


def sensing_entry(config: RadarConfig, grid: ImageGrid, l: int, i: int,
                  mode: str = "exact") -> complex:
    """Single matrix element phi[l, i], computed from scratch."""
    if not 0 <= l < config.n_cells:
        raise ValueError(f"measurement index {l} out of range [0, {config.n_cells})")
    m, n = divmod(int(l), config.n_freq)
    x, y = pixel_coords(grid, i)
    t_m = m * config.dt
    if mode == "exact":
        r = instantaneous_range(config, x, y, t_m)
    elif mode == "far-field":
        r = far_field_range(config, x, y, t_m)
    else:
        raise ValueError(f"unknown operator mode {mode!r}")
    f_n = config.f0 + n * config.df
    return complex(np.exp(-4j * np.pi * f_n * r / C_LIGHT))


class SensingOperator:
    """Linear map from pixel reflectivities to kept measurement samples.

    mode "exact" uses the square-root range, "far-field" the linearized
    one.  The dense matrix is materialized when N*M*I <= 2**24 entries (or
    per the `dense` override); otherwise products are evaluated blockwise
    per angle without storing the matrix.
    """

    def __init__(self, config: RadarConfig, grid: ImageGrid,
                 mask: SamplingMask | None = None, mode: str = "exact",
                 dense: bool | None = None) -> None:
        if mode not in ("exact", "far-field"):
            raise ValueError(f"unknown operator mode {mode!r}")
        if mask is None:
            mask = full_mask(config.n_freq, config.n_angle)
        if (mask.n_freq, mask.n_angle) != (config.n_freq, config.n_angle):
            raise ValueError("mask shape does not match radar config")
        self.config = config
        self.grid = grid
        self.mask = mask
        self.mode = mode
        if dense is None:
            dense = config.n_cells * grid.n_pixels <= DENSE_THRESHOLD
        self._ranges = self._compute_ranges()
        self._matrix = self._assemble() if dense else None

    @property
    def n_kept(self) -> int:
        return self.mask.n_kept

    @property
    def is_dense(self) -> bool:
        return self._matrix is not None

    @property
    def matrix(self) -> np.ndarray | None:
        """Dense (n_kept, n_pixels) matrix, if materialized."""
        return self._matrix

    def _compute_ranges(self) -> np.ndarray:
        """R[i, m] for every pixel i and slow time t_m."""
        x, y = self.grid.coord_arrays()
        t = self.config.slow_times()
        theta = self.config.omega * t
        if self.mode == "exact":
            arg = (self.config.r0**2 + (x**2 + y**2)[:, None]
                   + 2 * self.config.r0 * (-np.outer(x, np.sin(theta))
                                           + np.outer(y, np.cos(theta))))
            if np.any(arg <= 0):
                raise ValueError("grid extends behind the radar for this geometry")
            return np.sqrt(arg)
        return (self.config.r0 - np.outer(x, np.sin(theta))
                + np.outer(y, np.cos(theta)))

    def _angle_blocks(self):
        """Yield (kept linear rows for angle m, frequency values, m)."""
        kept = self.mask.kept
        freqs = self.config.frequencies()
        for m in range(self.config.n_angle):
            sel = np.flatnonzero(kept[m])
            if sel.size:
                yield m, sel, freqs[sel]

    def _block(self, m: int, f_sel: np.ndarray) -> np.ndarray:
        phase = (4 * np.pi / C_LIGHT) * np.outer(f_sel, self._ranges[:, m])
        return np.exp(-1j * phase)

    def _assemble(self) -> np.ndarray:
        out = np.empty((self.n_kept, self.grid.n_pixels), dtype=np.complex128)
        row = 0
        for m, sel, f_sel in self._angle_blocks():
            out[row:row + sel.size] = self._block(m, f_sel)
            row += sel.size
        return out

    def forward_values(self, values: np.ndarray) -> np.ndarray:
        """Apply phi to a (ny, nx) or flat pixel array; returns (n_kept,)."""
        x = np.asarray(values, dtype=np.complex128).ravel()
        if x.size != self.grid.n_pixels:
            raise ValueError("image size does not match operator grid")
        if self._matrix is not None:
            return self._matrix @ x
        out = np.empty(self.n_kept, dtype=np.complex128)
        row = 0
        for m, sel, f_sel in self._angle_blocks():
            out[row:row + sel.size] = self._block(m, f_sel) @ x
            row += sel.size
        return out

    def adjoint_values(self, samples: np.ndarray) -> np.ndarray:
        """Apply phi^H to kept samples; returns a (ny, nx) array."""
        s = np.asarray(samples, dtype=np.complex128).ravel()
        if s.size != self.n_kept:
            raise ValueError("sample count does not match operator mask")
        if self._matrix is not None:
            return (self._matrix.conj().T @ s).reshape(self.grid.shape)
        acc = np.zeros(self.grid.n_pixels, dtype=np.complex128)
        row = 0
        for m, sel, f_sel in self._angle_blocks():
            acc += self._block(m, f_sel).conj().T @ s[row:row + sel.size]
            row += sel.size
        return acc.reshape(self.grid.shape)

    def apply_forward(self, image: ComplexImage) -> MeasurementSet:
        if image.grid != self.grid:
            raise ValueError("image grid does not match operator grid")
        return MeasurementSet(self.config, self.mask, self.forward_values(image.values))

    def apply_adjoint(self, meas: MeasurementSet) -> ComplexImage:
        if meas.mask.kept.shape != self.mask.kept.shape or not np.array_equal(
                meas.mask.kept, self.mask.kept):
            raise ValueError("measurement mask does not match operator mask")
        return ComplexImage(self.grid, self.adjoint_values(meas.samples))


def simulate_measurements(op: SensingOperator, scene: RealImage, snr_db: float,
                          seed: int) -> MeasurementSet:
    """Noisy forward simulation y = phi x + eps.

    eps is circular complex white Gaussian with per-sample variance
    (||phi x||^2 / n_kept) * 10^(-snr/10), split equally between the real
    and imaginary parts.  snr_db = inf gives the exact forward model; a
    zero scene is defined to produce zero noise (the SNR ratio is
    undefined at zero signal power).
    """
    if scene.grid != op.grid:
        raise ValueError("scene grid does not match operator grid")
    clean = op.forward_values(scene.values)
    if math.isinf(snr_db):
        return MeasurementSet(op.config, op.mask, clean)
    power = float(np.mean(np.abs(clean) ** 2))
    if power == 0.0:
        return MeasurementSet(op.config, op.mask, clean)
    sigma2 = power * 10.0 ** (-snr_db / 10.0)
    rng = np.random.default_rng(seed)
    noise = rng.normal(scale=math.sqrt(sigma2 / 2), size=(clean.size, 2))
    eps = noise[:, 0] + 1j * noise[:, 1]
    return MeasurementSet(op.config, op.mask, clean + eps)


class LipschitzEstimate(NamedTuple):
    value: float
    converged: bool
    iterations: int


def power_iteration(forward, adjoint, shape: tuple[int, int], tol: float = 1e-4,
                    max_iter: int = 200, seed: int = 0) -> LipschitzEstimate:
    """Largest eigenvalue of A^H A by power iteration on the normal operator.

    Never raises on slow convergence: returns the best estimate with a
    converged flag.  Deterministic for a fixed seed.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    rng = np.random.default_rng(seed)
    v = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = adjoint(forward(v))
        lam_new = float(np.linalg.norm(w))
        if lam_new == 0.0:
            return LipschitzEstimate(0.0, True, it)
        v = w / lam_new
        if abs(lam_new - lam) <= tol * lam_new:
            return LipschitzEstimate(lam_new, True, it)
        lam = lam_new
    return LipschitzEstimate(lam, False, max_iter)


def estimate_lipschitz(op, tol: float = 1e-4, max_iter: int = 200,
                       seed: int = 0) -> LipschitzEstimate:
    """Upper bound on the Lipschitz constant of the data-fit gradient.

    Power iteration estimates lambda_max(phi^H phi) from below, so the
    returned value carries a 1.05 safety factor.
    """
    est = power_iteration(op.forward_values, op.adjoint_values, op.grid.shape,
                          tol=tol, max_iter=max_iter, seed=seed)
    return LipschitzEstimate(1.05 * est.value, est.converged, est.iterations)
