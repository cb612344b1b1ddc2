"""Image grid geometry and synthetic clustered targets.

The grid is centered on the target centroid.  Pixel (i, j), with i the
cross-range (column) index and j the range (row) index, sits at

    x = (i - nx/2) * dx,    y = (j - ny/2) * dy    [meters]

and linear pixel indices are row-major: idx = j * nx + i.  Every module in
this package uses this one linearization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ImageGrid",
    "RealImage",
    "ComplexImage",
    "PhantomSpec",
    "build_grid",
    "pixel_coords",
    "make_phantom",
]


@dataclass(frozen=True)
class ImageGrid:
    nx: int
    ny: int
    dx: float
    dy: float

    def __post_init__(self) -> None:
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid dimensions must be >= 1, got {self.nx}x{self.ny}")
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError(f"pixel spacing must be positive, got dx={self.dx}, dy={self.dy}")

    @property
    def n_pixels(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple[int, int]:
        """numpy layout (rows, cols) = (ny, nx)."""
        return (self.ny, self.nx)

    def x_axis(self) -> np.ndarray:
        return (np.arange(self.nx) - self.nx / 2) * self.dx

    def y_axis(self) -> np.ndarray:
        return (np.arange(self.ny) - self.ny / 2) * self.dy

    def coord_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat (n_pixels,) x and y coordinates in linear-index order."""
        xx, yy = np.meshgrid(self.x_axis(), self.y_axis())
        return xx.ravel(), yy.ravel()


def build_grid(nx: int, ny: int, dx: float, dy: float) -> ImageGrid:
    """Validating constructor for ImageGrid."""
    return ImageGrid(int(nx), int(ny), float(dx), float(dy))


def pixel_coords(grid: ImageGrid, index: int) -> tuple[float, float]:
    """Physical (x, y) of linear pixel index (row-major, idx = row*nx + col)."""
    if not 0 <= index < grid.n_pixels:
        raise ValueError(f"pixel index {index} out of range [0, {grid.n_pixels})")
    row, col = divmod(int(index), grid.nx)
    return (col - grid.nx / 2) * grid.dx, (row - grid.ny / 2) * grid.dy


def _as_2d(grid: ImageGrid, values: np.ndarray, dtype: type) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.size != grid.n_pixels:
        raise ValueError(f"expected {grid.n_pixels} pixel values, got {arr.size}")
    return arr.reshape(grid.shape).copy()


@dataclass(eq=False)
class RealImage:
    """Nonnegative reflectivity magnitude per pixel (ground truth)."""

    grid: ImageGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = _as_2d(self.grid, self.values, np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("image values must be finite")
        if np.any(self.values < 0):
            raise ValueError("RealImage values must be nonnegative")

    @property
    def nonzero_fraction(self) -> float:
        return float(np.count_nonzero(self.values)) / self.grid.n_pixels

    @classmethod
    def zeros(cls, grid: ImageGrid) -> "RealImage":
        return cls(grid, np.zeros(grid.shape))


@dataclass(eq=False)
class ComplexImage:
    """Complex reflectivity per pixel (the reconstruction variable)."""

    grid: ImageGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = _as_2d(self.grid, self.values, np.complex128)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("image values must be finite")

    @classmethod
    def zeros(cls, grid: ImageGrid) -> "ComplexImage":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @classmethod
    def from_real(cls, image: RealImage) -> "ComplexImage":
        return cls(image.grid, image.values.astype(np.complex128))


@dataclass(frozen=True)
class PhantomSpec:
    """Descriptor for synthetic targets.

    shape "blobs": k disks of the given pixel radius at random positions.
    shape "aircraft": a fixed plane-like skeleton of bars plus two engine
    disks, scaled to the grid.  Component amplitudes are drawn uniformly
    from [amin, amax] (amin == amax gives a constant-amplitude scene).
    """

    shape: str = "aircraft"
    k: int = 4
    radius: int = 2
    amin: float = 1.0
    amax: float = 1.0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("phantom needs k >= 1 components")
        if self.radius < 0:
            raise ValueError("phantom radius must be >= 0")
        if not 0 < self.amin <= self.amax:
            raise ValueError("need 0 < amin <= amax")


def _disk_offsets(radius: int) -> np.ndarray:
    r = int(radius)
    d = np.arange(-r, r + 1)
    di, dj = np.meshgrid(d, d)
    keep = di**2 + dj**2 <= r**2
    return np.stack([dj[keep], di[keep]], axis=1)  # (row, col) offsets


def _paint_disk(values: np.ndarray, row: int, col: int, radius: int, amp: float) -> None:
    ny, nx = values.shape
    for dr, dc in _disk_offsets(radius):
        r, c = row + dr, col + dc
        if 0 <= r < ny and 0 <= c < nx:
            values[r, c] = max(values[r, c], amp)


def _paint_bar(values: np.ndarray, r0: int, r1: int, c0: int, c1: int, amp: float) -> None:
    ny, nx = values.shape
    r0, r1 = max(r0, 0), min(r1, ny)
    c0, c1 = max(c0, 0), min(c1, nx)
    if r0 < r1 and c0 < c1:
        values[r0:r1, c0:c1] = np.maximum(values[r0:r1, c0:c1], amp)


def _amp(rng: np.random.Generator, spec: PhantomSpec) -> float:
    if spec.amin == spec.amax:
        return spec.amin
    return float(rng.uniform(spec.amin, spec.amax))


def _blobs(grid: ImageGrid, spec: PhantomSpec, rng: np.random.Generator) -> np.ndarray:
    values = np.zeros(grid.shape)
    ny, nx = grid.shape
    # keep disks fully inside the grid when there is room, so that r >= 1
    # blobs are never clipped down to isolated pixels
    mr = min(spec.radius, (ny - 1) // 2, (nx - 1) // 2)
    for _ in range(spec.k):
        row = int(rng.integers(mr, ny - mr))
        col = int(rng.integers(mr, nx - mr))
        _paint_disk(values, row, col, spec.radius, _amp(rng, spec))
    return values


def _aircraft(grid: ImageGrid, spec: PhantomSpec, rng: np.random.Generator) -> np.ndarray:
    values = np.zeros(grid.shape)
    ny, nx = grid.shape
    cx = nx // 2
    w = max(1, round(nx / 24))
    # fuselage
    _paint_bar(values, round(0.20 * ny), round(0.80 * ny), cx - w // 2, cx - w // 2 + w,
               _amp(rng, spec))
    # main wings
    wr = round(0.42 * ny)
    _paint_bar(values, wr, wr + w, round(0.16 * nx), round(0.84 * nx), _amp(rng, spec))
    # tailplane
    tr = round(0.74 * ny)
    _paint_bar(values, tr, tr + max(1, w - 1), round(0.36 * nx), round(0.64 * nx),
               _amp(rng, spec))
    # engines under the wings
    er = max(1, spec.radius)
    for frac in (0.30, 0.70):
        _paint_disk(values, wr + w, round(frac * nx), er, _amp(rng, spec))
    return values


_SHAPES = {"blobs": _blobs, "aircraft": _aircraft}


def make_phantom(grid: ImageGrid, spec: PhantomSpec, seed: int) -> RealImage:
    """Generate a clustered synthetic target, deterministic in (spec, seed)."""
    if spec.shape not in _SHAPES:
        raise ValueError(f"unknown phantom shape {spec.shape!r}; choose from {sorted(_SHAPES)}")
    rng = np.random.default_rng(seed)
    return RealImage(grid, _SHAPES[spec.shape](grid, spec, rng))
