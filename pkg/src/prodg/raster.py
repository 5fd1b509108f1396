"""Rasterization of symbol trees, region extraction, and Canny edges.

Rasters are 8-bit, single- or three-channel, row-major.  Segmentation
rasters carry one gray level per terminal category; the structural
metrics operate on region matrices cut from them and scaled to [0, 1].

The Canny pipeline is the classic five stages: Gaussian blur, Sobel
gradients, non-maximum suppression, double threshold, hysteresis.
Thresholds are expressed on the raw Sobel-magnitude scale of 0..255
inputs (the usual (100, 200) defaults).  All arithmetic is float64 with
fixed kernels, so edge maps are reproducible bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .grammar import Rect, SymbolTree, pixel_bounds

__all__ = [
    "Raster",
    "RasterError",
    "canny",
    "extract_region",
    "rasterize",
    "read_image",
    "write_png",
]


class RasterError(ValueError):
    pass


@dataclass
class Raster:
    """8-bit image; ``data`` has shape (H, W) or (H, W, 3)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.dtype != np.uint8:
            raise RasterError(f"raster data must be uint8, got {arr.dtype}")
        if arr.ndim == 2:
            pass
        elif arr.ndim == 3 and arr.shape[2] == 3:
            pass
        else:
            raise RasterError(f"raster shape must be (H, W) or (H, W, 3), got {arr.shape}")
        self.data = arr

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    def gray(self) -> np.ndarray:
        """Luma as uint8 (H, W); 0.299 R + 0.587 G + 0.114 B, rounded half-up."""
        if self.channels == 1:
            return self.data
        rgb = self.data.astype(np.float64)
        luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
        return np.floor(luma + 0.5).astype(np.uint8)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Raster)
            and self.data.shape == other.data.shape
            and bool(np.array_equal(self.data, other.data))
        )


def read_image(path: str | Path) -> Raster:
    """Read a PNG (or PGM/PPM fallback) as an 8-bit raster."""
    with Image.open(path) as img:
        if img.mode in ("L", "RGB"):
            converted = img.copy()
        elif img.mode in ("1", "I", "I;16", "P", "LA"):
            converted = img.convert("L")
        else:
            converted = img.convert("RGB")
    return Raster(np.asarray(converted, dtype=np.uint8))


def write_png(raster: Raster, path: str | Path) -> None:
    Image.fromarray(raster.data).save(path, format="PNG")


# ---------------------------------------------------------------------------
# segmentation rasters and region matrices
# ---------------------------------------------------------------------------

def rasterize(tree: SymbolTree, width: int, height: int) -> Raster:
    """Paint each pixel with the gray level of its covering terminal.

    Terminal regions tile the unit square and the half-open pixel
    mapping preserves that tiling, so every pixel is written exactly
    once.
    """
    if width < 1 or height < 1:
        raise RasterError(f"raster size must be at least 1x1, got {width}x{height}")
    out = np.zeros((height, width), dtype=np.uint8)
    for symbol in tree.terminals():
        c0, r0, c1, r1 = pixel_bounds(symbol.region, width, height)
        out[r0:r1, c0:c1] = tree.categories[symbol.category].gray_level
    return Raster(out)


def extract_region(raster: Raster, region: Rect) -> np.ndarray:
    """Crop a normalized rect to a float matrix in [0, 1].

    Uses the same half-open pixel mapping as :func:`rasterize`; RGB
    inputs are converted to luma first.
    """
    gray = raster.gray()
    c0, r0, c1, r1 = pixel_bounds(region, raster.width, raster.height)
    if c1 <= c0 or r1 <= r0:
        raise RasterError(
            f"region {tuple(region)} is empty at {raster.width}x{raster.height}"
        )
    return gray[r0:r1, c0:c1].astype(np.float64) / 255.0


# ---------------------------------------------------------------------------
# Canny edges
# ---------------------------------------------------------------------------

_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T


def _gaussian_kernel(sigma: float, size: int) -> np.ndarray:
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x**2) / (2.0 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


def canny(
    image: Raster,
    low_threshold: float = 100.0,
    high_threshold: float = 200.0,
    gaussian_sigma: float = 1.4,
    kernel_size: int = 5,
) -> Raster:
    """Binary edge map {0, 255} of a gray or RGB raster.

    Pixels with gradient magnitude >= ``high_threshold`` seed edges;
    pixels >= ``low_threshold`` survive only if 8-connected to a seed.
    The 1-pixel image border is always suppressed.
    """
    if low_threshold >= high_threshold:
        raise RasterError(
            f"thresholds out of order: low {low_threshold} >= high {high_threshold}"
        )
    gray = image.gray().astype(np.float64)
    blurred = ndimage.correlate(gray, _gaussian_kernel(gaussian_sigma, kernel_size), mode="reflect")
    gx = ndimage.correlate(blurred, _SOBEL_X, mode="reflect")
    gy = ndimage.correlate(blurred, _SOBEL_Y, mode="reflect")
    mag = np.hypot(gx, gy)

    # quantize gradient direction to 4 bins and suppress non-maxima;
    # ties keep the pixel whose forward neighbor is only equal, so a
    # symmetric 2-pixel plateau yields a single line
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    keep = np.zeros_like(mag, dtype=bool)
    h, w = mag.shape
    if h > 2 and w > 2:
        offsets = {
            0: (0, 1),    # gradient ~horizontal: compare left/right
            45: (1, 1),   # diagonal, y down
            90: (1, 0),   # gradient ~vertical: compare up/down
            135: (1, -1),
        }
        bins = np.zeros_like(mag, dtype=np.int16)
        bins[(angle >= 22.5) & (angle < 67.5)] = 45
        bins[(angle >= 67.5) & (angle < 112.5)] = 90
        bins[(angle >= 112.5) & (angle < 157.5)] = 135
        inner = (slice(1, -1), slice(1, -1))
        for direction, (dr, dc) in offsets.items():
            fwd = mag[1 + dr : h - 1 + dr, 1 + dc : w - 1 + dc]
            bwd = mag[1 - dr : h - 1 - dr, 1 - dc : w - 1 - dc]
            m = mag[inner]
            sel = (bins[inner] == direction) & (m > bwd) & (m >= fwd)
            keep[inner] |= sel

    strong = keep & (mag >= high_threshold)
    weak = keep & (mag >= low_threshold)
    labels, count = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    if count:
        seeded = np.unique(labels[strong & (labels > 0)])
        edges = np.isin(labels, seeded) & weak
    else:
        edges = strong
    return Raster(np.where(edges, 255, 0).astype(np.uint8))
