"""Image containers and pixel-level primitives.

Conventions used throughout the package:

* gray image  -- 2-D ``uint8`` array, shape ``(height, width)``, row-major
* float image -- 2-D ``float64`` array, same layout, all values finite
* binary image -- 2-D ``bool`` array; ``True`` is white, ``False`` is black

All operations are pure: they never mutate their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def require_gray(img: np.ndarray) -> np.ndarray:
    """Validate the gray-image convention and return the array unchanged."""
    img = np.asarray(img)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise InvalidInput(f"expected a 2-D image of at least 1x1, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise InvalidInput(f"expected uint8 intensities, got dtype {img.dtype}")
    return img


def round_half_up(values: np.ndarray) -> np.ndarray:
    """Deterministic rounding with .5 always going up (no banker's rounding)."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5)


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Convert an (H, W, 3) uint8 raster to gray with 0.299/0.587/0.114 luma weights."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise InvalidInput(f"expected an (H, W, 3) raster, got shape {rgb.shape}")
    if rgb.shape[0] < 1 or rgb.shape[1] < 1:
        raise InvalidInput("image must be at least 1x1")
    if rgb.dtype != np.uint8:
        raise InvalidInput(f"expected uint8 channels, got dtype {rgb.dtype}")
    luma = rgb.astype(np.float64) @ np.array(LUMA_WEIGHTS)
    return np.clip(round_half_up(luma), 0, 255).astype(np.uint8)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian of radius ceil(3*sigma)."""
    if not sigma > 0:
        raise InvalidInput(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def convolve_separable(img: np.ndarray, kernel_y: np.ndarray, kernel_x: np.ndarray) -> np.ndarray:
    """2-D convolution with a separable kernel pair; borders replicate edge pixels."""
    out = np.asarray(img, dtype=np.float64)
    ry = len(kernel_y) // 2
    rx = len(kernel_x) // 2
    if ry:
        padded = np.pad(out, ((ry, ry), (0, 0)), mode="edge")
        acc = np.zeros_like(out)
        for i, w in enumerate(kernel_y):
            acc += w * padded[i : i + out.shape[0], :]
        out = acc
    else:
        out = out * kernel_y[0]
    if rx:
        padded = np.pad(out, ((0, 0), (rx, rx)), mode="edge")
        acc = np.zeros_like(out)
        for i, w in enumerate(kernel_x):
            acc += w * padded[:, i : i + out.shape[1]]
        out = acc
    else:
        out = out * kernel_x[0]
    return out


def smooth_float(img: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian smoothing that keeps full float precision (no quantization)."""
    k = gaussian_kernel(sigma)
    return convolve_separable(np.asarray(img, dtype=np.float64), k, k)


def gaussian_smooth(img: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian-smooth a gray image; result is re-quantized to uint8."""
    img = require_gray(img)
    smoothed = smooth_float(img, sigma)
    return np.clip(round_half_up(smoothed), 0, 255).astype(np.uint8)


def gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel (gx, gy) as float64: central differences inside, one-sided on borders.

    Accepts uint8 or float input; requires at least 3x3 so the interior exists.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 3 or arr.shape[1] < 3:
        raise InvalidInput(f"gradients need at least a 3x3 image, got shape {arr.shape}")
    gx = np.empty_like(arr)
    gy = np.empty_like(arr)
    gx[:, 1:-1] = (arr[:, 2:] - arr[:, :-2]) / 2.0
    gx[:, 0] = arr[:, 1] - arr[:, 0]
    gx[:, -1] = arr[:, -1] - arr[:, -2]
    gy[1:-1, :] = (arr[2:, :] - arr[:-2, :]) / 2.0
    gy[0, :] = arr[1, :] - arr[0, :]
    gy[-1, :] = arr[-1, :] - arr[-2, :]
    return gx, gy


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle: top-left corner plus extent."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w < 1 or self.h < 1:
            raise InvalidInput(f"rectangle extent must be at least 1x1, got {self.w}x{self.h}")

    @property
    def area(self) -> int:
        return self.w * self.h

    def contains_point(self, x: int, y: int) -> bool:
        return self.x <= x < self.x + self.w and self.y <= y < self.y + self.h

    def within(self, width: int, height: int) -> bool:
        return self.x >= 0 and self.y >= 0 and self.x + self.w <= width and self.y + self.h <= height


class IntegralImage:
    """Cumulative sum tables giving O(1) rectangle sums of intensity and intensity^2.

    Tables have shape (height+1, width+1) with a zero first row and column;
    64-bit accumulators hold any 8-bit image up to 4096x4096 without overflow.
    """

    __slots__ = ("sums", "squared_sums", "width", "height")

    def __init__(self, img: np.ndarray):
        img = require_gray(img)
        self.height, self.width = img.shape
        self.sums = np.zeros((self.height + 1, self.width + 1), dtype=np.int64)
        self.squared_sums = np.zeros_like(self.sums)
        as64 = img.astype(np.int64)
        np.cumsum(np.cumsum(as64, axis=0), axis=1, out=self.sums[1:, 1:])
        np.cumsum(np.cumsum(as64 * as64, axis=0), axis=1, out=self.squared_sums[1:, 1:])

    def rect_sum(self, x: int, y: int, w: int, h: int) -> int:
        s = self.sums
        return int(s[y + h, x + w] - s[y, x + w] - s[y + h, x] + s[y, x])

    def rect_squared_sum(self, x: int, y: int, w: int, h: int) -> int:
        s = self.squared_sums
        return int(s[y + h, x + w] - s[y, x + w] - s[y + h, x] + s[y, x])


def integral(img: np.ndarray) -> IntegralImage:
    return IntegralImage(img)


def crop(img: np.ndarray, rect: Rect) -> np.ndarray:
    """Copy the sub-image covered by ``rect``; the rect must lie inside the image."""
    img = require_gray(img)
    if not rect.within(img.shape[1], img.shape[0]):
        raise InvalidInput(f"crop rect {rect} exceeds image bounds {img.shape[1]}x{img.shape[0]}")
    return img[rect.y : rect.y + rect.h, rect.x : rect.x + rect.w].copy()


def resize_bilinear(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resample with corner-aligned mapping (output corners hit input corners)."""
    img = require_gray(img)
    if width < 1 or height < 1:
        raise InvalidInput(f"target dimensions must be at least 1x1, got {width}x{height}")
    src_h, src_w = img.shape
    xs = np.arange(width, dtype=np.float64) * ((src_w - 1) / (width - 1) if width > 1 else 0.0)
    ys = np.arange(height, dtype=np.float64) * ((src_h - 1) / (height - 1) if height > 1 else 0.0)
    x0 = np.minimum(xs.astype(np.int64), src_w - 1)
    y0 = np.minimum(ys.astype(np.int64), src_h - 1)
    x1 = np.minimum(x0 + 1, src_w - 1)
    y1 = np.minimum(y0 + 1, src_h - 1)
    fx = xs - x0
    fy = ys - y0
    arr = img.astype(np.float64)
    top = arr[np.ix_(y0, x0)] * (1 - fx) + arr[np.ix_(y0, x1)] * fx
    bottom = arr[np.ix_(y1, x0)] * (1 - fx) + arr[np.ix_(y1, x1)] * fx
    out = top * (1 - fy)[:, None] + bottom * fy[:, None]
    return np.clip(round_half_up(out), 0, 255).astype(np.uint8)
