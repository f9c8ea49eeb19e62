"""Binary thresholding methods and the white-pixel-ratio observation.

Six methods are provided; all share one comparison polarity: a pixel is white
iff its intensity is strictly greater than the local threshold. Closed eyelids
reflect light and must land on the white side.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidInput
from .image import convolve_separable, require_gray


def _check_window(value: int, name: str) -> None:
    if value < 3 or value % 2 == 0:
        raise InvalidInput(f"{name} must be odd and >= 3, got {value}")


@dataclass(frozen=True)
class SimpleBinary:
    """Fixed global threshold."""

    t: float = 127.0

    def __post_init__(self) -> None:
        if not 0 <= self.t <= 255:
            raise InvalidInput(f"threshold must lie in [0, 255], got {self.t}")


@dataclass(frozen=True)
class OtsuThreshold:
    """Global threshold maximizing between-class variance (smallest maximizer on ties)."""


@dataclass(frozen=True)
class Niblack:
    """Local mean + k * local stddev over an odd square window."""

    window: int = 15
    k: float = -0.2

    def __post_init__(self) -> None:
        _check_window(self.window, "window")


@dataclass(frozen=True)
class Bernsen:
    """Local contrast midpoint, falling back to a fixed level in flat areas."""

    window: int = 15
    contrast_min: float = 15.0
    fallback_level: float = 128.0

    def __post_init__(self) -> None:
        _check_window(self.window, "window")


@dataclass(frozen=True)
class AdaptiveMean:
    """Unweighted local block mean minus a constant."""

    block: int = 11
    c: float = 2.0

    def __post_init__(self) -> None:
        _check_window(self.block, "block")


@dataclass(frozen=True)
class AdaptiveGaussian:
    """Gaussian-weighted local block mean minus a constant (AGBT)."""

    block: int = 11
    sigma: float | None = None  # None resolves to block / 6
    c: float = 2.0

    def __post_init__(self) -> None:
        _check_window(self.block, "block")
        if self.sigma is not None and not self.sigma > 0:
            raise InvalidInput(f"sigma must be positive, got {self.sigma}")

    @property
    def effective_sigma(self) -> float:
        return self.sigma if self.sigma is not None else self.block / 6.0


ThresholdMethod = Union[SimpleBinary, OtsuThreshold, Niblack, Bernsen, AdaptiveMean, AdaptiveGaussian]

METHOD_NAMES = {
    SimpleBinary: "simple-binary",
    OtsuThreshold: "otsu",
    Niblack: "niblack",
    Bernsen: "bernsen",
    AdaptiveMean: "adaptive-mean",
    AdaptiveGaussian: "adaptive-gaussian",
}


def method_name(method: ThresholdMethod) -> str:
    return METHOD_NAMES[type(method)]


def otsu_threshold(img: np.ndarray) -> int:
    """Between-class-variance maximizer over all 256 split candidates."""
    img = require_gray(img)
    hist = np.bincount(img.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    cum_count = np.cumsum(hist)
    cum_sum = np.cumsum(hist * np.arange(256))
    w0 = cum_count / total
    w1 = 1.0 - w0
    mean0 = np.divide(cum_sum, cum_count, out=np.zeros(256), where=cum_count > 0)
    grand = cum_sum[-1]
    mean1 = np.divide(grand - cum_sum, total - cum_count, out=np.zeros(256), where=(total - cum_count) > 0)
    variance = w0 * w1 * (mean0 - mean1) ** 2
    return int(np.argmax(variance))  # argmax returns the first (smallest) maximizer


def _local_sums(img: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Clipped-window local sum, squared sum, and pixel count via integral tables."""
    height, width = img.shape
    as64 = img.astype(np.int64)
    sums = np.zeros((height + 1, width + 1), dtype=np.int64)
    sq = np.zeros_like(sums)
    np.cumsum(np.cumsum(as64, axis=0), axis=1, out=sums[1:, 1:])
    np.cumsum(np.cumsum(as64 * as64, axis=0), axis=1, out=sq[1:, 1:])
    r = window // 2
    xs = np.arange(width)
    ys = np.arange(height)
    x0 = np.clip(xs - r, 0, width)
    x1 = np.clip(xs + r + 1, 0, width)
    y0 = np.clip(ys - r, 0, height)
    y1 = np.clip(ys + r + 1, 0, height)
    count = (x1 - x0)[None, :] * (y1 - y0)[:, None]

    def rect(table: np.ndarray) -> np.ndarray:
        return table[np.ix_(y1, x1)] - table[np.ix_(y0, x1)] - table[np.ix_(y1, x0)] + table[np.ix_(y0, x0)]

    return rect(sums), rect(sq), count


def _local_min_max(img: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    r = window // 2
    padded = np.pad(img, r, mode="edge")
    view = np.lib.stride_tricks.sliding_window_view(padded, (window, window))
    return view.min(axis=(2, 3)), view.max(axis=(2, 3))


def threshold_map(img: np.ndarray, method: ThresholdMethod) -> np.ndarray:
    """Per-pixel threshold surface T(x, y) for the given method."""
    img = require_gray(img)
    if not isinstance(method, (SimpleBinary, OtsuThreshold)) and (img.shape[0] < 3 or img.shape[1] < 3):
        raise InvalidInput("local thresholding methods need an image of at least 3x3")
    if isinstance(method, SimpleBinary):
        return np.full(img.shape, float(method.t))
    if isinstance(method, OtsuThreshold):
        return np.full(img.shape, float(otsu_threshold(img)))
    if isinstance(method, Niblack):
        s, sq, n = _local_sums(img, method.window)
        mean = s / n
        var = np.maximum(sq / n - mean * mean, 0.0)
        return mean + method.k * np.sqrt(var)
    if isinstance(method, Bernsen):
        lo, hi = _local_min_max(img, method.window)
        midpoint = (lo.astype(np.float64) + hi.astype(np.float64)) / 2.0
        contrast = hi.astype(np.float64) - lo.astype(np.float64)
        return np.where(contrast >= method.contrast_min, midpoint, float(method.fallback_level))
    if isinstance(method, AdaptiveMean):
        s, _, n = _local_sums(img, method.block)
        return s / n - method.c
    if isinstance(method, AdaptiveGaussian):
        radius = method.block // 2
        x = np.arange(-radius, radius + 1, dtype=np.float64)
        k = np.exp(-(x * x) / (2.0 * method.effective_sigma**2))
        k /= k.sum()
        return convolve_separable(img, k, k) - method.c
    raise InvalidInput(f"unknown thresholding method {method!r}")


def apply_threshold(img: np.ndarray, method: ThresholdMethod) -> np.ndarray:
    """Binarize: white (True) exactly where intensity exceeds the local threshold."""
    return require_gray(img).astype(np.float64) > threshold_map(img, method)


def white_percentage(binary: np.ndarray) -> float:
    """Percent of white pixels in a binary image, in [0, 100]."""
    binary = np.asarray(binary)
    if binary.ndim != 2 or binary.size == 0:
        raise InvalidInput(f"expected a non-empty 2-D binary image, got shape {binary.shape}")
    return 100.0 * float(np.count_nonzero(binary)) / binary.size


def method_gap(open_set: list[np.ndarray], closed_set: list[np.ndarray], method: ThresholdMethod) -> float:
    """Mean white percentage over closed eyes minus mean over open eyes."""
    if not open_set or not closed_set:
        raise InvalidInput("both image sets must be non-empty")
    open_mean = float(np.mean([white_percentage(apply_threshold(i, method)) for i in open_set]))
    closed_mean = float(np.mean([white_percentage(apply_threshold(i, method)) for i in closed_set]))
    return closed_mean - open_mean


def default_methods(
    simple: SimpleBinary | None = None,
    niblack: Niblack | None = None,
    bernsen: Bernsen | None = None,
    adaptive_mean: AdaptiveMean | None = None,
    adaptive_gaussian: AdaptiveGaussian | None = None,
) -> list[ThresholdMethod]:
    """The six-method comparison lineup, with per-method overrides."""
    return [
        simple or SimpleBinary(),
        OtsuThreshold(),
        niblack or Niblack(),
        bernsen or Bernsen(),
        adaptive_mean or AdaptiveMean(),
        adaptive_gaussian or AdaptiveGaussian(),
    ]
