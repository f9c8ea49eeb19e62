"""Eye-center localization by gradient intersection.

A candidate center scores high when the unit displacement vectors toward
strong-gradient pixels line up with those pixels' gradient directions, and the
candidate itself sits on dark pixels (the pupil is darker than the sclera, so
dark candidates carry large weight).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FaceTooSmall, InvalidInput, NoGradients, NoInteriorMaximum
from .image import Rect, crop, gradients, resize_bilinear, round_half_up, smooth_float

MIN_FACE = 40
MIN_REGION = 8
# Fractions of the face rect framing the eye regions (rows, then columns).
REGION_ROWS = (0.20, 0.55)
LEFT_COLS = (0.10, 0.48)
RIGHT_COLS = (0.52, 0.90)
GRADIENT_STD_FACTOR = 0.3
SMOOTH_SIGMA = 1.0
DOWNSCALE_WIDTH = 50


@dataclass(frozen=True)
class EyeRegions:
    left: Rect
    right: Rect


@dataclass(frozen=True)
class EyeCenters:
    """Per-eye pupil coordinates in face-chip pixels; None marks a lost eye."""

    left: tuple[int, int] | None
    right: tuple[int, int] | None
    left_confidence: float = 0.0
    right_confidence: float = 0.0


def eye_regions_from_face(face: Rect) -> EyeRegions:
    """Anatomical-prior eye regions, in coordinates relative to the face rect."""
    if face.w < MIN_FACE or face.h < MIN_FACE:
        raise FaceTooSmall(f"face must be at least {MIN_FACE}x{MIN_FACE}, got {face.w}x{face.h}")

    def span(lo_frac: float, hi_frac: float, extent: int) -> tuple[int, int]:
        lo = int(round_half_up(lo_frac * extent))
        hi = int(round_half_up(hi_frac * extent))
        return lo, hi - lo

    y, h = span(*REGION_ROWS, face.h)
    lx, lw = span(*LEFT_COLS, face.w)
    rx, rw = span(*RIGHT_COLS, face.w)
    return EyeRegions(left=Rect(lx, y, lw, h), right=Rect(rx, y, rw, h))


def _participating_samples(region: np.ndarray, sigma: float):
    smoothed = smooth_float(np.asarray(region, dtype=np.float64), sigma)
    gx, gy = gradients(smoothed)
    magnitude = np.hypot(gx, gy)
    threshold = magnitude.mean() + GRADIENT_STD_FACTOR * magnitude.std()
    mask = magnitude > threshold
    if not mask.any():
        raise NoGradients("no gradient samples exceed the participation threshold")
    ys, xs = np.nonzero(mask)
    mags = magnitude[mask]
    return smoothed, xs.astype(np.float64), ys.astype(np.float64), gx[mask] / mags, gy[mask] / mags


def objective_map(
    region: np.ndarray,
    weight_polarity: str = "inverted",
    clamp_negative: bool = True,
    sigma: float = SMOOTH_SIGMA,
) -> np.ndarray:
    """Score every candidate center c: w_c * mean_i max(0, d_i . g_i)^2.

    d_i is the unit displacement from c to sample x_i; g_i the unit gradient
    there. Only samples whose gradient magnitude exceeds mean + 0.3*stddev
    participate; the sample at c itself contributes nothing. The weight w_c is
    255 minus the smoothed intensity ("inverted"), or the intensity itself
    ("literal"). Dot products are clamped at zero before squaring unless
    clamp_negative is off.
    """
    region = np.asarray(region)
    if region.ndim != 2 or region.shape[0] < MIN_REGION or region.shape[1] < MIN_REGION:
        raise InvalidInput(f"region must be at least {MIN_REGION}x{MIN_REGION}, got shape {region.shape}")
    if weight_polarity not in ("inverted", "literal"):
        raise InvalidInput(f"weight_polarity must be 'inverted' or 'literal', got {weight_polarity!r}")
    smoothed, sx, sy, gxn, gyn = _participating_samples(region, sigma)
    height, width = region.shape
    n_samples = len(sx)
    cy_all, cx_all = np.mgrid[0:height, 0:width]
    cx_flat = cx_all.ravel().astype(np.float64)
    cy_flat = cy_all.ravel().astype(np.float64)
    acc = np.empty(height * width)
    chunk = max(1, (1 << 21) // max(n_samples, 1))  # cap transient pair matrices
    for start in range(0, len(acc), chunk):
        cx = cx_flat[start : start + chunk, None]
        cy = cy_flat[start : start + chunk, None]
        dx = sx[None, :] - cx
        dy = sy[None, :] - cy
        dist = np.sqrt(dx * dx + dy * dy)
        with np.errstate(invalid="ignore", divide="ignore"):
            dot = (dx * gxn[None, :] + dy * gyn[None, :]) / dist
        dot[dist == 0] = 0.0
        if clamp_negative:
            np.maximum(dot, 0.0, out=dot)
        acc[start : start + chunk] = np.einsum("ij,ij->i", dot, dot)
    weights = 255.0 - smoothed if weight_polarity == "inverted" else smoothed
    return weights * acc.reshape(height, width) / n_samples


def _border_reachable(surface: np.ndarray) -> np.ndarray:
    """Pixels reachable from the border along value-non-decreasing 8-paths."""
    height, width = surface.shape
    reachable = np.zeros(surface.shape, dtype=bool)
    reachable[0, :] = reachable[-1, :] = True
    reachable[:, 0] = reachable[:, -1] = True
    stack = [(y, x) for y, x in zip(*np.nonzero(reachable))]
    while stack:
        y, x = stack.pop()
        v = surface[y, x]
        for ny in range(max(0, y - 1), min(height, y + 2)):
            for nx in range(max(0, x - 1), min(width, x + 2)):
                if not reachable[ny, nx] and surface[ny, nx] >= v:
                    reachable[ny, nx] = True
                    stack.append((ny, nx))
    return reachable


def _local_maxima(surface: np.ndarray) -> np.ndarray:
    padded = np.pad(surface, 1, mode="constant", constant_values=-np.inf)
    is_max = np.ones(surface.shape, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            shifted = padded[1 + dy : 1 + dy + surface.shape[0], 1 + dx : 1 + dx + surface.shape[1]]
            is_max &= surface >= shifted
    return is_max


def locate_center(
    region: np.ndarray,
    weight_polarity: str = "inverted",
    clamp_negative: bool = True,
    sigma: float = SMOOTH_SIGMA,
    full_resolution: bool = False,
) -> tuple[tuple[int, int], float]:
    """Best surviving objective maximum and its value.

    Maxima whose plateau reaches the region border along non-increasing values
    are pruned (those are ridges from the region edge, not eye structure).
    Regions wider than 50 px are localized at 50 px width and mapped back
    unless full_resolution is requested.
    """
    region = np.asarray(region)
    height, width = region.shape if region.ndim == 2 else (0, 0)
    if not full_resolution and width > DOWNSCALE_WIDTH:
        ds_w = DOWNSCALE_WIDTH
        ds_h = max(MIN_REGION, int(round(height * ds_w / width)))
        small = resize_bilinear(region, ds_w, ds_h)
        (sx, sy), confidence = locate_center(
            small, weight_polarity=weight_polarity, clamp_negative=clamp_negative, sigma=sigma, full_resolution=True
        )
        x = int(round_half_up(sx * (width - 1) / (ds_w - 1)))
        y = int(round_half_up(sy * (height - 1) / (ds_h - 1))) if ds_h > 1 else 0
        return (min(x, width - 1), min(y, height - 1)), confidence

    surface = objective_map(region, weight_polarity=weight_polarity, clamp_negative=clamp_negative, sigma=sigma)
    candidates = _local_maxima(surface) & ~_border_reachable(surface)
    if not candidates.any():
        raise NoInteriorMaximum("every objective maximum drains to the region border")
    ys, xs = np.nonzero(candidates)
    values = surface[ys, xs]
    order = np.lexsort((xs, ys, -values))  # highest value; ties by (y, x)
    best = order[0]
    return (int(xs[best]), int(ys[best])), float(values[best])


def track_eyes(
    face_gray: np.ndarray,
    regions: EyeRegions,
    weight_polarity: str = "inverted",
    clamp_negative: bool = True,
    full_resolution: bool = False,
) -> EyeCenters:
    """Locate both pupils inside their prior regions of a face chip.

    A region that yields no usable gradients or no interior maximum produces
    None for that eye: closed lids defeating the tracker is a signal, not an
    error.
    """
    height, width = face_gray.shape
    found: dict[str, tuple[int, int] | None] = {}
    confidence = {"left": 0.0, "right": 0.0}
    for side, region_rect in (("left", regions.left), ("right", regions.right)):
        if not region_rect.within(width, height):
            raise InvalidInput(f"{side} eye region {region_rect} exceeds the {width}x{height} face chip")
        sub = crop(face_gray, region_rect)
        try:
            (x, y), value = locate_center(
                sub, weight_polarity=weight_polarity, clamp_negative=clamp_negative, full_resolution=full_resolution
            )
        except (NoGradients, NoInteriorMaximum):
            found[side] = None
            continue
        found[side] = (region_rect.x + x, region_rect.y + y)
        confidence[side] = value
    return EyeCenters(
        left=found["left"],
        right=found["right"],
        left_confidence=confidence["left"],
        right_confidence=confidence["right"],
    )
