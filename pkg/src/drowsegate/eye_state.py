"""Per-frame eye observation: 25x21 windows, binarization, white percentage.

Also hosts the static open/closed classifier used for dataset evaluation on
100x100 face chips.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, Unclassifiable
from .eye_center import EyeCenters, eye_regions_from_face, track_eyes
from .image import Rect, crop, require_gray, resize_bilinear
from .thresholding import AdaptiveGaussian, ThresholdMethod, apply_threshold, white_percentage

WINDOW_W = 25
WINDOW_H = 21
CHIP_SIZE = 100
TAU_GRID_STEP = 0.5


@dataclass(frozen=True)
class FrameObservation:
    """White percentages measured on one frame; None marks an untracked eye."""

    frame_index: int
    timestamp: float
    w_left: float | None
    w_right: float | None
    w_combined: float | None


def extract_eye_window(face: np.ndarray, center: tuple[int, int]) -> np.ndarray:
    """25x21 analysis window centered on an eye, shifted (never shrunk) to fit.

    Keeping the window full-size fixes the white-percentage denominator at 525
    pixels so frames stay comparable.
    """
    face = require_gray(face)
    height, width = face.shape
    cx, cy = center
    if not (0 <= cx < width and 0 <= cy < height):
        raise InvalidInput(f"eye center {center} lies outside the {width}x{height} face")
    if width < WINDOW_W or height < WINDOW_H:
        raise InvalidInput(f"face must be at least {WINDOW_W}x{WINDOW_H} to host an eye window")
    x0 = min(max(cx - WINDOW_W // 2, 0), width - WINDOW_W)
    y0 = min(max(cy - WINDOW_H // 2, 0), height - WINDOW_H)
    return crop(face, Rect(x0, y0, WINDOW_W, WINDOW_H))


def observe_frame(
    face: np.ndarray,
    centers: EyeCenters,
    method: ThresholdMethod | None = None,
    frame_index: int = 0,
    fps: float = 30.0,
) -> FrameObservation:
    """Per-eye white percentage after binarizing the eye windows.

    Both eyes untracked means the frame carries no measurement, which downstream
    treats as closure-consistent.
    """
    method = method if method is not None else AdaptiveGaussian()

    def measure(center: tuple[int, int] | None) -> float | None:
        if center is None:
            return None
        window = extract_eye_window(face, center)
        return white_percentage(apply_threshold(window, method))

    w_left = measure(centers.left)
    w_right = measure(centers.right)
    present = [w for w in (w_left, w_right) if w is not None]
    combined = float(np.mean(present)) if present else None
    return FrameObservation(
        frame_index=frame_index,
        timestamp=frame_index / fps,
        w_left=w_left,
        w_right=w_right,
        w_combined=combined,
    )


def chip_observation(
    chip: np.ndarray,
    method: ThresholdMethod | None = None,
    weight_polarity: str = "inverted",
) -> float | None:
    """Combined white percentage for a standalone face chip; None if both eyes lost.

    Chips are resized to 100x100 first. A chip with no gradients anywhere is
    undecidable and raises Unclassifiable.
    """
    chip = require_gray(chip)
    if chip.shape != (CHIP_SIZE, CHIP_SIZE):
        chip = resize_bilinear(chip, CHIP_SIZE, CHIP_SIZE)
    if int(chip.max()) == int(chip.min()):
        raise Unclassifiable("chip carries no gradients anywhere")
    regions = eye_regions_from_face(Rect(0, 0, CHIP_SIZE, CHIP_SIZE))
    centers = track_eyes(chip, regions, weight_polarity=weight_polarity)
    obs = observe_frame(chip, centers, method)
    return obs.w_combined


def classify_static(
    chip: np.ndarray,
    tau: float,
    method: ThresholdMethod | None = None,
    weight_polarity: str = "inverted",
) -> str:
    """Label one face chip 'open' or 'closed'.

    Tracking failure on both eyes is closed (lids defeat the tracker); otherwise
    closed iff the combined white percentage reaches tau. Equality counts as
    closed: a false alarm is cheaper than missed drowsiness.
    """
    w = chip_observation(chip, method, weight_polarity=weight_polarity)
    if w is None:
        return "closed"
    return "closed" if w >= tau else "open"


def calibrate_static_threshold(
    labeled: list[tuple[np.ndarray, str]],
    method: ThresholdMethod | None = None,
) -> float:
    """Grid-search tau over {0.0, 0.5, ..., 100.0} maximizing chip accuracy.

    Ties resolve to the smallest tau. Unclassifiable chips count against every
    candidate equally. Requires both labels in the data.
    """
    labels = {label for _, label in labeled}
    if labels != {"open", "closed"}:
        raise InvalidInput(f"calibration needs both 'open' and 'closed' chips, got labels {sorted(labels)}")
    scored: list[tuple[str, float | None]] = []
    unclassifiable = 0
    for chip, label in labeled:
        try:
            scored.append((label, chip_observation(chip, method)))
        except Unclassifiable:
            unclassifiable += 1
    grid = np.arange(0.0, 100.0 + TAU_GRID_STEP, TAU_GRID_STEP)
    best_tau, best_correct = 0.0, -1
    for tau in grid:
        correct = 0
        for label, w in scored:
            predicted = "closed" if (w is None or w >= tau) else "open"
            correct += predicted == label
        if correct > best_correct:
            best_tau, best_correct = float(tau), correct
    return best_tau
