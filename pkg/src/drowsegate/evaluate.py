"""Offline commands: dataset evaluation, threshold comparison, coefficient sweep."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .drowsiness import CalibrationRow, DrowsinessConfig, calibrate_coefficient
from .errors import InvalidDataset, InvalidInput, ParseError, Unclassifiable
from .eye_center import eye_regions_from_face, track_eyes
from .eye_state import (
    CHIP_SIZE,
    WINDOW_H,
    WINDOW_W,
    FrameObservation,
    calibrate_static_threshold,
    chip_observation,
    extract_eye_window,
)
from .image import Rect, resize_bilinear
from .netpbm import read_pgm, read_ppm_gray
from .thresholding import ThresholdMethod, apply_threshold, method_name, white_percentage


def _load_images(directory: str) -> list[tuple[str, np.ndarray]]:
    if not os.path.isdir(directory):
        raise InvalidDataset(f"missing directory {directory}")
    out = []
    for name in sorted(os.listdir(directory)):
        path = os.path.join(directory, name)
        if name.lower().endswith(".pgm"):
            out.append((name, read_pgm(path)))
        elif name.lower().endswith(".ppm"):
            out.append((name, read_ppm_gray(path)))
    if not out:
        raise InvalidDataset(f"no .pgm or .ppm images under {directory}")
    return out


@dataclass(frozen=True)
class EvalReport:
    tau: float
    accuracy: float
    recall_open: float
    recall_closed: float
    unclassifiable: int
    evaluated: int
    calibration_size: int


def eval_eyes(
    dataset_root: str,
    method: ThresholdMethod | None = None,
    tau: float | None = None,
    calibrate_split: float = 0.5,
) -> EvalReport:
    """Open/closed accuracy over a dataset laid out as open/ and closed/ chips.

    With an explicit tau the whole set is evaluated; otherwise tau is fitted on
    a leading split of each class (sorted order, so runs are reproducible) and
    accuracy is reported on the remainder. Unclassifiable chips count in the
    denominator and are never correct.
    """
    chips: dict[str, list[np.ndarray]] = {}
    for label in ("open", "closed"):
        chips[label] = [img for _, img in _load_images(os.path.join(dataset_root, label))]

    calibration: list[tuple[np.ndarray, str]] = []
    held_out: list[tuple[np.ndarray, str]] = []
    if tau is None:
        if not 0.0 < calibrate_split < 1.0:
            raise InvalidInput(f"calibrate split must lie in (0, 1), got {calibrate_split}")
        for label, images in chips.items():
            cut = int(len(images) * calibrate_split)
            if cut < 1 or cut >= len(images):
                raise InvalidDataset(f"class {label!r} too small to split at {calibrate_split}")
            calibration.extend((img, label) for img in images[:cut])
            held_out.extend((img, label) for img in images[cut:])
        tau = calibrate_static_threshold(calibration, method)
    else:
        for label, images in chips.items():
            held_out.extend((img, label) for img in images)

    per_class_total = {"open": 0, "closed": 0}
    per_class_correct = {"open": 0, "closed": 0}
    unclassifiable = 0
    for chip, label in held_out:
        per_class_total[label] += 1
        try:
            w = chip_observation(chip, method)
        except Unclassifiable:
            unclassifiable += 1
            continue
        predicted = "closed" if (w is None or w >= tau) else "open"
        per_class_correct[label] += predicted == label
    evaluated = len(held_out)
    correct = sum(per_class_correct.values())
    return EvalReport(
        tau=float(tau),
        accuracy=correct / evaluated if evaluated else 0.0,
        recall_open=(per_class_correct["open"] / per_class_total["open"]) if per_class_total["open"] else 0.0,
        recall_closed=(per_class_correct["closed"] / per_class_total["closed"]) if per_class_total["closed"] else 0.0,
        unclassifiable=unclassifiable,
        evaluated=evaluated,
        calibration_size=len(calibration),
    )


def _as_eye_windows(images: list[np.ndarray]) -> list[np.ndarray]:
    """Accept ready 25x21 windows, or cut windows out of face chips.

    Chips go through eye tracking; when tracking fails (closed eyes), windows
    are cut at the anatomical region centers so closed chips still contribute.
    """
    windows = []
    regions = eye_regions_from_face(Rect(0, 0, CHIP_SIZE, CHIP_SIZE))
    fallback = []
    for rect in (regions.left, regions.right):
        fallback.append((rect.x + rect.w // 2, rect.y + rect.h // 2))
    for img in images:
        if img.shape == (WINDOW_H, WINDOW_W):
            windows.append(img)
            continue
        chip = img if img.shape == (CHIP_SIZE, CHIP_SIZE) else resize_bilinear(img, CHIP_SIZE, CHIP_SIZE)
        centers = track_eyes(chip, regions)
        for tracked, anatomical in zip((centers.left, centers.right), fallback):
            windows.append(extract_eye_window(chip, tracked if tracked is not None else anatomical))
    return windows


@dataclass(frozen=True)
class GapRow:
    method: str
    open_mean: float
    closed_mean: float
    gap: float


def compare_thresholds(open_dir: str, closed_dir: str, methods: list[ThresholdMethod]) -> list[GapRow]:
    """Mean white percentage per method over both sets, sorted by gap, best first."""
    open_windows = _as_eye_windows([img for _, img in _load_images(open_dir)])
    closed_windows = _as_eye_windows([img for _, img in _load_images(closed_dir)])
    rows = []
    for method in methods:
        open_mean = float(np.mean([white_percentage(apply_threshold(i, method)) for i in open_windows]))
        closed_mean = float(np.mean([white_percentage(apply_threshold(i, method)) for i in closed_windows]))
        rows.append(
            GapRow(method=method_name(method), open_mean=open_mean, closed_mean=closed_mean, gap=closed_mean - open_mean)
        )
    rows.sort(key=lambda r: -r.gap)
    return rows


def render_gap_table(rows: list[GapRow]) -> str:
    lines = [f"{'method':<20} {'open_w%':>9} {'closed_w%':>10} {'gap':>8}"]
    for row in rows:
        lines.append(f"{row.method:<20} {row.open_mean:>9.3f} {row.closed_mean:>10.3f} {row.gap:>8.3f}")
    lines.append("")
    for row in rows:
        lines.append(f"method={row.method} open={row.open_mean:.6f} closed={row.closed_mean:.6f} gap={row.gap:.6f}")
    return "\n".join(lines)


def read_closure_sidecar(path: str) -> list[tuple[int, int]]:
    """Closure intervals, one inclusive 'start end' frame pair per line."""
    intervals = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 2:
                raise ParseError(f"{path}:{line_number}: expected 'start end', got {text!r}")
            try:
                start, end = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ParseError(f"{path}:{line_number}: non-integer frame index in {text!r}") from exc
            if start < 0 or end < start:
                raise ParseError(f"{path}:{line_number}: bad interval {start}..{end}")
            intervals.append((start, end))
    return intervals


def read_observation_file(path: str, fps: float) -> list[FrameObservation]:
    """One white percentage per line; '-' marks a frame with both eyes untracked."""
    observations = []
    with open(path, "r", encoding="utf-8") as fh:
        index = 0
        for line_number, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if text == "-":
                w: float | None = None
            else:
                try:
                    w = float(text)
                except ValueError as exc:
                    raise ParseError(f"{path}:{line_number}: expected a number or '-', got {text!r}") from exc
            observations.append(FrameObservation(index, index / fps, w, w, w))
            index += 1
    if not observations:
        raise InvalidInput(f"no observations in {path}")
    return observations


def load_calibration_sequences(directory: str, fps: float) -> list[tuple[list[FrameObservation], list[tuple[int, int]]]]:
    """Pair every *.obs stream in the directory with its *.closures sidecar."""
    if not os.path.isdir(directory):
        raise InvalidInput(f"missing sequence directory {directory}")
    sequences = []
    for name in sorted(os.listdir(directory)):
        if not name.endswith(".obs"):
            continue
        stem = name[: -len(".obs")]
        sidecar = os.path.join(directory, stem + ".closures")
        if not os.path.isfile(sidecar):
            raise InvalidInput(f"observation stream {name} has no {stem}.closures sidecar")
        sequences.append(
            (read_observation_file(os.path.join(directory, name), fps), read_closure_sidecar(sidecar))
        )
    if not sequences:
        raise InvalidInput(f"no .obs observation streams under {directory}")
    return sequences


def calibrate_from_dir(directory: str, cfg: DrowsinessConfig) -> tuple[float, list[CalibrationRow]]:
    return calibrate_coefficient(load_calibration_sequences(directory, cfg.fps), cfg)


def render_calibration_table(best_c: float, rows: list[CalibrationRow]) -> str:
    lines = [f"{'C':>5} {'f1':>7} {'latency_s':>10} {'score':>8} {'tp':>4} {'fp':>4} {'miss':>5}"]
    for row in rows:
        lines.append(
            f"{row.coeff_c:>5.2f} {row.f1:>7.4f} {row.mean_latency_s:>10.4f} "
            f"{row.score:>8.4f} {row.true_positives:>4d} {row.false_positives:>4d} {row.missed:>5d}"
        )
    lines.append(f"best_c={best_c:.2f}")
    return "\n".join(lines)
