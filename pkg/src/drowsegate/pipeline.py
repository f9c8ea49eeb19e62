"""End-to-end stream pipeline: detect faces, track eyes, observe, decide.

One frame is processed at a time in source order; alarm events are flushed to
the log before the next frame is decoded, which is the real-time contract the
alarm hardware would rely on.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from . import annotate
from .cascade import CascadeModel, detect_multiscale, load_cascade, primary_face
from .drowsiness import AlarmEvent, DrowsinessConfig, DrowsinessState, format_event, run_stream, step
from .errors import InvalidInput
from .eye_center import eye_regions_from_face, track_eyes
from .eye_state import CHIP_SIZE, FrameObservation, observe_frame
from .image import Rect, crop, resize_bilinear
from .netpbm import write_pgm
from .sources import FrameSource
from .thresholding import AdaptiveGaussian, ThresholdMethod

STAGES = ("decode", "face", "eye-center", "threshold+observe", "step")
BENCH_MIN_FRAMES = 300
BENCH_MIN_WIDTH = 640
BENCH_MIN_HEIGHT = 480


@dataclass
class PipelineConfig:
    cascade_path: str
    drowsiness: DrowsinessConfig = field(default_factory=DrowsinessConfig)
    method: ThresholdMethod = field(default_factory=AdaptiveGaussian)
    detect_every: int = 1
    scale_factor: float = 1.1
    min_neighbors: int = 3
    min_size: int | None = None  # None: quarter of the smaller frame dimension
    group_eps: float = 0.2
    weight_polarity: str = "inverted"
    clamp_negative: bool = True
    full_resolution: bool = False
    annotate_dir: str | None = None

    def __post_init__(self) -> None:
        if self.detect_every < 1:
            raise InvalidInput(f"detect_every must be >= 1, got {self.detect_every}")


@dataclass(frozen=True)
class StageStats:
    minimum_ms: float
    mean_ms: float
    p95_ms: float
    maximum_ms: float
    samples: int

    @staticmethod
    def from_samples(samples_ms: list[float]) -> "StageStats":
        if not samples_ms:
            return StageStats(0.0, 0.0, 0.0, 0.0, 0)
        arr = np.asarray(samples_ms)
        return StageStats(
            minimum_ms=float(arr.min()),
            mean_ms=float(arr.mean()),
            p95_ms=float(np.percentile(arr, 95)),
            maximum_ms=float(arr.max()),
            samples=len(arr),
        )


@dataclass
class RunReport:
    frames: int = 0
    events: list[AlarmEvent] = field(default_factory=list)
    warnings: int = 0
    stage_stats: dict[str, StageStats] = field(default_factory=dict)
    mean_frame_ms: float = 0.0
    fps_end_to_end: float = 0.0
    frame_width: int = 0
    frame_height: int = 0


class _Timer:
    __slots__ = ("samples",)

    def __init__(self) -> None:
        self.samples: dict[str, list[float]] = {name: [] for name in STAGES}

    def add(self, stage: str, seconds: float) -> None:
        self.samples[stage].append(seconds * 1000.0)

    def stats(self) -> dict[str, StageStats]:
        return {name: StageStats.from_samples(ms) for name, ms in self.samples.items()}


def _emit(stream: IO[str] | None, line: str) -> None:
    if stream is not None:
        stream.write(line + "\n")
        stream.flush()


def _map_center_to_frame(center: tuple[int, int], face: Rect) -> tuple[int, int]:
    # Inverse of the corner-aligned chip resize.
    cx, cy = center
    x = face.x + int(round(cx * (face.w - 1) / (CHIP_SIZE - 1)))
    y = face.y + int(round(cy * (face.h - 1) / (CHIP_SIZE - 1)))
    return x, y


def run_pipeline(cfg: PipelineConfig, source: FrameSource, event_stream: IO[str] | None = None) -> RunReport:
    """Drive the full per-frame pipeline over a source; returns the run report.

    Frames with no face ever seen contribute no observation; once a face has
    been found, a failed re-detection reuses the last rectangle so a transient
    detector dropout cannot silence the state machine. A miss streak longer
    than one second of frames emits warning records.
    """
    model: CascadeModel = load_cascade(cfg.cascade_path)
    state = DrowsinessState(cfg.drowsiness)
    chip_rect = Rect(0, 0, CHIP_SIZE, CHIP_SIZE)
    regions = eye_regions_from_face(chip_rect)
    timer = _Timer()
    report = RunReport()
    last_face: Rect | None = None
    miss_streak = 0
    fps = cfg.drowsiness.fps
    if cfg.annotate_dir is not None:
        os.makedirs(cfg.annotate_dir, exist_ok=True)

    frames_iter = source.frames()
    wall_start = time.perf_counter()
    while True:
        t0 = time.perf_counter()
        try:
            index, frame = next(frames_iter)
        except StopIteration:
            break
        timer.add("decode", time.perf_counter() - t0)
        if report.frames == 0:
            report.frame_height, report.frame_width = frame.shape
        report.frames += 1

        t0 = time.perf_counter()
        miss_streak += 1
        if index % cfg.detect_every == 0:
            min_size = cfg.min_size
            if min_size is None:
                min_size = max(min(model.base_width, model.base_height), min(frame.shape) // 4)
            detections = detect_multiscale(
                model,
                frame,
                scale_factor=cfg.scale_factor,
                min_neighbors=cfg.min_neighbors,
                min_size=min_size,
                group_eps=cfg.group_eps,
            )
            face = primary_face(detections)
            if face is not None:
                last_face = face
                miss_streak = 0
        timer.add("face", time.perf_counter() - t0)

        # Deliberate reuse under detect_every is not blindness; a stale rect past
        # both one second and the reuse cadence is.
        if miss_streak > max(fps, cfg.detect_every):
            report.warnings += 1
            _emit(event_stream, f"kind=Warning frame_index={index} timestamp_s={index / fps:.6f} message=no-face")

        centers = None
        face = last_face
        event = None
        if face is not None:
            t0 = time.perf_counter()
            chip = resize_bilinear(crop(frame, face), CHIP_SIZE, CHIP_SIZE)
            centers = track_eyes(
                chip,
                regions,
                weight_polarity=cfg.weight_polarity,
                clamp_negative=cfg.clamp_negative,
                full_resolution=cfg.full_resolution,
            )
            timer.add("eye-center", time.perf_counter() - t0)

            t0 = time.perf_counter()
            obs = observe_frame(chip, centers, cfg.method, frame_index=index, fps=fps)
            timer.add("threshold+observe", time.perf_counter() - t0)

            t0 = time.perf_counter()
            event = step(state, obs, cfg.drowsiness)
            timer.add("step", time.perf_counter() - t0)
            if event is not None:
                report.events.append(event)
                _emit(event_stream, format_event(event))

        if cfg.annotate_dir is not None:
            canvas = frame.copy()
            if face is not None:
                annotate.draw_rect_outline(canvas, face)
                for center in (centers.left, centers.right) if centers else ():
                    if center is not None:
                        annotate.draw_crosshair(canvas, *_map_center_to_frame(center, face))
            if state.alarm_active:
                annotate.draw_alarm_banner(canvas)
            write_pgm(os.path.join(cfg.annotate_dir, f"frame_{index:06d}.pgm"), canvas)

    wall = time.perf_counter() - wall_start
    if report.frames == 0:
        raise InvalidInput(f"no frames in source {source.path}")
    report.stage_stats = timer.stats()
    report.mean_frame_ms = wall * 1000.0 / report.frames
    report.fps_end_to_end = report.frames / wall if wall > 0 else float("inf")
    return report


@dataclass(frozen=True)
class BenchResult:
    report: RunReport
    budget_ms: float
    within_budget: bool
    probe_latency_s: float


def scripted_closure_latency(cfg: DrowsinessConfig) -> float:
    """Alarm latency on a scripted closure: baseline stream, then sustained closure.

    Pure state-machine trace, so the number is exact and machine-independent.
    """
    baseline, closure = 30.0, min(100.0, 30.0 + cfg.gap_d + 10.0)
    onset = 2 * cfg.window_frames
    stream = [
        FrameObservation(i, i / cfg.fps, None, None, baseline if i < onset else closure)
        for i in range(onset + 4 * cfg.fth_frames)
    ]
    for event in run_stream(stream, cfg):
        if event.kind == "Raised":
            return (event.frame_index - onset) / cfg.fps
    raise InvalidInput("scripted closure never raised an alarm; configuration cannot detect its own gap")


def run_bench(cfg: PipelineConfig, source: FrameSource, budget_ms: float = 33.0) -> BenchResult:
    """Wall-clock the pipeline per stage over the source and check the frame budget."""
    report = run_pipeline(cfg, source, event_stream=None)
    if report.frames < BENCH_MIN_FRAMES:
        raise InvalidInput(f"benchmark needs at least {BENCH_MIN_FRAMES} frames, got {report.frames}")
    if report.frame_width < BENCH_MIN_WIDTH or report.frame_height < BENCH_MIN_HEIGHT:
        raise InvalidInput(
            f"benchmark needs frames of at least {BENCH_MIN_WIDTH}x{BENCH_MIN_HEIGHT}, "
            f"got {report.frame_width}x{report.frame_height}"
        )
    return BenchResult(
        report=report,
        budget_ms=budget_ms,
        within_budget=report.mean_frame_ms <= budget_ms,
        probe_latency_s=scripted_closure_latency(cfg.drowsiness),
    )


def render_report(report: RunReport, config_echo: dict[str, object] | None = None, title: str = "run report") -> str:
    """Stable text report: config header, stage latency table, totals."""
    lines = [f"# {title}"]
    for key in sorted(config_echo or {}):
        lines.append(f"# {key}={config_echo[key]}")  # type: ignore[index]
    lines.append(f"frames={report.frames} events={len(report.events)} warnings={report.warnings}")
    lines.append(f"{'stage':<18} {'min_ms':>9} {'mean_ms':>9} {'p95_ms':>9} {'max_ms':>9} {'n':>6}")
    for name in STAGES:
        stats = report.stage_stats.get(name, StageStats(0, 0, 0, 0, 0))
        lines.append(
            f"{name:<18} {stats.minimum_ms:>9.3f} {stats.mean_ms:>9.3f} "
            f"{stats.p95_ms:>9.3f} {stats.maximum_ms:>9.3f} {stats.samples:>6d}"
        )
    lines.append(f"mean_frame_ms={report.mean_frame_ms:.3f} fps={report.fps_end_to_end:.2f}")
    return "\n".join(lines)
