"""Dynamic double-threshold drowsiness determination.

A 300-entry ring of white percentages feeds a recency-weighted moving average
(the baseline). The percentage threshold sits a configurable fraction of the
open/closed gap above that baseline; frames at or above it are
closure-consistent, and enough of them in a row raise the alarm.

The baseline-versus-threshold comparison is deliberately asymmetric: the
threshold derives from the slowly adapting average (and freezes while a closure
candidate is being counted), while the per-frame test uses the instantaneous
observation. Comparing the average against a threshold defined above that same
average could never fire.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInput, OrderingViolation
from .eye_state import FrameObservation

CALIBRATION_STEP = 0.02
LATENCY_WEIGHT = 0.1


@dataclass(frozen=True)
class DrowsinessConfig:
    fps: float = 30.0
    window_frames: int = 300
    intervals: int = 5
    interval_weights: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8, 1.0)  # oldest -> newest
    gap_d: float = 15.0
    coeff_c: float = 0.72
    fth_frames: int = 24
    average_mode: str = "normalized"  # or "literal": divide by window_frames as printed
    freeze_pth_during_candidate: bool = True
    absent_observation_policy: str = "treat_as_closed"  # or "hold_last"

    def __post_init__(self) -> None:
        if self.fps <= 0:
            raise InvalidInput(f"fps must be positive, got {self.fps}")
        if self.window_frames < 1 or self.intervals < 1 or self.window_frames % self.intervals:
            raise InvalidInput(
                f"window_frames ({self.window_frames}) must be a positive multiple of intervals ({self.intervals})"
            )
        if len(self.interval_weights) != self.intervals:
            raise InvalidInput(f"need {self.intervals} interval weights, got {len(self.interval_weights)}")
        if not 0.0 <= self.coeff_c <= 1.0:
            raise InvalidInput(f"coeff_c must lie in [0, 1], got {self.coeff_c}")
        if self.fth_frames < 1:
            raise InvalidInput(f"fth_frames must be >= 1, got {self.fth_frames}")
        if self.gap_d <= 0:
            raise InvalidInput(f"gap_d must be positive, got {self.gap_d}")
        if self.average_mode not in ("normalized", "literal"):
            raise InvalidInput(f"average_mode must be 'normalized' or 'literal', got {self.average_mode!r}")
        if self.absent_observation_policy not in ("treat_as_closed", "hold_last"):
            raise InvalidInput(f"bad absent_observation_policy {self.absent_observation_policy!r}")


class RingBuffer:
    """Fixed-capacity ring; overwriting always evicts the oldest entry."""

    __slots__ = ("capacity", "_data", "_next", "_fill")

    def __init__(self, capacity: int):
        if capacity < 1:
            raise InvalidInput(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._data = np.zeros(capacity)
        self._next = 0
        self._fill = 0

    def push(self, value: float) -> None:
        self._data[self._next] = value
        self._next = (self._next + 1) % self.capacity
        self._fill = min(self._fill + 1, self.capacity)

    def __len__(self) -> int:
        return self._fill

    def values(self) -> np.ndarray:
        """Contents oldest to newest."""
        if self._fill < self.capacity:
            return self._data[: self._fill].copy()
        return np.roll(self._data, -self._next).copy()


def interval_edges(n_frames: int, intervals: int) -> list[int]:
    """Boundaries splitting n frames into equal spans: edge i = floor(i*n/k)."""
    return [(i * n_frames) // intervals for i in range(intervals + 1)]


def weighted_moving_average(buffer: RingBuffer, cfg: DrowsinessConfig) -> float:
    """Recency-weighted average of the buffered white percentages.

    Frames are split oldest-to-newest into equal spans, each carrying its
    interval weight. Normalized mode divides by the total weight of present
    frames (a true average); literal mode divides by window_frames, matching
    the formula as printed even though that scales a constant stream down.
    """
    values = buffer.values()
    n = len(values)
    if n == 0:
        raise InvalidInput("cannot average an empty buffer")
    edges = interval_edges(n, cfg.intervals)
    weights = np.empty(n)
    for i in range(cfg.intervals):
        weights[edges[i] : edges[i + 1]] = cfg.interval_weights[i]
    numerator = float(np.dot(weights, values))
    if cfg.average_mode == "literal":
        return numerator / cfg.window_frames
    return numerator / float(weights.sum())


def percentage_threshold(a10_reference: float, cfg: DrowsinessConfig) -> float:
    """Closure threshold: baseline plus coeff_c * gap, clamped to [0, 100]."""
    if not 0.0 <= a10_reference <= 100.0:
        raise InvalidInput(f"baseline average must lie in [0, 100], got {a10_reference}")
    return min(max(a10_reference + cfg.coeff_c * cfg.gap_d, 0.0), 100.0)


@dataclass(frozen=True)
class AlarmEvent:
    kind: str  # "Raised" or "Cleared"
    frame_index: int
    timestamp_s: float
    a10: float
    pth: float
    w: float


def format_event(event: AlarmEvent) -> str:
    """Stable key=value line; the event log is consumed byte-for-byte."""
    return (
        f"kind={event.kind} frame_index={event.frame_index} timestamp_s={event.timestamp_s:.6f} "
        f"a10={event.a10:.6f} pth={event.pth:.6f} w={event.w:.6f}"
    )


@dataclass
class DrowsinessState:
    """Single-owner mutable state; feed observations strictly in frame order."""

    config: DrowsinessConfig
    buffer: RingBuffer = field(init=False)
    a10: float = 0.0
    pth: float = 0.0
    counter_k: int = 0
    alarm_active: bool = False
    frames_seen: int = 0
    last_frame_index: int = -1
    last_w: float = 0.0

    def __post_init__(self) -> None:
        self.buffer = RingBuffer(self.config.window_frames)
        self.pth = percentage_threshold(0.0, self.config)


def step(state: DrowsinessState, obs: FrameObservation, cfg: DrowsinessConfig | None = None) -> AlarmEvent | None:
    """Advance the state machine by one frame; returns an alarm transition or None.

    Absent observations count as full closure by default (tracking failure on
    closed lids is the expected signature) or repeat the previous value under
    the hold_last policy. No closure testing happens until the buffer has seen
    a full window of frames.
    """
    cfg = cfg if cfg is not None else state.config
    if obs.frame_index <= state.last_frame_index:
        raise OrderingViolation(
            f"frame {obs.frame_index} arrived after frame {state.last_frame_index}; observations must advance"
        )
    state.last_frame_index = obs.frame_index
    w = obs.w_combined
    if w is None:
        w = 100.0 if cfg.absent_observation_policy == "treat_as_closed" else state.last_w
    if not 0.0 <= w <= 100.0:
        raise InvalidInput(f"white percentage must lie in [0, 100], got {w}")
    state.last_w = w
    state.buffer.push(w)
    state.frames_seen += 1
    state.a10 = weighted_moving_average(state.buffer, cfg)
    if state.counter_k == 0 or not cfg.freeze_pth_during_candidate:
        state.pth = percentage_threshold(min(max(state.a10, 0.0), 100.0), cfg)
    if state.frames_seen < cfg.window_frames:
        return None
    if w >= state.pth:
        state.counter_k += 1
        if state.counter_k >= cfg.fth_frames and not state.alarm_active:
            state.alarm_active = True
            return AlarmEvent("Raised", obs.frame_index, obs.frame_index / cfg.fps, state.a10, state.pth, w)
    else:
        state.counter_k = 0
        if state.alarm_active:
            state.alarm_active = False
            return AlarmEvent("Cleared", obs.frame_index, obs.frame_index / cfg.fps, state.a10, state.pth, w)
    return None


def run_stream(observations, cfg: DrowsinessConfig) -> list[AlarmEvent]:
    """Feed a whole observation stream through a fresh state; collect events."""
    state = DrowsinessState(cfg)
    events = []
    for obs in observations:
        event = step(state, obs, cfg)
        if event is not None:
            events.append(event)
    return events


@dataclass(frozen=True)
class CalibrationRow:
    coeff_c: float
    f1: float
    mean_latency_s: float
    score: float
    true_positives: int
    false_positives: int
    missed: int


def calibrate_coefficient(
    sequences: list[tuple[list[FrameObservation], list[tuple[int, int]]]],
    cfg_base: DrowsinessConfig,
) -> tuple[float, list[CalibrationRow]]:
    """Sweep the gap coefficient from 0 to 1 in steps of 0.02 and score each value.

    Score is event-level F1 against the labeled closure intervals minus 0.1
    times the mean detection latency in seconds; a missed closure is charged
    the ceiling latency window_frames/fps. Smallest coefficient wins ties.
    """
    usable = any(
        end - start + 1 >= cfg_base.fth_frames for _, intervals in sequences for start, end in intervals
    )
    if not usable:
        raise InvalidInput("calibration needs at least one labeled closure at least fth_frames long")
    ceiling = cfg_base.window_frames / cfg_base.fps
    rows = []
    best_c, best_score = 0.0, -np.inf
    steps = int(round(1.0 / CALIBRATION_STEP)) + 1
    for i in range(steps):
        c = round(i * CALIBRATION_STEP, 2)
        cfg = replace(cfg_base, coeff_c=c)
        tp = fp = missed = 0
        latencies: list[float] = []
        for observations, intervals in sequences:
            raised = [ev.frame_index for ev in run_stream(observations, cfg) if ev.kind == "Raised"]
            detected = [False] * len(intervals)
            for frame in raised:
                match = next(
                    (k for k, (start, end) in enumerate(intervals) if start <= frame <= end and not detected[k]),
                    None,
                )
                if match is None:
                    fp += 1
                else:
                    detected[match] = True
                    tp += 1
                    latencies.append((frame - intervals[match][0]) / cfg.fps)
            for hit in detected:
                if not hit:
                    missed += 1
                    latencies.append(ceiling)
        denom = 2 * tp + fp + missed
        f1 = (2 * tp / denom) if denom else 0.0
        mean_latency = float(np.mean(latencies)) if latencies else ceiling
        score = f1 - LATENCY_WEIGHT * mean_latency
        rows.append(CalibrationRow(c, f1, mean_latency, score, tp, fp, missed))
        if score > best_score:
            best_c, best_score = c, score
    return best_c, rows
