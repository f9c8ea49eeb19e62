"""Pretrained Haar-cascade face detection over integral images.

Supports the widely distributed old-style XML interchange layout: stages of
single-node (stump) trees whose features are 1-3 weighted upright rectangles
inside the base window. Newer nested layouts, multi-node trees, and tilted
features are rejected with a clear error instead of silently mis-evaluating.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, ParseError, UnsupportedCascade
from .image import IntegralImage, Rect, integral, require_gray


@dataclass(frozen=True)
class HaarFeature:
    rects: tuple[Rect, ...]
    weights: tuple[float, ...]


@dataclass(frozen=True)
class WeakClassifier:
    feature: HaarFeature
    node_threshold: float
    left_value: float
    right_value: float


@dataclass(frozen=True)
class CascadeStage:
    stage_threshold: float
    weak: tuple[WeakClassifier, ...]


@dataclass(frozen=True)
class CascadeModel:
    base_width: int
    base_height: int
    stages: tuple[CascadeStage, ...]


@dataclass(frozen=True)
class Detection:
    rect: Rect
    neighbors: int


def parse_cascade(text: str) -> CascadeModel:
    """Parse old-style cascade XML into an immutable in-memory model."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        line, column = getattr(exc, "position", (0, 0))
        raise ParseError(f"malformed cascade markup at line {line}, column {column}: {exc}") from exc
    body = _find_cascade_element(root)
    size_el = body.find("size")
    if size_el is None or size_el.text is None:
        raise ParseError("cascade is missing its <size> base-window element")
    try:
        base_w, base_h = (int(v) for v in size_el.text.split())
    except ValueError as exc:
        raise ParseError(f"bad <size> contents {size_el.text!r}") from exc
    if base_w < 1 or base_h < 1:
        raise ParseError(f"base window must be positive, got {base_w}x{base_h}")
    stages_el = body.find("stages")
    if stages_el is None:
        raise ParseError("cascade is missing its <stages> element")
    stages = []
    for stage_index, stage_el in enumerate(stages_el):
        trees_el = stage_el.find("trees")
        thr_el = stage_el.find("stage_threshold")
        if trees_el is None or thr_el is None or thr_el.text is None:
            raise ParseError(f"stage {stage_index} lacks <trees> or <stage_threshold>")
        weak = tuple(_parse_stump(tree_el, stage_index, i, base_w, base_h) for i, tree_el in enumerate(trees_el))
        if not weak:
            raise ParseError(f"stage {stage_index} has no weak classifiers")
        stages.append(CascadeStage(stage_threshold=float(thr_el.text), weak=weak))
    if not stages:
        raise ParseError("cascade has no stages")
    return CascadeModel(base_width=base_w, base_height=base_h, stages=tuple(stages))


def _find_cascade_element(root: ET.Element) -> ET.Element:
    candidates = [root] + list(root)
    for el in candidates:
        if el.find("stageType") is not None or el.find("featureType") is not None:
            raise UnsupportedCascade("new-style nested cascade layout is not supported; use an old-style stump cascade")
        if el.find("size") is not None and el.find("stages") is not None:
            return el
    raise ParseError("no cascade element with <size> and <stages> found")


def _parse_stump(tree_el: ET.Element, stage_index: int, tree_index: int, base_w: int, base_h: int) -> WeakClassifier:
    nodes = list(tree_el)
    where = f"stage {stage_index}, tree {tree_index}"
    if len(nodes) != 1:
        raise UnsupportedCascade(f"{where}: trees deeper than a single stump are not supported")
    node = nodes[0]
    if node.find("left_node") is not None or node.find("right_node") is not None:
        raise UnsupportedCascade(f"{where}: trees deeper than a single stump are not supported")
    feature_el = node.find("feature")
    thr_el = node.find("threshold")
    left_el = node.find("left_val")
    right_el = node.find("right_val")
    if feature_el is None or thr_el is None or left_el is None or right_el is None:
        raise ParseError(f"{where}: stump lacks feature/threshold/left_val/right_val")
    tilted_el = feature_el.find("tilted")
    if tilted_el is not None and tilted_el.text is not None and int(tilted_el.text) != 0:
        raise UnsupportedCascade(f"{where}: tilted features are not supported")
    rects_el = feature_el.find("rects")
    if rects_el is None:
        raise ParseError(f"{where}: feature lacks <rects>")
    rects: list[Rect] = []
    weights: list[float] = []
    for rect_el in rects_el:
        if rect_el.text is None:
            raise ParseError(f"{where}: empty rect entry")
        parts = rect_el.text.split()
        if len(parts) != 5:
            raise ParseError(f"{where}: rect entry {rect_el.text!r} is not 'x y w h weight'")
        try:
            x, y, w, h = (int(p) for p in parts[:4])
            weight = float(parts[4].rstrip("."))  # files write bare trailing dots like '2.'
        except ValueError as exc:
            raise ParseError(f"{where}: bad rect entry {rect_el.text!r}") from exc
        if w < 1 or h < 1 or x < 0 or y < 0 or x + w > base_w or y + h > base_h:
            raise ParseError(f"{where}: rect {x} {y} {w} {h} exceeds the {base_w}x{base_h} base window")
        rects.append(Rect(x, y, w, h))
        weights.append(weight)
    if not 1 <= len(rects) <= 3:
        raise ParseError(f"{where}: features must have 1-3 rects, got {len(rects)}")
    return WeakClassifier(
        feature=HaarFeature(rects=tuple(rects), weights=tuple(weights)),
        node_threshold=float(thr_el.text or 0.0),
        left_value=float(left_el.text or 0.0),
        right_value=float(right_el.text or 0.0),
    )


def serialize_cascade(model: CascadeModel, name: str = "cascade") -> str:
    """Emit canonical old-style XML; parse(serialize(parse(x))) is a fixed point."""
    lines = ['<?xml version="1.0"?>', "<opencv_storage>", f'<{name} type_id="opencv-haar-classifier">']
    lines.append(f"  <size>{model.base_width} {model.base_height}</size>")
    lines.append("  <stages>")
    for stage in model.stages:
        lines.append("    <_>")
        lines.append("      <trees>")
        for weak in stage.weak:
            lines.append("        <_><_>")
            lines.append("          <feature><rects>")
            for rect, weight in zip(weak.feature.rects, weak.feature.weights):
                lines.append(f"            <_>{rect.x} {rect.y} {rect.w} {rect.h} {weight!r}</_>")
            lines.append("          </rects><tilted>0</tilted></feature>")
            lines.append(f"          <threshold>{weak.node_threshold!r}</threshold>")
            lines.append(f"          <left_val>{weak.left_value!r}</left_val>")
            lines.append(f"          <right_val>{weak.right_value!r}</right_val>")
            lines.append("        </_></_>")
        lines.append("      </trees>")
        lines.append(f"      <stage_threshold>{stage.stage_threshold!r}</stage_threshold>")
        lines.append("    </_>")
    lines.append("  </stages>")
    lines.append(f"</{name}>")
    lines.append("</opencv_storage>")
    return "\n".join(lines) + "\n"


def load_cascade(path: str) -> CascadeModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_cascade(fh.read())


class _ScaledCascade:
    """Cascade geometry resolved for one scale against one integral image.

    Rect coordinates are rounded to the pixel grid, weights carry the inverse
    normalization-window area, and the first rect's weight is re-balanced so the
    weighted areas cancel exactly after rounding. That keeps evaluation exactly
    invariant under affine intensity changes a*I + b (a > 0).
    """

    def __init__(self, model: CascadeModel, scale: float, stride: int):
        if scale < 1:
            raise InvalidInput(f"scale must be >= 1, got {scale}")
        self.window_w = int(round(model.base_width * scale))
        self.window_h = int(round(model.base_height * scale))
        norm_off = int(round(scale))
        norm_w = max(1, int(round((model.base_width - 2) * scale)))
        norm_h = max(1, int(round((model.base_height - 2) * scale)))
        self.inv_area = 1.0 / (norm_w * norm_h)
        self.norm_offsets = self._corner_offsets(norm_off, norm_off, norm_w, norm_h, stride)
        self.stages: list[tuple[list[tuple[list[tuple[np.ndarray, float]], float, float, float]], float]] = []
        for stage in model.stages:
            stumps = []
            for weak in stage.weak:
                scaled: list[tuple[np.ndarray, float, int]] = []
                for rect, weight in zip(weak.feature.rects, weak.feature.weights):
                    # Clamp after rounding: a half-up rounded corner may poke one
                    # pixel past the window, which would gather out of bounds.
                    x = min(int(round(rect.x * scale)), self.window_w - 1)
                    y = min(int(round(rect.y * scale)), self.window_h - 1)
                    w = max(1, min(int(round(rect.w * scale)), self.window_w - x))
                    h = max(1, min(int(round(rect.h * scale)), self.window_h - y))
                    scaled.append((self._corner_offsets(x, y, w, h, stride), weight * self.inv_area, w * h))
                if len(scaled) > 1:
                    # Rounding breaks the trained cancellation; rebalance rect 0.
                    tail = sum(wt * area for _, wt, area in scaled[1:])
                    head_offsets, _, head_area = scaled[0]
                    scaled[0] = (head_offsets, -tail / head_area, head_area)
                rects = [(offs, wt) for offs, wt, _ in scaled]
                stumps.append((rects, weak.node_threshold, weak.left_value, weak.right_value))
            self.stages.append((stumps, stage.stage_threshold))

    @staticmethod
    def _corner_offsets(x: int, y: int, w: int, h: int, stride: int) -> np.ndarray:
        tl = y * stride + x
        return np.array([tl + h * stride + w, tl + w, tl + h * stride, tl], dtype=np.int64)

    def run(self, ii: IntegralImage, bases: np.ndarray) -> np.ndarray:
        """Evaluate all stages for candidate windows given by flat top-left indices."""
        sums = ii.sums.ravel()
        squares = ii.squared_sums.ravel()

        def rect_values(table: np.ndarray, offsets: np.ndarray, at: np.ndarray) -> np.ndarray:
            return (table[at + offsets[0]] - table[at + offsets[1]] - table[at + offsets[2]] + table[at + offsets[3]]).astype(np.float64)

        mean = rect_values(sums, self.norm_offsets, bases) * self.inv_area
        variance = rect_values(squares, self.norm_offsets, bases) * self.inv_area - mean * mean
        sigma = np.where(variance > 0, np.sqrt(np.maximum(variance, 0)), 1.0)

        alive = np.arange(len(bases))
        accepted = np.zeros(len(bases), dtype=bool)
        for stumps, stage_threshold in self.stages:
            if len(alive) == 0:
                break
            at = bases[alive]
            sigma_alive = sigma[alive]
            stage_sum = np.zeros(len(alive))
            for rects, node_threshold, left_value, right_value in stumps:
                feature = np.zeros(len(alive))
                for offsets, weight in rects:
                    feature += weight * rect_values(sums, offsets, at)
                stage_sum += np.where(feature < node_threshold * sigma_alive, left_value, right_value)
            alive = alive[stage_sum >= stage_threshold]
        accepted[alive] = True
        return accepted


def evaluate_window(model: CascadeModel, ii: IntegralImage, window: Rect, scale: float) -> bool:
    """Run the full cascade on one window; True means every stage accepted."""
    if not window.within(ii.width, ii.height):
        raise InvalidInput(f"window {window} exceeds the {ii.width}x{ii.height} image")
    stride = ii.width + 1
    scaled = _ScaledCascade(model, scale, stride)
    if window.x + scaled.window_w > ii.width or window.y + scaled.window_h > ii.height:
        raise InvalidInput("scaled cascade window exceeds image bounds")
    base = np.array([window.y * stride + window.x], dtype=np.int64)
    return bool(scaled.run(ii, base)[0])


def detect_multiscale(
    model: CascadeModel,
    img: np.ndarray,
    scale_factor: float = 1.1,
    min_neighbors: int = 3,
    min_size: int | None = None,
    group_eps: float = 0.2,
) -> list[Detection]:
    """Sliding-window scan over a scale pyramid, followed by overlap grouping.

    The scan step equals round(scale) so per-level cost stays bounded. Returns
    grouped detections sorted by area, largest first; an image smaller than
    min_size yields an empty list rather than an error.
    """
    img = require_gray(img)
    if scale_factor <= 1:
        raise InvalidInput(f"scale_factor must exceed 1, got {scale_factor}")
    if min_neighbors < 0:
        raise InvalidInput(f"min_neighbors must be >= 0, got {min_neighbors}")
    base = min(model.base_width, model.base_height)
    if min_size is None or min_size < base:
        min_size = base
    height, width = img.shape
    ii = integral(img)
    stride = width + 1
    raw: list[Rect] = []
    scale = min_size / base
    while True:
        scaled = _ScaledCascade(model, scale, stride)
        if scaled.window_w > width or scaled.window_h > height:
            break
        step = max(1, int(round(scale)))
        xs = np.arange(0, width - scaled.window_w + 1, step, dtype=np.int64)
        ys = np.arange(0, height - scaled.window_h + 1, step, dtype=np.int64)
        bases = (ys[:, None] * stride + xs[None, :]).ravel()
        hits = scaled.run(ii, bases)
        if hits.any():
            grid_w = len(xs)
            for flat in np.nonzero(hits)[0]:
                raw.append(Rect(int(xs[flat % grid_w]), int(ys[flat // grid_w]), scaled.window_w, scaled.window_h))
        scale *= scale_factor
    detections = group_detections(raw, min_neighbors=min_neighbors, eps=group_eps)
    clipped = []
    for det in detections:
        w = min(det.rect.w, width)
        h = min(det.rect.h, height)
        x = min(max(det.rect.x, 0), width - w)
        y = min(max(det.rect.y, 0), height - h)
        clipped.append(Detection(Rect(x, y, w, h), det.neighbors))
    return clipped


def _similar(a: Rect, b: Rect, eps: float) -> bool:
    dx = eps * (a.w + b.w) / 2.0
    dy = eps * (a.h + b.h) / 2.0
    return (
        abs(a.x - b.x) <= dx
        and abs(a.y - b.y) <= dy
        and abs((a.x + a.w) - (b.x + b.w)) <= dx
        and abs((a.y + a.h) - (b.y + b.h)) <= dy
    )


def group_detections(rects: list[Rect], min_neighbors: int = 3, eps: float = 0.2) -> list[Detection]:
    """Cluster raw hits whose sides all lie within eps of each other (relative).

    Clustering is by connected components, so the result does not depend on
    input order. Clusters with fewer than min_neighbors members are dropped;
    each survivor becomes the rounded component-wise mean rectangle.
    """
    n = len(rects)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if _similar(rects[i], rects[j], eps):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    clusters: dict[int, list[Rect]] = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(rects[i])
    out = []
    for members in clusters.values():
        if len(members) < min_neighbors:
            continue
        x = int(round(float(np.mean([m.x for m in members]))))
        y = int(round(float(np.mean([m.y for m in members]))))
        w = int(round(float(np.mean([m.w for m in members]))))
        h = int(round(float(np.mean([m.h for m in members]))))
        out.append(Detection(Rect(x, y, max(w, 1), max(h, 1)), len(members)))
    out.sort(key=lambda d: (-d.rect.area, d.rect.y, d.rect.x))
    return out


def primary_face(detections: list[Detection]) -> Rect | None:
    """Largest detection (the driver); ties break toward the top-left."""
    if not detections:
        return None
    best = min(detections, key=lambda d: (-d.rect.area, d.rect.y, d.rect.x))
    return best.rect
