"""Diagnostic drawing on grayscale frames: face boxes, crosshairs, alarm banner."""

from __future__ import annotations

import numpy as np

from .image import Rect

CROSSHAIR_ARM = 2  # 5-px plus sign: center pixel plus 2 each way


def draw_rect_outline(img: np.ndarray, rect: Rect, value: int = 255) -> None:
    """Draw a 1-px rectangle outline in place, clipped to the image."""
    height, width = img.shape
    x0, y0 = max(rect.x, 0), max(rect.y, 0)
    x1, y1 = min(rect.x + rect.w - 1, width - 1), min(rect.y + rect.h - 1, height - 1)
    if x0 > x1 or y0 > y1:
        return
    img[y0, x0 : x1 + 1] = value
    img[y1, x0 : x1 + 1] = value
    img[y0 : y1 + 1, x0] = value
    img[y0 : y1 + 1, x1] = value


def draw_crosshair(img: np.ndarray, x: int, y: int, value: int = 255) -> None:
    """Draw a 5-px plus sign centered at (x, y) in place, clipped to the image."""
    height, width = img.shape
    if not (0 <= x < width and 0 <= y < height):
        return
    img[y, max(x - CROSSHAIR_ARM, 0) : min(x + CROSSHAIR_ARM + 1, width)] = value
    img[max(y - CROSSHAIR_ARM, 0) : min(y + CROSSHAIR_ARM + 1, height), x] = value


def draw_alarm_banner(img: np.ndarray) -> None:
    """Force the top row white while the alarm is active."""
    img[0, :] = 255
