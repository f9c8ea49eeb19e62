"""Raster I/O: binary PGM (P5) read/write, binary PPM (P6) read, Y4M video read.

Only uncompressed formats are handled; Y4M chroma planes are consumed and
discarded so the luma plane can feed the grayscale pipeline directly.
"""

from __future__ import annotations

import re
from typing import BinaryIO, Iterator

import numpy as np

from .errors import FrameDecodeError, InvalidInput
from .image import require_gray, to_grayscale

_WHITESPACE = b" \t\r\n"


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    # Netpbm headers allow '#' comments anywhere whitespace may appear.
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c == b"#":
            while pos < n and buf[pos : pos + 1] != b"\n":
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and buf[pos : pos + 1] not in _WHITESPACE and buf[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FrameDecodeError("truncated netpbm header")
    return buf[start:pos], pos


def _parse_header(buf: bytes, magic: bytes) -> tuple[int, int, int]:
    tok, pos = _read_token(buf, 0)
    if tok != magic:
        raise FrameDecodeError(f"expected {magic.decode()} file, found magic {tok!r}")
    w_tok, pos = _read_token(buf, pos)
    h_tok, pos = _read_token(buf, pos)
    m_tok, pos = _read_token(buf, pos)
    try:
        width, height, maxval = int(w_tok), int(h_tok), int(m_tok)
    except ValueError as exc:
        raise FrameDecodeError(f"non-numeric netpbm header field: {exc}") from exc
    if width < 1 or height < 1:
        raise FrameDecodeError(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise FrameDecodeError(f"only maxval 255 is supported, got {maxval}")
    # Exactly one whitespace byte separates the header from raster data.
    return width, height, pos + 1


def read_pgm(path: str) -> np.ndarray:
    """Read a binary (P5) PGM file as a gray image."""
    with open(path, "rb") as fh:
        buf = fh.read()
    width, height, data_at = _parse_header(buf, b"P5")
    expected = width * height
    raster = buf[data_at : data_at + expected]
    if len(raster) != expected:
        raise FrameDecodeError(f"{path}: raster truncated ({len(raster)} of {expected} bytes)")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def read_ppm(path: str) -> np.ndarray:
    """Read a binary (P6) PPM file as an (H, W, 3) uint8 raster."""
    with open(path, "rb") as fh:
        buf = fh.read()
    width, height, data_at = _parse_header(buf, b"P6")
    expected = width * height * 3
    raster = buf[data_at : data_at + expected]
    if len(raster) != expected:
        raise FrameDecodeError(f"{path}: raster truncated ({len(raster)} of {expected} bytes)")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3).copy()


def read_ppm_gray(path: str) -> np.ndarray:
    return to_grayscale(read_ppm(path))


def write_pgm(path: str, img: np.ndarray) -> None:
    """Write a gray image as binary (P5) PGM with maxval 255."""
    img = require_gray(img)
    height, width = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


_Y4M_COLORSPACES = {
    "420": ("half", "half"),
    "420jpeg": ("half", "half"),
    "420mpeg2": ("half", "half"),
    "420paldv": ("half", "half"),
    "444": ("full", "full"),
}


class Y4MReader:
    """Streaming reader for uncompressed YUV4MPEG2 video.

    Accepts C420-family and C444 subsampling; yields the Y plane of each frame
    as a gray image and skips over the chroma planes.
    """

    def __init__(self, path: str):
        self.path = path
        self._fh: BinaryIO = open(path, "rb")
        header = self._fh.readline()
        if not header.startswith(b"YUV4MPEG2"):
            self._fh.close()
            raise FrameDecodeError(f"{path}: not a YUV4MPEG2 stream")
        self.width = 0
        self.height = 0
        self.fps: float | None = None
        colorspace = "420"
        for param in header.split()[1:]:
            tag, value = param[:1], param[1:].decode("ascii", "replace")
            if tag == b"W":
                self.width = int(value)
            elif tag == b"H":
                self.height = int(value)
            elif tag == b"F":
                m = re.fullmatch(r"(\d+):(\d+)", value)
                if m and int(m.group(2)) > 0:
                    self.fps = int(m.group(1)) / int(m.group(2))
            elif tag == b"C":
                colorspace = value
        if self.width < 1 or self.height < 1:
            self._fh.close()
            raise FrameDecodeError(f"{path}: missing or bad W/H in Y4M header")
        if colorspace not in _Y4M_COLORSPACES:
            self._fh.close()
            raise FrameDecodeError(f"{path}: unsupported Y4M colorspace C{colorspace}")
        if colorspace.startswith("420") and (self.width % 2 or self.height % 2):
            self._fh.close()
            raise FrameDecodeError(f"{path}: C420 requires even dimensions")
        self._luma_bytes = self.width * self.height
        if _Y4M_COLORSPACES[colorspace][0] == "half":
            self._chroma_bytes = 2 * (self.width // 2) * (self.height // 2)
        else:
            self._chroma_bytes = 2 * self.width * self.height

    def frames(self) -> Iterator[np.ndarray]:
        try:
            while True:
                marker = self._fh.readline()
                if marker == b"":
                    return
                if not marker.startswith(b"FRAME"):
                    raise FrameDecodeError(f"{self.path}: bad frame marker {marker[:16]!r}")
                luma = self._fh.read(self._luma_bytes)
                if len(luma) != self._luma_bytes:
                    raise FrameDecodeError(f"{self.path}: truncated frame")
                chroma = self._fh.read(self._chroma_bytes)
                if len(chroma) != self._chroma_bytes:
                    raise FrameDecodeError(f"{self.path}: truncated chroma plane")
                yield np.frombuffer(luma, dtype=np.uint8).reshape(self.height, self.width).copy()
        finally:
            self._fh.close()

    def close(self) -> None:
        self._fh.close()


def write_y4m(path: str, frames: Iterator[np.ndarray] | list[np.ndarray], fps: int = 30) -> int:
    """Write gray frames as C420 Y4M (flat mid-gray chroma). Returns frame count.

    Provided for fixture generation and diagnostics; the toolkit never
    re-encodes video on the detection path.
    """
    count = 0
    with open(path, "wb") as fh:
        chroma: bytes | None = None
        for frame in frames:
            frame = require_gray(frame)
            height, width = frame.shape
            if width % 2 or height % 2:
                raise InvalidInput("C420 output requires even dimensions")
            if count == 0:
                fh.write(f"YUV4MPEG2 W{width} H{height} F{fps}:1 Ip A1:1 C420\n".encode("ascii"))
                chroma = bytes([128]) * (2 * (width // 2) * (height // 2))
            fh.write(b"FRAME\n")
            fh.write(np.ascontiguousarray(frame).tobytes())
            fh.write(chroma)  # type: ignore[arg-type]
            count += 1
    if count == 0:
        raise InvalidInput("no frames to write")
    return count
