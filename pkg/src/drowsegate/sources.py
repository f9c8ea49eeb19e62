"""Frame sources: lexicographically ordered PGM/PPM directories and Y4M files.

Sources stand in for the camera; every frame arrives as a gray image with a
strictly increasing index, and all frames of one source share dimensions.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import FrameDecodeError, InvalidInput
from .netpbm import Y4MReader, read_pgm, read_ppm_gray


@dataclass
class FrameSource:
    """Lazily decoded frame stream; kind is pgm_dir, ppm_dir, or y4m_file."""

    path: str
    kind: str
    files: list[str] | None = None  # directory sources only

    @property
    def count(self) -> int | None:
        """Frame count when known up front (directory sources)."""
        return len(self.files) if self.files is not None else None

    def frames(self) -> Iterator[tuple[int, np.ndarray]]:
        shape: tuple[int, int] | None = None
        if self.kind == "y4m_file":
            reader = Y4MReader(self.path)
            iterator: Iterator[np.ndarray] = reader.frames()
        else:
            read = read_pgm if self.kind == "pgm_dir" else read_ppm_gray
            iterator = (read(name) for name in self.files or [])
        for index, frame in enumerate(iterator):
            if shape is None:
                shape = frame.shape
            elif frame.shape != shape:
                raise FrameDecodeError(
                    f"frame {index} is {frame.shape[1]}x{frame.shape[0]}, source started at {shape[1]}x{shape[0]}"
                )
            yield index, frame


def open_frame_source(path: str) -> FrameSource:
    """Resolve a path into a frame source, or raise InvalidInput."""
    if os.path.isdir(path):
        pgms = sorted(
            os.path.join(path, name) for name in os.listdir(path) if name.lower().endswith(".pgm")
        )
        if pgms:
            return FrameSource(path=path, kind="pgm_dir", files=pgms)
        ppms = sorted(
            os.path.join(path, name) for name in os.listdir(path) if name.lower().endswith(".ppm")
        )
        if ppms:
            return FrameSource(path=path, kind="ppm_dir", files=ppms)
        raise InvalidInput(f"no frames: directory {path} holds no .pgm or .ppm files")
    if os.path.isfile(path):
        if path.lower().endswith(".y4m"):
            return FrameSource(path=path, kind="y4m_file")
        raise InvalidInput(f"unsupported frame source {path}; expected a directory or a .y4m file")
    raise InvalidInput(f"frame source {path} does not exist")
