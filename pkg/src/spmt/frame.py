"""Frames, segment grids and power normalization.

A frame is a plain 2D ``float64`` numpy array indexed ``[row, col]``.
Centered coordinates put the origin at pixel ``(height // 2, width // 2)``
with ``x = col - width // 2`` and ``y = height // 2 - row``, so ``y``
increases upward. For even sizes the origin is the pixel just below and
to the right of the geometric center.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError, SpmtError

__all__ = [
    "SegmentGrid",
    "as_frame",
    "origin",
    "to_centered",
    "to_pixel",
    "load_frame",
    "save_pgm",
    "normalize_power",
    "extract_segment",
    "iter_segments",
    "assemble_segments",
]


def as_frame(data, *, name: str = "frame") -> np.ndarray:
    """Validate ``data`` as a real 2D frame and return it as float64."""
    arr = np.asarray(data)
    if np.iscomplexobj(arr):
        raise SpmtError(f"{name} must be real-valued")
    arr = arr.astype(np.float64, copy=False)
    if arr.ndim != 2:
        raise SpmtError(f"{name} must be 2D, got shape {arr.shape}")
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise SpmtError(f"{name} must be at least 2x2, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SpmtError(f"{name} contains NaN or Inf")
    return arr


def origin(shape: tuple[int, int]) -> tuple[int, int]:
    """Pixel ``(row, col)`` of the centered origin for an array shape."""
    return shape[0] // 2, shape[1] // 2


def to_centered(shape, row, col):
    """Convert pixel indices to centered ``(x, y)`` coordinates."""
    r0, c0 = origin(shape)
    return col - c0, r0 - row


def to_pixel(shape, x, y):
    """Convert centered ``(x, y)`` coordinates to pixel ``(row, col)``."""
    r0, c0 = origin(shape)
    return r0 - y, c0 + x


@dataclass(frozen=True)
class SegmentGrid:
    """Regular grid of ``rows x cols`` segments, each ``segment_height x segment_width``."""

    rows: int
    cols: int
    segment_width: int
    segment_height: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError(f"grid needs at least one segment, got {self.rows}x{self.cols}")
        if self.segment_width < 2 or self.segment_height < 2:
            raise ConfigError("segments must be at least 2x2 pixels")

    @classmethod
    def for_frame(cls, shape: tuple[int, int], rows: int, cols: int) -> "SegmentGrid":
        """Build the grid that tiles a frame of ``shape`` exactly."""
        height, width = shape
        if rows < 1 or cols < 1:
            raise ConfigError(f"grid needs at least one segment, got {rows}x{cols}")
        if height % rows or width % cols:
            raise ConfigError(
                f"frame {height}x{width} is not divisible into a {rows}x{cols} grid"
            )
        return cls(rows, cols, width // cols, height // rows)

    @property
    def shape(self) -> tuple[int, int]:
        """Shape of the frame this grid tiles."""
        return self.rows * self.segment_height, self.cols * self.segment_width

    @property
    def segment_shape(self) -> tuple[int, int]:
        return self.segment_height, self.segment_width

    def __len__(self) -> int:
        return self.rows * self.cols

    def check(self, frame: np.ndarray) -> None:
        if frame.shape != self.shape:
            raise SpmtError(
                f"grid {self.rows}x{self.cols} of {self.segment_height}x{self.segment_width} "
                f"segments does not tile a {frame.shape[0]}x{frame.shape[1]} frame"
            )

    def cell(self, index: int) -> tuple[int, int]:
        """Row-major ``(row, col)`` of segment ``index``."""
        if not 0 <= index < len(self):
            raise SpmtError(f"segment index {index} out of range for {len(self)} segments")
        return divmod(index, self.cols)


def _read_pgm(raw: bytes) -> np.ndarray:
    if raw[:2] != b"P5":
        raise SpmtError("only binary (P5) PGM files are supported")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise SpmtError("truncated PGM header")
        fields.append(int(raw[start:pos]))
    pos += 1  # single whitespace before the raster
    width, height, maxval = fields
    if width == 0 or height == 0:
        raise SpmtError("image has a zero dimension")
    if not 0 < maxval < 65536:
        raise SpmtError(f"invalid PGM maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    if len(raw) - pos < count * dtype.itemsize:
        raise SpmtError("truncated PGM raster")
    pixels = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    return pixels.reshape(height, width).astype(np.float64) / maxval


def load_frame(path) -> np.ndarray:
    """Read an 8/16-bit grayscale PGM (P5) or PNG, scaled linearly to [0, 1]."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise SpmtError(f"cannot read {path}: {exc}") from exc
    if raw[:2] == b"P5":
        return as_frame(_read_pgm(raw), name=str(path))
    if raw[:8] != b"\x89PNG\r\n\x1a\n":
        raise SpmtError(f"{path}: unsupported format (expected P5 PGM or PNG)")
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            pixels = np.array(img)
    except OSError as exc:
        raise SpmtError(f"cannot decode {path}: {exc}") from exc
    if mode == "L":
        full_scale = 255.0
    elif mode.startswith("I;16") or mode == "I":
        full_scale = 65535.0
    else:
        raise SpmtError(f"{path}: not a grayscale image (mode {mode})")
    if pixels.size == 0:
        raise SpmtError("image has a zero dimension")
    return as_frame(pixels.astype(np.float64) / full_scale, name=str(path))


def save_pgm(path, frame) -> tuple[float, float]:
    """Write ``frame`` as 8-bit P5 PGM min-max scaled; return ``(min, max)``."""
    data = as_frame(frame)
    lo, hi = float(data.min()), float(data.max())
    if hi > lo:
        scaled = np.round((data - lo) * (255.0 / (hi - lo)))
    else:
        scaled = np.zeros_like(data)
    header = f"P5\n{data.shape[1]} {data.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + scaled.astype(np.uint8).tobytes())
    return lo, hi


def normalize_power(frame) -> np.ndarray:
    """Scale ``frame`` to unit sum of squares."""
    data = as_frame(frame)
    energy = float(np.sum(data * data))
    if energy == 0.0:
        raise SpmtError("zero-power frame")
    return data / np.sqrt(energy)


def extract_segment(frame, grid: SegmentGrid, row: int, col: int) -> np.ndarray:
    """Return a copy of segment ``(row, col)``; its own centered origin is the segment center."""
    data = as_frame(frame)
    grid.check(data)
    if not (0 <= row < grid.rows and 0 <= col < grid.cols):
        raise SpmtError(f"segment ({row}, {col}) outside {grid.rows}x{grid.cols} grid")
    h, w = grid.segment_shape
    return data[row * h:(row + 1) * h, col * w:(col + 1) * w].copy()


def iter_segments(frame, grid: SegmentGrid):
    """Yield ``(index, segment)`` in row-major order."""
    for index in range(len(grid)):
        yield index, extract_segment(frame, grid, *grid.cell(index))


def assemble_segments(segments, grid: SegmentGrid) -> np.ndarray:
    """Inverse of :func:`iter_segments`: tile row-major segments back into a frame."""
    segments = list(segments)
    if len(segments) != len(grid):
        raise SpmtError(f"expected {len(grid)} segments, got {len(segments)}")
    h, w = grid.segment_shape
    out = np.zeros(grid.shape)
    for index, seg in enumerate(segments):
        seg = as_frame(seg)
        if seg.shape != (h, w):
            raise SpmtError(f"segment {index} has shape {seg.shape}, expected {(h, w)}")
        r, c = grid.cell(index)
        out[r * h:(r + 1) * h, c * w:(c + 1) * w] = seg
    return out
