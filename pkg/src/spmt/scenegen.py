"""Synthetic scenes with known ground truth.

Objects are binary masks centered on the canvas's geometric center
``((N-1)/2, (N-1)/2)``, so quarter-turn rotations map the pixel grid onto
itself. Angles are counterclockwise with ``y`` pointing up.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, SpmtError
from .frame import SegmentGrid

__all__ = [
    "OBJECT_KINDS",
    "CROSS_BAR_FRACTION",
    "FIGURE3_KINDS",
    "FIGURE3_QUERY",
    "make_object",
    "transform_object",
    "Placement",
    "SceneSpec",
    "render_scene",
    "figure3_spec",
]

OBJECT_KINDS = ("square", "cross", "ring", "flag")
# Bars of size/4 leave square and cross too alike (score ~0.6). At 0.375
# (18 px for a 48 px object) square vs cross scores 0.46 and every ring
# mismatch in the figure scene stays under 0.36.
CROSS_BAR_FRACTION = 0.375
FIGURE3_KINDS = ("square", "cross", "ring")
FIGURE3_QUERY = (0, 2)


def _centered_grid(canvas: int):
    c = (canvas - 1) / 2.0
    rows, cols = np.mgrid[:canvas, :canvas]
    return cols - c, c - rows


def make_object(kind: str, size: float, canvas: int) -> np.ndarray:
    """Binary test object of nominal extent ``size`` on a ``canvas``-square frame.

    ``square`` is a filled square, ``cross`` two bars of width
    ``CROSS_BAR_FRACTION * size``, ``ring`` an annulus with radii ``size/2`` and
    ``size/4``. ``flag`` is a pole with a short banner; it has no rotational
    symmetry, which makes it the object of choice for rotation sweeps.
    """
    if kind not in OBJECT_KINDS:
        raise ConfigError(f"unknown object kind {kind!r}; expected one of {', '.join(OBJECT_KINDS)}")
    if not 0 < size < canvas:
        raise ConfigError(f"object size must be in (0, canvas) (got size={size}, canvas={canvas})")
    x, y = _centered_grid(canvas)
    h = size / 2.0
    if kind == "square":
        mask = (np.abs(x) < h) & (np.abs(y) < h)
    elif kind == "cross":
        bar = CROSS_BAR_FRACTION * size / 2.0
        mask = ((np.abs(x) < h) & (np.abs(y) < bar)) | ((np.abs(y) < h) & (np.abs(x) < bar))
    elif kind == "ring":
        r = np.hypot(x, y)
        mask = (r <= h) & (r >= size / 4.0)
    else:
        pole = (x > -h) & (x < -h / 2) & (np.abs(y) < h)
        banner = (x > -h) & (x < h / 2) & (y > h / 3) & (y < h)
        mask = pole | banner
    return mask.astype(np.float64)


def _forward_matrix(phi: float, alpha: float) -> np.ndarray:
    # Acts on (row, col) offsets: a CCW turn in (x, y-up) coordinates.
    c, s = math.cos(phi), math.sin(phi)
    return alpha * np.array([[c, -s], [s, c]])


def transform_object(obj, shift=(0.0, 0.0), phi: float = 0.0, alpha: float = 1.0) -> np.ndarray:
    """Scale by ``alpha``, rotate by ``phi`` (CCW), then translate by ``shift``.

    All three happen about the canvas center in one bilinear resampling pass.
    ``shift`` is ``(dx, dy)`` in pixels with ``dy`` up. Raises if any part of
    the object would leave the canvas.
    """
    obj = np.asarray(obj, dtype=np.float64)
    if obj.ndim != 2:
        raise SpmtError(f"object must be 2D (got shape {obj.shape})")
    if alpha <= 0 or not math.isfinite(alpha):
        raise ConfigError(f"alpha must be a positive finite scale (got {alpha})")
    dx, dy = shift
    if phi == 0.0 and alpha == 1.0 and dx == 0 and dy == 0:
        return obj.copy()

    center = np.array([(obj.shape[0] - 1) / 2.0, (obj.shape[1] - 1) / 2.0])
    forward = _forward_matrix(phi, alpha)
    translation = np.array([-dy, dx], dtype=np.float64)

    rows, cols = np.nonzero(obj)
    if rows.size:
        # Every pixel footprint (±0.5) plus one bilinear pixel of spread must land inside.
        corners = np.array([[a, b] for a in (-0.5, 0.5) for b in (-0.5, 0.5)])
        pts = (np.stack([rows, cols], axis=1)[:, None, :] + corners[None]).reshape(-1, 2)
        moved = (pts - center) @ forward.T + center + translation
        lo, hi = moved.min(axis=0), moved.max(axis=0)
        if lo.min() < 0.0 or hi[0] > obj.shape[0] - 1 or hi[1] > obj.shape[1] - 1:
            raise SpmtError(
                f"transformed object clipped by the {obj.shape[0]}x{obj.shape[1]} canvas "
                f"(shift={tuple(shift)}, phi={math.degrees(phi):.2f} deg, alpha={alpha})"
            )

    inverse = np.linalg.inv(forward)
    offset = center - inverse @ (center + translation)
    out = ndimage.affine_transform(obj, inverse, offset=offset, order=1, mode="constant", cval=0.0)
    out[np.abs(out) < 1e-12] = 0.0
    return out


@dataclass(frozen=True)
class Placement:
    """One object in one grid cell. ``phi`` is in radians."""

    row: int
    col: int
    kind: str
    shift: tuple[float, float] = (0.0, 0.0)
    phi: float = 0.0
    alpha: float = 1.0

    @classmethod
    def from_dict(cls, d: dict) -> "Placement":
        return cls(int(d["row"]), int(d["col"]), str(d["kind"]), tuple(d.get("shift", (0.0, 0.0))),
                   float(d.get("phi", 0.0)), float(d.get("alpha", 1.0)))


@dataclass(frozen=True)
class SceneSpec:
    grid: SegmentGrid
    placements: tuple[Placement, ...] = ()
    object_size: float = 48.0

    def __post_init__(self):
        seen = set()
        for p in self.placements:
            if not (0 <= p.row < self.grid.rows and 0 <= p.col < self.grid.cols):
                raise ConfigError(f"placement at ({p.row}, {p.col}) is outside the {self.grid.rows}x{self.grid.cols} grid")
            if (p.row, p.col) in seen:
                raise ConfigError(f"more than one placement in cell ({p.row}, {p.col})")
            seen.add((p.row, p.col))

    def placement_at(self, row: int, col: int) -> Placement | None:
        for p in self.placements:
            if (p.row, p.col) == (row, col):
                return p
        return None

    def to_dict(self) -> dict:
        return {
            "schema": "ssri-scene/1",
            "grid": asdict(self.grid),
            "object_size": self.object_size,
            "placements": [
                {**asdict(p), "shift": list(p.shift), "phi_deg": math.degrees(p.phi)}
                for p in self.placements
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(
            grid=SegmentGrid(**d["grid"]),
            placements=tuple(Placement.from_dict(p) for p in d.get("placements", ())),
            object_size=float(d.get("object_size", 48.0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "SceneSpec":
        return cls.from_dict(json.loads(text))


def render_scene(spec: SceneSpec):
    """Draw every placement into its cell; returns ``(frame, manifest)``.

    No intensity normalization happens here; that is left to segmentation.
    """
    grid = spec.grid
    frame = np.zeros(grid.shape)
    seg_h, seg_w = grid.segment_shape
    if seg_h != seg_w:
        raise ConfigError(f"scenes need square segments (got {seg_h}x{seg_w})")
    for p in spec.placements:
        base = make_object(p.kind, spec.object_size, seg_w)
        try:
            obj = transform_object(base, p.shift, p.phi, p.alpha)
        except SpmtError as exc:
            raise SpmtError(f"cell ({p.row}, {p.col}): {exc}") from exc
        frame[p.row * seg_h:(p.row + 1) * seg_h, p.col * seg_w:(p.col + 1) * seg_w] = obj
    return frame, spec.to_dict()


def figure3_spec(
    phi: float = math.radians(40.0),
    alpha: float = 0.7,
    *,
    seed: int = 0,
    max_shift: int = 8,
    object_size: float = 48.0,
    segment: int = 128,
) -> SceneSpec:
    """Three object columns by four transform rows.

    Row 0 holds the originals, row 1 rotates by ``phi``, row 2 scales by
    ``alpha``, row 3 does both. Each object also gets a seeded random integer
    offset of up to ``max_shift`` pixels per axis; column 2 (the ring) is the
    query column and cell ``(0, 2)`` the reference.
    """
    grid = SegmentGrid(rows=4, cols=3, segment_width=segment, segment_height=segment)
    rng = np.random.default_rng(seed)
    transforms = [(0.0, 1.0), (phi, 1.0), (0.0, alpha), (phi, alpha)]
    placements = []
    for row, (p, a) in enumerate(transforms):
        for col, kind in enumerate(FIGURE3_KINDS):
            shift = tuple(int(v) for v in rng.integers(-max_shift, max_shift + 1, size=2)) if max_shift else (0, 0)
            placements.append(Placement(row, col, kind, shift, p, a))
    return SceneSpec(grid, tuple(placements), object_size)
