"""Balanced joint transform correlator on signature sheets.

The reference signature sits left of the frame center and the query tiles
right of it, spread out with zero guard bands between them. Detecting ``|F_joint|^2`` and subtracting the reference-only
and sheet-only intensities leaves ``2 Re(F_ref conj(F_query))``, whose
inverse transform holds just the cross-correlation and its point-mirrored
twin. The joint frame is sized so neither wraps around in the DFT.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SpmtError
from .frame import as_frame, origin, to_pixel
from .pmt import PmtSignature
from .segmentation import SignatureSheet
from .spectral import dft2_centered, idft2_centered, power_spectrum

__all__ = [
    "JointGeometry",
    "CorrelationPlane",
    "joint_shape_for",
    "sheet_extent",
    "compose_joint_input",
    "separate_joint",
    "balanced_jps",
    "plain_jps",
    "correlation_plane",
    "extract_tile_correlations",
    "run_bojtc",
]


@dataclass(frozen=True)
class JointGeometry:
    """Placement of the reference tile and query tiles in the joint frame.

    Centers are centered ``(x, y)`` coordinates of each tile's own origin
    pixel. ``tile_pitch`` is ``(dx, dy)`` in pixels between neighbouring
    tiles; tile rows advance downward (toward negative ``y``).
    """

    joint_width: int
    joint_height: int
    tile_width: int
    tile_height: int
    grid_rows: int
    grid_cols: int
    ref_center: tuple[int, int]
    tile_centers: tuple[tuple[int, int], ...]
    tile_pitch: tuple[int, int]

    @property
    def shape(self) -> tuple[int, int]:
        return self.joint_height, self.joint_width

    def separation(self, index: int) -> tuple[int, int]:
        """Reference-to-tile vector; the matching correlation peak lands here."""
        tx, ty = self.tile_centers[index]
        rx, ry = self.ref_center
        return tx - rx, ty - ry

    def tile_box(self, center) -> tuple[slice, slice]:
        row, col = to_pixel(self.shape, *center)
        top = row - self.tile_height // 2
        left = col - self.tile_width // 2
        return slice(top, top + self.tile_height), slice(left, left + self.tile_width)

    def ref_box(self) -> tuple[slice, slice]:
        return self.tile_box(self.ref_center)

    def sheet_box(self) -> tuple[slice, slice]:
        rows, cols = self.tile_box(self.tile_centers[0])
        dx, dy = self.tile_pitch
        return (
            slice(rows.start, rows.start + (self.grid_rows - 1) * dy + self.tile_height),
            slice(cols.start, cols.start + (self.grid_cols - 1) * dx + self.tile_width),
        )

    @property
    def patch_shape(self) -> tuple[int, int]:
        """Full lag range of one tile against the reference."""
        return 2 * self.tile_height - 1, 2 * self.tile_width - 1

    def to_dict(self) -> dict:
        return {
            "joint_width": self.joint_width,
            "joint_height": self.joint_height,
            "tile_width": self.tile_width,
            "tile_height": self.tile_height,
            "grid": {"rows": self.grid_rows, "cols": self.grid_cols},
            "ref_center": list(self.ref_center),
            "tile_centers": [list(c) for c in self.tile_centers],
            "tile_pitch": list(self.tile_pitch),
        }


@dataclass(frozen=True)
class CorrelationPlane:
    """Normalized correlator output; an ideal autocorrelation peak reads 1.0."""

    data: np.ndarray = field(repr=False)
    geometry: JointGeometry
    normalization: float


def _even_at_least(n: int) -> int:
    return n + (n % 2)


def joint_shape_for(ref_shape, sheet_shape) -> tuple[int, int]:
    """Smallest alias-free joint frame for side-by-side placement.

    The cross term spans ``ref_width + sheet_width - 1`` columns on each
    side of the origin, so the width must exceed twice that; the height
    gets the same 2x headroom over the taller of the two inputs.
    """
    height = _even_at_least(2 * max(ref_shape[0], sheet_shape[0]))
    width = _even_at_least(2 * (ref_shape[1] + sheet_shape[1]))
    return height, width


def sheet_extent(grid, tile_shape, pitch) -> tuple[int, int]:
    """Height and width covered by a grid of tiles laid out at ``pitch`` ``(dx, dy)``."""
    th, tw = tile_shape
    return (grid.rows - 1) * pitch[1] + th, (grid.cols - 1) * pitch[0] + tw


def compose_joint_input(ref: PmtSignature, sheet: SignatureSheet, joint_shape=None, *, pitch=None):
    """Place ``ref`` left of center and the sheet tiles right of center.

    The reference tile ends at the column just left of the origin and the
    tile block starts at the origin column, both vertically centered.
    Tiles sit ``pitch = (dx, dy)`` apart; the default of twice the tile size
    leaves a zero guard band wide enough that neighbouring correlations never
    overlap. Returns ``(joint_frame, geometry)``.
    """
    if ref.params != sheet.params:
        raise SpmtError("reference and sheet were computed with different PmtParams")
    th, tw = ref.params.shape
    if pitch is None:
        pitch = (2 * tw, 2 * th)
    pitch = (int(pitch[0]), int(pitch[1]))
    if pitch[0] < tw or pitch[1] < th:
        raise SpmtError(f"tile pitch {pitch} is smaller than the {tw}x{th} tiles")
    sh, sw = sheet_extent(sheet.grid, (th, tw), pitch)
    if joint_shape is None:
        joint_shape = joint_shape_for((th, tw), (sh, sw))
    height, width = joint_shape
    min_h, min_w = th + sh, 2 * (tw + sw)
    if height < min_h or width < min_w:
        raise SpmtError(
            f"joint frame {height}x{width} too small for a {th}x{tw} reference and "
            f"{sh}x{sw} sheet (needs at least {min_h}x{min_w} to avoid wraparound)"
        )
    orow, ocol = origin(joint_shape)
    joint = np.zeros(joint_shape)

    ref_top, ref_left = orow - th // 2, ocol - tw
    joint[ref_top:ref_top + th, ref_left:ref_left + tw] = ref.data
    sheet_top, sheet_left = orow - sh // 2, ocol

    def center(top, left):
        row, col = top + th // 2, left + tw // 2
        return col - ocol, orow - row

    tiles = []
    for index, sig in enumerate(sheet.signatures):
        r, c = sheet.grid.cell(index)
        top, left = sheet_top + r * pitch[1], sheet_left + c * pitch[0]
        joint[top:top + th, left:left + tw] = sig.data
        tiles.append(center(top, left))
    geometry = JointGeometry(
        joint_width=width,
        joint_height=height,
        tile_width=tw,
        tile_height=th,
        grid_rows=sheet.grid.rows,
        grid_cols=sheet.grid.cols,
        ref_center=center(ref_top, ref_left),
        tile_centers=tuple(tiles),
        tile_pitch=pitch,
    )
    return joint, geometry


def separate_joint(joint, geometry: JointGeometry):
    """Split a joint frame into its reference-only and query-only parts."""
    joint = as_frame(joint)
    ref_only = np.zeros_like(joint)
    rows, cols = geometry.ref_box()
    ref_only[rows, cols] = joint[rows, cols]
    query_only = np.zeros_like(joint)
    rows, cols = geometry.sheet_box()
    query_only[rows, cols] = joint[rows, cols]
    return ref_only, query_only


def balanced_jps(joint, ref_only, query_only) -> np.ndarray:
    """Joint power spectrum minus both self-intensity spectra."""
    joint = as_frame(joint, name="joint")
    ref_only = as_frame(ref_only, name="ref_only")
    query_only = as_frame(query_only, name="query_only")
    if not joint.shape == ref_only.shape == query_only.shape:
        raise SpmtError("joint, ref_only and query_only must share dimensions")
    return (
        power_spectrum(dft2_centered(joint))
        - power_spectrum(dft2_centered(ref_only))
        - power_spectrum(dft2_centered(query_only))
    )


def plain_jps(joint) -> np.ndarray:
    """Unbalanced joint power spectrum, kept for comparison."""
    return power_spectrum(dft2_centered(joint))


def correlation_plane(bjps, geometry: JointGeometry, norm_ref: PmtSignature) -> CorrelationPlane:
    """Inverse-transform a (balanced) JPS into a normalized correlation plane.

    With the unitary DFT the cross-correlation comes out divided by
    ``sqrt(W*H)``; multiplying back and dividing by the reference energy
    puts a perfect match at 1.0.
    """
    bjps = as_frame(bjps, name="jps")
    if bjps.shape != geometry.shape:
        raise SpmtError(f"JPS shape {bjps.shape} does not match geometry {geometry.shape}")
    energy = float(np.sum(norm_ref.data ** 2))
    if energy == 0.0:
        raise SpmtError("normalization reference has zero power")
    scale = math.sqrt(bjps.size) / energy
    return CorrelationPlane(np.abs(idft2_centered(bjps)) * scale, geometry, scale)


def extract_tile_correlations(plane: CorrelationPlane) -> list[tuple[int, np.ndarray]]:
    """Cut one patch per query tile, centered on its separation vector.

    Patches cover every lag, ``(2h-1) x (2w-1)`` like :func:`direct_correlate`;
    pixel ``(h-1 + a, w-1 + b)`` holds the correlation at a shift of ``a``
    signature rows (theta) and ``b`` columns (rho). With a tile pitch of at
    least ``2h-1`` by ``2w-1`` the patches are disjoint and free of cross-talk.
    """
    geo = plane.geometry
    if not geo.tile_centers:
        raise SpmtError("geometry has no query tiles")
    height, width = plane.data.shape
    patches = []
    for index in range(len(geo.tile_centers)):
        row, col = to_pixel(plane.data.shape, *geo.separation(index))
        ph, pw = geo.patch_shape
        top, left = row - geo.tile_height + 1, col - geo.tile_width + 1
        if top < 0 or left < 0 or top + ph > height or left + pw > width:
            raise SpmtError(f"correlation window for tile {index} falls outside the plane")
        patches.append((index, plane.data[top:top + ph, left:left + pw].copy()))
    return patches


def run_bojtc(ref: PmtSignature, sheet: SignatureSheet, *, balanced: bool = True):
    """Compose, detect, subtract (optionally) and inverse-transform in one call.

    Returns ``(plane, joint_frame, jps)``.
    """
    joint, geometry = compose_joint_input(ref, sheet)
    if balanced:
        jps = balanced_jps(joint, *separate_joint(joint, geometry))
    else:
        jps = plain_jps(joint)
    return correlation_plane(jps, geometry, ref), joint, jps
