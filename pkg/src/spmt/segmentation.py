"""Segmented PMT: one independent signature per grid cell, tiled into a sheet.

Each segment is transformed on its own, the way a lenslet array gives every
region of the input its own Fourier plane. Objects confined to different
segments therefore never interfere in the spectrum.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import SpmtError
from .frame import SegmentGrid, as_frame, extract_segment, normalize_power
from .pmt import PmtParams, PmtSignature, pmt

__all__ = ["SignatureSheet", "segment_pmt", "build_sheet_frame", "slice_sheet_frame"]


@dataclass(frozen=True)
class SignatureSheet:
    """Row-major signatures of a segmented frame plus their tiled image."""

    grid: SegmentGrid
    signatures: tuple[PmtSignature, ...]
    sheet_frame: np.ndarray = field(repr=False)

    @property
    def params(self) -> PmtParams:
        return self.signatures[0].params

    @property
    def empty_flags(self) -> list[bool]:
        return [sig.empty for sig in self.signatures]

    @classmethod
    def from_signatures(cls, signatures, grid: SegmentGrid) -> "SignatureSheet":
        signatures = tuple(signatures)
        return cls(grid, signatures, build_sheet_frame(signatures, grid))

    def manifest(self) -> dict:
        """JSON-ready description of the tile geometry."""
        n_theta, n_rho = self.params.shape
        return {
            "grid": {"rows": self.grid.rows, "cols": self.grid.cols},
            "segment": {"width": self.grid.segment_width, "height": self.grid.segment_height},
            "tile": {"width": n_rho, "height": n_theta},
            "tile_pitch": {"dx": n_rho, "dy": n_theta},
            "sheet": {"width": self.sheet_frame.shape[1], "height": self.sheet_frame.shape[0]},
            "params": self.params.to_dict(),
            "empty": self.empty_flags,
        }

    def manifest_json(self) -> str:
        return json.dumps(self.manifest(), indent=2)


def _segment_signature(segment: np.ndarray, params: PmtParams, cell) -> PmtSignature:
    if not np.any(segment):
        return PmtSignature.zeros(params)
    try:
        return pmt(normalize_power(segment), params)
    except SpmtError as exc:
        raise SpmtError(f"segment {cell}: {exc}") from exc


def segment_pmt(frame, grid: SegmentGrid, params: PmtParams, *, workers: int | None = None) -> SignatureSheet:
    """Split ``frame`` on ``grid`` and transform every segment independently.

    All-zero segments produce an empty placeholder signature instead of an
    error. ``workers`` > 1 runs segments on a thread pool; output does not
    depend on it.
    """
    data = as_frame(frame)
    grid.check(data)
    params.check_frame(grid.segment_shape)
    cells = [grid.cell(i) for i in range(len(grid))]
    segments = [extract_segment(data, grid, *cell) for cell in cells]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            signatures = list(pool.map(lambda sc: _segment_signature(sc[0], params, sc[1]), zip(segments, cells)))
    else:
        signatures = [_segment_signature(s, params, cell) for s, cell in zip(segments, cells)]
    return SignatureSheet.from_signatures(signatures, grid)


def build_sheet_frame(signatures, grid: SegmentGrid) -> np.ndarray:
    """Tile signatures row-major into one ``rows*n_theta x cols*n_rho`` frame."""
    signatures = list(signatures)
    if len(signatures) != len(grid):
        raise SpmtError(f"expected {len(grid)} signatures, got {len(signatures)}")
    params = signatures[0].params
    if any(sig.params != params for sig in signatures):
        raise SpmtError("signatures in one sheet must share PmtParams")
    th, tw = params.shape
    sheet = np.zeros((grid.rows * th, grid.cols * tw))
    for index, sig in enumerate(signatures):
        r, c = grid.cell(index)
        sheet[r * th:(r + 1) * th, c * tw:(c + 1) * tw] = sig.data
    return sheet


def slice_sheet_frame(sheet_frame, grid: SegmentGrid, params: PmtParams) -> list[np.ndarray]:
    """Cut a sheet back into its row-major tiles."""
    th, tw = params.shape
    if sheet_frame.shape != (grid.rows * th, grid.cols * tw):
        raise SpmtError("sheet frame does not match grid and params")
    return [
        sheet_frame[r * th:(r + 1) * th, c * tw:(c + 1) * tw].copy()
        for r, c in (grid.cell(i) for i in range(len(grid)))
    ]
