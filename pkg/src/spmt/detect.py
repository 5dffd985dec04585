"""Scoring correlation surfaces and decoding rotation and scale.

Surfaces are indexed so that the centered-origin pixel is zero lag;
``lag_theta`` counts signature rows (positive = query content at larger
angle) and ``lag_rho`` counts columns (positive = query content at larger
radius, i.e. a smaller object).

The spectrum magnitude of a real frame is point-symmetric, so its
signature repeats every half turn and a rotation is only identifiable
modulo 180 degrees. Estimated angles are reported in ``[0, pi)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal

from .bojtc import extract_tile_correlations, run_bojtc
from .errors import SpmtError
from .frame import as_frame, origin
from .pmt import PmtParams, PmtSignature
from .segmentation import SignatureSheet

__all__ = [
    "Peak",
    "PeakSet",
    "TransformEstimate",
    "TileResult",
    "DetectionReport",
    "DetectConfig",
    "score_patch",
    "direct_correlate",
    "estimate_transform",
    "detect_all",
    "peak_to_background",
    "REPORT_SCHEMA",
]

REPORT_SCHEMA = "ssri-report/1"


@dataclass(frozen=True)
class DetectConfig:
    """Tunables for peak extraction and dual-peak pairing."""

    floor: float = 0.05
    nms_radius: int = 3
    rho_tolerance: float = 2.0
    pair_ratio: float = 0.3
    refine: bool = True


@dataclass(frozen=True)
class Peak:
    lag_rho: float
    lag_theta: float
    value: float


@dataclass(frozen=True)
class PeakSet:
    """Peaks of one surface, strongest first, at least ``nms_radius + 1`` bins apart."""

    peaks: tuple[Peak, ...] = ()

    def __len__(self) -> int:
        return len(self.peaks)

    def __iter__(self):
        return iter(self.peaks)

    def __getitem__(self, i) -> Peak:
        return self.peaks[i]

    @property
    def best(self) -> Peak | None:
        return self.peaks[0] if self.peaks else None


@dataclass(frozen=True)
class TransformEstimate:
    """Decoded rotation (radians, modulo pi) and scale of a match.

    ``family`` holds the theta lags of the paired peaks when a rotation
    twin was found, else ``None``.
    """

    phi: float
    alpha: float
    confidence: float
    family: tuple[float, float] | None = None

    @property
    def phi_deg(self) -> float:
        return math.degrees(self.phi)


def _parabolic_offset(minus: float, center: float, plus: float) -> float:
    curvature = minus - 2.0 * center + plus
    if curvature >= 0.0:
        return 0.0
    offset = float(np.clip(0.5 * (minus - plus) / curvature, -0.5, 0.5))
    # FFT round-off on a symmetric peak should not read as a sub-bin shift.
    return 0.0 if abs(offset) < 1e-9 else offset


def score_patch(patch, config: DetectConfig = DetectConfig()) -> PeakSet:
    """Local maxima above ``config.floor`` after non-maximum suppression.

    Lags are relative to the patch's centered origin. With
    ``config.refine`` each lag gets a 3-point parabolic correction per axis;
    values stay the sampled maxima.
    """
    data = as_frame(patch, name="patch")
    size = 2 * config.nms_radius + 1
    local_max = data == ndimage.maximum_filter(data, size=size, mode="constant", cval=-np.inf)
    rows, cols = np.nonzero(local_max & (data > config.floor))
    if rows.size == 0:
        return PeakSet()
    order = np.lexsort((cols, rows, -data[rows, cols]))
    orow, ocol = origin(data.shape)
    kept: list[tuple[int, int]] = []
    peaks = []
    for i in order:
        r, c = int(rows[i]), int(cols[i])
        if any(max(abs(r - kr), abs(c - kc)) <= config.nms_radius for kr, kc in kept):
            continue
        kept.append((r, c))
        dr = dc = 0.0
        if config.refine:
            if 0 < r < data.shape[0] - 1:
                dr = _parabolic_offset(data[r - 1, c], data[r, c], data[r + 1, c])
            if 0 < c < data.shape[1] - 1:
                dc = _parabolic_offset(data[r, c - 1], data[r, c], data[r, c + 1])
        peaks.append(Peak(lag_rho=c - ocol + dc, lag_theta=r - orow + dr, value=float(data[r, c])))
    return PeakSet(tuple(peaks))


def direct_correlate(ref: PmtSignature, query: PmtSignature) -> np.ndarray:
    """Full linear cross-correlation over all ``(2n_theta-1) x (2n_rho-1)`` lags.

    Entry ``[n_theta-1 + a, n_rho-1 + b]`` is the inner product of the query
    with the reference shifted by ``a`` rows and ``b`` columns (zero-padded),
    so the autocorrelation of a unit-power signature is 1 at zero lag.
    """
    if ref.params != query.params:
        raise SpmtError("direct_correlate needs signatures with identical params")
    return signal.correlate(query.data, ref.data, mode="full", method="fft")


def _circular_gap(a: float, b: float, period: float) -> float:
    d = (a - b) % period
    return min(d, period - d)


def estimate_transform(peaks: PeakSet, params: PmtParams, config: DetectConfig = DetectConfig()) -> TransformEstimate:
    """Turn peak geometry into ``(phi, alpha)``.

    ``phi`` comes from the strongest peak's theta lag folded into
    ``[0, pi)``, and ``alpha = exp(-lag_rho * d_rho)`` from its rho lag.
    A rotated match also shows a twin one full turn (``n_theta`` rows) away.
    The reported ``family`` is the strongest such pair whose lags agree with
    the winning peak modulo a half turn and whose rho lags agree within
    ``config.rho_tolerance``.
    """
    if not len(peaks):
        raise SpmtError("cannot estimate a transform from an empty peak set")
    best = peaks.best
    n = params.n_theta
    family, family_value = None, -1.0
    for i, a in enumerate(peaks):
        for b in peaks.peaks[i + 1:]:
            hi, lo = (a, b) if a.lag_theta > b.lag_theta else (b, a)
            if abs((hi.lag_theta - lo.lag_theta) - n) > 1.0:
                continue
            if _circular_gap(hi.lag_theta, best.lag_theta, n / 2) > 1.0:
                continue
            if max(abs(p.lag_rho - best.lag_rho) for p in (hi, lo)) > config.rho_tolerance:
                continue
            if min(a.value, b.value) < config.pair_ratio * max(a.value, b.value):
                continue
            if a.value + b.value > family_value:
                family, family_value = (hi.lag_theta, lo.lag_theta), a.value + b.value
    phi = (best.lag_theta * params.d_theta) % math.pi
    if math.isclose(phi, math.pi, abs_tol=1e-9) or abs(phi) < 1e-9:
        phi = 0.0
    alpha = math.exp(-best.lag_rho * params.d_rho)
    confidence = float(np.clip(best.value, 0.0, 1.0))
    return TransformEstimate(phi=phi, alpha=alpha, confidence=confidence, family=family)


def peak_to_background(patch, at=None) -> float:
    """Correlation height over the patch mean.

    ``at`` is a ``(row, col)`` index into the patch; by default the patch
    maximum is used. Measuring both correlators at the same true-match
    location keeps a strong self-intensity term in an unbalanced plane from
    being mistaken for the correlation peak.
    """
    data = np.abs(as_frame(patch, name="patch"))
    mean = float(data.mean())
    if mean == 0.0:
        return 0.0
    peak = data.max() if at is None else data[tuple(at)]
    return float(peak) / mean


@dataclass
class TileResult:
    index: int
    row: int
    col: int
    matched: bool
    score: float
    empty: bool
    estimate: TransformEstimate | None = None
    peaks: PeakSet = field(default_factory=PeakSet, repr=False)
    surface: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "index": self.index,
            "row": self.row,
            "col": self.col,
            "matched": self.matched,
            "score": round(self.score, 6),
            "empty": self.empty,
        }
        if self.estimate is not None:
            out["phi_deg"] = round(self.estimate.phi_deg, 4)
            out["alpha"] = round(self.estimate.alpha, 6)
            if self.estimate.family is not None:
                out["dual_peak_theta_lags"] = [round(v, 3) for v in self.estimate.family]
        if self.peaks.best is not None:
            out["peak_lag"] = {
                "rho": round(self.peaks.best.lag_rho, 3),
                "theta": round(self.peaks.best.lag_theta, 3),
            }
        return out


@dataclass
class DetectionReport:
    threshold: float
    params: PmtParams
    method: str
    tiles: list[TileResult]
    geometry: dict | None = None
    plane: np.ndarray | None = field(default=None, repr=False)

    @property
    def matched_indices(self) -> list[int]:
        return [t.index for t in self.tiles if t.matched]

    def to_dict(self) -> dict:
        out = {
            "schema": REPORT_SCHEMA,
            "threshold": self.threshold,
            "method": self.method,
            "params": self.params.to_dict(),
            "tiles": [t.to_dict() for t in self.tiles],
        }
        if self.geometry is not None:
            out["geometry"] = self.geometry
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def detect_all(
    ref: PmtSignature,
    sheet: SignatureSheet,
    threshold: float = 0.5,
    use_bojtc: bool = False,
    config: DetectConfig = DetectConfig(),
) -> DetectionReport:
    """Score every tile of ``sheet`` against ``ref`` and decode matches.

    ``use_bojtc`` scores from the balanced correlator's per-tile patches;
    otherwise from :func:`direct_correlate`. A tile matches when its score
    exceeds ``threshold``.
    """
    if ref.params != sheet.params:
        raise SpmtError("reference and sheet were computed with different PmtParams")
    if use_bojtc:
        plane, _, _ = run_bojtc(ref, sheet)
        surfaces = [patch for _, patch in extract_tile_correlations(plane)]
        geometry = plane.geometry.to_dict()
        plane_data = plane.data
    else:
        surfaces = [None if sig.empty else direct_correlate(ref, sig) for sig in sheet.signatures]
        geometry = None
        plane_data = None

    tiles = []
    for index, (sig, surface) in enumerate(zip(sheet.signatures, surfaces)):
        row, col = sheet.grid.cell(index)
        if sig.empty:
            tiles.append(TileResult(index, row, col, False, 0.0, True, surface=surface))
            continue
        peaks = score_patch(surface, config)
        score = float(surface.max())
        matched = score > threshold
        estimate = estimate_transform(peaks, sheet.params, config) if matched and len(peaks) else None
        tiles.append(TileResult(index, row, col, matched, score, False, estimate, peaks, surface))
    method = "bojtc" if use_bojtc else "direct"
    return DetectionReport(threshold, sheet.params, method, tiles, geometry, plane_data)
