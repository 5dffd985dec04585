"""Ground-truth sweeps over rotation and scale."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, fields


from .detect import DetectConfig, direct_correlate, estimate_transform, score_patch
from .frame import normalize_power
from .pmt import PmtParams, pmt
from .scenegen import make_object, transform_object

__all__ = ["SweepRow", "DEFAULT_PHIS_DEG", "DEFAULT_ALPHAS", "angle_error_deg", "run_sweep", "rows_to_csv"]

DEFAULT_PHIS_DEG = tuple(range(10, 180, 10))
DEFAULT_ALPHAS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


def angle_error_deg(estimate: float, truth: float) -> float:
    """Signed difference modulo 180 degrees, in ``[-90, 90)``."""
    return (estimate - truth + 90.0) % 180.0 - 90.0


@dataclass(frozen=True)
class SweepRow:
    phi_deg: float
    alpha: float
    phi_hat_deg: float
    alpha_hat: float
    score: float
    lag_theta: float
    lag_rho: float
    dual_peak: bool


def run_sweep(
    phis_deg=DEFAULT_PHIS_DEG,
    alphas=DEFAULT_ALPHAS,
    *,
    kind: str = "flag",
    size: float = 40.0,
    canvas: int = 128,
    params: PmtParams | None = None,
    config: DetectConfig = DetectConfig(),
) -> list[SweepRow]:
    """Transform one object over the ``phi x alpha`` grid and decode each copy.

    Rows come out phi-major in the order given.
    """
    params = params or PmtParams.for_shape((canvas, canvas))
    base = make_object(kind, size, canvas)
    ref = pmt(normalize_power(base), params)
    rows = []
    for phi_deg in phis_deg:
        for alpha in alphas:
            moved = transform_object(base, (0.0, 0.0), math.radians(phi_deg), alpha)
            surface = direct_correlate(ref, pmt(normalize_power(moved), params))
            peaks = score_patch(surface, config)
            est = estimate_transform(peaks, params, config)
            rows.append(SweepRow(
                phi_deg=float(phi_deg),
                alpha=float(alpha),
                phi_hat_deg=est.phi_deg,
                alpha_hat=est.alpha,
                score=float(surface.max()),
                lag_theta=peaks.best.lag_theta,
                lag_rho=peaks.best.lag_rho,
                dual_peak=est.family is not None,
            ))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f.name for f in fields(SweepRow)])
    for row in rows:
        writer.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in astuple(row)])
    return buf.getvalue()
