"""Command-line front end.

Every subcommand writes into ``--out`` and exits 0 on success, 1 when the
pipeline fails and 2 when the configuration is invalid. Heatmaps are 8-bit
PGMs scaled min-to-max; a ``.json`` sidecar next to each records the
scale so pixel values can be mapped back.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bojtc import run_bojtc
from .detect import DetectionReport, detect_all, direct_correlate, estimate_transform, score_patch
from .errors import ConfigError, SpmtError
from .frame import SegmentGrid, load_frame, normalize_power, save_pgm
from .pmt import PmtParams, pmt
from .scenegen import FIGURE3_QUERY, figure3_spec, render_scene
from .segmentation import segment_pmt
from .sweep import DEFAULT_ALPHAS, DEFAULT_PHIS_DEG, rows_to_csv, run_sweep

DEFAULTS = {
    "r0": None,
    "rmax": None,
    "nrho": None,
    "ntheta": None,
    "grid": None,
    "threshold": 0.5,
    "use_bojtc": False,
    "out": "out",
    "seed": 0,
}


@dataclass
class RunConfig:
    """Merged flag/config-file settings for one invocation."""

    r0: float | None = None
    rmax: float | None = None
    nrho: int | None = None
    ntheta: int | None = None
    grid: tuple[int, int] | None = None
    threshold: float = 0.5
    use_bojtc: bool = False
    out: Path = field(default_factory=lambda: Path("out"))
    seed: int = 0

    def params_for(self, shape) -> PmtParams:
        params = PmtParams.for_shape(shape, r0=self.r0, r_max=self.rmax, n_rho=self.nrho, n_theta=self.ntheta)
        params.check_frame(shape)
        return params

    def grid_for(self, shape) -> SegmentGrid:
        rows, cols = self.grid or (1, 1)
        return SegmentGrid.for_frame(shape, rows, cols)


def parse_grid(text) -> tuple[int, int]:
    if isinstance(text, (list, tuple)):
        rows, cols = text
    else:
        parts = str(text).lower().split("x")
        if len(parts) != 2:
            raise ConfigError(f"grid must look like RxC (got {text!r})")
        try:
            rows, cols = int(parts[0]), int(parts[1])
        except ValueError:
            raise ConfigError(f"grid must look like RxC (got {text!r})") from None
    if rows < 1 or cols < 1:
        raise ConfigError(f"grid dimensions must be positive (got {rows}x{cols})")
    return int(rows), int(cols)


def parse_cell(text: str) -> tuple[int, int]:
    try:
        row, col = (int(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"cell must look like R,C (got {text!r})") from None
    return row, col


def parse_range(text: str, cast=float) -> list:
    """``start:stop:step`` (inclusive stop) or a comma list."""
    if ":" in text:
        try:
            start, stop, step = (float(v) for v in text.split(":"))
        except ValueError:
            raise ConfigError(f"range must be start:stop:step (got {text!r})") from None
        if step <= 0:
            raise ConfigError(f"range step must be > 0 (got {step})")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [cast(round(start + i * step, 10)) for i in range(max(count, 0))]
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse value list {text!r}") from None


def build_config(args) -> RunConfig:
    merged = dict(DEFAULTS)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged.update(loaded)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return RunConfig(
        r0=merged["r0"],
        rmax=merged["rmax"],
        nrho=merged["nrho"],
        ntheta=merged["ntheta"],
        grid=parse_grid(merged["grid"]) if merged["grid"] is not None else None,
        threshold=float(merged["threshold"]),
        use_bojtc=bool(merged["use_bojtc"]),
        out=Path(merged["out"]),
        seed=int(merged["seed"]),
    )


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_heatmap(path: Path, data, **extra) -> None:
    lo, hi = save_pgm(path, data)
    write_json(path.with_suffix(".json"), {
        "image": path.name,
        "shape": list(np.shape(data)),
        "scaling": "linear, min -> 0, max -> 255",
        "min": lo,
        "max": hi,
        **extra,
    })


def tile_overview(surfaces, grid: SegmentGrid) -> np.ndarray:
    """Lay per-tile surfaces out on the scene grid with a one-pixel gutter."""
    h, w = next(s.shape for s in surfaces if s is not None)
    out = np.zeros((grid.rows * (h + 1) - 1, grid.cols * (w + 1) - 1))
    for index, surface in enumerate(surfaces):
        if surface is None:
            continue
        r, c = grid.cell(index)
        out[r * (h + 1):r * (h + 1) + h, c * (w + 1):c * (w + 1) + w] = surface
    return out


def cmd_pmt(args, cfg: RunConfig) -> int:
    frame = load_frame(args.input)
    params = cfg.params_for(frame.shape)
    sig = pmt(normalize_power(frame), params)
    cfg.out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    (cfg.out / f"{stem}.pmt").write_bytes(sig.to_bytes())
    write_heatmap(cfg.out / f"{stem}_pmt.pgm", sig.data, params=params.to_dict(),
                  axes={"rows": "theta", "cols": "log-radius"})
    print(f"wrote {cfg.out / (stem + '.pmt')}")
    return 0


def cmd_segment(args, cfg: RunConfig) -> int:
    frame = load_frame(args.input)
    grid = cfg.grid_for(frame.shape)
    params = cfg.params_for(grid.segment_shape)
    sheet = segment_pmt(frame, grid, params)
    cfg.out.mkdir(parents=True, exist_ok=True)
    for index, sig in enumerate(sheet.signatures):
        (cfg.out / f"tile_{index:02d}.pmt").write_bytes(sig.to_bytes())
    write_heatmap(cfg.out / "sheet.pgm", sheet.sheet_frame)
    write_json(cfg.out / "sheet_manifest.json", sheet.manifest())
    print(f"wrote {len(sheet.signatures)} tiles to {cfg.out}")
    return 0


def cmd_correlate(args, cfg: RunConfig) -> int:
    ref_frame, query_frame = load_frame(args.reference), load_frame(args.query)
    if ref_frame.shape != query_frame.shape:
        raise ConfigError(f"reference {ref_frame.shape} and query {query_frame.shape} differ in size")
    params = cfg.params_for(ref_frame.shape)
    ref = pmt(normalize_power(ref_frame), params)
    query = pmt(normalize_power(query_frame), params)
    if cfg.use_bojtc:
        sheet = segment_pmt(query_frame, SegmentGrid.for_frame(query_frame.shape, 1, 1), params)
        report = detect_all(ref, sheet, cfg.threshold, use_bojtc=True)
        surface = report.tiles[0].surface
    else:
        surface = direct_correlate(ref, query)
    peaks = score_patch(surface)
    result = {"score": float(surface.max()), "matched": bool(surface.max() > cfg.threshold),
              "threshold": cfg.threshold, "method": "bojtc" if cfg.use_bojtc else "direct"}
    if len(peaks):
        est = estimate_transform(peaks, params)
        result.update(phi_deg=est.phi_deg, alpha=est.alpha,
                      peak_lag={"theta": peaks.best.lag_theta, "rho": peaks.best.lag_rho})
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_heatmap(cfg.out / "correlation.pgm", surface)
    write_json(cfg.out / "correlation_result.json", result)
    print(json.dumps(result, sort_keys=True))
    return 0


def _scene_inputs(args, cfg: RunConfig):
    """Return ``(frame, grid, ref_cell_or_None, ref_frame_or_None, scene_manifest)``."""
    if args.figure3:
        spec = figure3_spec(math.radians(args.phi_deg), args.alpha, seed=cfg.seed)
        frame, manifest = render_scene(spec)
        if cfg.grid is not None and cfg.grid != (spec.grid.rows, spec.grid.cols):
            raise ConfigError(f"--figure3 uses a 4x3 grid (got --grid {cfg.grid[0]}x{cfg.grid[1]})")
        return frame, spec.grid, FIGURE3_QUERY, None, manifest
    if args.input is None:
        raise ConfigError("detect needs a scene image or --figure3")
    frame = load_frame(args.input)
    grid = cfg.grid_for(frame.shape)
    if args.ref is not None:
        return frame, grid, None, load_frame(args.ref), None
    if args.ref_cell is not None:
        return frame, grid, parse_cell(args.ref_cell), None, None
    raise ConfigError("detect needs --ref IMAGE or --ref-cell R,C for a scene image")


def _detect(args, cfg: RunConfig):
    frame, grid, ref_cell, ref_frame, manifest = _scene_inputs(args, cfg)
    params = cfg.params_for(grid.segment_shape)
    sheet = segment_pmt(frame, grid, params)
    if ref_frame is not None:
        if ref_frame.shape != grid.segment_shape:
            raise ConfigError(f"reference image {ref_frame.shape} must match the segment size {grid.segment_shape}")
        ref = pmt(normalize_power(ref_frame), params)
    else:
        row, col = ref_cell
        if not (0 <= row < grid.rows and 0 <= col < grid.cols):
            raise ConfigError(f"reference cell ({row}, {col}) outside the {grid.rows}x{grid.cols} grid")
        ref = sheet.signatures[row * grid.cols + col]
        if ref.empty:
            raise SpmtError(f"reference cell ({row}, {col}) is empty")
    report = detect_all(ref, sheet, cfg.threshold, use_bojtc=cfg.use_bojtc)
    return frame, grid, report, manifest


def _write_report(out: Path, grid: SegmentGrid, report: DetectionReport, prefix: str = "") -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / f"{prefix}report.json", report.to_dict())
    for tile in report.tiles:
        if tile.surface is not None:
            write_heatmap(out / f"{prefix}tile_{tile.index:02d}.pgm", tile.surface,
                          tile=tile.index, score=tile.score)
    surfaces = [t.surface for t in report.tiles]
    if any(s is not None for s in surfaces):
        write_heatmap(out / f"{prefix}overview.pgm", tile_overview(surfaces, grid),
                      grid={"rows": grid.rows, "cols": grid.cols})


def _print_summary(report: DetectionReport) -> None:
    for tile in report.tiles:
        mark = "MATCH" if tile.matched else "-----"
        extra = ""
        if tile.estimate is not None:
            extra = f"  phi={tile.estimate.phi_deg:6.2f} deg  alpha={tile.estimate.alpha:.3f}"
        print(f"tile {tile.index:2d} ({tile.row},{tile.col}) {mark} score={tile.score:.3f}{extra}")


def cmd_detect(args, cfg: RunConfig) -> int:
    _, grid, report, manifest = _detect(args, cfg)
    _write_report(cfg.out, grid, report)
    if manifest is not None:
        write_json(cfg.out / "scene_manifest.json", manifest)
    _print_summary(report)
    return 0


def cmd_sweep(args, cfg: RunConfig) -> int:
    phis = parse_range(args.phis) if args.phis else list(DEFAULT_PHIS_DEG)
    alphas = parse_range(args.alphas) if args.alphas else list(DEFAULT_ALPHAS)
    if any(a <= 0 for a in alphas):
        raise ConfigError("alphas must be > 0")
    canvas = args.canvas
    params = cfg.params_for((canvas, canvas))
    rows = run_sweep(phis, alphas, kind=args.kind, size=args.size, canvas=canvas, params=params)
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / "sweep.csv"
    path.write_text(rows_to_csv(rows))
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def cmd_demo_figure3(args, cfg: RunConfig) -> int:
    spec = figure3_spec(math.radians(args.phi_deg), args.alpha, seed=cfg.seed)
    frame, manifest = render_scene(spec)
    params = cfg.params_for(spec.grid.segment_shape)
    sheet = segment_pmt(frame, spec.grid, params)
    ref = sheet.signatures[FIGURE3_QUERY[0] * spec.grid.cols + FIGURE3_QUERY[1]]
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_heatmap(cfg.out / "scene.pgm", frame)
    write_json(cfg.out / "scene_manifest.json", manifest)
    write_heatmap(cfg.out / "sheet.pgm", sheet.sheet_frame)
    direct = detect_all(ref, sheet, cfg.threshold, use_bojtc=False)
    optical = detect_all(ref, sheet, cfg.threshold, use_bojtc=True)
    _write_report(cfg.out, spec.grid, direct, prefix="direct_")
    _write_report(cfg.out, spec.grid, optical, prefix="bojtc_")
    plane, joint, _ = run_bojtc(ref, sheet)
    write_heatmap(cfg.out / "joint_input.pgm", joint)
    write_heatmap(cfg.out / "correlation_plane.pgm", plane.data, geometry=plane.geometry.to_dict())
    _print_summary(optical)
    same = direct.matched_indices == optical.matched_indices
    print(f"matched (direct) {direct.matched_indices}  matched (bojtc) {optical.matched_indices}  agree={same}")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline options (also settable in --config)")
    g.add_argument("--r0", type=float, help="smallest sampled spectral radius (px)")
    g.add_argument("--rmax", type=float, help="largest sampled spectral radius (px)")
    g.add_argument("--nrho", type=int, help="log-radius bins")
    g.add_argument("--ntheta", type=int, help="angle bins")
    g.add_argument("--grid", help="segment grid as RxC")
    g.add_argument("--threshold", type=float, help="match threshold (default 0.5)")
    g.add_argument("--use-bojtc", dest="use_bojtc", action="store_const", const=True,
                   help="score with the balanced joint transform correlator")
    g.add_argument("--out", help="output directory (default ./out)")
    g.add_argument("--seed", type=int, help="seed for generated scenes (default 0)")
    g.add_argument("--config", help="JSON file with any of the options above; flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spmt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pmt", help="signature of a whole image")
    p.add_argument("input")
    _add_common(p)
    p.set_defaults(func=cmd_pmt)

    p = sub.add_parser("segment", help="per-segment signatures of an image")
    p.add_argument("input")
    _add_common(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("correlate", help="score one query image against a reference image")
    p.add_argument("reference")
    p.add_argument("query")
    _add_common(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("detect", help="find a reference in every segment of a scene")
    p.add_argument("input", nargs="?")
    p.add_argument("--ref", help="reference image, segment-sized")
    p.add_argument("--ref-cell", help="use segment R,C of the scene as reference")
    p.add_argument("--figure3", action="store_true", help="run on the generated 3x4 test scene")
    p.add_argument("--phi-deg", type=float, default=40.0, help="rotation used by --figure3")
    p.add_argument("--alpha", type=float, default=0.7, help="scale used by --figure3")
    _add_common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("sweep", help="decode a rotation x scale grid against ground truth")
    p.add_argument("--phis", help="degrees, start:stop:step or a,b,c (default 10:170:10)")
    p.add_argument("--alphas", help="scales, start:stop:step or a,b,c (default 0.5:0.95:0.05)")
    p.add_argument("--kind", default="flag", help="object kind (default flag)")
    p.add_argument("--size", type=float, default=40.0, help="object size in px")
    p.add_argument("--canvas", type=int, default=128, help="canvas side in px")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("demo-figure3", help="render the test scene and run both correlators")
    p.add_argument("--phi-deg", type=float, default=40.0)
    p.add_argument("--alpha", type=float, default=0.7)
    _add_common(p)
    p.set_defaults(func=cmd_demo_figure3)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"spmt: config error: {exc}", file=sys.stderr)
        return 2
    except SpmtError as exc:
        print(f"spmt: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"spmt: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
