"""Shift-, scale- and rotation-invariant recognition with segmented polar Mellin signatures."""
from .errors import ConfigError, SpmtError
from .frame import SegmentGrid, load_frame, normalize_power, save_pgm
from .pmt import PmtParams, PmtSignature, pmt
from .segmentation import SignatureSheet, segment_pmt
from .bojtc import run_bojtc
from .detect import DetectConfig, DetectionReport, detect_all, direct_correlate, estimate_transform, score_patch
from .scenegen import SceneSpec, figure3_spec, make_object, render_scene, transform_object

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "SpmtError",
    "SegmentGrid",
    "load_frame",
    "normalize_power",
    "save_pgm",
    "PmtParams",
    "PmtSignature",
    "pmt",
    "SignatureSheet",
    "segment_pmt",
    "run_bojtc",
    "DetectConfig",
    "DetectionReport",
    "detect_all",
    "direct_correlate",
    "estimate_transform",
    "score_patch",
    "SceneSpec",
    "figure3_spec",
    "make_object",
    "render_scene",
    "transform_object",
]
