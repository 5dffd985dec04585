import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spmt.detect import (
    REPORT_SCHEMA,
    DetectConfig,
    Peak,
    PeakSet,
    detect_all,
    direct_correlate,
    estimate_transform,
    peak_to_background,
    score_patch,
)
from spmt.errors import SpmtError
from spmt.frame import SegmentGrid, normalize_power
from spmt.pmt import PmtParams, PmtSignature, pmt
from spmt.scenegen import make_object, transform_object
from spmt.segmentation import SignatureSheet


@pytest.fixture(scope="module")
def flag_sig(params128):
    return pmt(normalize_power(make_object("flag", 40, 128)), params128)


def test_autocorrelation_peak(flag_sig):
    surface = direct_correlate(flag_sig, flag_sig)
    assert surface.shape == (255, 255)
    assert surface[127, 127] == pytest.approx(1.0, abs=1e-12)
    peaks = score_patch(surface)
    assert (peaks.best.lag_theta, peaks.best.lag_rho) == (0.0, 0.0)
    assert peaks.best.value == pytest.approx(1.0, abs=0.01)
    assert all(p.value < 0.9 for p in peaks.peaks[1:])


def test_zero_inputs(flag_sig, params128):
    assert len(score_patch(np.zeros((9, 9)))) == 0
    zero = PmtSignature.zeros(params128)
    assert np.max(np.abs(direct_correlate(flag_sig, zero))) <= 1e-15


def test_direct_correlate_params_mismatch(flag_sig):
    other = PmtSignature(PmtParams(r0=2.0), flag_sig.data)
    with pytest.raises(SpmtError, match="identical params"):
        direct_correlate(flag_sig, other)


def test_direct_correlate_lag_convention(flag_sig):
    shifted = PmtSignature(flag_sig.params, np.roll(flag_sig.data, 5, axis=0))
    surface = direct_correlate(flag_sig, shifted)
    r, c = np.unravel_index(surface.argmax(), surface.shape)
    assert (r - 127, c - 127) == (5, 0)


def test_peak_set_invariants(flag_sig, params128):
    query = pmt(normalize_power(transform_object(make_object("flag", 40, 128), phi=math.radians(40))), params128)
    peaks = score_patch(direct_correlate(flag_sig, query))
    values = [p.value for p in peaks]
    assert values == sorted(values, reverse=True)
    assert all(0.05 < v <= 1.05 for v in values)
    for i, a in enumerate(peaks):
        for b in peaks.peaks[i + 1:]:
            assert max(abs(a.lag_theta - b.lag_theta), abs(a.lag_rho - b.lag_rho)) >= 3


def test_refinement_can_be_disabled(flag_sig, params128):
    query = pmt(normalize_power(transform_object(make_object("flag", 40, 128), alpha=0.8)), params128)
    surface = direct_correlate(flag_sig, query)
    raw = score_patch(surface, DetectConfig(refine=False)).best
    refined = score_patch(surface).best
    assert raw.lag_rho == int(raw.lag_rho)
    assert abs(refined.lag_rho - raw.lag_rho) <= 0.5
    assert refined.value == raw.value


def test_rotated_match_has_twin_one_turn_away(flag_sig, params128):
    phi = math.radians(40)
    query = pmt(normalize_power(transform_object(make_object("flag", 40, 128), phi=phi)), params128)
    est = estimate_transform(score_patch(direct_correlate(flag_sig, query)), params128)
    hi, lo = est.family
    assert hi - lo == pytest.approx(params128.n_theta, abs=1)
    expected = round(phi / params128.d_theta)
    gap = (hi - expected) % (params128.n_theta / 2)
    assert min(gap, params128.n_theta / 2 - gap) <= 1
    assert est.phi_deg == pytest.approx(40, abs=2 * math.degrees(params128.d_theta))


def test_estimate_identity():
    p = PmtParams()
    est = estimate_transform(PeakSet((Peak(0.0, 0.0, 1.0),)), p)
    assert (est.phi, est.alpha, est.confidence, est.family) == (0.0, 1.0, 1.0, None)


def test_estimate_dual_peak_example():
    p = PmtParams(r0=3.0, r_max=128.0)
    peaks = PeakSet((Peak(0.0, 14.0, 0.7), Peak(0.0, 14.0 - 128, 0.5)))
    est = estimate_transform(peaks, p)
    assert est.family == (14.0, -114.0)
    assert est.phi == pytest.approx(14 * 2 * math.pi / 128)
    assert est.phi_deg == pytest.approx(39.375)


def test_estimate_scale_example():
    p = PmtParams(r0=3.0, r_max=128.0)
    assert p.d_rho == pytest.approx(math.log(42.67) / 128, rel=1e-4)
    est = estimate_transform(PeakSet((Peak(13.0, 0.0, 0.9),)), p)
    assert est.alpha == pytest.approx(math.exp(-13 * p.d_rho))
    assert est.alpha == pytest.approx(0.683, abs=1e-3)


def test_estimate_scale_from_rendered_object(flag_sig, params128):
    query = pmt(normalize_power(transform_object(make_object("flag", 40, 128), alpha=0.7)), params128)
    est = estimate_transform(score_patch(direct_correlate(flag_sig, query)), params128)
    assert est.alpha == pytest.approx(0.7, rel=0.05)


def test_pairing_rejects_weak_or_misaligned_twins():
    p = PmtParams()
    weak = PeakSet((Peak(0.0, 10.0, 0.9), Peak(0.0, -118.0, 0.2)))
    assert estimate_transform(weak, p).family is None
    off_rho = PeakSet((Peak(0.0, 10.0, 0.9), Peak(5.0, -118.0, 0.8)))
    assert estimate_transform(off_rho, p).family is None
    loose = DetectConfig(rho_tolerance=6.0, pair_ratio=0.1)
    assert estimate_transform(off_rho, p, loose).family == (10.0, -118.0)


def test_estimate_empty():
    with pytest.raises(SpmtError):
        estimate_transform(PeakSet(), PmtParams())


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 3))
def test_scores_ignore_positive_scaling(scale, which):
    rng = np.random.default_rng(which)
    a, b = rng.random((16, 16)), rng.random((16, 16))
    p = PmtParams(r0=1.0, r_max=4.0, n_rho=16, n_theta=16)

    def sig(x):
        return PmtSignature(p, x / np.sqrt(np.sum(x * x)))

    base = score_patch(direct_correlate(sig(a), sig(b)), DetectConfig(refine=False))
    scaled = score_patch(direct_correlate(sig(scale * a), sig(b)), DetectConfig(refine=False))
    assert [(q.lag_rho, q.lag_theta) for q in base] == [(q.lag_rho, q.lag_theta) for q in scaled]
    assert np.allclose([q.value for q in base], [q.value for q in scaled], atol=1e-12)
    doubled = score_patch(direct_correlate(sig(4.0 * a), sig(b)), DetectConfig(refine=False))
    assert doubled == base


def test_detect_all_on_figure_scene(figure3):
    report = detect_all(figure3["ref"], figure3["sheet"])
    assert report.matched_indices == [2, 5, 8, 11]
    assert [t.index for t in report.tiles] == list(range(12))
    for tile in report.tiles:
        assert tile.matched == (tile.score > 0.5)
        assert (tile.estimate is not None) == tile.matched
    assert detect_all(figure3["ref"], figure3["sheet"], threshold=1.1).matched_indices == []


def test_high_threshold_keeps_autocorrelation(figure3):
    assert 2 in detect_all(figure3["ref"], figure3["sheet"], threshold=0.99).matched_indices


def test_bojtc_and_direct_agree(figure3):
    direct = detect_all(figure3["ref"], figure3["sheet"])
    optical = detect_all(figure3["ref"], figure3["sheet"], use_bojtc=True)
    assert direct.matched_indices == optical.matched_indices
    for a, b in zip(direct.tiles, optical.tiles):
        assert abs(a.score - b.score) <= 0.02
        assert abs(a.peaks.best.lag_theta - b.peaks.best.lag_theta) <= 1
        assert abs(a.peaks.best.lag_rho - b.peaks.best.lag_rho) <= 1
    assert optical.geometry is not None and optical.plane is not None


def test_empty_tiles_in_report(params128, flag_sig):
    sigs = [flag_sig, PmtSignature.zeros(params128)]
    sheet = SignatureSheet.from_signatures(sigs, SegmentGrid(1, 2, 128, 128))
    for use_bojtc in (False, True):
        report = detect_all(flag_sig, sheet, use_bojtc=use_bojtc)
        empty = report.tiles[1]
        assert empty.empty and not empty.matched and empty.score == 0.0 and empty.estimate is None


def test_report_json(figure3):
    report = detect_all(figure3["ref"], figure3["sheet"])
    doc = json.loads(report.to_json())
    assert doc["schema"] == REPORT_SCHEMA
    assert doc["threshold"] == 0.5
    assert len(doc["tiles"]) == 12
    tile = doc["tiles"][8]
    assert tile["matched"] and tile["alpha"] == pytest.approx(0.7, rel=0.05)
    assert {"index", "row", "col", "score", "empty", "phi_deg"} <= set(tile)
    assert doc["params"]["n_theta"] == 128


def test_rotated_square_stays_above_mismatches(figure3, params128):
    mismatch = max(t.score for t in detect_all(figure3["ref"], figure3["sheet"]).tiles if t.col != 2)
    square = make_object("square", 48, 128)
    ref = pmt(normalize_power(square), params128)
    for deg in range(0, 360, 10):
        moved = pmt(normalize_power(transform_object(square, phi=math.radians(deg))), params128)
        assert direct_correlate(ref, moved).max() >= mismatch + 0.1


def test_peak_to_background():
    patch = np.ones((5, 5))
    patch[2, 2] = 26.0
    assert peak_to_background(patch) == pytest.approx(26 / 2)
    assert peak_to_background(patch, at=(0, 0)) == pytest.approx(1 / 2)
    assert peak_to_background(np.zeros((3, 3))) == 0.0


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_figure_discrimination_other_seeds(seed, params128):
    from spmt import figure3_spec, render_scene, segment_pmt

    spec = figure3_spec(seed=seed)
    frame, _ = render_scene(spec)
    sheet = segment_pmt(frame, spec.grid, params128)
    report = detect_all(sheet.signatures[2], sheet)
    assert report.matched_indices == [2, 5, 8, 11]
    match = min(t.score for t in report.tiles if t.col == 2)
    assert match - max(t.score for t in report.tiles if t.col != 2) >= 0.1
