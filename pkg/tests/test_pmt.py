import math

import numpy as np
import pytest
from scipy import ndimage

from spmt.detect import direct_correlate
from spmt.errors import ConfigError, SpmtError
from spmt.frame import normalize_power, origin
from spmt.pmt import MAGIC, PmtParams, PmtSignature, log_polar_transform, pmt, spectral_emphasis
from spmt.scenegen import make_object, transform_object
from spmt.spectral import dft2_centered, magnitude

SMALL = PmtParams(r0=2.0, r_max=15.0, n_rho=32, n_theta=48)


def sampling_oracle(mag, params):
    """Same bin geometry through scipy's bilinear resampler."""
    orow, ocol = origin(mag.shape)
    yy, xx = np.mgrid[:mag.shape[0], :mag.shape[1]]
    blocked = np.where(np.hypot(xx - ocol, orow - yy) < params.r0, 0.0, mag)
    r = params.r0 * np.exp((np.arange(params.n_rho) + 0.5) * params.d_rho)
    t = (np.arange(params.n_theta) + 0.5) * params.d_theta
    rows = orow - r[None, :] * np.sin(t[:, None])
    cols = ocol + r[None, :] * np.cos(t[:, None])
    out = ndimage.map_coordinates(blocked, [rows, cols], order=1, mode="nearest")
    return out / np.sqrt(np.sum(out ** 2))


def test_params_validation():
    with pytest.raises(ConfigError, match="r0 must be < r_max"):
        PmtParams(r0=5, r_max=5)
    with pytest.raises(ConfigError, match="r0 must be > 0"):
        PmtParams(r0=0)
    with pytest.raises(ConfigError, match="n_rho and n_theta"):
        PmtParams(n_rho=4)
    with pytest.raises(ConfigError, match="exceeds"):
        PmtParams(r_max=40).check_frame((64, 100))


def test_bin_widths():
    p = PmtParams(r0=3, r_max=128, n_rho=128, n_theta=128)
    assert p.d_rho == pytest.approx(math.log(128 / 3) / 128)
    assert p.d_theta == pytest.approx(2 * math.pi / 128)
    assert p.shape == (128, 128)


def test_default_rmax_tracks_segment():
    assert PmtParams.for_shape((128, 128)).r_max == 40.0
    assert PmtParams.for_shape((256, 200)).r_max == 62.0
    assert PmtParams.for_shape((128, 128), r0=4.0, r_max=None).r0 == 4.0


def _clear_of_blocked_disk(params):
    # Bins whose whole bilinear stencil lies outside the zeroed r < r0 disk.
    return params.radii() >= params.r0 + math.sqrt(2)


def test_constant_annulus_gives_flat_signature():
    data = log_polar_transform(np.ones((40, 40)), SMALL).data
    outer = data[:, _clear_of_blocked_disk(SMALL)]
    assert np.ptp(outer) < 1e-14
    # The inner columns dip where the stencil reaches into the blocked disk.
    assert np.all(data[:, ~_clear_of_blocked_disk(SMALL)] <= outer.max() + 1e-15)


def test_dc_only_is_blocked():
    mag = np.zeros((40, 40))
    mag[19:22, 19:22] = 1.0
    with pytest.raises(SpmtError, match="zero-power signature"):
        log_polar_transform(mag, SMALL)


def test_matches_scipy_sampling_oracle(rng):
    mag = rng.random((40, 44))
    assert np.allclose(log_polar_transform(mag, SMALL).data, sampling_oracle(mag, SMALL), atol=1e-12)


def test_radially_symmetric_input_is_constant_along_theta():
    yy, xx = np.mgrid[:64, :64]
    mag = np.exp(-np.hypot(xx - 32, 32 - yy) / 9.0)
    data = log_polar_transform(mag, SMALL).data[:, _clear_of_blocked_disk(SMALL)]
    spread = data.std(axis=0) / data.mean(axis=0)
    assert spread.max() < 0.02


def test_rmax_precondition():
    with pytest.raises(ConfigError):
        log_polar_transform(np.ones((20, 20)), SMALL)


def test_plain_magnitude_mode(rng):
    frame = rng.random((48, 48))
    plain = PmtParams(r0=2, r_max=20, n_rho=32, n_theta=32, radial_weight=0, exponent=1)
    expected = log_polar_transform(magnitude(dft2_centered(frame)), plain)
    assert np.array_equal(pmt(frame, plain).data, expected.data)


def test_emphasis_formula():
    mag = np.full((9, 9), 2.0)
    p = PmtParams(r0=1, r_max=4, radial_weight=1.0, exponent=2.0)
    out = spectral_emphasis(mag, p)
    assert out[4, 4] == 0.0
    assert out[4, 7] == pytest.approx((3 * 2.0) ** 2)


def test_signature_invariants(params128):
    sig = pmt(normalize_power(make_object("flag", 40, 128)), params128)
    assert abs(np.sum(sig.data ** 2) - 1) < 1e-12
    assert np.all(sig.data >= 0) and np.all(np.isfinite(sig.data))


def test_binary_round_trip(params128, rng):
    sig = PmtSignature(params128, rng.random(params128.shape))
    raw = sig.to_bytes()
    assert raw[:4] == MAGIC and len(raw) == 16 + 8 * 128 * 128
    back = PmtSignature.from_bytes(raw, params128)
    assert np.array_equal(back.data, sig.data) and not back.empty
    assert PmtSignature.from_bytes(PmtSignature.zeros(params128).to_bytes(), params128).empty
    with pytest.raises(SpmtError, match="magic"):
        PmtSignature.from_bytes(b"XXXX" + raw[4:], params128)
    with pytest.raises(SpmtError):
        PmtSignature.from_bytes(raw[:-8], params128)


def test_shift_invariance(params128):
    obj = make_object("flag", 40, 128)
    moved = transform_object(obj, (15, -10))
    a = pmt(normalize_power(obj), params128)
    b = pmt(normalize_power(moved), params128)
    assert direct_correlate(a, b).max() >= 0.98
    assert np.max(np.abs(pmt(np.roll(obj, (7, -21), axis=(0, 1)), params128).data - pmt(obj, params128).data)) <= 1e-10


def test_quarter_turn_is_row_shift(params128):
    obj = make_object("flag", 40, 128)
    a = pmt(obj, params128)
    b = pmt(np.rot90(obj), params128)
    rolled = np.roll(a.data, params128.n_theta // 4, axis=0)
    assert np.sum(rolled * b.data) >= 0.95


def test_rotation_lag_sign(params128):
    obj = make_object("flag", 40, 128)
    a = pmt(obj, params128)
    b = pmt(transform_object(obj, phi=math.radians(45)), params128)
    surface = direct_correlate(a, b)
    lag = np.unravel_index(surface.argmax(), surface.shape)[0] - (params128.n_theta - 1)
    assert lag % (params128.n_theta // 2) == pytest.approx(16, abs=1)


def test_half_scale_shifts_toward_larger_rho(params128):
    obj = make_object("flag", 40, 128)
    a = pmt(obj, params128)
    b = pmt(transform_object(obj, alpha=0.5), params128)
    surface = direct_correlate(a, b)
    lag = np.unravel_index(surface.argmax(), surface.shape)[1] - (params128.n_rho - 1)
    assert lag > 0
    assert abs(lag - math.log(2) / params128.d_rho) <= 2


def test_deterministic(params128, rng):
    frame = rng.random((128, 128))
    assert pmt(frame, params128).data.tobytes() == pmt(frame.copy(), params128).data.tobytes()
