"""Polar Mellin transform: log-polar resampling of a centered spectrum.

Signatures are ``n_theta x n_rho`` arrays. Column ``p`` samples radius
``r0 * exp((p + 0.5) * d_rho)``, row ``t`` samples angle
``(t + 0.5) * d_theta`` counterclockwise from +x. Rotating the input by
``phi`` shifts the signature down by ``phi / d_theta`` rows (circularly);
shrinking it by ``alpha`` shifts it right by ``-ln(alpha) / d_rho`` columns.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, SpmtError
from .frame import as_frame, origin
from .spectral import dft2_centered, magnitude

__all__ = [
    "PmtParams",
    "PmtSignature",
    "log_polar_transform",
    "spectral_emphasis",
    "pmt",
    "MAGIC",
]

MAGIC = b"PMT1"
_HEADER = struct.Struct("<4sIII")  # magic, n_rho, n_theta, flags
_FLAG_EMPTY = 1

DEFAULT_R0 = 3.0
# r_max as a fraction of the segment side; keeps the band clear of the
# aliased corner of the spectrum for objects shrunk down to half size
DEFAULT_RMAX_FRACTION = 5 / 16
DEFAULT_BINS = 128
DEFAULT_RADIAL_WEIGHT = 1.25
DEFAULT_EXPONENT = 4.0


@dataclass(frozen=True)
class PmtParams:
    """Sampling parameters shared by every signature that gets correlated.

    Parameters
    ----------
    r0 : float
        Smallest sampled radius in pixels; the disk inside it (DC) is blocked.
    r_max : float
        Outer radius of the sampled annulus.
    n_rho, n_theta : int
        Bins along log-radius (columns) and angle (rows).
    radial_weight, exponent : float
        Spectral emphasis ``(r**radial_weight * |F|) ** exponent`` applied
        before resampling. ``radial_weight=0, exponent=1`` samples the plain
        magnitude. Both preserve the rotation and scale shift identities.
    """

    r0: float = DEFAULT_R0
    r_max: float = 40.0
    n_rho: int = DEFAULT_BINS
    n_theta: int = DEFAULT_BINS
    radial_weight: float = DEFAULT_RADIAL_WEIGHT
    exponent: float = DEFAULT_EXPONENT

    def __post_init__(self):
        if not self.r0 > 0:
            raise ConfigError(f"r0 must be > 0 (got r0={self.r0})")
        if not self.r0 < self.r_max:
            raise ConfigError(f"r0 must be < r_max (got r0={self.r0}, r_max={self.r_max})")
        if self.n_rho < 8 or self.n_theta < 8:
            raise ConfigError(
                f"n_rho and n_theta must be >= 8 (got n_rho={self.n_rho}, n_theta={self.n_theta})"
            )
        if self.radial_weight < 0:
            raise ConfigError(f"radial_weight must be >= 0 (got {self.radial_weight})")
        if not self.exponent > 0:
            raise ConfigError(f"exponent must be > 0 (got {self.exponent})")

    @classmethod
    def for_shape(cls, shape, **overrides) -> "PmtParams":
        """Default parameters for segments of ``shape``; ``None`` overrides are ignored."""
        side = min(shape)
        values = {"r_max": float(math.floor(side * DEFAULT_RMAX_FRACTION))}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @property
    def d_rho(self) -> float:
        return math.log(self.r_max / self.r0) / self.n_rho

    @property
    def d_theta(self) -> float:
        return 2 * math.pi / self.n_theta

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_theta, self.n_rho

    def radii(self) -> np.ndarray:
        return self.r0 * np.exp((np.arange(self.n_rho) + 0.5) * self.d_rho)

    def angles(self) -> np.ndarray:
        return (np.arange(self.n_theta) + 0.5) * self.d_theta

    def check_frame(self, shape) -> None:
        limit = min(shape) / 2
        if self.r_max > limit:
            raise ConfigError(
                f"r_max={self.r_max} exceeds the inscribed half-extent {limit} of a "
                f"{shape[0]}x{shape[1]} frame"
            )

    def to_dict(self) -> dict:
        return {
            "r0": self.r0,
            "r_max": self.r_max,
            "n_rho": self.n_rho,
            "n_theta": self.n_theta,
            "radial_weight": self.radial_weight,
            "exponent": self.exponent,
        }


@dataclass(frozen=True)
class PmtSignature:
    """Unit-power log-polar signature; ``empty`` marks a placeholder for a vacant segment."""

    params: PmtParams
    data: np.ndarray = field(repr=False)
    empty: bool = False

    def __post_init__(self):
        if self.data.shape != self.params.shape:
            raise SpmtError(
                f"signature data {self.data.shape} does not match params {self.params.shape}"
            )

    @classmethod
    def zeros(cls, params: PmtParams) -> "PmtSignature":
        return cls(params, np.zeros(params.shape), empty=True)

    def to_bytes(self) -> bytes:
        flags = _FLAG_EMPTY if self.empty else 0
        header = _HEADER.pack(MAGIC, self.params.n_rho, self.params.n_theta, flags)
        return header + np.ascontiguousarray(self.data, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, raw: bytes, params: PmtParams) -> "PmtSignature":
        if len(raw) < _HEADER.size:
            raise SpmtError("truncated signature header")
        magic, n_rho, n_theta, flags = _HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise SpmtError(f"bad signature magic {magic!r}")
        if (n_theta, n_rho) != params.shape:
            raise SpmtError(
                f"signature is {n_theta}x{n_rho} but params expect {params.shape[0]}x{params.shape[1]}"
            )
        body = raw[_HEADER.size:]
        if len(body) != 8 * n_rho * n_theta:
            raise SpmtError("signature body length does not match header")
        data = np.frombuffer(body, dtype="<f8").reshape(n_theta, n_rho).astype(np.float64)
        return cls(params, data, empty=bool(flags & _FLAG_EMPTY))

    def with_params(self, **changes) -> "PmtSignature":
        return PmtSignature(replace(self.params, **changes), self.data, self.empty)


def _radius_grid(shape) -> np.ndarray:
    r0, c0 = origin(shape)
    y = r0 - np.arange(shape[0])[:, None]
    x = np.arange(shape[1])[None, :] - c0
    return np.hypot(x, y)


def spectral_emphasis(mag, params: PmtParams) -> np.ndarray:
    """``(r**radial_weight * mag) ** exponent`` on the centered grid."""
    data = as_frame(mag, name="magnitude")
    if params.radial_weight == 0 and params.exponent == 1:
        return data
    weighted = data * _radius_grid(data.shape) ** params.radial_weight
    return weighted ** params.exponent


def log_polar_transform(mag, params: PmtParams) -> PmtSignature:
    """Resample a centered spectrum on the (rho, theta) grid of ``params``.

    Bilinear interpolation at bin centers. Pixels inside ``r0`` never
    contribute, so DC is blocked even where an interpolation stencil
    straddles the inner circle. The result is scaled to unit power.

    Raises
    ------
    ConfigError
        If ``r_max`` exceeds the inscribed half-extent of ``mag``.
    SpmtError
        If nothing inside the annulus is nonzero.
    """
    data = as_frame(mag, name="magnitude")
    params.check_frame(data.shape)
    height, width = data.shape
    orow, ocol = origin(data.shape)

    radii = params.radii()[None, :]
    angles = params.angles()[:, None]
    rows = orow - radii * np.sin(angles)
    cols = ocol + radii * np.cos(angles)

    blocked = np.where(_radius_grid(data.shape) < params.r0, 0.0, data)
    r_lo = np.floor(rows).astype(int)
    c_lo = np.floor(cols).astype(int)
    fr = rows - r_lo
    fc = cols - c_lo
    r_lo_c = np.clip(r_lo, 0, height - 1)
    r_hi_c = np.clip(r_lo + 1, 0, height - 1)
    c_lo_c = np.clip(c_lo, 0, width - 1)
    c_hi_c = np.clip(c_lo + 1, 0, width - 1)
    sig = (
        (1 - fr) * (1 - fc) * blocked[r_lo_c, c_lo_c]
        + (1 - fr) * fc * blocked[r_lo_c, c_hi_c]
        + fr * (1 - fc) * blocked[r_hi_c, c_lo_c]
        + fr * fc * blocked[r_hi_c, c_hi_c]
    )
    energy = float(np.sum(sig * sig))
    if energy == 0.0:
        raise SpmtError("zero-power signature")
    return PmtSignature(params, sig / math.sqrt(energy))


def pmt(frame, params: PmtParams) -> PmtSignature:
    """Shift-, scale- and rotation-invariant signature of ``frame``."""
    data = as_frame(frame)
    params.check_frame(data.shape)
    spectrum = spectral_emphasis(magnitude(dft2_centered(data)), params)
    return log_polar_transform(spectrum, params)
