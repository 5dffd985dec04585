"""Centered unitary 2D DFT and the detector models built on it.

The forward transform stands in for a Fourier lens, :func:`power_spectrum`
for an intensity detector. The zero-frequency bin sits at the centered
origin (see :mod:`spmt.frame`), and the ``1/sqrt(W*H)`` normalization
makes Parseval hold exactly.
"""
from __future__ import annotations

import numpy as np

from .errors import SpmtError
from .frame import as_frame

__all__ = ["as_field", "dft2_centered", "idft2_centered", "magnitude", "power_spectrum"]


def as_field(data, *, name: str = "field") -> np.ndarray:
    """Validate a complex 2D field."""
    arr = np.asarray(data).astype(np.complex128, copy=False)
    if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 2:
        raise SpmtError(f"{name} must be 2D and at least 2x2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SpmtError(f"{name} contains NaN or Inf")
    return arr


def dft2_centered(frame) -> np.ndarray:
    """Unitary 2D DFT with the DC bin moved to the centered origin."""
    data = as_frame(frame)
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(data), norm="ortho"))


def idft2_centered(field) -> np.ndarray:
    """Exact inverse of :func:`dft2_centered`; accepts real or complex input."""
    data = as_field(field)
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(data), norm="ortho"))


def magnitude(field) -> np.ndarray:
    return np.abs(as_field(field))


def power_spectrum(field) -> np.ndarray:
    """Squared modulus, i.e. what an intensity detector records."""
    data = as_field(field)
    return data.real ** 2 + data.imag ** 2
