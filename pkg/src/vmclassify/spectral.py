"""Radix-2 FFT front-end for the frequency-domain model variant.

The transform is an unnormalized forward DFT,
X[f] = sum_t x[t] * exp(-2*pi*i*f*t / W), computed by iterative radix-2
decimation in time. It is a fixed preprocessing block: no gradient flows
through it, and the magnitude output keeps the full length W (symmetric
halves retained) so the downstream block stack is unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .nn.tensor import Tensor


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _bit_reversed_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def _fft_last_axis(a: np.ndarray) -> np.ndarray:
    """Radix-2 DIT transform along the last axis of a complex array."""
    n = a.shape[-1]
    if not _is_power_of_two(n):
        raise ShapeError(f"transform length must be a power of two, got {n}")
    out = np.ascontiguousarray(a, dtype=np.complex128)[..., _bit_reversed_indices(n)]
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = out.reshape(*out.shape[:-1], n // size, size)
        even = blocks[..., :half].copy()
        odd = blocks[..., half:] * twiddle
        blocks[..., :half] = even + odd
        blocks[..., half:] = even - odd
        size *= 2
    return out


def fft(signal) -> np.ndarray:
    """Forward transform of a complex vector whose length is a power of two."""
    x = np.asarray(signal, dtype=np.complex128)
    if x.ndim != 1:
        raise ShapeError(f"fft expects a 1-D signal, got shape {x.shape}")
    return _fft_last_axis(x)


def inverse_fft(spectrum) -> np.ndarray:
    """Inverse via the conjugate trick: conj(fft(conj(X))) / W."""
    x = np.asarray(spectrum, dtype=np.complex128)
    if x.ndim != 1:
        raise ShapeError(f"inverse_fft expects a 1-D spectrum, got shape {x.shape}")
    return np.conj(_fft_last_axis(np.conj(x))) / x.shape[-1]


def magnitude_spectrum(x: np.ndarray) -> np.ndarray:
    """|FFT| along the last axis of a real array; output shape equals input."""
    return np.abs(_fft_last_axis(x.astype(np.complex128)))


@dataclass(frozen=True)
class SpectralFrontEnd:
    """Replaces each length-W channel with its magnitude spectrum."""

    length: int
    mode: str = "magnitude"

    def __post_init__(self):
        if not _is_power_of_two(self.length):
            raise ShapeError(f"front-end length must be a power of two, got {self.length}")
        if self.mode != "magnitude":
            raise ValueError(f"unsupported front-end mode {self.mode!r}")

    def apply(self, x: Tensor) -> Tensor:
        return magnitude_frontend(x)


def magnitude_frontend(x: Tensor) -> Tensor:
    """Map (N, M, W) channels to their length-W magnitude spectra."""
    data = x.data
    if data.ndim != 3:
        raise ShapeError(f"front-end input must be (N, M, W), got {data.shape}")
    return Tensor(magnitude_spectrum(data))
