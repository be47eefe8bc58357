"""Gray-mapped 16-QAM with unit average symbol energy.

Bit-to-symbol mapping: each group of four bits (b0 b1 b2 b3) selects the I
axis level from (b0, b1) and the Q axis level from (b2, b3), with per-axis
Gray code 00->-3, 01->-1, 11->+1, 10->+3, scaled by 1/sqrt(10).  Soft
demapping produces exact max-log bit LLRs (positive favors bit 0), clipped
to the +/-8 range of the 4-bit-equivalent decoder metrics.
"""
from __future__ import annotations

import numpy as np

from ..errors import FramingError, InvalidInputError
from .coding import LLR_CLIP

_SCALE = 1.0 / np.sqrt(10.0)
AXIS_LEVELS = np.array([-3.0, -1.0, 1.0, 3.0]) * _SCALE
# Gray pattern (b_hi, b_lo) for each axis level, aligned with AXIS_LEVELS.
_AXIS_GRAY = np.array([0b00, 0b01, 0b11, 0b10])
# level index selected by the 2-bit pattern (b_hi<<1 | b_lo)
_GRAY_TO_LEVEL = np.argsort(_AXIS_GRAY)
# per-bit level subsets for max-log LLRs
_HI_IS_0 = AXIS_LEVELS[(_AXIS_GRAY >> 1) == 0]
_HI_IS_1 = AXIS_LEVELS[(_AXIS_GRAY >> 1) == 1]
_LO_IS_0 = AXIS_LEVELS[(_AXIS_GRAY & 1) == 0]
_LO_IS_1 = AXIS_LEVELS[(_AXIS_GRAY & 1) == 1]


def _build_constellation() -> np.ndarray:
    points = np.empty(16, dtype=np.complex128)
    for n in range(16):
        b0, b1, b2, b3 = (n >> 3) & 1, (n >> 2) & 1, (n >> 1) & 1, n & 1
        i = AXIS_LEVELS[_GRAY_TO_LEVEL[(b0 << 1) | b1]]
        q = AXIS_LEVELS[_GRAY_TO_LEVEL[(b2 << 1) | b3]]
        points[n] = i + 1j * q
    return points


CONSTELLATION = _build_constellation()


def qam16_map(bits: np.ndarray) -> np.ndarray:
    """Map a bit sequence (length divisible by 4) to 16-QAM symbols."""
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size % 4:
        raise FramingError(f"bit count {arr.size} is not a multiple of 4")
    nibbles = arr.reshape(-1, 4) @ np.array([8, 4, 2, 1], dtype=np.uint8)
    return CONSTELLATION[nibbles]


def qam16_demap(symbols: np.ndarray) -> np.ndarray:
    """Hard demap: nearest constellation point, returned as bits."""
    sym = np.asarray(symbols, dtype=np.complex128).ravel()
    bits = np.empty((sym.size, 4), dtype=np.uint8)
    for axis, col in ((sym.real, 0), (sym.imag, 2)):
        level = np.digitize(axis, AXIS_LEVELS[:-1] + np.diff(AXIS_LEVELS) / 2)
        gray = _AXIS_GRAY[level]
        bits[:, col] = gray >> 1
        bits[:, col + 1] = gray & 1
    return bits.reshape(-1)


def qam16_llrs(symbols: np.ndarray, noise_var: float, clip: float = LLR_CLIP) -> np.ndarray:
    """Exact max-log bit LLRs for Gray 16-QAM under complex AWGN.

    noise_var is the total complex noise variance per symbol; zero (or
    effectively zero) noise falls back to clipped hard decisions.
    """
    sym = np.asarray(symbols, dtype=np.complex128).ravel()
    if noise_var < 0 or not np.isfinite(noise_var):
        raise InvalidInputError("noise variance must be finite and nonnegative")
    if noise_var < 1e-30:
        return clip * (1.0 - 2.0 * qam16_demap(sym).astype(np.float64))
    sigma2_axis = noise_var / 2.0
    llrs = np.empty((sym.size, 4), dtype=np.float64)
    for axis, col in ((sym.real, 0), (sym.imag, 2)):
        y = axis[:, None]
        d_hi0 = ((y - _HI_IS_0[None, :]) ** 2).min(axis=1)
        d_hi1 = ((y - _HI_IS_1[None, :]) ** 2).min(axis=1)
        d_lo0 = ((y - _LO_IS_0[None, :]) ** 2).min(axis=1)
        d_lo1 = ((y - _LO_IS_1[None, :]) ** 2).min(axis=1)
        llrs[:, col] = (d_hi1 - d_hi0) / (2.0 * sigma2_axis)
        llrs[:, col + 1] = (d_lo1 - d_lo0) / (2.0 * sigma2_axis)
    return np.clip(llrs, -clip, clip).reshape(-1)
