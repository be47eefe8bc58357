"""OFDM framing: 64-point transform, 48 data + 4 pilot subcarriers, null DC.

Subcarrier layout follows the WLAN reference design at 10 MHz: occupied
bins -26..-1 and +1..+26, pilots at -21, -7, +7, +21 carrying the fixed
sequence (1, 1, 1, -1), DC and the outer guard bins null.  A 1/4 cyclic
prefix gives 80 samples = 8 us per symbol.  Time samples are scaled so the
average occupied-subcarrier power of 1 maps to unit average sample power.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError, FramingError
from .config import PhyConfig

OCCUPIED_SUBCARRIERS = np.array(list(range(-26, 0)) + list(range(1, 27)))
PILOT_SUBCARRIERS = np.array([-21, -7, 7, 21])
DATA_SUBCARRIERS = np.array(
    [k for k in OCCUPIED_SUBCARRIERS.tolist() if k not in set(PILOT_SUBCARRIERS.tolist())]
)
PILOT_VALUES = np.array([1.0, 1.0, 1.0, -1.0])

_N_FFT = 64
_DATA_BINS = DATA_SUBCARRIERS % _N_FFT
_PILOT_BINS = PILOT_SUBCARRIERS % _N_FFT
_N_OCCUPIED = len(OCCUPIED_SUBCARRIERS)
_TIME_SCALE = _N_FFT / np.sqrt(_N_OCCUPIED)


def _check_layout(cfg: PhyConfig) -> None:
    if cfg.fft_size != _N_FFT or cfg.data_subcarriers != 48 or cfg.pilot_subcarriers != 4:
        raise ConfigError("only the 64-point, 48+4 subcarrier layout is implemented")


def ofdm_modulate(symbols: np.ndarray, cfg: PhyConfig) -> np.ndarray:
    """Map data symbols onto OFDM symbols and return the sample stream.

    Input length must be a multiple of the 48 data subcarriers (pad
    upstream); each OFDM symbol emits fft_size + cp_len samples.
    """
    _check_layout(cfg)
    sym = np.asarray(symbols, dtype=np.complex128).ravel()
    if sym.size == 0 or sym.size % cfg.data_subcarriers:
        raise FramingError(
            f"symbol count {sym.size} is not a positive multiple of {cfg.data_subcarriers}"
        )
    grid = np.zeros((sym.size // cfg.data_subcarriers, _N_FFT), dtype=np.complex128)
    grid[:, _DATA_BINS] = sym.reshape(-1, cfg.data_subcarriers)
    grid[:, _PILOT_BINS] = PILOT_VALUES
    time = np.fft.ifft(grid, axis=1) * _TIME_SCALE
    with_cp = np.concatenate([time[:, -cfg.cp_len:], time], axis=1)
    return with_cp.reshape(-1)


def ofdm_demodulate(samples: np.ndarray, cfg: PhyConfig) -> np.ndarray:
    """Inverse of ofdm_modulate: strip prefixes, transform, extract data bins.

    Equalization is genie-aided: the simulated channel has unit gain, so
    extraction is exact and pilots are not needed for tracking.
    """
    _check_layout(cfg)
    arr = np.asarray(samples, dtype=np.complex128).ravel()
    sps = cfg.samples_per_symbol
    if arr.size == 0 or arr.size % sps:
        raise FramingError(f"sample count {arr.size} is not a positive multiple of {sps}")
    blocks = arr.reshape(-1, sps)[:, cfg.cp_len:]
    grid = np.fft.fft(blocks, axis=1) / _TIME_SCALE
    return grid[:, _DATA_BINS].reshape(-1)


def symbol_noise_var(time_noise_var: float, cfg: PhyConfig) -> float:
    """Complex noise variance seen per data symbol for a given per-sample variance."""
    _check_layout(cfg)
    return time_noise_var * _N_OCCUPIED / cfg.fft_size


def ofdm_symbol_count(n_coded_bits: int, cfg: PhyConfig) -> int:
    """OFDM symbols needed to carry n_coded_bits (before padding)."""
    return -(-n_coded_bits // cfg.coded_bits_per_symbol)
