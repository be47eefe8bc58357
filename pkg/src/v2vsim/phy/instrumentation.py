"""Channel-quality artifacts: constellation dumps and averaged baseband spectra.

Spectrum estimation is a symbol-synchronized averaged periodogram: the
sample stream is segmented on OFDM-symbol boundaries (all simulator frames
start on one), the cyclic prefix is skipped, and the 64-point useful parts
are averaged with a rectangular window.  Subcarriers then fall exactly on
analysis bins, so the null DC bin shows its true depth instead of being
filled by window leakage.  welch_psd (Hann, 50% overlap) remains available
for unaligned streams.
"""
from __future__ import annotations

import os

import numpy as np

from ..errors import InvalidInputError
from ..io_utils import write_csv
from .config import PhyConfig

_PSD_FLOOR = 1e-30


def export_constellation(symbols: np.ndarray, path: str | os.PathLike) -> None:
    """Write received equalized symbols as CSV rows `i,q` in stream order."""
    sym = np.asarray(symbols, dtype=np.complex128).ravel()
    write_csv(path, ("i", "q"), ((float(s.real), float(s.imag)) for s in sym))


def symbol_synced_psd(samples: np.ndarray, cfg: PhyConfig) -> tuple[np.ndarray, np.ndarray]:
    """Periodogram averaged over the useful part of each OFDM symbol.

    Returns (bin frequencies in Hz, linear PSD), fftshifted.  Requires at
    least one whole symbol; a trailing partial symbol is dropped.
    """
    arr = np.asarray(samples, dtype=np.complex128).ravel()
    sps = cfg.samples_per_symbol
    if arr.size < sps:
        raise InvalidInputError(f"need at least {sps} samples, got {arr.size}")
    n_seg = arr.size // sps
    useful = arr[: n_seg * sps].reshape(n_seg, sps)[:, cfg.cp_len :]
    psd = np.mean(np.abs(np.fft.fft(useful, axis=1)) ** 2, axis=0) / cfg.fft_size**2
    freqs = np.fft.fftfreq(cfg.fft_size, d=1.0 / cfg.sample_rate_hz)
    return np.fft.fftshift(freqs), np.fft.fftshift(psd)


def welch_psd(
    samples: np.ndarray, nfft: int = 256, overlap: float = 0.5
) -> tuple[np.ndarray, np.ndarray]:
    """Hann-windowed averaged periodogram for arbitrary (unaligned) streams.

    Returns (bin frequencies as fractions of the sample rate, linear PSD),
    fftshifted.
    """
    arr = np.asarray(samples, dtype=np.complex128).ravel()
    if arr.size < nfft:
        raise InvalidInputError(f"need at least {nfft} samples, got {arr.size}")
    step = max(1, int(nfft * (1.0 - overlap)))
    window = np.hanning(nfft)
    norm = np.sum(window**2) * nfft
    n_segments = 1 + (arr.size - nfft) // step
    acc = np.zeros(nfft)
    for k in range(n_segments):
        seg = arr[k * step : k * step + nfft] * window
        acc += np.abs(np.fft.fft(seg)) ** 2
    psd = np.fft.fftshift(acc / (n_segments * norm))
    freqs = np.fft.fftshift(np.fft.fftfreq(nfft))
    return freqs, psd


def export_spectrum(
    samples: np.ndarray, cfg: PhyConfig, path: str | os.PathLike
) -> None:
    """Averaged spectrum as CSV `freq_khz,power_db`; needs >= 1024 samples."""
    arr = np.asarray(samples, dtype=np.complex128).ravel()
    if arr.size < 1024:
        raise InvalidInputError(f"spectrum export needs >= 1024 samples, got {arr.size}")
    freqs, psd = symbol_synced_psd(arr, cfg)
    power_db = 10.0 * np.log10(np.maximum(psd, _PSD_FLOOR))
    write_csv(
        path,
        ("freq_khz", "power_db"),
        ((float(f / 1e3), float(p)) for f, p in zip(freqs, power_db)),
    )


def dc_notch_depth_db(samples: np.ndarray, cfg: PhyConfig) -> float:
    """dB gap between mean occupied-subcarrier power and the DC bin."""
    freqs, psd = symbol_synced_psd(samples, cfg)
    spacing = cfg.sample_rate_hz / cfg.fft_size
    occupied = (np.abs(freqs) >= 0.5 * spacing) & (np.abs(freqs) <= 26.5 * spacing)
    dc = psd[np.argmin(np.abs(freqs))]
    return float(10.0 * np.log10(np.mean(psd[occupied]) / max(dc, _PSD_FLOOR)))


def occupied_bandwidth_hz(samples: np.ndarray, cfg: PhyConfig, drop_db: float = 10.0) -> float:
    """Width between the outermost bins within drop_db of the in-band mean power."""
    freqs, psd = symbol_synced_psd(samples, cfg)
    ref = float(np.mean(psd[psd > _PSD_FLOOR])) if np.any(psd > _PSD_FLOOR) else _PSD_FLOOR
    above = np.where(psd >= ref * 10.0 ** (-drop_db / 10.0))[0]
    if above.size == 0:
        return 0.0
    return float(freqs[above[-1]] - freqs[above[0]])
