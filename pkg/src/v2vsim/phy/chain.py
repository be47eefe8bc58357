"""End-to-end baseband chain: payload bits <-> modulated sample stream.

TX: convolutional encode (+zero tail, puncture to 3/4) -> pad to whole OFDM
symbols -> per-symbol interleave -> Gray 16-QAM -> OFDM.  RX runs the exact
inverse with soft metrics by default; pad bits are appended zeros that the
receiver strips by position.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import channel as chan
from ..errors import FramingError, InvalidInputError
from .coding import coded_length, conv_encode, deinterleave, interleave, viterbi_decode
from .config import PhyConfig
from .modulation import qam16_demap, qam16_llrs, qam16_map
from .ofdm import ofdm_demodulate, ofdm_modulate, ofdm_symbol_count, symbol_noise_var


@dataclass(frozen=True)
class PpduFrame:
    """One transmitted frame at every stage of the chain."""

    payload_bits: np.ndarray
    coded_bits: np.ndarray  # punctured codeword, before padding
    symbols: np.ndarray  # mapped data symbols, including pad
    samples: np.ndarray
    airtime_s: float


@dataclass(frozen=True)
class BerRecord:
    packet_index: int
    bits_compared: int
    bit_errors: int
    ber: float
    timestamp_s: float


def modulate_payload(payload_bits: np.ndarray, cfg: PhyConfig) -> PpduFrame:
    """Run the TX chain on a payload bit sequence."""
    bits = np.asarray(payload_bits, dtype=np.uint8).ravel()
    coded = conv_encode(bits)
    n_sym = ofdm_symbol_count(coded.size, cfg)
    padded = np.zeros(n_sym * cfg.coded_bits_per_symbol, dtype=np.uint8)
    padded[: coded.size] = coded
    if cfg.interleave:
        padded = interleave(padded, cfg.coded_bits_per_symbol)
    symbols = qam16_map(padded)
    samples = ofdm_modulate(symbols, cfg)
    return PpduFrame(
        payload_bits=bits,
        coded_bits=coded,
        symbols=symbols,
        samples=samples,
        airtime_s=samples.size / cfg.sample_rate_hz,
    )


def demodulate_payload(
    samples: np.ndarray,
    n_payload_bits: int,
    cfg: PhyConfig,
    noise_var: float = 0.0,
    soft: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Run the RX chain; returns (payload bits, equalized data symbols).

    noise_var is the per-sample complex noise variance the channel injected
    (genie-aided, since the channel is simulated); it scales the soft
    demapper's LLRs.
    """
    n_coded = coded_length(n_payload_bits)
    rx_symbols = ofdm_demodulate(samples, cfg)
    expected_syms = ofdm_symbol_count(n_coded, cfg) * cfg.data_subcarriers
    if rx_symbols.size != expected_syms:
        raise FramingError(
            f"got {rx_symbols.size} data symbols, expected {expected_syms} "
            f"for a {n_payload_bits}-bit payload"
        )
    if soft:
        metrics = qam16_llrs(rx_symbols, symbol_noise_var(noise_var, cfg))
        if cfg.interleave:
            metrics = deinterleave(metrics, cfg.coded_bits_per_symbol)
        payload = viterbi_decode(metrics[:n_coded], n_payload_bits)
    else:
        hard = qam16_demap(rx_symbols)
        if cfg.interleave:
            hard = deinterleave(hard, cfg.coded_bits_per_symbol)
        payload = viterbi_decode(hard[:n_coded], n_payload_bits)
    return payload, rx_symbols


def transmit_and_receive(
    payload_bits: np.ndarray,
    cfg: PhyConfig,
    kind: chan.ChannelKind,
    rng: np.random.Generator | None = None,
    soft: bool = True,
) -> tuple[np.ndarray, np.ndarray, PpduFrame]:
    """Full sample-level round trip through a channel.

    Returns (decoded payload bits, equalized rx symbols, tx frame).
    """
    frame = modulate_payload(payload_bits, cfg)
    rx_samples = chan.apply_channel(frame.samples, kind, rng)
    if isinstance(kind, chan.Loopback):
        noise_var = 0.0
    else:
        noise_var = chan.awgn_noise_variance(frame.samples, chan.channel_snr_db(kind))
    decoded, rx_symbols = demodulate_payload(
        rx_samples, frame.payload_bits.size, cfg, noise_var=noise_var, soft=soft
    )
    return decoded, rx_symbols, frame


def measure_ber(
    tx_bits: np.ndarray,
    rx_bits: np.ndarray,
    packet_index: int = 0,
    timestamp_s: float = 0.0,
) -> BerRecord:
    """Exact Hamming-distance bit error rate between equal-length sequences."""
    tx = np.asarray(tx_bits, dtype=np.uint8).ravel()
    rx = np.asarray(rx_bits, dtype=np.uint8).ravel()
    if tx.size != rx.size:
        raise FramingError(f"length mismatch: {tx.size} vs {rx.size} bits")
    if tx.size == 0:
        raise InvalidInputError("cannot measure BER over zero bits")
    errors = int(np.count_nonzero(tx != rx))
    return BerRecord(
        packet_index=packet_index,
        bits_compared=tx.size,
        bit_errors=errors,
        ber=errors / tx.size,
        timestamp_s=timestamp_s,
    )


def measure_uncoded_ber(snr_db: float, n_bits: int, rng: np.random.Generator) -> float:
    """Monte Carlo uncoded 16-QAM BER over AWGN (symbol-level, no OFDM)."""
    if n_bits < 4:
        raise InvalidInputError("need at least one symbol worth of bits")
    bits = rng.integers(0, 2, size=n_bits - n_bits % 4, dtype=np.uint8)
    symbols = qam16_map(bits)
    noisy = chan.apply_channel(symbols, chan.Awgn(snr_db), rng)
    decided = qam16_demap(noisy)
    return float(np.count_nonzero(bits != decided) / bits.size)


def measure_coded_ber(
    snr_db: float,
    n_bits: int,
    rng: np.random.Generator,
    cfg: PhyConfig | None = None,
    block_bits: int = 20_000,
    soft: bool = True,
) -> float:
    """Monte Carlo end-to-end coded BER through the full sample-level chain."""
    cfg = cfg or PhyConfig()
    kind = chan.Awgn(snr_db)
    errors = 0
    total = 0
    while total < n_bits:
        block = min(block_bits, n_bits - total)
        payload = rng.integers(0, 2, size=block, dtype=np.uint8)
        decoded, _, _ = transmit_and_receive(payload, cfg, kind, rng, soft=soft)
        errors += int(np.count_nonzero(payload != decoded))
        total += block
    return errors / total
