"""Link-level channel models: loopback, AWGN, and distance-derived SNR.

Also provides the closed-form oracles used by the packet-level simulator:
Gray 16-QAM bit-error probability over AWGN and the independent-bit
packet-error model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class LinkBudget:
    """Log-distance link budget; gains and losses are abstract dB knobs.

    snr_db(d) = tx_gain + rx_gain - reference_loss - 10 n log10(d) - noise_floor,
    with reference_loss taken at 1 m.
    """

    tx_gain_db: float = 10.0
    rx_gain_db: float = 0.0
    path_loss_exponent: float = 2.0
    reference_loss_db: float = 40.0
    noise_floor_dbm: float = -90.0
    distance_m: float = 1.0

    def __post_init__(self) -> None:
        if self.path_loss_exponent < 2.0:
            raise InvalidInputError("path loss exponent must be >= 2")
        if self.distance_m <= 0:
            raise InvalidInputError("distance must be positive")


class Loopback:
    """Bit-exact passthrough (infinite SNR)."""

    def __repr__(self) -> str:
        return "Loopback()"


@dataclass(frozen=True)
class Awgn:
    snr_db: float


@dataclass(frozen=True)
class DistanceAwgn:
    budget: LinkBudget


ChannelKind = Loopback | Awgn | DistanceAwgn


def snr_from_distance(budget: LinkBudget) -> float:
    """SNR in dB under the log-distance path-loss model."""
    if budget.distance_m <= 0:
        raise InvalidInputError("distance must be positive")
    return (
        budget.tx_gain_db
        + budget.rx_gain_db
        - budget.reference_loss_db
        - 10.0 * budget.path_loss_exponent * math.log10(budget.distance_m)
        - budget.noise_floor_dbm
    )


def calibrate_reference_loss(budget: LinkBudget, range_m: float, threshold_snr_db: float) -> LinkBudget:
    """Pick reference_loss so that snr(range_m) equals the decodable threshold.

    Reconciles the hard-disk connectivity radius with the soft SNR model:
    links at exactly range_m sit at threshold_snr_db.
    """
    if range_m <= 0:
        raise InvalidInputError("range must be positive")
    ref = (
        budget.tx_gain_db
        + budget.rx_gain_db
        - budget.noise_floor_dbm
        - threshold_snr_db
        - 10.0 * budget.path_loss_exponent * math.log10(range_m)
    )
    return replace(budget, reference_loss_db=ref)


def channel_snr_db(kind: ChannelKind) -> float:
    """Nominal SNR of a channel kind; +inf for loopback."""
    if isinstance(kind, Loopback):
        return math.inf
    if isinstance(kind, Awgn):
        return kind.snr_db
    if isinstance(kind, DistanceAwgn):
        return snr_from_distance(kind.budget)
    raise InvalidInputError(f"unknown channel kind {kind!r}")


def awgn_noise_variance(samples: np.ndarray, snr_db: float) -> float:
    """Per-sample complex noise variance for the requested SNR relative to measured power."""
    power = float(np.mean(np.abs(samples) ** 2))
    return power / (10.0 ** (snr_db / 10.0))


def apply_channel(
    samples: np.ndarray, kind: ChannelKind, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Pass a sample stream through the channel.

    Loopback returns the input unchanged; AWGN kinds add circularly
    symmetric Gaussian noise with variance set by the SNR relative to the
    measured input power.
    """
    arr = np.asarray(samples, dtype=np.complex128)
    if arr.size == 0:
        raise InvalidInputError("sample stream must be nonempty")
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise InvalidInputError("sample stream contains non-finite values")
    if isinstance(kind, Loopback):
        return arr
    snr_db = channel_snr_db(kind)
    if rng is None:
        raise InvalidInputError("noisy channels need an rng stream")
    var = awgn_noise_variance(arr, snr_db)
    sigma = math.sqrt(var / 2.0)
    noise = sigma * (rng.standard_normal(arr.size) + 1j * rng.standard_normal(arr.size))
    return arr + noise


_Q_SQRT2 = math.sqrt(2.0)


def _qfunc(x: float) -> float:
    return 0.5 * math.erfc(x / _Q_SQRT2)


def analytic_ber_16qam(snr_db: float) -> float:
    """Gray-coded 16-QAM bit-error probability over AWGN (Es/N0 in dB).

    Exact average over the two bit positions per axis:
    (3/4) Q(a) + (1/2) Q(3a) - (1/4) Q(5a) with a = sqrt(snr/5);
    tends to 0.5 as snr -> -inf.
    """
    if math.isnan(snr_db):
        raise InvalidInputError("snr must not be NaN")
    if snr_db == math.inf:
        return 0.0
    if snr_db == -math.inf:
        return 0.5
    a = math.sqrt(10.0 ** (snr_db / 10.0) / 5.0)
    return 0.75 * _qfunc(a) + 0.5 * _qfunc(3 * a) - 0.25 * _qfunc(5 * a)


def packet_error_prob(ber: float, bits: int) -> float:
    """Independent-error packet failure probability: 1 - (1 - ber)^bits."""
    if not 0.0 <= ber <= 1.0:
        raise InvalidInputError("ber must lie in [0, 1]")
    if bits < 1:
        raise InvalidInputError("bits must be >= 1")
    if ber == 1.0:
        return 1.0
    return -math.expm1(bits * math.log1p(-ber))
