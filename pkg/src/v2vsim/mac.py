"""MAC framing and the building blocks of the four node operating modes.

Frames are broadcast with a wildcard destination; there are no ACKs and no
retransmissions, and scheduling is the simplified time-sequence scheduler
(one transmission at a time per node, FIFO) rather than contention-based
channel access.  Random-interval presence beacons therefore behave as pure
(unslotted) random access with a vulnerability window of two airtimes.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

from . import channel as chan
from .errors import CrcError, FormatError, InvalidInputError
from .phy.chain import BerRecord, demodulate_payload, measure_ber, modulate_payload
from .phy.config import PhyConfig

BROADCAST_ID = 0xFFFFFFFF
MAX_MSDU_BYTES = 6996  # 55,968 payload bits per frame
_HEADER_FMT = "<BIIIHHI"  # frame_type, source, dest, seq, frag_index, frag_count, body_len
HEADER_BYTES = struct.calcsize(_HEADER_FMT)
MPDU_OVERHEAD_BYTES = HEADER_BYTES + 4  # header + crc32


class FrameType(IntEnum):
    DATA = 0
    BEACON = 1


class NodeMode(str, Enum):
    TX = "tx"
    RX = "rx"
    SELF_TRANSMIT = "self_transmit"
    DISCOVERY = "discovery"


@dataclass(frozen=True)
class Msdu:
    source_id: int
    seq: int
    payload: bytes
    created_at_s: float = 0.0


@dataclass(frozen=True)
class Mpdu:
    frame_type: FrameType
    source_id: int
    dest_id: int
    seq: int
    frag_index: int
    frag_count: int
    body: bytes

    def to_bytes(self) -> bytes:
        header = struct.pack(
            _HEADER_FMT,
            int(self.frame_type),
            self.source_id,
            self.dest_id,
            self.seq,
            self.frag_index,
            self.frag_count,
            len(self.body),
        )
        crc = zlib.crc32(header + self.body) & 0xFFFFFFFF
        return header + self.body + struct.pack("<I", crc)


def mpdu_from_bytes(raw: bytes) -> Mpdu:
    """Parse and integrity-check a serialized MPDU."""
    if len(raw) < MPDU_OVERHEAD_BYTES:
        raise FormatError(f"MPDU too short: {len(raw)} bytes")
    ftype, src, dst, seq, fidx, fcnt, blen = struct.unpack_from(_HEADER_FMT, raw)
    if len(raw) != MPDU_OVERHEAD_BYTES + blen:
        raise FormatError(f"MPDU length {len(raw)} inconsistent with body_len {blen}")
    body = raw[HEADER_BYTES : HEADER_BYTES + blen]
    (crc,) = struct.unpack_from("<I", raw, HEADER_BYTES + blen)
    if crc != (zlib.crc32(raw[: HEADER_BYTES + blen]) & 0xFFFFFFFF):
        raise CrcError("MPDU CRC mismatch")
    try:
        frame_type = FrameType(ftype)
    except ValueError as exc:
        raise FormatError(f"unknown frame type {ftype}") from exc
    return Mpdu(frame_type, src, dst, seq, fidx, fcnt, body)


def frame_msdu(
    msdu: Msdu,
    max_body_bytes: int = MAX_MSDU_BYTES,
    frame_type: FrameType = FrameType.DATA,
    dest_id: int = BROADCAST_ID,
) -> list[Mpdu]:
    """Frame an MSDU; oversize payloads fragment in order."""
    if max_body_bytes < 1:
        raise InvalidInputError("max_body_bytes must be >= 1")
    payload = msdu.payload
    n_frags = max(1, -(-len(payload) // max_body_bytes))
    return [
        Mpdu(
            frame_type=frame_type,
            source_id=msdu.source_id,
            dest_id=dest_id,
            seq=msdu.seq,
            frag_index=k,
            frag_count=n_frags,
            body=payload[k * max_body_bytes : (k + 1) * max_body_bytes],
        )
        for k in range(n_frags)
    ]


def deframe_mpdus(mpdus: list[Mpdu], created_at_s: float = 0.0) -> Msdu:
    """Reassemble fragments back into the original MSDU."""
    if not mpdus:
        raise InvalidInputError("no fragments to reassemble")
    parts = sorted(mpdus, key=lambda m: m.frag_index)
    first = parts[0]
    if [m.frag_index for m in parts] != list(range(first.frag_count)):
        raise FormatError("missing or duplicated fragments")
    for m in parts:
        if (m.source_id, m.seq, m.frag_count) != (first.source_id, first.seq, first.frag_count):
            raise FormatError("fragments from different MSDUs")
    return Msdu(
        source_id=first.source_id,
        seq=first.seq,
        payload=b"".join(m.body for m in parts),
        created_at_s=created_at_s,
    )


def bytes_to_bits(data: bytes) -> np.ndarray:
    """MSB-first bit expansion."""
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def bits_to_bytes(bits: np.ndarray) -> bytes:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.size % 8:
        raise FormatError(f"bit count {arr.size} is not a multiple of 8")
    return np.packbits(arr).tobytes()


def psdu_bits(mpdu: Mpdu) -> np.ndarray:
    return bytes_to_bits(mpdu.to_bytes())


def airtime(psdu_bit_count: int, cfg: PhyConfig) -> float:
    """Transmit duration: whole OFDM symbols at 144 payload bits per 8 us."""
    if psdu_bit_count < 1:
        raise InvalidInputError("airtime needs at least one bit")
    n_sym = -(-psdu_bit_count // cfg.data_bits_per_symbol)
    return (n_sym * cfg.samples_per_symbol) / cfg.sample_rate_hz


@dataclass(frozen=True)
class DiscoveryConfig:
    """Random-interval presence beaconing parameters."""

    beacon_mean_interval_s: float = 0.1
    interval_distribution: str = "exponential"  # or "uniform"
    uniform_low_s: float | None = None
    uniform_high_s: float | None = None
    beacon_payload_bytes: int = 64

    def __post_init__(self) -> None:
        if self.beacon_mean_interval_s <= 0:
            raise InvalidInputError("beacon mean interval must be positive")
        if self.interval_distribution not in ("exponential", "uniform"):
            raise InvalidInputError(
                f"unknown interval distribution {self.interval_distribution!r}"
            )
        if self.beacon_payload_bytes < 1:
            raise InvalidInputError("beacon payload must be nonempty")

    def validate_against_airtime(self, beacon_airtime_s: float) -> None:
        # sanity bound: beaconing slower than the frames it emits
        if self.beacon_mean_interval_s <= beacon_airtime_s:
            raise InvalidInputError(
                f"beacon mean interval {self.beacon_mean_interval_s} s must exceed "
                f"the beacon airtime {beacon_airtime_s} s"
            )

    def draw_interval(self, rng: np.random.Generator) -> float:
        if self.interval_distribution == "exponential":
            return float(rng.exponential(self.beacon_mean_interval_s))
        low = self.uniform_low_s
        high = self.uniform_high_s
        if low is None or high is None:
            low = 0.5 * self.beacon_mean_interval_s
            high = 1.5 * self.beacon_mean_interval_s
        return float(rng.uniform(low, high))


class HalfDuplexGuard:
    """Tracks a node's own transmit interval; rejects overlapping receptions."""

    def __init__(self) -> None:
        self.tx_until: float = -np.inf
        self.tx_since: float = np.inf

    def begin_tx(self, start_s: float, end_s: float) -> None:
        self.tx_since = start_s
        self.tx_until = end_s

    def end_tx(self) -> None:
        self.tx_since = np.inf
        self.tx_until = -np.inf

    def accepts_rx(self, rx_start_s: float, rx_end_s: float) -> bool:
        """True iff the reception does not overlap the node's own transmission."""
        return rx_end_s <= self.tx_since or rx_start_s >= self.tx_until


def aloha_throughput(offered_load: float, n_attempts: int, rng: np.random.Generator) -> float:
    """Monte Carlo throughput of unslotted random-access beaconing.

    Attempts arrive as a Poisson process with rate offered_load per frame
    airtime; an attempt survives iff no other attempt starts within one
    airtime on either side (vulnerability window of two airtimes).  Returns
    throughput S = offered_load * P(success); the closed form is
    offered_load * exp(-2 * offered_load).
    """
    if offered_load <= 0:
        raise InvalidInputError("offered load must be positive")
    if n_attempts < 1:
        raise InvalidInputError("need at least one attempt")
    gaps = rng.exponential(1.0 / offered_load, n_attempts + 1)
    ok = (gaps[:-1] > 1.0) & (gaps[1:] > 1.0)
    return offered_load * float(np.mean(ok))


@dataclass
class SelfTransmitResult:
    records: list[BerRecord] = field(default_factory=list)
    dropped_packets: int = 0
    rx_symbols: np.ndarray | None = None  # first received packet, sample fidelity
    tx_samples: np.ndarray | None = None  # first transmitted packet, sample fidelity

    @property
    def total_bits(self) -> int:
        return sum(r.bits_compared for r in self.records)

    @property
    def mean_ber(self) -> float:
        if not self.records:
            return 0.0
        return float(np.mean([r.ber for r in self.records]))

    @property
    def ber_std(self) -> float:
        if not self.records:
            return 0.0
        return float(np.std([r.ber for r in self.records]))


def _apply_desync(
    bits: np.ndarray, rng: np.random.Generator, max_fraction: float = 0.25
) -> np.ndarray:
    """Corrupt a uniform random fraction (up to max_fraction) of the bits."""
    out = bits.copy()
    n_flip = int(round(rng.uniform(0.0, max_fraction) * out.size))
    if n_flip:
        idx = rng.choice(out.size, size=n_flip, replace=False)
        out[idx] ^= 1
    return out


def run_self_transmit(
    n_packets: int,
    phy_cfg: PhyConfig,
    kind: chan.ChannelKind,
    rng: np.random.Generator,
    payload_bytes: int = MAX_MSDU_BYTES,
    source_id: int = 0,
    fidelity: str = "sample",
    p_desync: float = 0.0,
    p_miss: float = 0.0,
    soft: bool = True,
    start_time_s: float = 0.0,
) -> SelfTransmitResult:
    """Calibration loop: a node transmits and immediately receives itself.

    Each packet is a framed MSDU of random payload bytes; the recorded BER
    compares the payload region of the decoded PSDU against the transmitted
    one (header/CRC overhead is excluded from the count).  Half-duplex
    alternation is sequential: the RX phase of packet k completes before
    packet k+1 starts.  A missed detection (probability p_miss) drops the
    packet entirely; a sync loss (probability p_desync) corrupts a random
    fraction of up to 25% of the decoded bits.
    """
    if not 1 <= payload_bytes <= MAX_MSDU_BYTES:
        raise InvalidInputError("payload_bytes must be in [1, max MSDU]")
    if fidelity not in ("sample", "packet"):
        raise InvalidInputError(f"unknown fidelity {fidelity!r}")
    result = SelfTransmitResult()
    t = start_time_s
    payload_lo = HEADER_BYTES * 8
    payload_hi = payload_lo + payload_bytes * 8
    for k in range(n_packets):
        payload = rng.integers(0, 256, payload_bytes, dtype=np.uint8).tobytes()
        mpdu = frame_msdu(Msdu(source_id, k, payload))[0]
        tx_bits = psdu_bits(mpdu)
        air = airtime(tx_bits.size, phy_cfg)
        t += air  # TX phase; reception completes at t
        if p_miss > 0.0 and rng.random() < p_miss:
            result.dropped_packets += 1
            continue
        if fidelity == "sample":
            frame = modulate_payload(tx_bits, phy_cfg)
            rx_samples = chan.apply_channel(frame.samples, kind, rng)
            snr_db = chan.channel_snr_db(kind)
            noise_var = (
                0.0
                if isinstance(kind, chan.Loopback)
                else chan.awgn_noise_variance(frame.samples, snr_db)
            )
            rx_bits, rx_symbols = demodulate_payload(
                rx_samples, tx_bits.size, phy_cfg, noise_var=noise_var, soft=soft
            )
            if result.tx_samples is None:
                result.tx_samples = frame.samples
                result.rx_symbols = rx_symbols
        else:
            ber = 0.0 if isinstance(kind, chan.Loopback) else chan.analytic_ber_16qam(
                chan.channel_snr_db(kind)
            )
            rx_bits = tx_bits.copy()
            n_err = int(rng.binomial(tx_bits.size, ber)) if ber > 0 else 0
            if n_err:
                idx = rng.choice(tx_bits.size, size=n_err, replace=False)
                rx_bits[idx] ^= 1
        if p_desync > 0.0 and rng.random() < p_desync:
            rx_bits = _apply_desync(rx_bits, rng)
        result.records.append(
            measure_ber(
                tx_bits[payload_lo:payload_hi],
                rx_bits[payload_lo:payload_hi],
                packet_index=k,
                timestamp_s=t,
            )
        )
    return result
