"""Convolutional coding: K=7 (133, 171 octal) rate-1/2 mother code punctured to 3/4.

Codewords are zero-tail terminated (6 appended zero bits) and serialized as
[A0, B0, A1, B1, ...] before puncturing.  Decoding is soft-decision Viterbi
over real-valued bit metrics; hard decisions are handled by mapping bits to
+/-1 metrics, and punctured positions enter the trellis as zero-weight
erasures.  Ties in the add-compare-select step resolve to branch index 0.

The per-OFDM-symbol block interleaver (192 coded bits, 16 rows) also lives
here since it is a pure bit-domain permutation.
"""
from __future__ import annotations

import numpy as np

from ..errors import FramingError, InvalidInputError

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

CONSTRAINT_LEN = 7
TAIL_BITS = CONSTRAINT_LEN - 1
N_STATES = 1 << TAIL_BITS
G0_OCTAL = 0o133
G1_OCTAL = 0o171
# Keep pattern over the serialized rate-1/2 stream; 3/4 keeps 4 bits of every 6.
PUNCTURE_34 = np.array([1, 1, 0, 1, 1, 0], dtype=bool)
# Dynamic range equivalent to a 4-bit soft-metric quantizer.
LLR_CLIP = 8.0


def _taps(gen_octal: int) -> np.ndarray:
    """Generator taps ordered current-input-first."""
    return np.array(
        [(gen_octal >> (CONSTRAINT_LEN - 1 - k)) & 1 for k in range(CONSTRAINT_LEN)],
        dtype=np.uint8,
    )


_G0_TAPS = _taps(G0_OCTAL)
_G1_TAPS = _taps(G1_OCTAL)


def _branch_tables() -> tuple[np.ndarray, np.ndarray]:
    """Per-(next_state, predecessor) output signs, +1 for coded bit 0.

    State packs the six most recent input bits, newest in bit 5.  The input
    bit of any transition into next-state ns is ns>>5; the two predecessors
    differ in the bit that falls off the end of the register.
    """
    sign_a = np.empty((N_STATES, 2), dtype=np.float64)
    sign_b = np.empty((N_STATES, 2), dtype=np.float64)
    for ns in range(N_STATES):
        b = ns >> (TAIL_BITS - 1)
        for p in (0, 1):
            s = ((ns << 1) | p) & (N_STATES - 1)
            reg = [b] + [(s >> (TAIL_BITS - 1 - k)) & 1 for k in range(TAIL_BITS)]
            out_a = int(np.dot(reg, _G0_TAPS)) & 1
            out_b = int(np.dot(reg, _G1_TAPS)) & 1
            sign_a[ns, p] = 1.0 - 2.0 * out_a
            sign_b[ns, p] = 1.0 - 2.0 * out_b
    return sign_a, sign_b


_SIGN_A, _SIGN_B = _branch_tables()


def coded_length(n_payload: int) -> int:
    """Punctured codeword length for a payload of n_payload bits."""
    if n_payload < 1:
        raise InvalidInputError("payload must be nonempty")
    mother = 2 * (n_payload + TAIL_BITS)
    q, r = divmod(mother, 6)
    return 4 * q + int(PUNCTURE_34[:r].sum())


def conv_encode(payload: np.ndarray) -> np.ndarray:
    """Encode payload bits; returns the punctured serialized codeword."""
    bits = np.asarray(payload, dtype=np.uint8).ravel()
    if bits.size == 0:
        raise InvalidInputError("payload must be nonempty")
    tailed = np.concatenate([bits, np.zeros(TAIL_BITS, dtype=np.uint8)])
    # Mod-2 convolution with the generator taps (zero initial state).
    a = np.convolve(tailed, _G0_TAPS)[: tailed.size] & 1
    b = np.convolve(tailed, _G1_TAPS)[: tailed.size] & 1
    serial = np.empty(2 * tailed.size, dtype=np.uint8)
    serial[0::2] = a
    serial[1::2] = b
    keep = np.resize(PUNCTURE_34, serial.size)
    return serial[keep]


def depuncture(metrics: np.ndarray, n_payload: int) -> np.ndarray:
    """Re-expand punctured bit metrics to the mother-code stream (erasures = 0)."""
    metrics = np.asarray(metrics, dtype=np.float64).ravel()
    expected = coded_length(n_payload)
    if metrics.size != expected:
        raise FramingError(
            f"got {metrics.size} coded-bit metrics, expected {expected} "
            f"for a {n_payload}-bit payload"
        )
    full = np.zeros(2 * (n_payload + TAIL_BITS), dtype=np.float64)
    keep = np.resize(PUNCTURE_34, full.size)
    full[keep] = metrics
    return full


@njit(cache=True)
def _viterbi_forward(pairs, sign_a, sign_b, tb):  # pragma: no cover - jitted
    n_states = sign_a.shape[0]
    half = n_states >> 1
    mask = n_states - 1
    pm = np.full(n_states, -1e18)
    pm[0] = 0.0
    nxt = np.empty(n_states)
    for t in range(pairs.shape[0]):
        la = pairs[t, 0]
        lb = pairs[t, 1]
        for ns in range(n_states):
            s0 = (ns << 1) & mask
            m0 = pm[s0] + sign_a[ns, 0] * la + sign_b[ns, 0] * lb
            m1 = pm[s0 | 1] + sign_a[ns, 1] * la + sign_b[ns, 1] * lb
            if m1 > m0:
                nxt[ns] = m1
                tb[t, ns] = 1
            else:
                nxt[ns] = m0
                tb[t, ns] = 0
        pm, nxt = nxt, pm
    return pm


@njit(cache=True)
def _viterbi_traceback(tb, end_state):  # pragma: no cover - jitted
    n = tb.shape[0]
    mask = tb.shape[1] - 1
    shift = 0
    m = mask
    while m > 1:
        shift += 1
        m >>= 1
    bits = np.empty(n, dtype=np.uint8)
    s = end_state
    for t in range(n - 1, -1, -1):
        bits[t] = s >> shift
        s = ((s << 1) & mask) | tb[t, s]
    return bits


def viterbi_decode(llr_or_hard: np.ndarray, n_payload: int) -> np.ndarray:
    """Maximum-likelihood decode of a punctured codeword.

    Accepts real-valued metrics (positive favors coded bit 0) or hard bits
    {0,1}, detected by integer/bool dtype.  Input length must match the
    punctured codeword length for n_payload bits.
    """
    arr = np.asarray(llr_or_hard)
    if arr.dtype.kind in "biu":
        metrics = 1.0 - 2.0 * arr.astype(np.float64)
    else:
        metrics = arr.astype(np.float64)
    full = depuncture(metrics, n_payload)
    pairs = full.reshape(-1, 2)
    tb = np.empty((pairs.shape[0], N_STATES), dtype=np.uint8)
    _viterbi_forward(pairs, _SIGN_A, _SIGN_B, tb)
    bits = _viterbi_traceback(tb, 0)  # zero-tail termination ends in state 0
    return bits[:n_payload]


def hard_bits_to_metrics(bits: np.ndarray) -> np.ndarray:
    """Map hard bits to +/-1 correlation metrics."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


# --- per-symbol block interleaver (192 coded bits, 16 columns, s=2) ----------

def _interleave_perm(n_cbps: int, n_bpsc: int) -> np.ndarray:
    """perm[k] = output position of input coded bit k within one OFDM symbol."""
    s = max(n_bpsc // 2, 1)
    k = np.arange(n_cbps)
    i = (n_cbps // 16) * (k % 16) + k // 16
    j = s * (i // s) + (i + n_cbps - (16 * i) // n_cbps) % s
    return j


_PERM_192 = _interleave_perm(192, 4)
_INV_PERM_192 = np.argsort(_PERM_192)


def interleave(bits: np.ndarray, n_cbps: int = 192) -> np.ndarray:
    """Per-symbol block interleave; input length must be a multiple of n_cbps."""
    if n_cbps != 192:
        raise InvalidInputError("only the 192-coded-bit symbol interleaver is supported")
    arr = np.asarray(bits)
    if arr.size % n_cbps:
        raise FramingError(f"interleaver input length {arr.size} not a multiple of {n_cbps}")
    blocks = arr.reshape(-1, n_cbps)
    out = np.empty_like(blocks)
    out[:, _PERM_192] = blocks
    return out.reshape(arr.shape)


def deinterleave(values: np.ndarray, n_cbps: int = 192) -> np.ndarray:
    """Inverse of interleave; works on bits or real-valued metrics."""
    if n_cbps != 192:
        raise InvalidInputError("only the 192-coded-bit symbol interleaver is supported")
    arr = np.asarray(values)
    if arr.size % n_cbps:
        raise FramingError(f"deinterleaver input length {arr.size} not a multiple of {n_cbps}")
    blocks = arr.reshape(-1, n_cbps)
    out = np.empty_like(blocks)
    out[:, _INV_PERM_192] = blocks
    return out.reshape(arr.shape)
