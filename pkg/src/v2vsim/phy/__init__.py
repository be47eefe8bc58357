"""Sample-level baseband: coding, 16-QAM, OFDM, and channel-quality metrics."""
from .chain import (
    BerRecord,
    PpduFrame,
    demodulate_payload,
    measure_ber,
    measure_coded_ber,
    measure_uncoded_ber,
    modulate_payload,
    transmit_and_receive,
)
from .coding import conv_encode, viterbi_decode
from .config import PhyConfig
from .instrumentation import export_constellation, export_spectrum
from .modulation import CONSTELLATION, qam16_demap, qam16_llrs, qam16_map
from .ofdm import ofdm_demodulate, ofdm_modulate

__all__ = [
    "BerRecord",
    "CONSTELLATION",
    "PhyConfig",
    "PpduFrame",
    "conv_encode",
    "demodulate_payload",
    "export_constellation",
    "export_spectrum",
    "measure_ber",
    "measure_coded_ber",
    "measure_uncoded_ber",
    "modulate_payload",
    "ofdm_demodulate",
    "ofdm_modulate",
    "qam16_demap",
    "qam16_llrs",
    "qam16_map",
    "transmit_and_receive",
    "viterbi_decode",
]
