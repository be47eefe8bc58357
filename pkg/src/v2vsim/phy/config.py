"""Baseband numerology for the 10 MHz vehicular OFDM channel.

The operating point is MCS 4: 16-QAM with rate-3/4 coding on 48 data
subcarriers, giving 144 payload bits per 8 us OFDM symbol = 18 Mbit/s.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError


@dataclass(frozen=True)
class PhyConfig:
    channel_bandwidth_hz: float = 10e6
    fft_size: int = 64
    data_subcarriers: int = 48
    pilot_subcarriers: int = 4
    guard_fraction: float = 0.25
    bits_per_symbol: int = 4  # 16-QAM
    code_rate: float = 0.75
    sample_rate_hz: float = 10e6
    interleave: bool = True

    def __post_init__(self) -> None:
        if self.fft_size <= 0 or self.data_subcarriers <= 0:
            raise ConfigError("fft_size and data_subcarriers must be positive")
        # DC is always null, so occupied subcarriers must leave at least one bin free.
        if self.data_subcarriers + self.pilot_subcarriers >= self.fft_size:
            raise ConfigError("data + pilot subcarriers must leave null bins (DC stays null)")
        cp = self.fft_size * self.guard_fraction
        if cp != int(cp):
            raise ConfigError("guard_fraction must yield an integer cyclic prefix length")
        coded = self.data_subcarriers * self.bits_per_symbol
        if (coded * self.code_rate) != int(coded * self.code_rate):
            raise ConfigError("code_rate must yield an integer payload-bit count per symbol")

    @property
    def null_subcarriers(self) -> int:
        return self.fft_size - self.data_subcarriers - self.pilot_subcarriers

    @property
    def cp_len(self) -> int:
        return int(self.fft_size * self.guard_fraction)

    @property
    def samples_per_symbol(self) -> int:
        return self.fft_size + self.cp_len

    @property
    def symbol_duration_s(self) -> float:
        return self.samples_per_symbol / self.sample_rate_hz

    @property
    def coded_bits_per_symbol(self) -> int:
        return self.data_subcarriers * self.bits_per_symbol

    @property
    def data_bits_per_symbol(self) -> int:
        return int(self.coded_bits_per_symbol * self.code_rate)

    @property
    def data_rate_bps(self) -> float:
        # Ordered so the division of exact integers stays exact: 144 * 10e6 / 80.
        return (self.data_bits_per_symbol * self.sample_rate_hz) / self.samples_per_symbol
