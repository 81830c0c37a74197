"""Pseudonym watermark construction.

One pseudonym bit is spread over a 15-chip pseudo-noise sequence; each chip is
held for a fixed number of transmit symbol intervals and realised as a high or
low power level on one reserved OFDM subcarrier.  A packet is a fixed-length
bit string; a transmission repeats the packet back to back.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FramingError
from .validation import as_bit_array, as_fraction

# 15-chip maximum-length spreading sequence for pseudonym bit 1.  Bit 0 uses
# the elementwise complement, so the two templates are antipodal after mean
# removal.
ONE_CHIPS = np.array([1, 0, 0, 0, 1, 1, 1, 1, 0, 1, 0, 1, 1, 0, 0], dtype=np.int8)
ZERO_CHIPS = (1 - ONE_CHIPS).astype(np.int8)
CHIPS_PER_BIT = int(ONE_CHIPS.size)


def pn_for_bit(bit: int) -> np.ndarray:
    """Return the 15-chip spreading sequence encoding a single pseudonym bit."""
    if bit not in (0, 1):
        raise ValueError(f"pseudonym bit must be 0 or 1, got {bit!r}")
    return (ONE_CHIPS if bit else ZERO_CHIPS).copy()


@dataclass(frozen=True)
class WatermarkConfig:
    """Transmit-side geometry and power levels of the watermark.

    Defaults describe a 64-subcarrier OFDM transmitter at 6 MHz sampling,
    which gives a 93.75 kHz subcarrier spacing and one OFDM symbol per
    watermark power sample.  With 6 symbols per chip a pseudonym bit spans
    90 symbols and a 28-bit packet spans 2520.
    """

    samples_per_chip: int = 6
    chips_per_bit: int = CHIPS_PER_BIT
    bits_per_packet: int = 28
    high_power: float = 1.0
    low_power: float = 0.0
    tx_symbol_duration_s: float = 1.0 / 93_750.0
    watermark_subcarrier_index: int = 0
    num_subcarriers: int = 64
    sample_rate_hz: float = 6e6

    def __post_init__(self):
        if self.samples_per_chip < 1:
            raise ConfigError("samples_per_chip must be a positive integer")
        if self.chips_per_bit != CHIPS_PER_BIT:
            raise ConfigError(
                f"chips_per_bit is fixed at {CHIPS_PER_BIT} by the spreading sequence"
            )
        if self.bits_per_packet < 1:
            raise ConfigError("bits_per_packet must be a positive integer")
        if not (0 <= self.low_power < self.high_power):
            raise ConfigError(
                f"power levels must satisfy 0 <= low < high, got "
                f"low={self.low_power}, high={self.high_power}"
            )
        if not math.isfinite(self.high_power):
            raise ConfigError("high_power must be finite")
        if self.tx_symbol_duration_s <= 0:
            raise ConfigError("tx_symbol_duration_s must be positive")
        if not (0 <= self.watermark_subcarrier_index < self.num_subcarriers):
            raise ConfigError(
                f"watermark_subcarrier_index {self.watermark_subcarrier_index} out of "
                f"range [0, {self.num_subcarriers})"
            )
        if self.num_subcarriers < 1 or self.sample_rate_hz <= 0:
            raise ConfigError("num_subcarriers and sample_rate_hz must be positive")

    @property
    def samples_per_bit(self) -> int:
        return self.samples_per_chip * self.chips_per_bit

    @property
    def samples_per_packet(self) -> int:
        return self.samples_per_bit * self.bits_per_packet

    @property
    def packet_duration_s(self) -> float:
        return self.samples_per_packet * self.tx_symbol_duration_s


@dataclass(frozen=True, eq=False)
class TxPowerPattern:
    """Piecewise-constant transmit power, one value per TX symbol interval.

    ``source_bits`` records the pseudonym bits the pattern was built from, so
    a channel simulation can attach ground truth to its output.
    """

    samples: np.ndarray
    symbol_duration_s: float
    source_bits: np.ndarray | None = None

    def __post_init__(self):
        if self.symbol_duration_s <= 0:
            raise ConfigError("symbol_duration_s must be positive")

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.samples.size * self.symbol_duration_s


def _chip_powers(bits: np.ndarray, config: WatermarkConfig) -> np.ndarray:
    chips = np.where(bits[:, None].astype(bool), ONE_CHIPS, ZERO_CHIPS).ravel()
    levels = np.where(chips.astype(bool), config.high_power, config.low_power)
    return np.repeat(levels, config.samples_per_chip)


def encode_bit(bit: int, config: WatermarkConfig = WatermarkConfig()) -> TxPowerPattern:
    """Spread one pseudonym bit into its per-symbol power pattern."""
    if bit not in (0, 1):
        raise ValueError(f"pseudonym bit must be 0 or 1, got {bit!r}")
    bits = np.array([bit], dtype=np.int8)
    return TxPowerPattern(
        samples=_chip_powers(bits, config),
        symbol_duration_s=config.tx_symbol_duration_s,
        source_bits=bits,
    )


def encode_packet(bits, config: WatermarkConfig = WatermarkConfig()) -> TxPowerPattern:
    """Encode a full pseudonym packet into its transmit power pattern.

    Raises FramingError when the bit count does not match the configured
    packet length.
    """
    arr = np.asarray(bits)
    if arr.ndim != 1 or arr.size != config.bits_per_packet:
        raise FramingError(
            f"packet must carry exactly {config.bits_per_packet} bits, got "
            f"{arr.size if arr.ndim == 1 else arr.shape}"
        )
    arr = as_bit_array(arr, config.bits_per_packet)
    return TxPowerPattern(
        samples=_chip_powers(arr, config),
        symbol_duration_s=config.tx_symbol_duration_s,
        source_bits=arr,
    )


def encode_stream(
    bits, duration_s: float, config: WatermarkConfig = WatermarkConfig()
) -> tuple[TxPowerPattern, int]:
    """Repeat a packet back to back for a transmission of a given duration.

    Returns the pattern together with the number of complete packets it
    contains.  The pattern covers every whole TX symbol interval that fits in
    ``duration_s``, so it may end with a truncated packet tail.  The symbol
    count is computed with exact rational arithmetic; float rounding in the
    duration cannot drop or add a symbol.
    """
    if duration_s <= 0:
        raise ValueError(f"duration_s must be positive, got {duration_s}")
    packet = encode_packet(bits, config)
    n_symbols = int(as_fraction(duration_s) / as_fraction(config.tx_symbol_duration_s))
    full_packets = n_symbols // config.samples_per_packet
    reps = np.tile(packet.samples, full_packets + 1)[:n_symbols]
    pattern = TxPowerPattern(
        samples=reps,
        symbol_duration_s=config.tx_symbol_duration_s,
        source_bits=packet.source_bits,
    )
    return pattern, full_packets


def synthesize_ofdm_baseband(
    pattern: TxPowerPattern,
    config: WatermarkConfig = WatermarkConfig(),
    data_source: np.random.Generator | None = None,
) -> np.ndarray:
    """Render a power pattern as complex OFDM baseband samples.

    Each pattern sample becomes one OFDM symbol of ``num_subcarriers`` time
    samples.  The watermark subcarrier carries amplitude sqrt(power); the
    remaining subcarriers carry unit-power QPSK placeholder symbols drawn from
    ``data_source``, or zeros when no generator is given.  An unnormalised
    64-point DFT of any symbol recovers the subcarrier amplitudes, so the
    watermark bin power equals the pattern sample.
    """
    if len(pattern) == 0:
        raise ValueError("pattern must contain at least one sample")
    n_sym = len(pattern)
    nfft = config.num_subcarriers
    grid = np.zeros((n_sym, nfft), dtype=np.complex128)
    if data_source is not None:
        # unit-power QPSK placeholders; only their aggregate power matters
        points = (np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0))
        draws = data_source.integers(0, 4, size=(n_sym, nfft - 1))
        data = points[draws]
        cols = np.arange(nfft) != config.watermark_subcarrier_index
        grid[:, cols] = data
    grid[:, config.watermark_subcarrier_index] = np.sqrt(pattern.samples)
    return np.fft.ifft(grid, axis=1).ravel()
