"""Receiver-side channel model.

The passive receiver only observes a channelized power spectrogram, and its
spectrometer bins (1/90 kHz) are slightly longer than the TX symbol interval
(1/93.75 kHz).  This module projects a transmit power pattern onto the
receiver's time grid with exact rational boundary arithmetic and adds
square-law detection noise at a configurable SNR.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .codec import TxPowerPattern, WatermarkConfig
from .errors import ConfigError
from .validation import as_fraction, check_power_matrix

DEFAULT_RX_BIN_DURATION_S = 1.0 / 90_000.0
DEFAULT_CHANNEL_BANDWIDTH_HZ = 90_000.0
DEFAULT_CENTER_FREQUENCY_HZ = 1_410e6

# Extra noise-only bins appended after the projected pattern so the
# detector's fractional resampler can interpolate across the final bit.
TAIL_MARGIN_BINS = 8


@dataclass(frozen=True)
class ChannelConfig:
    """Receive-side parameters of the simulated spectrometer channel.

    ``snr_db`` follows the convention of :func:`calibrate_snr`; ``math.inf``
    disables noise entirely.  ``watermark_channel_index`` defaults to the
    middle channel when left as None.
    """

    snr_db: float = math.inf
    rx_bin_duration_s: float = DEFAULT_RX_BIN_DURATION_S
    attenuation_db: float = 0.0
    noise_seed: int = 0
    num_channels: int = 853
    watermark_channel_index: int | None = None

    def __post_init__(self):
        if self.rx_bin_duration_s <= 0:
            raise ConfigError("rx_bin_duration_s must be positive")
        if self.num_channels < 1:
            raise ConfigError("num_channels must be at least 1")
        if self.attenuation_db < 0:
            raise ConfigError("attenuation_db must be >= 0")
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ConfigError("snr_db must be finite or +inf")
        idx = self.watermark_channel_index
        if idx is not None and not (0 <= idx < self.num_channels):
            raise ConfigError(
                f"watermark_channel_index {idx} out of range [0, {self.num_channels})"
            )

    @property
    def wm_index(self) -> int:
        if self.watermark_channel_index is None:
            return self.num_channels // 2
        return self.watermark_channel_index


@dataclass(frozen=True)
class GroundTruth:
    """Simulation provenance attached to a spectrogram block."""

    bits: np.ndarray | None
    start_offset_bins: int
    snr_db: float


@dataclass(eq=False)
class SpectrogramBlock:
    """Time x frequency matrix of received power plus resolution metadata."""

    power: np.ndarray
    bin_duration_s: float
    channel_bandwidth_hz: float = DEFAULT_CHANNEL_BANDWIDTH_HZ
    center_frequency_hz: float = DEFAULT_CENTER_FREQUENCY_HZ
    ground_truth: GroundTruth | None = None

    def __post_init__(self):
        check_power_matrix(self.power)
        if self.bin_duration_s <= 0:
            raise ConfigError("bin_duration_s must be positive")

    @property
    def rows(self) -> int:
        return int(self.power.shape[0])

    @property
    def num_channels(self) -> int:
        return int(self.power.shape[1])

    @property
    def span_s(self) -> float:
        return self.rows * self.bin_duration_s


# Bin/symbol duration ratios are snapped to the simplest fraction within this
# denominator bound.  Spectrogram files store bin durations as integer
# nanoseconds, so a 1/90 kHz bin reads back as 11111 ns; snapping restores the
# exact 25/24 grid instead of letting that rounding leak into bin boundaries.
RATIO_MAX_DENOMINATOR = 1000


def bin_symbol_ratio(symbol_duration_s: float, bin_duration_s: float) -> Fraction:
    """RX bin duration expressed in TX symbol units, as an exact rational.

    The quotient is snapped to the simplest fraction with denominator at most
    ``RATIO_MAX_DENOMINATOR``, which absorbs metadata rounding (durations
    serialized as integer nanoseconds) without affecting any ratio whose exact
    form is already that simple.
    """
    ratio = as_fraction(bin_duration_s) / as_fraction(symbol_duration_s)
    return ratio.limit_denominator(RATIO_MAX_DENOMINATOR)


def project_to_rx_resolution(
    pattern: TxPowerPattern,
    rx_bin_duration_s: float = DEFAULT_RX_BIN_DURATION_S,
) -> np.ndarray:
    """Average a piecewise-constant TX power pattern onto the RX time grid.

    Output bin ``k`` is the time average of the pattern over
    ``[k*T_rx, (k+1)*T_rx)``.  Only whole bins are produced, so the output
    length is ``floor(pattern duration / T_rx)``.  Bin boundaries are placed
    with exact rational arithmetic (the duration ratio is snapped to a small
    fraction, 25/24 at the default rates), so boundary positions never drift
    however long the pattern runs.
    """
    samples = np.asarray(pattern.samples, dtype=np.float64)
    if samples.size == 0:
        raise ValueError("cannot project an empty pattern")
    ratio = bin_symbol_ratio(pattern.symbol_duration_s, rx_bin_duration_s)
    num, den = ratio.numerator, ratio.denominator
    n_in = samples.size
    n_out = (n_in * den) // num
    if n_out == 0:
        return np.zeros(0, dtype=np.float64)

    # bin edge k sits at k*num/den TX symbols; split into whole symbols and a
    # remainder in 1/den units so the arithmetic stays integral
    edges = np.arange(n_out + 1, dtype=np.int64) * num
    whole = edges // den
    rem = edges - whole * den

    cumulative = np.concatenate(([0.0], np.cumsum(samples)))
    padded = np.append(samples, 0.0)  # whole == n_in only at the final edge
    energy = cumulative[whole] + padded[whole] * (rem / den)
    return np.diff(energy) / float(ratio)


def calibrate_snr(
    channel: ChannelConfig, config: WatermarkConfig = WatermarkConfig()
) -> tuple[float, float]:
    """Resolve the (signal_power, noise_power) pair used by the simulator.

    Convention: ``signal_power`` is the attenuated chip-on power in the
    watermark channel (peak, not duty-cycle averaged); ``noise_power`` is the
    mean noise power per spectrometer bin, ``signal_power / 10**(snr_db/10)``.
    ``snr_db = +inf`` turns noise off.  This definition is part of the public
    contract and stays fixed across releases.
    """
    signal_power = config.high_power * 10.0 ** (-channel.attenuation_db / 10.0)
    if math.isinf(channel.snr_db):
        return signal_power, 0.0
    return signal_power, signal_power / 10.0 ** (channel.snr_db / 10.0)


def simulate_rx_spectrogram(
    pattern: TxPowerPattern,
    channel: ChannelConfig,
    start_offset_bins: int,
    total_bins: int | None = None,
    center_frequency_hz: float = DEFAULT_CENTER_FREQUENCY_HZ,
) -> SpectrogramBlock:
    """Simulate the spectrogram a passive receiver records for one pattern.

    The watermark channel column carries the attenuated projection of the
    pattern starting at ``start_offset_bins``; every bin of every channel is
    square-law detected, i.e. bin power is ``|s + n|**2`` with ``s`` the
    deterministic signal amplitude and ``n`` complex Gaussian noise.  With the
    signal absent this makes bin power exponentially distributed with mean
    ``noise_power``.  The same ``noise_seed`` always reproduces the block
    bit for bit.

    The peak signal power is taken from the pattern's maximum sample, which
    for any chip-keyed pattern equals the configured high power.
    """
    if start_offset_bins < 0:
        raise ValueError("start_offset_bins must be >= 0")
    projected = project_to_rx_resolution(pattern, channel.rx_bin_duration_s)
    rows = (
        total_bins
        if total_bins is not None
        else start_offset_bins + projected.size + TAIL_MARGIN_BINS
    )
    if rows <= start_offset_bins:
        raise ValueError(
            f"pattern at offset {start_offset_bins} lies entirely outside a "
            f"{rows}-bin block"
        )

    attenuation = 10.0 ** (-channel.attenuation_db / 10.0)
    peak = attenuation * float(np.max(pattern.samples))
    if math.isinf(channel.snr_db):
        noise_power = 0.0
    else:
        noise_power = peak / 10.0 ** (channel.snr_db / 10.0)

    visible = projected[: rows - start_offset_bins]
    amplitude = np.zeros((rows, channel.num_channels), dtype=np.float64)
    amplitude[start_offset_bins : start_offset_bins + visible.size, channel.wm_index] = (
        np.sqrt(attenuation * visible)
    )

    if noise_power > 0.0:
        rng = np.random.default_rng(channel.noise_seed)
        scale = math.sqrt(noise_power / 2.0)
        re = rng.standard_normal(amplitude.shape) * scale
        im = rng.standard_normal(amplitude.shape) * scale
        power = (amplitude + re) ** 2 + im**2
    else:
        power = amplitude**2

    truth = GroundTruth(
        bits=None if pattern.source_bits is None else pattern.source_bits.copy(),
        start_offset_bins=start_offset_bins,
        snr_db=channel.snr_db,
    )
    return SpectrogramBlock(
        power=power.astype(np.float32),
        bin_duration_s=channel.rx_bin_duration_s,
        channel_bandwidth_hz=1.0 / channel.rx_bin_duration_s,
        center_frequency_hz=center_frequency_hz,
        ground_truth=truth,
    )
