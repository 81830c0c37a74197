"""Reproducible experiments: simulated datasets, file detection, Pe sweeps.

All SNR values at this layer (sweep points, file labels, sidecar metadata) are
on the reported waterfall axis, chosen so the bit-error rate drops through
10^-2 around -8 dB and approaches error-free performance near -6 dB.  The
channel simulator itself uses a stricter per-bin convention (peak chip-on
power over mean noise power in one spectrometer bin, see
:func:`pseudonymetry.channel.calibrate_snr`); the two axes differ by the fixed
:data:`SNR_AXIS_OFFSET_DB`.  The offset was measured once from the detector's
operating curve and is frozen so results stay comparable across runs and
releases; changing it only relabels the axis.
"""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import (
    DEFAULT_RX_BIN_DURATION_S,
    ChannelConfig,
    GroundTruth,
    SpectrogramBlock,
    simulate_rx_spectrogram,
)
from .codec import TxPowerPattern, WatermarkConfig, encode_packet
from .dataset_io import ExperimentRecord, write_spectrogram
from .detector import (
    DEFAULT_RESAMPLE_SPEC,
    SYNC_REJECT_CONFIDENCE,
    DetectionReport,
    ResampleSpec,
    decode_block,
)
from .errors import ConfigError, DatasetIOError

logger = logging.getLogger("pseudonymetry")

# Reported SNR axis minus the channel's per-bin peak SNR, in dB.  Frozen;
# see the module docstring.
SNR_AXIS_OFFSET_DB = 6.0

DEFAULT_SNR_POINTS_DB = tuple(float(v) for v in range(-15, -4))
DEFAULT_PACKET_HEX = "a5c3d2e"
FILE_SUFFIX = ".psymspec"

# Channel-count defaults resolved when SweepConfig.num_channels is None: the
# sweep only ever reads the watermark column, so it simulates few channels for
# speed; simulated dataset files default to the full spectrometer width.
SWEEP_NUM_CHANNELS = 8
SIMULATE_NUM_CHANNELS = 853


def packet_bits_from_hex(text: str, bits_per_packet: int = 28) -> np.ndarray:
    """Parse a hex string into packet bits, most significant bit first."""
    digits = (bits_per_packet + 3) // 4
    cleaned = text.strip().lower()
    if len(cleaned) != digits:
        raise ConfigError(
            f"packet hex must be exactly {digits} digits for "
            f"{bits_per_packet} bits, got {text!r}"
        )
    try:
        value = int(cleaned, 16)
    except ValueError:
        raise ConfigError(f"invalid packet hex {text!r}") from None
    if value >= 1 << bits_per_packet:
        raise ConfigError(f"packet hex {text!r} exceeds {bits_per_packet} bits")
    return np.array(
        [(value >> (bits_per_packet - 1 - i)) & 1 for i in range(bits_per_packet)],
        dtype=np.int8,
    )


def packet_hex_from_bits(bits) -> str:
    """Inverse of :func:`packet_bits_from_hex`."""
    bits = np.asarray(bits, dtype=np.int64)
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return format(value, f"0{(bits.size + 3) // 4}x")


@dataclass(frozen=True)
class SweepConfig:
    """Parameters of a simulate/detect/sweep experiment."""

    snr_points_db: tuple = DEFAULT_SNR_POINTS_DB
    bits_per_point: int = 10_000
    packet_hex: str = DEFAULT_PACKET_HEX
    seed: int = 0
    num_channels: int | None = None
    attenuation_db: float = 0.0
    packets_per_block: int = 45
    max_start_offset_bins: int = 2400
    rx_bin_duration_s: float = DEFAULT_RX_BIN_DURATION_S
    watermark_channel_index: int | None = None
    watermark: WatermarkConfig = WatermarkConfig()
    resample: ResampleSpec = DEFAULT_RESAMPLE_SPEC
    sync_reject_confidence: float | None = SYNC_REJECT_CONFIDENCE

    def __post_init__(self):
        object.__setattr__(
            self, "snr_points_db", tuple(float(v) for v in self.snr_points_db)
        )
        if not self.snr_points_db:
            raise ConfigError("snr_points_db must not be empty")
        if any(math.isnan(v) for v in self.snr_points_db):
            raise ConfigError("snr points must not be NaN")
        if self.bits_per_point < self.watermark.bits_per_packet:
            raise ConfigError(
                "bits_per_point must cover at least one packet "
                f"({self.watermark.bits_per_packet} bits)"
            )
        if self.packets_per_block < 1:
            raise ConfigError("packets_per_block must be >= 1")
        if self.max_start_offset_bins < 0:
            raise ConfigError("max_start_offset_bins must be >= 0")
        if self.num_channels is not None and self.num_channels < 1:
            raise ConfigError("num_channels must be >= 1")
        # validates the hex eagerly so bad CLI input fails before any work
        packet_bits_from_hex(self.packet_hex, self.watermark.bits_per_packet)

    @property
    def packet_bits(self) -> np.ndarray:
        return packet_bits_from_hex(self.packet_hex, self.watermark.bits_per_packet)


@dataclass(frozen=True)
class ManifestEntry:
    """One file written by :func:`run_simulate` (or the failure to write it)."""

    path: Path
    rows: int
    cols: int
    snr_db: float
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _tiled_pattern(config: SweepConfig, count: int) -> TxPowerPattern:
    base = encode_packet(config.packet_bits, config.watermark)
    return TxPowerPattern(
        samples=np.tile(base.samples, count),
        symbol_duration_s=config.watermark.tx_symbol_duration_s,
        source_bits=base.source_bits,
    )


def _simulate_block(
    config: SweepConfig,
    pattern: TxPowerPattern,
    point_index: int,
    block_index: int,
    num_channels: int,
) -> SpectrogramBlock:
    """Deterministically seeded block for one (SNR point, block) pair."""
    seed_seq = np.random.SeedSequence([config.seed, point_index, block_index])
    offset_seq, noise_seq = seed_seq.spawn(2)
    offset = int(
        np.random.default_rng(offset_seq).integers(
            0, config.max_start_offset_bins + 1
        )
    )
    snr_db = config.snr_points_db[point_index] + SNR_AXIS_OFFSET_DB
    channel = ChannelConfig(
        snr_db=snr_db,
        rx_bin_duration_s=config.rx_bin_duration_s,
        attenuation_db=config.attenuation_db,
        noise_seed=int(noise_seq.generate_state(1)[0]),
        num_channels=num_channels,
        watermark_channel_index=config.watermark_channel_index,
    )
    return simulate_rx_spectrogram(pattern, channel, offset)


def run_sweep(config: SweepConfig = SweepConfig()) -> list[ExperimentRecord]:
    """Monte Carlo Pe-vs-SNR sweep.

    For each SNR point, simulates seeded multi-packet blocks and decodes them
    (sync included, rejection disabled so every point counts bits) until at
    least ``bits_per_point`` bits are accumulated.  Runs are deterministic in
    ``config.seed``.  A point that raises is recorded with zero bits and a
    ``!failed`` label suffix instead of aborting the sweep.
    """
    num_channels = config.num_channels or SWEEP_NUM_CHANNELS
    pattern = _tiled_pattern(config, config.packets_per_block)
    packet_bits = config.packet_bits
    records = []
    for i, snr_db in enumerate(config.snr_points_db):
        label = f"snr{snr_db:g}"
        try:
            total = errors = 0
            offset_errors = []
            block_index = 0
            while total < config.bits_per_point:
                block = _simulate_block(config, pattern, i, block_index, num_channels)
                report = decode_block(
                    block,
                    packet_bits,
                    config.watermark,
                    config.resample,
                    channel_index=config.watermark_channel_index,
                    reject_threshold=None,
                )
                total += report.total_bits
                errors += report.bit_errors
                if report.sync_offset_error_bins is not None:
                    offset_errors.append(abs(report.sync_offset_error_bins))
                block_index += 1
            record = ExperimentRecord(
                label=label,
                snr_db=snr_db,
                total_bits=total,
                bit_errors=errors,
                pe=errors / total,
                sync_offset_error_bins=(
                    int(np.median(offset_errors)) if offset_errors else None
                ),
            )
            logger.info(
                "sweep %s: pe=%s (%d errors / %d bits, %d blocks)",
                label, record.pe, errors, total, block_index,
            )
        except Exception as exc:  # keep sweeping past a broken point
            logger.warning("sweep point %s failed: %s", label, exc)
            record = ExperimentRecord(
                label=f"{label}!failed", snr_db=snr_db,
                total_bits=0, bit_errors=0, pe=0.0,
            )
        records.append(record)
    return records


def run_simulate(config: SweepConfig, out_dir) -> list[ManifestEntry]:
    """Write one spectrogram file plus truth sidecar per SNR point.

    Files are named ``snr<point><suffix>`` and seeded deterministically from
    ``(seed, point index)``, so rerunning the same config reproduces identical
    bytes.  The sidecar's ``snr_db`` is the reported-axis value (the file
    label), not the channel's internal convention.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetIOError(f"cannot create {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise DatasetIOError(f"output directory {out} is not writable")

    num_channels = config.num_channels or SIMULATE_NUM_CHANNELS
    packets = max(
        1, -(-config.bits_per_point // config.watermark.bits_per_packet)
    )
    pattern = _tiled_pattern(config, packets)
    entries = []
    for i, snr_db in enumerate(config.snr_points_db):
        path = out / f"snr{snr_db:g}{FILE_SUFFIX}"
        block = _simulate_block(config, pattern, i, 0, num_channels)
        # restate truth SNR on the reported axis used to label the file
        block.ground_truth = GroundTruth(
            bits=block.ground_truth.bits,
            start_offset_bins=block.ground_truth.start_offset_bins,
            snr_db=snr_db,
        )
        try:
            write_spectrogram(path, block)
            entry = ManifestEntry(path, block.rows, block.num_channels, snr_db)
            logger.info("wrote %s (%d x %d)", path, block.rows, block.num_channels)
        except DatasetIOError as exc:
            entry = ManifestEntry(path, 0, 0, snr_db, error=str(exc))
            logger.warning("failed to write %s: %s", path, exc)
        entries.append(entry)
    return entries


def run_detect(
    block: SpectrogramBlock, config: SweepConfig, packet_bits=None
) -> DetectionReport:
    """Decode a loaded block against a reference packet.

    When ``packet_bits`` is omitted, the block's ground-truth bits (if any)
    serve as the reference.
    """
    if packet_bits is None:
        truth = block.ground_truth
        if truth is None or truth.bits is None:
            raise ConfigError(
                "no reference packet: pass packet bits or provide a truth sidecar"
            )
        packet_bits = truth.bits
    return decode_block(
        block,
        packet_bits,
        config.watermark,
        config.resample,
        channel_index=config.watermark_channel_index,
        reject_threshold=config.sync_reject_confidence,
    )


def plot_ready_text(records, bits_per_point: int) -> str:
    """Two-column (snr_db, pe) text for log-scale plotting.

    Zero-error points cannot sit at pe = 0 on a log axis, so they are rendered
    at the floor ``1 / (2 * bits_per_point)``; a leading comment names the
    floor and the affected points.
    """
    from .dataset_io import format_number

    floor = 1.0 / (2.0 * bits_per_point)
    floored = [r.label for r in records if r.total_bits > 0 and r.bit_errors == 0]
    lines = []
    if floored:
        lines.append(
            f"# zero-error points rendered at floor {format_number(floor)}: "
            + " ".join(floored)
        )
    for rec in sorted(records, key=lambda r: r.snr_db):
        if rec.total_bits == 0:
            continue
        pe = rec.pe if rec.bit_errors > 0 else floor
        lines.append(f"{format_number(rec.snr_db)} {format_number(pe)}")
    return "\n".join(lines) + "\n"
