"""On-disk formats: binary spectrogram files, truth sidecars, CSV results.

Spectrogram files are a fixed 56-byte little-endian header followed by the
row-major float32 power matrix.  Ground truth (when present) lives in a
line-oriented text sidecar next to the binary file, so files recorded without
truth go through the identical reader.  Experiment results serialize to a
small CSV schema that parses back to the original records.
"""
from __future__ import annotations

import csv
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import GroundTruth, SpectrogramBlock
from .errors import (
    DatasetIOError,
    SpectrogramCorruptionError,
    SpectrogramFormatError,
)
from .validation import as_bit_array, check_power_matrix

MAGIC = b"PSYMSPEC"
VERSION = 1
VALUE_ENCODING_F32_LE = 0

# magic, version, rows, cols, bin_duration_ns, channel_bandwidth_hz,
# center_frequency_hz, value_encoding
_HEADER = struct.Struct("<8sIQQQQQI")
HEADER_SIZE = _HEADER.size  # 56 bytes

SIDECAR_SUFFIX = ".truth"

CSV_HEADER = ["label", "snr_db", "total_bits", "bit_errors", "pe",
              "sync_offset_error_bins"]


@dataclass(frozen=True)
class ExperimentRecord:
    """One row of a bit-error experiment: error count at one SNR point."""

    label: str
    snr_db: float
    total_bits: int
    bit_errors: int
    pe: float
    sync_offset_error_bins: int | None = None

    def __post_init__(self):
        if self.total_bits < 0 or self.bit_errors < 0:
            raise ValueError("bit counts must be non-negative")
        if self.bit_errors > self.total_bits:
            raise ValueError("bit_errors cannot exceed total_bits")
        if self.total_bits > 0:
            if self.pe != self.bit_errors / self.total_bits:
                raise ValueError(
                    f"pe {self.pe} != bit_errors/total_bits "
                    f"{self.bit_errors / self.total_bits}"
                )
        elif self.pe != 0.0:
            raise ValueError("pe must be 0 when no bits were counted")


def _sidecar_path(path) -> Path:
    return Path(os.fspath(path) + SIDECAR_SUFFIX)


def write_spectrogram(path, block: SpectrogramBlock) -> None:
    """Write a block as header + row-major float32 payload (+ truth sidecar)."""
    check_power_matrix(block.power)
    rows, cols = block.power.shape
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        rows,
        cols,
        round(block.bin_duration_s * 1e9),
        round(block.channel_bandwidth_hz),
        round(block.center_frequency_hz),
        VALUE_ENCODING_F32_LE,
    )
    payload = np.ascontiguousarray(block.power, dtype="<f4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise DatasetIOError(f"writing {path}: {exc}") from exc

    truth = block.ground_truth
    if truth is None:
        return
    lines = []
    if truth.bits is not None:
        lines.append("bits=" + "".join(str(int(b)) for b in truth.bits))
    lines.append(f"offset={truth.start_offset_bins}")
    lines.append(f"snr_db={float(truth.snr_db)!r}")
    try:
        _sidecar_path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DatasetIOError(f"writing {_sidecar_path(path)}: {exc}") from exc


def _read_sidecar(path) -> GroundTruth | None:
    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        return None
    bits = None
    offset = 0
    snr_db = math.nan
    try:
        for raw in sidecar.read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"malformed line {line!r}")
            key = key.strip()
            value = value.strip()
            if key == "bits":
                bits = as_bit_array([int(c) for c in value]) if value else None
            elif key == "offset":
                offset = int(value)
            elif key == "snr_db":
                snr_db = float(value)
            else:
                raise ValueError(f"unknown key {key!r}")
    except (OSError, ValueError) as exc:
        raise DatasetIOError(f"reading {sidecar}: {exc}") from exc
    return GroundTruth(bits=bits, start_offset_bins=offset, snr_db=snr_db)


def read_spectrogram(path) -> SpectrogramBlock:
    """Read a spectrogram file written by :func:`write_spectrogram`."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DatasetIOError(f"reading {path}: {exc}") from exc
    if len(raw) < HEADER_SIZE:
        raise SpectrogramCorruptionError(
            f"{path}: {len(raw)} bytes is shorter than the {HEADER_SIZE}-byte header"
        )
    magic, version, rows, cols, bin_ns, bw_hz, cf_hz, encoding = _HEADER.unpack(
        raw[:HEADER_SIZE]
    )
    if magic != MAGIC:
        raise SpectrogramFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SpectrogramFormatError(f"{path}: unsupported version {version}")
    if encoding != VALUE_ENCODING_F32_LE:
        raise SpectrogramFormatError(f"{path}: unknown value encoding {encoding}")
    expected = rows * cols * 4
    actual = len(raw) - HEADER_SIZE
    if actual != expected:
        raise SpectrogramCorruptionError(
            f"{path}: header promises {expected} payload bytes, file has {actual}"
        )
    matrix = (
        np.frombuffer(raw, dtype="<f4", count=rows * cols, offset=HEADER_SIZE)
        .reshape(rows, cols)
        .copy()
    )
    try:
        return SpectrogramBlock(
            power=matrix,
            bin_duration_s=bin_ns * 1e-9,
            channel_bandwidth_hz=float(bw_hz),
            center_frequency_hz=float(cf_hz),
            ground_truth=_read_sidecar(path),
        )
    except ValueError as exc:
        raise SpectrogramCorruptionError(f"{path}: {exc}") from exc


def format_number(value) -> str:
    """Render a number compactly but round-trip exactly.

    Integral values drop the decimal point; everything else uses ``repr``,
    which always carries enough digits to reparse to the same float.
    """
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isfinite(v) and v == int(v):
        return str(int(v))
    return repr(v)


def records_to_csv_text(records) -> str:
    """CSV text for a record list, sorted ascending by SNR."""
    records = list(records)
    if not records:
        raise ValueError("no records to export")
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in sorted(records, key=lambda r: r.snr_db):
        writer.writerow(
            [
                rec.label,
                format_number(rec.snr_db),
                format_number(rec.total_bits),
                format_number(rec.bit_errors),
                format_number(rec.pe),
                "" if rec.sync_offset_error_bins is None
                else format_number(rec.sync_offset_error_bins),
            ]
        )
    return buf.getvalue()


def export_records_csv(records, path) -> None:
    """Write experiment records as CSV; see :data:`CSV_HEADER` for columns."""
    text = records_to_csv_text(records)
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DatasetIOError(f"writing {path}: {exc}") from exc


def read_records_csv(path) -> list[ExperimentRecord]:
    """Parse a CSV written by :func:`export_records_csv`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetIOError(f"reading {path}: {exc}") from exc
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetIOError(f"{path}: empty CSV") from None
    if header != CSV_HEADER:
        raise DatasetIOError(f"{path}: unexpected CSV header {header}")
    records = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise DatasetIOError(f"{path}: malformed row {row}")
        try:
            records.append(
                ExperimentRecord(
                    label=row[0],
                    snr_db=float(row[1]),
                    total_bits=int(row[2]),
                    bit_errors=int(row[3]),
                    pe=float(row[4]),
                    sync_offset_error_bins=None if row[5] == "" else int(row[5]),
                )
            )
        except ValueError as exc:
            raise DatasetIOError(f"{path}: {exc}") from exc
    return records
