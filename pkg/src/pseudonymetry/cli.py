"""Command-line front end (`psym`): simulate, detect, sweep.

Exit codes: 0 success, 2 bad arguments or configuration, 3 no signal detected
(sync confidence below the rejection threshold), 4 file I/O, format, or
corruption errors.  The ``PSYM_LOG`` environment variable sets log verbosity
(``debug``, ``info``, ``warning``, ``error``).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .codec import WatermarkConfig
from .dataset_io import (
    export_records_csv,
    format_number,
    read_spectrogram,
    records_to_csv_text,
)
from .errors import ConfigError, DatasetIOError, PseudonymetryError
from .experiment import (
    DEFAULT_PACKET_HEX,
    SweepConfig,
    packet_bits_from_hex,
    packet_hex_from_bits,
    plot_ready_text,
    run_detect,
    run_simulate,
    run_sweep,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_SIGNAL = 3
EXIT_IO = 4

# config-file keys routed into WatermarkConfig
_WATERMARK_KEYS = {
    "samples_per_chip": int,
    "chips_per_bit": int,
    "bits_per_packet": int,
    "high_power": float,
    "low_power": float,
    "tx_symbol_duration_s": float,
    "watermark_subcarrier_index": int,
    "num_subcarriers": int,
    "sample_rate_hz": float,
}

# config-file keys routed into SweepConfig
_SWEEP_KEYS = {
    "bits_per_point": int,
    "seed": int,
    "num_channels": int,
    "attenuation_db": float,
    "packets_per_block": int,
    "max_start_offset_bins": int,
    "rx_bin_duration_s": float,
}

# keys whose value may be the literal ``none``
_OPTIONAL_KEYS = {
    "watermark_channel_index": int,
    "sync_reject_confidence": float,
}


def _parse_snr_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"invalid SNR list {text!r}") from None
    if not values:
        raise ConfigError("SNR list is empty")
    return values


def load_config_file(path) -> dict[str, str]:
    """Parse a line-oriented ``key = value`` configuration file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        entries[key.strip()] = value.strip()
    return entries


def _build_config(args, default_bits: int | None = None) -> SweepConfig:
    """Merge config-file entries and CLI flags into a SweepConfig.

    CLI flags win over file entries; ``default_bits`` overrides the stock
    bits_per_point default when neither source sets it.
    """
    entries = load_config_file(args.config) if getattr(args, "config", None) else {}
    sweep_kwargs: dict = {}
    wm_kwargs: dict = {}
    for key, value in entries.items():
        try:
            if key in _WATERMARK_KEYS:
                wm_kwargs[key] = _WATERMARK_KEYS[key](value)
            elif key in _SWEEP_KEYS:
                sweep_kwargs[key] = _SWEEP_KEYS[key](value)
            elif key in _OPTIONAL_KEYS:
                sweep_kwargs[key] = (
                    None if value.lower() == "none" else _OPTIONAL_KEYS[key](value)
                )
            elif key == "snr":
                sweep_kwargs["snr_points_db"] = _parse_snr_list(value)
            elif key == "packet":
                sweep_kwargs["packet_hex"] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except ValueError:
            raise ConfigError(f"config key {key!r}: invalid value {value!r}") from None

    if getattr(args, "snr", None):
        sweep_kwargs["snr_points_db"] = _parse_snr_list(args.snr)
    if getattr(args, "bits", None) is not None:
        sweep_kwargs["bits_per_point"] = args.bits
    elif default_bits is not None:
        sweep_kwargs.setdefault("bits_per_point", default_bits)
    if getattr(args, "packet", None):
        sweep_kwargs["packet_hex"] = args.packet
    if getattr(args, "seed", None) is not None:
        sweep_kwargs["seed"] = args.seed

    if wm_kwargs:
        sweep_kwargs["watermark"] = WatermarkConfig(**wm_kwargs)
    return SweepConfig(**sweep_kwargs)


def cmd_simulate(args) -> int:
    """Write one spectrogram file + truth sidecar per SNR point."""
    config = _build_config(args, default_bits=56)
    entries = run_simulate(config, args.out)
    failed = 0
    for entry in entries:
        if entry.ok:
            print(
                f"wrote {entry.path} rows={entry.rows} cols={entry.cols} "
                f"snr_db={format_number(entry.snr_db)}"
            )
        else:
            failed += 1
            print(f"FAILED {entry.path}: {entry.error}")
    print(f"{len(entries) - failed} of {len(entries)} files written")
    return EXIT_IO if failed else EXIT_OK


def _render_detect_text(path, block, report, bits_per_packet: int) -> list[str]:
    lines = [
        f"file: {path}",
        f"rows: {block.rows}",
        f"channels: {block.num_channels}",
        f"bin_duration_ns: {round(block.bin_duration_s * 1e9)}",
    ]
    if report.sync is not None:
        lines += [
            f"sync_start_bin: {report.sync.start_bin}",
            f"sync_peak_correlation: {report.sync.peak_correlation:.6f}",
            f"sync_confidence: {format_number(round(report.sync.confidence, 6))}",
        ]
    if report.no_signal:
        lines.append("no signal detected")
        return lines
    packets = report.decoded_bits.reshape(-1, bits_per_packet)
    lines.append(f"total_bits: {report.total_bits}")
    lines.append(f"packets_decoded: {packets.shape[0]}")
    lines.append(
        "decoded_hex: " + " ".join(packet_hex_from_bits(row) for row in packets)
    )
    if report.pe is not None:
        lines.append(
            f"pe: {format_number(report.pe)} "
            f"({report.bit_errors}/{report.total_bits})"
        )
    if report.sync_offset_error_bins is not None:
        lines.append(f"sync_offset_error_bins: {report.sync_offset_error_bins}")
    return lines


def cmd_detect(args) -> int:
    """Decode one spectrogram file and report the result."""
    config = _build_config(args)
    block = read_spectrogram(args.file)
    packet_bits = (
        packet_bits_from_hex(args.packet, config.watermark.bits_per_packet)
        if args.packet
        else None
    )
    report = run_detect(block, config, packet_bits)
    rendered = _render_detect_text(
        args.file, block, report, config.watermark.bits_per_packet
    )
    if args.format == "csv":
        lines = ["key,value"]
        for line in rendered:
            key, _, value = line.partition(": ")
            lines.append(f"{key},{value}")
        print("\n".join(lines))
    else:
        print("\n".join(rendered))
    return EXIT_NO_SIGNAL if report.no_signal else EXIT_OK


def cmd_sweep(args) -> int:
    """Run the Pe-vs-SNR Monte Carlo sweep and emit records."""
    config = _build_config(args)
    records = run_sweep(config)
    if args.out:
        export_records_csv(records, args.out)
    if args.plot:
        try:
            Path(args.plot).write_text(
                plot_ready_text(records, config.bits_per_point), encoding="utf-8"
            )
        except OSError as exc:
            raise DatasetIOError(f"writing {args.plot}: {exc}") from exc
    if args.format == "csv":
        print(records_to_csv_text(records), end="")
    else:
        print(f"{'label':>10} {'snr_db':>8} {'bits':>8} {'errors':>8} {'pe':>12}")
        for rec in sorted(records, key=lambda r: r.snr_db):
            print(
                f"{rec.label:>10} {format_number(rec.snr_db):>8} "
                f"{rec.total_bits:>8} {rec.bit_errors:>8} "
                f"{format_number(rec.pe):>12}"
            )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psym",
        description="Pseudonym watermark toolkit: simulate spectrograms, "
        "detect watermarks, sweep bit-error rates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int, help="experiment seed (default 0)")
        p.add_argument(
            "--packet",
            help=f"packet payload as hex digits (default {DEFAULT_PACKET_HEX})",
        )

    sim = sub.add_parser("simulate", help="write simulated spectrogram files")
    add_common(sim)
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument(
        "--snr",
        help="comma-separated SNR points in dB (use --snr=-8,-6 for negatives)",
    )
    sim.add_argument(
        "--bits", type=int, help="watermark bits per file (default 56)"
    )
    sim.set_defaults(func=cmd_simulate)

    det = sub.add_parser("detect", help="decode a spectrogram file")
    add_common(det)
    det.add_argument("file", help="spectrogram file to decode")
    det.add_argument(
        "--format", choices=("text", "csv"), default="text", help="output style"
    )
    det.set_defaults(func=cmd_detect)

    swp = sub.add_parser("sweep", help="Monte Carlo bit-error-rate sweep")
    add_common(swp)
    swp.add_argument(
        "--snr",
        help="comma-separated SNR points in dB (use --snr=-8,-6 for negatives)",
    )
    swp.add_argument(
        "--bits", type=int, help="minimum bits per SNR point (default 10000)"
    )
    swp.add_argument("--out", help="write records CSV to this path")
    swp.add_argument(
        "--plot", help="write a two-column (snr_db, pe) file for plotting"
    )
    swp.add_argument(
        "--format", choices=("text", "csv"), default="text", help="stdout style"
    )
    swp.set_defaults(func=cmd_sweep)
    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("PSYM_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DatasetIOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PseudonymetryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
