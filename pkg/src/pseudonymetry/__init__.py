"""Pseudonym watermarking for spectrum-sharing accountability.

Encode short pseudonym identifiers as per-symbol power patterns on a reserved
OFDM subcarrier, simulate how a passive channelized receiver observes them in
a power spectrogram (including the TX/RX time-resolution mismatch), and
detect/decode them at low SNR.

The scikit-learn facade (:class:`WatermarkEncoder`,
:class:`SpectrogramChannel`, :class:`WatermarkDetector`) is imported lazily on
first attribute access so the core library does not pay for the scikit-learn
import.
"""
from .channel import (
    DEFAULT_RX_BIN_DURATION_S,
    TAIL_MARGIN_BINS,
    ChannelConfig,
    GroundTruth,
    SpectrogramBlock,
    bin_symbol_ratio,
    calibrate_snr,
    project_to_rx_resolution,
    simulate_rx_spectrogram,
)
from .codec import (
    CHIPS_PER_BIT,
    ONE_CHIPS,
    ZERO_CHIPS,
    TxPowerPattern,
    WatermarkConfig,
    encode_bit,
    encode_packet,
    encode_stream,
    pn_for_bit,
    synthesize_ofdm_baseband,
)
from .dataset_io import (
    CSV_HEADER,
    HEADER_SIZE,
    MAGIC,
    ExperimentRecord,
    export_records_csv,
    format_number,
    read_records_csv,
    read_spectrogram,
    records_to_csv_text,
    write_spectrogram,
)
from .detector import (
    DEFAULT_RESAMPLE_SPEC,
    SYNC_REJECT_CONFIDENCE,
    BitDecision,
    ChannelSeries,
    DetectionReport,
    ResampleSpec,
    SyncEstimate,
    average_chips,
    compute_pe,
    cross_correlate_sync,
    decide_bit,
    decide_bits,
    decode_block,
    extract_channel,
    resample_25_24_x10,
)
from .errors import (
    ConfigError,
    DatasetIOError,
    FramingError,
    InsufficientDataError,
    PseudonymetryError,
    SpectrogramCorruptionError,
    SpectrogramFormatError,
)
from .experiment import (
    SNR_AXIS_OFFSET_DB,
    SweepConfig,
    packet_bits_from_hex,
    packet_hex_from_bits,
    plot_ready_text,
    run_detect,
    run_simulate,
    run_sweep,
)

__version__ = "0.1.0"

_LAZY_ESTIMATORS = ("WatermarkEncoder", "SpectrogramChannel", "WatermarkDetector")


def __getattr__(name):
    if name in _LAZY_ESTIMATORS:
        from . import estimators

        return getattr(estimators, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(set(globals()) | set(_LAZY_ESTIMATORS))
