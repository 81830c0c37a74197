"""Scikit-learn style facade over the encode / channel / decode pipeline.

Three estimators mirror the signal path: :class:`WatermarkEncoder` turns
packet bits into TX power patterns, :class:`SpectrogramChannel` turns power
patterns into received spectrogram blocks, and :class:`WatermarkDetector`
decodes blocks against a fitted reference packet.  All parameters are plain
constructor arguments, so ``get_params`` / ``set_params`` / ``clone`` work as
usual and the stages compose with other scikit-learn tooling.
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .channel import (
    DEFAULT_RX_BIN_DURATION_S,
    ChannelConfig,
    SpectrogramBlock,
    simulate_rx_spectrogram,
)
from .codec import ONE_CHIPS, ZERO_CHIPS, TxPowerPattern, WatermarkConfig
from .detector import (
    DEFAULT_RESAMPLE_SPEC,
    DetectionReport,
    ResampleSpec,
    decode_block,
)
from .validation import as_bit_array


class WatermarkEncoder(TransformerMixin, BaseEstimator):
    """Encode rows of packet bits into per-symbol TX power patterns.

    Stateless: ``fit`` only validates nothing and returns ``self``.
    ``transform`` maps an ``(n, bits_per_packet)`` 0/1 matrix to an
    ``(n, samples_per_packet)`` float matrix of linear power values.
    """

    def __init__(self, config: WatermarkConfig = WatermarkConfig()):
        self.config = config

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        bits = check_array(X, dtype=np.int64, ensure_2d=True)
        if bits.shape[1] != self.config.bits_per_packet:
            raise ValueError(
                f"expected {self.config.bits_per_packet} bits per row, "
                f"got {bits.shape[1]}"
            )
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("packet bits must be 0 or 1")
        chips = np.where(bits[:, :, None].astype(bool), ONE_CHIPS, ZERO_CHIPS)
        powers = np.where(
            chips == 1, self.config.high_power, self.config.low_power
        ).astype(np.float64)
        powers = np.repeat(powers, self.config.samples_per_chip, axis=2)
        return powers.reshape(bits.shape[0], -1)

    def __sklearn_is_fitted__(self) -> bool:
        return True


class SpectrogramChannel(TransformerMixin, BaseEstimator):
    """Pass TX power patterns through the simulated passive receiver.

    ``transform`` maps an ``(n, num_samples)`` matrix of power patterns to a
    list of :class:`SpectrogramBlock`; row ``i`` uses an independent noise
    stream derived from ``(noise_seed, i)``, so a fixed ``noise_seed`` makes
    the whole batch reproducible.
    """

    def __init__(
        self,
        snr_db: float = math.inf,
        attenuation_db: float = 0.0,
        noise_seed: int = 0,
        num_channels: int = 853,
        watermark_channel_index: int | None = None,
        rx_bin_duration_s: float = DEFAULT_RX_BIN_DURATION_S,
        start_offset_bins: int = 0,
        tx_symbol_duration_s: float = 1.0 / 93_750.0,  # WatermarkConfig default
    ):
        self.snr_db = snr_db
        self.attenuation_db = attenuation_db
        self.noise_seed = noise_seed
        self.num_channels = num_channels
        self.watermark_channel_index = watermark_channel_index
        self.rx_bin_duration_s = rx_bin_duration_s
        self.start_offset_bins = start_offset_bins
        self.tx_symbol_duration_s = tx_symbol_duration_s

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> list[SpectrogramBlock]:
        patterns = check_array(X, dtype=np.float64, ensure_2d=True)
        blocks = []
        for i, row in enumerate(patterns):
            pattern = TxPowerPattern(
                samples=row, symbol_duration_s=self.tx_symbol_duration_s
            )
            channel = ChannelConfig(
                snr_db=self.snr_db,
                rx_bin_duration_s=self.rx_bin_duration_s,
                attenuation_db=self.attenuation_db,
                noise_seed=int(
                    np.random.SeedSequence(
                        [self.noise_seed, i]
                    ).generate_state(1)[0]
                ),
                num_channels=self.num_channels,
                watermark_channel_index=self.watermark_channel_index,
            )
            blocks.append(
                simulate_rx_spectrogram(pattern, channel, self.start_offset_bins)
            )
        return blocks

    def __sklearn_is_fitted__(self) -> bool:
        return True


class WatermarkDetector(BaseEstimator):
    """Decode spectrogram blocks against a fitted reference packet.

    ``fit(X)`` stores the reference packet bits (length ``bits_per_packet``).
    ``predict(blocks)`` returns one decoded packet per block as an
    ``(n, bits_per_packet)`` matrix — the majority vote across every packet
    repetition decoded in that block (vote ties resolve to 0).
    ``decision_function`` returns the mean per-position decision metric, and
    ``report`` the underlying :class:`DetectionReport` list.

    Sync rejection is disabled by default so ``predict`` is total; pass a
    ``reject_threshold`` and blocks judged signal-free come back as all-zero
    rows with ``no_signal`` set in the corresponding report.
    """

    def __init__(
        self,
        config: WatermarkConfig = WatermarkConfig(),
        spec: ResampleSpec = DEFAULT_RESAMPLE_SPEC,
        channel_index: int | None = None,
        reject_threshold: float | None = None,
    ):
        self.config = config
        self.spec = spec
        self.channel_index = channel_index
        self.reject_threshold = reject_threshold

    def fit(self, X, y=None):
        self.reference_bits_ = as_bit_array(X, self.config.bits_per_packet)
        return self

    def report(self, X) -> list[DetectionReport]:
        check_is_fitted(self, "reference_bits_")
        reports = []
        for block in X:
            if not isinstance(block, SpectrogramBlock):
                raise ValueError("X must be an iterable of SpectrogramBlock")
            reports.append(
                decode_block(
                    block,
                    self.reference_bits_,
                    self.config,
                    self.spec,
                    channel_index=self.channel_index,
                    reject_threshold=self.reject_threshold,
                )
            )
        return reports

    def _vote(self, rep: DetectionReport) -> np.ndarray:
        width = self.config.bits_per_packet
        if rep.total_bits == 0:
            return np.zeros(width, dtype=np.int8)
        packets = rep.decoded_bits.reshape(-1, width)
        return (2 * packets.sum(axis=0) > packets.shape[0]).astype(np.int8)

    def predict(self, X) -> np.ndarray:
        return np.stack([self._vote(rep) for rep in self.report(X)])

    def decision_function(self, X) -> np.ndarray:
        width = self.config.bits_per_packet
        rows = []
        for rep in self.report(X):
            if rep.total_bits == 0:
                rows.append(np.zeros(width, dtype=np.float64))
            else:
                rows.append(rep.per_bit_metric.reshape(-1, width).mean(axis=0))
        return np.stack(rows)

    def score(self, X, y) -> float:
        """Mean per-bit accuracy of ``predict`` against true packet bits."""
        predicted = self.predict(X)
        truth = np.asarray(y)
        if truth.ndim == 1:
            truth = np.broadcast_to(truth, predicted.shape)
        if truth.shape != predicted.shape:
            raise ValueError(
                f"truth shape {truth.shape} does not match predictions "
                f"{predicted.shape}"
            )
        return float(np.mean(predicted == truth))
