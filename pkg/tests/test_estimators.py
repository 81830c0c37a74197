"""Scikit-learn facade: encoder, channel, and detector estimators."""
import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from pseudonymetry import (
    SpectrogramChannel,
    WatermarkConfig,
    WatermarkDetector,
    WatermarkEncoder,
    encode_packet,
)


def random_packets(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, (n, 28))


def test_encoder_matches_functional_core(packet_bits):
    enc = WatermarkEncoder()
    out = enc.fit_transform(np.stack([packet_bits, 1 - packet_bits]))
    assert out.shape == (2, 2520)
    assert np.array_equal(out[0], encode_packet(packet_bits).samples)
    assert np.array_equal(out[1], encode_packet(1 - packet_bits).samples)


def test_encoder_honors_power_levels(packet_bits):
    cfg = WatermarkConfig(high_power=2.0, low_power=0.5)
    out = WatermarkEncoder(config=cfg).transform(packet_bits[None, :])
    assert set(np.unique(out)) == {0.5, 2.0}


def test_encoder_validation(packet_bits):
    enc = WatermarkEncoder()
    with pytest.raises(ValueError):
        enc.transform(packet_bits[None, :27])
    with pytest.raises(ValueError):
        enc.transform(np.full((1, 28), 2))


def test_estimators_expose_params():
    enc = WatermarkEncoder()
    assert "config" in enc.get_params()
    chan = SpectrogramChannel(snr_db=-3.0, num_channels=7)
    params = chan.get_params()
    assert params["snr_db"] == -3.0
    assert params["num_channels"] == 7
    chan2 = clone(chan)
    assert chan2.get_params() == params
    det = WatermarkDetector(channel_index=1)
    assert clone(det).get_params()["channel_index"] == 1
    det.set_params(channel_index=None)
    assert det.get_params()["channel_index"] is None


def test_channel_reproducible_per_seed(packet_bits):
    X = WatermarkEncoder().transform(packet_bits[None, :])
    a = SpectrogramChannel(snr_db=0.0, num_channels=3, noise_seed=4).transform(X)
    b = SpectrogramChannel(snr_db=0.0, num_channels=3, noise_seed=4).transform(X)
    c = SpectrogramChannel(snr_db=0.0, num_channels=3, noise_seed=5).transform(X)
    assert np.array_equal(a[0].power, b[0].power)
    assert not np.array_equal(a[0].power, c[0].power)


def test_channel_rows_use_independent_noise(packet_bits):
    X = np.stack([encode_packet(packet_bits).samples] * 2)
    blocks = SpectrogramChannel(snr_db=0.0, num_channels=3).transform(X)
    assert len(blocks) == 2
    assert not np.array_equal(blocks[0].power, blocks[1].power)


def test_detector_round_trip():
    packets = random_packets(3, seed=6)
    for row in packets:
        X = WatermarkEncoder().transform(row[None, :])
        # two repetitions of the same packet in one block
        pattern = np.hstack([X[0], X[0]])[None, :]
        blocks = SpectrogramChannel(num_channels=3,
                                    start_offset_bins=60).transform(pattern)
        det = WatermarkDetector().fit(row)
        predicted = det.predict(blocks)
        assert predicted.shape == (1, 28)
        assert np.array_equal(predicted[0], row)
        assert det.score(blocks, row) == 1.0
        scores = det.decision_function(blocks)
        assert np.all((scores[0] > 0) == (row == 1))


def test_detector_requires_fit(packet_bits):
    det = WatermarkDetector()
    with pytest.raises(NotFittedError):
        det.predict([])
    with pytest.raises(ValueError):
        det.fit(packet_bits[:5])


def test_detector_rejects_non_blocks(packet_bits):
    det = WatermarkDetector().fit(packet_bits)
    with pytest.raises(ValueError):
        det.report([np.zeros((10, 3))])


def test_detector_reject_threshold_marks_noise(packet_bits):
    from pseudonymetry import SpectrogramBlock

    rng = np.random.default_rng(30)
    block = SpectrogramBlock(power=rng.exponential(1.0, (6000, 3)).astype(np.float32),
                             bin_duration_s=1.0 / 90_000.0)
    det = WatermarkDetector(reject_threshold=1.45).fit(packet_bits)
    reports = det.report([block])
    assert reports[0].no_signal
    assert np.array_equal(det.predict([block])[0], np.zeros(28))
    assert np.array_equal(det.decision_function([block])[0], np.zeros(28))


def test_pipeline_composes(packet_bits):
    pipe = make_pipeline(
        WatermarkEncoder(),
        SpectrogramChannel(num_channels=3, start_offset_bins=25),
    )
    blocks = pipe.fit_transform(packet_bits[None, :])
    det = WatermarkDetector().fit(packet_bits)
    assert det.score(blocks, packet_bits) == 1.0
