"""Resolution projection, SNR calibration, and the square-law channel."""
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from pseudonymetry import (
    ChannelConfig,
    ConfigError,
    TxPowerPattern,
    WatermarkConfig,
    bin_symbol_ratio,
    calibrate_snr,
    encode_packet,
    project_to_rx_resolution,
    simulate_rx_spectrogram,
)

T_TX = 1.0 / 93_750.0
T_RX = 1.0 / 90_000.0


def project_oracle(samples, ratio):
    """Average ``samples`` over RX bins by exact interval intersection."""
    num, den = ratio.numerator, ratio.denominator
    n_out = len(samples) * den // num
    out = []
    for k in range(n_out):
        lo = Fraction(k * num, den)
        hi = Fraction((k + 1) * num, den)
        acc = Fraction(0)
        for i in range(len(samples)):
            overlap = min(Fraction(i + 1), hi) - max(Fraction(i), lo)
            if overlap > 0:
                acc += Fraction(samples[i]).limit_denominator(10**6) * overlap
        out.append(float(acc / ratio))
    return np.array(out)


def test_default_ratio_is_25_over_24():
    assert bin_symbol_ratio(T_TX, T_RX) == Fraction(25, 24)


def test_ratio_snaps_rounded_metadata():
    # spectrogram files carry the bin duration as integer nanoseconds; the
    # rounded 11111 ns must still recover the exact 25/24 grid
    assert bin_symbol_ratio(T_TX, 11_111e-9) == Fraction(25, 24)


def test_projector_matches_interval_oracle():
    ratio = Fraction(25, 24)
    rng = np.random.default_rng(0)
    for trial in range(10):
        n = int(rng.integers(2, 120))
        samples = np.round(rng.uniform(0.0, 2.0, n), 6)
        pattern = TxPowerPattern(samples=samples, symbol_duration_s=T_TX)
        got = project_to_rx_resolution(pattern)
        want = project_oracle(samples, ratio)
        assert got.size == n * 24 // 25
        assert np.allclose(got, want, atol=1e-12)


def test_projector_output_sizes():
    for n, expected in ((25, 24), (900, 864), (2520, 2419), (24, 23)):
        pattern = TxPowerPattern(samples=np.ones(n), symbol_duration_s=T_TX)
        assert project_to_rx_resolution(pattern).size == expected


def test_projector_constant_pattern_no_drift():
    # averaging a constant must give that constant in every bin, however far
    # from the origin; any boundary drift would show up as a dip
    pattern = TxPowerPattern(samples=np.full(25_000, 3.0), symbol_duration_s=T_TX)
    out = project_to_rx_resolution(pattern)
    assert out.size == 24_000
    assert np.allclose(out, 3.0, atol=1e-12)


def test_projector_energy_conservation():
    rng = np.random.default_rng(3)
    samples = rng.uniform(0.0, 1.0, 250)  # 250 symbols -> 240 whole bins
    pattern = TxPowerPattern(samples=samples, symbol_duration_s=T_TX)
    out = project_to_rx_resolution(pattern)
    # the 240 bins exactly cover the full 250-symbol span
    energy_in = samples.sum() * T_TX
    energy_out = out.sum() * T_RX
    assert energy_out == pytest.approx(energy_in, rel=1e-9)


def test_projector_rejects_empty():
    pattern = TxPowerPattern(samples=np.zeros(0), symbol_duration_s=T_TX)
    with pytest.raises(ValueError):
        project_to_rx_resolution(pattern)


def test_calibrate_snr_peak_convention():
    signal, noise = calibrate_snr(ChannelConfig(snr_db=0.0))
    assert signal == 1.0
    assert noise == 1.0
    signal, noise = calibrate_snr(ChannelConfig(snr_db=-10.0))
    assert noise == pytest.approx(10.0)
    signal, noise = calibrate_snr(ChannelConfig(snr_db=3.0, attenuation_db=20.0))
    assert signal == pytest.approx(0.01)
    assert noise == pytest.approx(0.01 / 10 ** 0.3)


def test_calibrate_snr_noise_off():
    signal, noise = calibrate_snr(ChannelConfig(snr_db=math.inf))
    assert signal == 1.0
    assert noise == 0.0


def test_calibrate_snr_tracks_high_power():
    cfg = WatermarkConfig(high_power=4.0, low_power=1.0)
    signal, noise = calibrate_snr(ChannelConfig(snr_db=0.0), cfg)
    assert signal == 4.0
    assert noise == 4.0


def test_channel_config_validation():
    assert ChannelConfig().wm_index == 426
    assert ChannelConfig(num_channels=5).wm_index == 2
    assert ChannelConfig(num_channels=5, watermark_channel_index=4).wm_index == 4
    with pytest.raises(ConfigError):
        ChannelConfig(num_channels=0)
    with pytest.raises(ConfigError):
        ChannelConfig(attenuation_db=-1.0)
    with pytest.raises(ConfigError):
        ChannelConfig(snr_db=float("nan"))
    with pytest.raises(ConfigError):
        ChannelConfig(snr_db=-math.inf)
    with pytest.raises(ConfigError):
        ChannelConfig(num_channels=5, watermark_channel_index=5)
    with pytest.raises(ConfigError):
        ChannelConfig(rx_bin_duration_s=0.0)


def test_noiseless_block_geometry(packet_bits):
    packet = encode_packet(packet_bits)
    channel = ChannelConfig(num_channels=7)
    block = simulate_rx_spectrogram(packet, channel, 50)
    assert block.power.dtype == np.float32
    # 2520 symbols project to 2419 whole bins, plus offset and tail margin
    assert block.rows == 50 + 2419 + 8
    assert block.num_channels == 7
    assert block.bin_duration_s == pytest.approx(T_RX)
    assert block.channel_bandwidth_hz == pytest.approx(90_000.0)

    projected = project_to_rx_resolution(packet)
    column = block.power[:, 3].astype(np.float64)
    assert np.allclose(column[50 : 50 + 2419], projected, atol=1e-6)
    assert np.all(column[:50] == 0.0)
    assert np.all(column[50 + 2419 :] == 0.0)
    off_channels = np.delete(block.power, 3, axis=1)
    assert np.all(off_channels == 0.0)


def test_block_ground_truth(packet_bits):
    packet = encode_packet(packet_bits)
    block = simulate_rx_spectrogram(packet, ChannelConfig(snr_db=2.0,
                                                          num_channels=3), 17)
    truth = block.ground_truth
    assert np.array_equal(truth.bits, packet_bits)
    assert truth.start_offset_bins == 17
    assert truth.snr_db == 2.0


def test_attenuation_scales_power(packet_bits):
    packet = encode_packet(packet_bits)
    plain = simulate_rx_spectrogram(packet, ChannelConfig(num_channels=3), 0)
    damped = simulate_rx_spectrogram(
        packet, ChannelConfig(num_channels=3, attenuation_db=13.0), 0
    )
    ratio = 10.0 ** (-1.3)
    a = plain.power[:, 1].astype(np.float64)
    b = damped.power[:, 1].astype(np.float64)
    assert np.allclose(b, ratio * a, atol=1e-7)


def test_total_bins_truncates_and_validates(packet_bits):
    packet = encode_packet(packet_bits)
    channel = ChannelConfig(num_channels=3)
    block = simulate_rx_spectrogram(packet, channel, 10, total_bins=500)
    assert block.rows == 500
    with pytest.raises(ValueError):
        simulate_rx_spectrogram(packet, channel, 500, total_bins=400)
    with pytest.raises(ValueError):
        simulate_rx_spectrogram(packet, channel, -1)


def test_same_seed_reproduces_block(packet_bits):
    packet = encode_packet(packet_bits)
    kw = dict(snr_db=-5.0, num_channels=3, noise_seed=42)
    a = simulate_rx_spectrogram(packet, ChannelConfig(**kw), 30)
    b = simulate_rx_spectrogram(packet, ChannelConfig(**kw), 30)
    c = simulate_rx_spectrogram(packet, ChannelConfig(snr_db=-5.0, num_channels=3,
                                                      noise_seed=43), 30)
    assert np.array_equal(a.power, b.power)
    assert not np.array_equal(a.power, c.power)


def test_noise_only_bins_are_exponential(packet_bits):
    """Square-law detection of Gaussian noise gives exponential bin powers."""
    packet = encode_packet(packet_bits)
    channel = ChannelConfig(snr_db=0.0, num_channels=9, noise_seed=7)
    block = simulate_rx_spectrogram(packet, channel, 0)
    _, noise_power = calibrate_snr(channel)
    off = np.delete(block.power, channel.wm_index, axis=1).ravel().astype(np.float64)
    assert off.size > 19_000
    result = stats.kstest(off, "expon", args=(0.0, noise_power))
    assert result.pvalue > 0.01
    assert off.mean() == pytest.approx(noise_power, rel=0.05)


def test_signal_bin_mean_is_power_plus_noise(packet_bits):
    # E[(sqrt(p)+x)^2 + y^2] = p + noise_power for x,y ~ N(0, noise/2), so the
    # excess over the projected signal power averages to the noise power
    packet = encode_packet(packet_bits)
    projected = project_to_rx_resolution(packet)
    excess = []
    for seed in range(8):
        channel = ChannelConfig(snr_db=0.0, num_channels=3, noise_seed=seed)
        block = simulate_rx_spectrogram(packet, channel, 0)
        column = block.power[:2419, 1].astype(np.float64)
        excess.append((column - projected).mean())
    assert np.mean(excess) == pytest.approx(1.0, abs=0.05)
