"""Shared fixtures for the pseudonymetry test suite."""
import numpy as np
import pytest

from pseudonymetry import (
    ChannelConfig,
    WatermarkConfig,
    encode_packet,
    packet_bits_from_hex,
    simulate_rx_spectrogram,
)


@pytest.fixture
def config():
    return WatermarkConfig()


@pytest.fixture
def packet_bits():
    return packet_bits_from_hex("a5c3d2e")


def make_block(bits, snr_db=np.inf, start_offset_bins=100, num_packets=2,
               noise_seed=0, num_channels=5, attenuation_db=0.0,
               total_bins=None):
    """Build a spectrogram block carrying ``num_packets`` copies of a packet."""
    packet = encode_packet(bits)
    pattern = type(packet)(
        samples=np.tile(packet.samples, num_packets),
        symbol_duration_s=packet.symbol_duration_s,
        source_bits=packet.source_bits,
    )
    channel = ChannelConfig(
        snr_db=snr_db,
        noise_seed=noise_seed,
        num_channels=num_channels,
        attenuation_db=attenuation_db,
    )
    return simulate_rx_spectrogram(pattern, channel, start_offset_bins,
                                   total_bins=total_bins)
