# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Tests for the acoustic channel model."""
import math

import pytest

from omrsim.channel import (ChannelModel, bit_error_rate, calibrate_absorption,
                            edge_snr_db, per_from_snr)
from omrsim.topology import DEFAULT_TECHNOLOGIES, TechnologyClass


@pytest.fixture
def channel():
    return ChannelModel.calibrated(DEFAULT_TECHNOLOGIES)


def _q(x):
    # Gaussian tail via the complementary error function of the math module.
    return .5 * math.erfc(x / math.sqrt(2))


def test_bit_error_rate():
    assert bit_error_rate(1.) == pytest.approx(_q(math.sqrt(2)))
    assert bit_error_rate(1.) == pytest.approx(.0786, abs=1e-4)
    assert bit_error_rate(0.) == .5
    assert bit_error_rate(1e6) == 0.


def test_per_from_snr():
    assert per_from_snr(1., 100) == pytest.approx(.99972, abs=1e-5)
    assert per_from_snr(1., 100) == pytest.approx(
        1 - (1 - _q(math.sqrt(2))) ** 100)

    # Very large SNR.
    assert per_from_snr(1e6, 30000) == 0.

    # Empty packet.
    assert per_from_snr(1., 0) == 0.

    # Longer packets fail more often.
    assert per_from_snr(3., 1000) > per_from_snr(3., 100)


def test_edge_snr_db():
    snr_db = edge_snr_db(9600)
    assert per_from_snr(10 ** (snr_db / 10), 9600) == pytest.approx(.5)
    with pytest.raises(ValueError) as excinfo:
        edge_snr_db(9600, target_per=1.)
    assert 'Target PER' in str(excinfo.value)


@pytest.mark.parametrize('tech', DEFAULT_TECHNOLOGIES,
                         ids=lambda t: t.id)
def test_calibration(channel, tech):
    bits = tech.max_payload_bits
    r = tech.max_range
    assert channel.per_of_link(r, tech.id, bits) == pytest.approx(.5, abs=1e-6)
    assert channel.per_of_link(r / 2, tech.id, bits) < .01
    assert channel.per_of_link(1.2 * r, tech.id, bits) > .99


def test_calibration_clamp():
    # Source too weak to reach the nominal range even without absorption.
    tech = TechnologyClass('XF', 1000., 3000., source_level_db=60.)
    assert calibrate_absorption(tech) == 0.


def test_snr_decreasing(channel):
    for t in ('LF', 'MF', 'HF'):
        snrs = [channel.snr_db(d, t) for d in (1., 10., 50., 100., 1000.)]
        assert all(a > b for a, b in zip(snrs, snrs[1:]))
    with pytest.raises(ValueError):
        channel.snr_db(0., 'LF')


def test_propagation_delay(channel):
    assert channel.sound_speed == 1500.
    assert channel.propagation_delay(1500.) == pytest.approx(1.)
    assert channel.propagation_delay(100.) == pytest.approx(1 / 15)
