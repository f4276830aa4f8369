# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
"""Parametric acoustic channel.

Transmission loss is modeled as practical spreading plus linear absorption::

    TL(d) = 10 k log10(d) + alpha d                      [dB]
    SNR(d) = SL - TL(d) - (NL + 10 log10(B))             [dB]

Links use BPSK, so the bit error rate is ``Q(sqrt(2 snr))`` and a packet of
``n`` bits is lost with probability ``1 - (1 - BER)**n``.

The absorption coefficient of each technology is calibrated so that a
max-payload datagram is lost half the time at the technology's nominal range.
"""
from dataclasses import dataclass
import math
from typing import Dict

from scipy.optimize import brentq
from scipy.special import erfc

__all__ = ['ChannelModel', 'TechnologyChannel', 'bit_error_rate',
           'calibrate_absorption', 'edge_snr_db', 'per_from_snr']


SOUND_SPEED = 1500.
SPREADING_EXPONENT = 1.5


def bit_error_rate(snr_linear):
    """BPSK bit error rate ``Q(sqrt(2 snr)) = erfc(sqrt(snr)) / 2``."""
    if snr_linear <= 0:
        return 0.5
    return 0.5 * float(erfc(math.sqrt(snr_linear)))


def per_from_snr(snr_linear, bits):
    """Probability that a packet of `bits` bits has at least one bit error."""
    if bits <= 0:
        return 0.
    ber = bit_error_rate(snr_linear)
    if ber >= 1:
        return 1.
    return float(-math.expm1(bits * math.log1p(-ber)))


def edge_snr_db(bits, target_per=0.5):
    """SNR (dB) at which a packet of `bits` bits has PER `target_per`."""
    if not 0 < target_per < 1:
        raise ValueError(f'Target PER must lie in (0, 1); got {target_per}.')
    def f(snr_db):
        return per_from_snr(10 ** (snr_db / 10), bits) - target_per
    return brentq(f, -30., 60., xtol=1e-10)


def calibrate_absorption(tech, spreading_exponent=SPREADING_EXPONENT,
                         target_per=0.5):
    """Absorption (dB/m) putting the `target_per` point of a max-payload
    datagram at ``tech.max_range``. Clamped below at 0."""
    r = tech.max_range
    noise = tech.noise_level_db + 10 * math.log10(tech.bandwidth_hz)
    margin = (tech.source_level_db - 10 * spreading_exponent * math.log10(r)
              - noise - edge_snr_db(tech.max_payload_bits, target_per))
    return max(0., margin / r)


@dataclass(frozen=True)
class TechnologyChannel:
    """Channel parameters of one technology."""
    source_level_db: float
    noise_level_db: float
    bandwidth_hz: float
    spreading_exponent: float
    absorption_db_per_m: float

    def snr_db(self, distance):
        if distance <= 0:
            raise ValueError('Distance must be positive.')
        tl = (10 * self.spreading_exponent * math.log10(distance) +
              self.absorption_db_per_m * distance)
        noise = self.noise_level_db + 10 * math.log10(self.bandwidth_hz)
        return self.source_level_db - tl - noise


@dataclass(frozen=True)
class ChannelModel:
    """Per-technology channel plus sound speed.

    Parameters
    ----------
    techs : dict
        Mapping from technology id to :class:`TechnologyChannel`.

    sound_speed : float, optional
        Sound speed in m/s.
        (Default: 1500.)
    """
    techs: Dict[str, TechnologyChannel]
    sound_speed: float = SOUND_SPEED

    @classmethod
    def calibrated(cls, technologies, spreading_exponent=SPREADING_EXPONENT,
                   sound_speed=SOUND_SPEED):
        """Build model for `technologies` with calibrated absorption.

        Parameters
        ----------
        technologies : Mapping[str, TechnologyClass] or Iterable[TechnologyClass]
            Technology catalog.
        """
        if hasattr(technologies, 'values'):
            technologies = technologies.values()
        techs = {}
        for tech in technologies:
            techs[tech.id] = TechnologyChannel(
                tech.source_level_db, tech.noise_level_db, tech.bandwidth_hz,
                spreading_exponent,
                calibrate_absorption(tech, spreading_exponent))
        return cls(techs, sound_speed)

    def snr_db(self, distance, tech):
        return self.techs[tech].snr_db(distance)

    def per_of_link(self, distance, tech, bits):
        """Packet error rate of a `bits`-bit packet sent over `distance`
        meters on technology `tech`."""
        snr = 10 ** (self.snr_db(distance, tech) / 10)
        return per_from_snr(snr, bits)

    def propagation_delay(self, distance):
        return distance / self.sound_speed
