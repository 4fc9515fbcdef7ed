"""
Symmetric Gaussian channel: output moments, fidelity, sifting probability and bit error rate.

Given sign s, the x-quadrature outcome is Normal(s*sqrt(eta)*alpha, (1+xi)/4) and the
p-quadrature outcome is Normal(0, (1+xi)/4).
"""

import logging
import math

from exceptions import DomainError
from models import ChannelParams, Moments, ProtocolParams
from utils.special_math import erfc

logger = logging.getLogger(__name__)


def _signal(alpha: float, ch: ChannelParams) -> float:
    return math.sqrt(ch.eta) * alpha


def _scale(ch: ChannelParams) -> float:
    # 1 / (sqrt(2) * sigma) with sigma^2 = (1 + xi)/4
    return math.sqrt(2.0 / (1.0 + ch.xi))


def output_moments(ch: ChannelParams, alpha: float, sign: int) -> Moments:
    if sign not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {sign}", value=sign)
    variance = (1.0 + ch.xi) / 4.0
    return Moments(
        mean_x=sign * _signal(alpha, ch),
        mean_p=0.0,
        mean_x2=ch.eta * alpha * alpha + variance,
        mean_p2=variance,
    )


def near_far_tails(p: ProtocolParams, ch: ChannelParams):
    """(correct-sign tail, wrong-sign tail) as erfc values; their sum is 2 * p_sift."""
    z = _scale(ch)
    s = _signal(p.alpha, ch)
    return erfc(z * (p.x_th - s)), erfc(z * (p.x_th + s))


def sift_probability(p: ProtocolParams, ch: ChannelParams) -> float:
    near, far = near_far_tails(p, ch)
    return 0.5 * near + 0.5 * far


def bit_error_rate(p: ProtocolParams, ch: ChannelParams) -> float:
    """Fraction of sifted outcomes on the wrong side, i.e. beyond -x_th when +alpha was sent."""
    near, far = near_far_tails(p, ch)
    p_sift = 0.5 * (near + far)
    if p_sift <= 0.0:
        logger.warning(f"Sifting probability underflowed at x_th={p.x_th}, xi={ch.xi}; reporting e_bit = 0.5")
        return 0.5
    return far / (2.0 * p_sift)


def exact_fidelity(ch: ChannelParams) -> float:
    return 1.0 / (1.0 + ch.xi / 2.0)
