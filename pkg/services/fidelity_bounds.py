"""
Fidelity lower bounds from homodyne moments, the heterodyne-based bound, and the
comparison table against the exact Gaussian-channel fidelity.
"""

import logging
import math
from typing import Iterable, List, Optional, Tuple

from exceptions import DomainError
from models import ChannelParams, LambdaParams, ProtocolParams, QuadratureMoments
from services.channel import exact_fidelity, output_moments

logger = logging.getLogger(__name__)

BOUND_TABLE_HEADER = ("xi", "exact", "lambda", "theorem1")


def _second_moment_about(mom: QuadratureMoments, beta_x: float, beta_p: float) -> float:
    return (mom.mean_x2 - 2.0 * beta_x * mom.mean_x + beta_x * beta_x
            + mom.mean_p2 - 2.0 * beta_p * mom.mean_p + beta_p * beta_p)


def theorem1_bound(mom: QuadratureMoments, beta_x: float, beta_p: float) -> float:
    """Lower bound on <beta|rho|beta>; negative values are returned unclamped."""
    return 1.5 - _second_moment_about(mom, beta_x, beta_p)


def f0_from_moments(mom_plus: QuadratureMoments, mom_minus: QuadratureMoments,
                    beta_x: float, beta_p: float) -> float:
    return (1.5
            - 0.5 * _second_moment_about(mom_plus, beta_x, beta_p)
            - 0.5 * _second_moment_about(mom_minus, -beta_x, -beta_p))


def f0_gaussian(p: ProtocolParams, ch: ChannelParams, beta: float) -> float:
    offset = math.sqrt(ch.eta) * p.alpha - beta
    return (1.0 - ch.xi / 2.0) - offset * offset


def f0_gaussian_pipeline(p: ProtocolParams, ch: ChannelParams, beta: float) -> float:
    """Same quantity as f0_gaussian, routed through the channel moments."""
    return f0_from_moments(output_moments(ch, p.alpha, 1), output_moments(ch, p.alpha, -1), beta, 0.0)


def exact_fidelity_displaced(ch: ChannelParams, alpha: float, beta: float) -> float:
    """<beta|rho|beta> for the displaced thermal output state of the channel."""
    spread = 1.0 + ch.xi / 2.0
    offset = beta - math.sqrt(ch.eta) * alpha
    return math.exp(-offset * offset / spread) / spread


def lambda_bound(xi: float, lp: Optional[LambdaParams] = None) -> float:
    lp = lp or LambdaParams()
    if xi < 0.0:
        raise DomainError(f"excess noise must be ≥ 0, got {xi}", value=xi)
    spread = 1.0 + xi / 2.0
    ratio = (xi / 2.0) / (1.0 + lp.r * spread)
    sign = -1.0 if (lp.m + 1) % 2 else 1.0
    return (1.0 - sign * ratio ** (lp.m + 1)) / spread


def bound_comparison_table(xi_grid: Iterable[float],
                           lp: Optional[LambdaParams] = None) -> List[Tuple[float, float, float, float]]:
    rows = []
    for xi in xi_grid:
        xi = float(xi)
        if xi < 0.0:
            raise DomainError(f"excess noise must be ≥ 0, got {xi}", value=xi)
        exact = exact_fidelity(ChannelParams(eta=1.0, xi=xi))
        rows.append((xi, exact, lambda_bound(xi, lp), 1.0 - xi / 2.0))
    logger.debug(f"Built fidelity comparison table with {len(rows)} rows")
    return rows
