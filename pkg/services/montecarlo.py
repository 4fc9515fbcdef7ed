"""
Homodyne sampler for the symmetric Gaussian channel and the empirical estimators built on it.

Draws are generated in fixed-size blocks; block k uses a Philox generator seeded with
SeedSequence(seed, spawn_key=(k,)). Each block reduces to power sums, and the sums are
added in block order, so a report depends only on (params, seed, n_samples, block_size)
and never on the worker count.
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from models import ChannelParams, McConfig, McReport, MomentEstimate, ProtocolParams
from services.fidelity_bounds import f0_from_moments
from utils.parallel_utils import ordered_map

logger = logging.getLogger(__name__)

MAX_ORDER = 4
SIGNS = (1, -1)        # index 0: +alpha, index 1: -alpha
QUADRATURES = ("x", "p")


def rng_name() -> str:
    return f"numpy.random.Philox/{np.__version__}"


def block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _box_muller(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    # 1 - u1 lies in (0, 1], so the log is finite
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def _sample_block(task: Tuple[int, int, int, float, float, float]) -> Tuple[np.ndarray, int, int, int]:
    """
    One block of draws.

    Returns:
        (power sums shaped (2 signs, 2 quadratures, MAX_ORDER + 1), sifted, errors, x-basis count)
    """
    block, size, seed, signal, sigma, x_th = task
    rng = block_generator(seed, block)
    u = rng.random((4, size))
    sign = np.where(u[0] < 0.5, 1.0, -1.0)
    x_basis = u[1] < 0.5
    outcome = np.where(x_basis, sign * signal, 0.0) + sigma * _box_muller(u[2], u[3])

    sums = np.zeros((2, 2, MAX_ORDER + 1))
    for s_idx, s in enumerate(SIGNS):
        for q_idx, in_quad in enumerate((x_basis, ~x_basis)):
            values = outcome[(sign == s) & in_quad]
            power = np.ones_like(values)
            for order in range(MAX_ORDER + 1):
                sums[s_idx, q_idx, order] = power.sum()
                power = power * values

    x_values = outcome[x_basis]
    x_signs = sign[x_basis]
    kept = np.abs(x_values) >= x_th
    errors = np.count_nonzero(kept & (np.sign(x_values) != x_signs))
    return sums, int(np.count_nonzero(kept)), int(errors), int(x_values.size)


def _shifted_sums(sums: np.ndarray, shift: float) -> np.ndarray:
    """Power sums of (v - shift) up to MAX_ORDER from the raw power sums of v."""
    shifted = np.zeros_like(sums)
    for k in range(MAX_ORDER + 1):
        shifted[k] = sum(math.comb(k, j) * sums[j] * (-shift) ** (k - j) for j in range(k + 1))
    return shifted


def _mean_and_se(sums: np.ndarray, order: int) -> Tuple[float, float]:
    """Sample mean of v**order and its standard error (ddof = 1)."""
    n = sums[0]
    if n < 1:
        return float("nan"), float("nan")
    mean = sums[order] / n
    if n < 2:
        return float(mean), float("nan")
    variance = max((sums[2 * order] - n * mean * mean) / (n - 1.0), 0.0)
    return float(mean), float(math.sqrt(variance / n))


def _moment_estimate(sums: np.ndarray) -> MomentEstimate:
    x_sums, p_sums = sums
    mean_x, se_mean_x = _mean_and_se(x_sums, 1)
    mean_x2, se_mean_x2 = _mean_and_se(x_sums, 2)
    mean_p, se_mean_p = _mean_and_se(p_sums, 1)
    mean_p2, se_mean_p2 = _mean_and_se(p_sums, 2)
    return MomentEstimate(
        mean_x=mean_x, mean_p=mean_p, mean_x2=mean_x2, mean_p2=mean_p2,
        se_mean_x=se_mean_x, se_mean_p=se_mean_p, se_mean_x2=se_mean_x2, se_mean_p2=se_mean_p2,
        n_x=int(x_sums[0]), n_p=int(p_sums[0]),
    )


def _f0_and_se(sums: np.ndarray, beta: float) -> Tuple[float, float]:
    """F0 at real beta from power sums; branch s is compared with s*beta on x, 0 on p."""
    f0 = 1.5
    variance = 0.0
    for s_idx, s in enumerate(SIGNS):
        for q_idx in range(2):
            shift = s * beta if q_idx == 0 else 0.0
            mean, se = _mean_and_se(_shifted_sums(sums[s_idx, q_idx], shift), 2)
            f0 -= 0.5 * mean
            variance += 0.25 * se * se
    return f0, math.sqrt(variance)


def sample_homodyne(p: ProtocolParams, ch: ChannelParams, cfg: Optional[McConfig] = None,
                    workers: Optional[int] = None) -> McReport:
    cfg = cfg or McConfig()
    signal = math.sqrt(ch.eta) * p.alpha
    sigma = math.sqrt((1.0 + ch.xi) / 4.0)

    tasks = []
    for block, start in enumerate(range(0, cfg.n_samples, cfg.block_size)):
        size = min(cfg.block_size, cfg.n_samples - start)
        tasks.append((block, size, cfg.seed, signal, sigma, p.x_th))
    logger.info(f"Sampling {cfg.n_samples} homodyne outcomes in {len(tasks)} blocks (seed={cfg.seed})")

    results = ordered_map(_sample_block, tasks, workers=workers, kind="thread")
    sums = np.zeros((2, 2, MAX_ORDER + 1))
    sifted = errors = n_x = 0
    for block_sums, block_sifted, block_errors, block_x in results:
        sums += block_sums
        sifted += block_sifted
        errors += block_errors
        n_x += block_x

    p_sift_hat = sifted / n_x if n_x else 0.0
    p_sift_se = math.sqrt(p_sift_hat * (1.0 - p_sift_hat) / n_x) if n_x else 0.5
    if sifted:
        e_bit_hat = errors / sifted
        e_bit_se = math.sqrt(e_bit_hat * (1.0 - e_bit_hat) / sifted)
    else:
        logger.warning("No outcome survived postselection; reporting e_bit_hat = 0.5 ± 0.5")
        e_bit_hat, e_bit_se = 0.5, 0.5

    f0_hat, f0_se = _f0_and_se(sums, signal)
    report = McReport(
        p_sift_hat=p_sift_hat,
        p_sift_se=p_sift_se,
        e_bit_hat=e_bit_hat,
        e_bit_se=e_bit_se,
        moments_plus=_moment_estimate(sums[0]),
        moments_minus=_moment_estimate(sums[1]),
        f0_hat=f0_hat,
        f0_se=f0_se,
        beta=signal,
        n_samples=cfg.n_samples,
        seed=cfg.seed,
        block_size=cfg.block_size,
        rng=rng_name(),
        power_sums=sums.tolist(),
    )
    logger.info(f"MC estimates: p_sift={p_sift_hat:.6f}±{p_sift_se:.1e}, "
                f"e_bit={e_bit_hat:.6f}±{e_bit_se:.1e}, F0={f0_hat:.6f}±{f0_se:.1e}")
    return report


def _report_sums(report: McReport) -> np.ndarray:
    return np.asarray(report.power_sums, dtype=np.float64)


def empirical_f0(report: McReport, beta: float) -> float:
    """Moment-based fidelity bound evaluated on the sampled moments."""
    return f0_from_moments(report.moments_plus, report.moments_minus, beta, 0.0)


def f0_standard_error(report: McReport, beta: float) -> float:
    return _f0_and_se(_report_sums(report), beta)[1]


def standard_errors(report: McReport) -> List[float]:
    """Every standard error in the report, in a fixed order."""
    errors = [report.p_sift_se, report.e_bit_se, report.f0_se]
    for mom in (report.moments_plus, report.moments_minus):
        errors.extend([mom.se_mean_x, mom.se_mean_p, mom.se_mean_x2, mom.se_mean_p2])
    return errors
