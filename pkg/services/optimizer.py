"""
Staged maximization of the key rate over (alpha, x_th, kappa, gamma, beta).

Every (alpha, x_th) cell evaluates its whole (kappa, gamma) grid in one batch with beta
pinned at sqrt(eta)*alpha. Cells are reduced in ascending (alpha, x_th) order and an
incumbent is replaced only on strict improvement; inside a cell np.argmax returns the
first maximum in (kappa, gamma) order. Ties therefore go to the lexicographically
smallest argument whatever the worker count. beta is then refined at the incumbent.
"""

import logging
import math
from typing import Iterable, List, Optional, Tuple

import numpy as np

from exceptions import ConfigurationError
from models import (
    BetaSchedule,
    ChannelParams,
    DualParams,
    GridSpec,
    KeyRateBreakdown,
    OptArg,
    OptResult,
    ProtocolParams,
)
from services.phase_error import key_rate, key_rate_batch
from utils.parallel_utils import ordered_map

logger = logging.getLogger(__name__)

SWEEP_HEADER = ("loss", "rate", "alpha", "x_th", "kappa", "gamma", "beta")
MULTI_SWEEP_HEADER = ("xi",) + SWEEP_HEADER


def effective_grids(g: GridSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    alphas = np.sqrt(g.alpha2_grid.values())
    x_ths = g.x_th_grid.values()
    kappas = g.kappa_grid.values()
    gammas = g.gamma_grid.values()
    alphas = alphas[alphas > 0.0]
    for name, values in (("alpha", alphas), ("x_th", x_ths), ("kappa", kappas), ("gamma", gammas)):
        if values.size == 0:
            raise ConfigurationError(f"effective {name} grid is empty")
    return alphas, x_ths, kappas, gammas


def _evaluate_cell(task) -> Tuple[float, float, float, int]:
    """Best (rate, kappa, gamma) of one (alpha, x_th) cell; top level so it pickles."""
    alpha, x_th, eta, xi, f_ec, kappas, gammas, fidelity_model = task
    p = ProtocolParams(alpha=alpha, x_th=x_th, f_ec=f_ec)
    ch = ChannelParams(eta=eta, xi=xi)
    beta = math.sqrt(eta) * alpha
    rates, _, _ = key_rate_batch(p, ch, beta, kappas[:, None], gammas[None, :], fidelity_model)
    flat = int(np.argmax(rates))
    i, j = np.unravel_index(flat, rates.shape)
    return float(rates[i, j]), float(kappas[i]), float(gammas[j]), int(rates.size)


def refine_beta(p: ProtocolParams, ch: ChannelParams, kappa: float, gamma: float, beta0: float,
                schedule: Optional[BetaSchedule] = None,
                fidelity_model: str = "homodyne") -> Tuple[float, KeyRateBreakdown, int]:
    """
    Line search on beta inside [(1 - window) beta0, (1 + window) beta0].

    A uniform scan with step rel_step*beta0 is followed by `rounds` of trial points at
    beta* ± step, halving the step each round. beta0 stays unless something is
    strictly better, so the result never falls below the matched choice.

    Returns:
        (beta, breakdown, evaluations)
    """
    schedule = schedule or BetaSchedule()
    if beta0 <= 0.0:
        raise ConfigurationError(f"beta refinement needs beta0 > 0, got {beta0}")

    def evaluate(beta: float) -> KeyRateBreakdown:
        return key_rate(p, ch, DualParams(kappa=kappa, gamma=gamma, beta_R=beta, beta_I=0.0), fidelity_model)

    lower = (1.0 - schedule.window) * beta0
    upper = (1.0 + schedule.window) * beta0
    best_beta = beta0
    best = evaluate(beta0)
    evaluations = 1

    steps = int(round(2.0 * schedule.window / schedule.rel_step))
    for i in range(steps + 1):
        beta = lower + i * schedule.rel_step * beta0
        if beta <= 0.0 or beta == beta0:
            continue
        candidate = evaluate(beta)
        evaluations += 1
        if candidate.rate > best.rate:
            best_beta, best = beta, candidate

    step = schedule.rel_step * beta0
    for _ in range(schedule.rounds):
        step *= schedule.shrink
        for beta in (best_beta - step, best_beta + step):
            if beta < lower or beta > upper or beta <= 0.0:
                continue
            candidate = evaluate(beta)
            evaluations += 1
            if candidate.rate > best.rate:
                best_beta, best = beta, candidate

    logger.debug(f"beta refinement: {beta0:.6f} -> {best_beta:.6f}, rate {best.rate:.6e} ({evaluations} evaluations)")
    return best_beta, best, evaluations


def grid_optimize(ch: ChannelParams, g: Optional[GridSpec] = None, f_ec: float = 1.0,
                  refine: bool = True, workers: Optional[int] = None,
                  fidelity_model: str = "homodyne") -> OptResult:
    g = g or GridSpec()
    alphas, x_ths, kappas, gammas = effective_grids(g)
    tasks = [(float(a), float(x), ch.eta, ch.xi, f_ec, kappas, gammas, fidelity_model)
             for a in alphas for x in x_ths]
    logger.info(f"Optimizing over {len(tasks)} (alpha, x_th) cells x {kappas.size * gammas.size} duals "
                f"at eta={ch.eta}, xi={ch.xi}")

    try:
        results = ordered_map(_evaluate_cell, tasks, workers=workers, kind="process")
    except Exception as e:
        logger.error(f"Grid evaluation failed at eta={ch.eta}, xi={ch.xi}: {e}")
        raise

    best_index = 0
    evaluations = 0
    for index, (rate, _, _, count) in enumerate(results):
        evaluations += count
        if rate > results[best_index][0]:
            best_index = index
    best_rate, kappa, gamma, _ = results[best_index]
    alpha, x_th = tasks[best_index][0], tasks[best_index][1]

    p = ProtocolParams(alpha=alpha, x_th=x_th, f_ec=f_ec)
    beta0 = math.sqrt(ch.eta) * alpha
    beta = beta0
    best = key_rate(p, ch, DualParams(kappa=kappa, gamma=gamma, beta_R=beta0), fidelity_model)
    refined = False
    if refine and beta0 > 0.0 and fidelity_model != "heterodyne":
        beta, best, extra = refine_beta(p, ch, kappa, gamma, beta0, g.beta_refine, fidelity_model)
        evaluations += extra
        refined = True

    logger.info(f"Incumbent at eta={ch.eta}, xi={ch.xi}: rate={best.rate:.6e} alpha={alpha:.4f} "
                f"x_th={x_th:.3f} kappa={kappa:.2f} gamma={gamma:.2f} beta={beta:.6f}")
    return OptResult(
        best=best,
        arg=OptArg(alpha=alpha, x_th=x_th, kappa=kappa, gamma=gamma, beta=beta),
        evaluations=evaluations,
        refined=refined,
    )


def beta_refinement_gain(ch: ChannelParams, g: Optional[GridSpec] = None, f_ec: float = 1.0,
                         workers: Optional[int] = None) -> Tuple[float, float, float]:
    """(fixed-beta rate, refined rate, relative gain); gain is 0 when the fixed rate is 0."""
    g = g or GridSpec()
    fixed = grid_optimize(ch, g, f_ec, refine=False, workers=workers)
    arg = fixed.arg
    if arg.beta <= 0.0:
        return fixed.best.rate, fixed.best.rate, 0.0
    p = ProtocolParams(alpha=arg.alpha, x_th=arg.x_th, f_ec=f_ec)
    _, refined, _ = refine_beta(p, ch, arg.kappa, arg.gamma, arg.beta, g.beta_refine)
    gain = (refined.rate - fixed.best.rate) / fixed.best.rate if fixed.best.rate > 0.0 else 0.0
    logger.info(f"beta refinement gain at eta={ch.eta}, xi={ch.xi}: {100.0 * gain:.3f}%")
    return fixed.best.rate, refined.rate, gain


def sweep_loss(xi: float, loss_grid: Iterable[float], g: Optional[GridSpec] = None, f_ec: float = 1.0,
               workers: Optional[int] = None) -> List[Tuple[float, ...]]:
    """Rows (loss, rate, alpha, x_th, kappa, gamma, beta), ordered by loss."""
    rows = []
    for loss in sorted(float(v) for v in loss_grid):
        result = grid_optimize(ChannelParams(eta=1.0 - loss, xi=xi), g, f_ec, workers=workers)
        rows.append((loss, result.best.rate) + result.arg.as_tuple())
    return rows


def sweep_noise_levels(xi_list: Iterable[float], loss_grid: Iterable[float], g: Optional[GridSpec] = None,
                       f_ec: float = 1.0, workers: Optional[int] = None) -> List[Tuple[float, ...]]:
    """Concatenated loss sweeps with a leading xi column."""
    loss_values = list(loss_grid)
    rows = []
    for xi in xi_list:
        rows.extend((float(xi),) + row for row in sweep_loss(xi, loss_values, g, f_ec, workers))
    return rows
