from typing import Dict, List, Optional, Sequence, Tuple
import logging
import math
import traceback

from exceptions import ConfigurationError, VerificationError
from models import (
    ChannelParams,
    DualParams,
    GridRange,
    McReport,
    ProtocolParams,
    RunConfig,
)
from optimization_config import (
    FIDELITY_XI_GRID,
    MC_DEFAULT_POINT,
    SWEEP_LOSS_GRID,
    VERIFY_DEFAULTS,
    VERIFY_TOLERANCES,
)
from services.channel import bit_error_rate, output_moments, sift_probability
from services.fidelity_bounds import BOUND_TABLE_HEADER, bound_comparison_table, f0_gaussian
from services.fock_oracle import operator_inequality_check, theorem1_operator_check
from services.montecarlo import sample_homodyne
from services.optimizer import (
    MULTI_SWEEP_HEADER,
    beta_refinement_gain,
    grid_optimize,
    sweep_noise_levels,
)
from services.phase_error import key_rate

logger = logging.getLogger(__name__)

Table = Tuple[Sequence[str], List[Tuple[float, ...]]]


class KeyRateService:
    """Runs each command's pipeline on a validated RunConfig."""

    def __init__(self, workers: Optional[int] = None):
        self.workers = workers
        # Map command names to handlers
        self.commands = {
            "keyrate": self.compute_key_rate,
            "sweep": self.sweep,
            "optimize": self.optimize,
            "fidelity-bounds": self.fidelity_bounds,
            "verify-operator": self.verify_operator,
            "mc": self.monte_carlo,
        }

    def run(self, command: str, cfg: RunConfig, **options):
        handler = self.commands.get(command)
        if handler is None:
            raise ConfigurationError(f"Unknown command: {command}")
        logger.info(f"Running {command}")
        try:
            result = handler(cfg, **options)
        except VerificationError:
            raise
        except Exception as e:
            logger.error(f"{command} failed: {e}\n{traceback.format_exc()}")
            raise
        logger.info(f"Finished {command}")
        return result

    @staticmethod
    def _require(cfg: RunConfig, *names: str) -> None:
        missing = [name for name in names if getattr(cfg, name) is None]
        if missing:
            raise ConfigurationError(f"missing required parameter sets: {', '.join(missing)}")

    @staticmethod
    def _f_ec(cfg: RunConfig) -> float:
        if cfg.f_ec is not None:
            return cfg.f_ec
        return cfg.protocol.f_ec if cfg.protocol else 1.0

    def compute_key_rate(self, cfg: RunConfig) -> Dict:
        self._require(cfg, "protocol", "channel", "dual")
        breakdown = key_rate(cfg.protocol, cfg.channel, cfg.dual, cfg.fidelity_model)
        return breakdown.model_dump()

    def optimize(self, cfg: RunConfig, compare_fixed_beta: bool = False) -> Dict:
        self._require(cfg, "channel")
        f_ec = self._f_ec(cfg)
        result = grid_optimize(cfg.channel, cfg.grid, f_ec, workers=self.workers,
                               fidelity_model=cfg.fidelity_model)
        payload = result.model_dump()
        if compare_fixed_beta:
            fixed_rate, refined_rate, gain = beta_refinement_gain(cfg.channel, cfg.grid, f_ec, workers=self.workers)
            payload["fixed_beta_rate"] = fixed_rate
            payload["refined_beta_rate"] = refined_rate
            payload["beta_refinement_gain"] = gain
        return payload

    def sweep(self, cfg: RunConfig) -> Table:
        f_ec = self._f_ec(cfg)
        loss = cfg.loss or GridRange.from_tuple(SWEEP_LOSS_GRID)
        rows = sweep_noise_levels(cfg.xi, loss.values(), cfg.grid, f_ec, workers=self.workers)
        return MULTI_SWEEP_HEADER, rows

    def fidelity_bounds(self, cfg: RunConfig) -> Table:
        xi_grid = cfg.xi_grid or GridRange.from_tuple(FIDELITY_XI_GRID)
        return BOUND_TABLE_HEADER, bound_comparison_table(xi_grid.values(), cfg.lambda_params)

    def verify_operator(self, cfg: RunConfig) -> Dict:
        """Operator inequality at the configured dual point plus the moment-fidelity check at beta = 0 and beta."""
        dual = cfg.dual or DualParams(kappa=VERIFY_DEFAULTS['kappa'], gamma=VERIFY_DEFAULTS['gamma'],
                                      beta_R=VERIFY_DEFAULTS['beta'])
        if cfg.x_th is not None:
            x_th = cfg.x_th
        else:
            x_th = cfg.protocol.x_th if cfg.protocol else VERIFY_DEFAULTS["x_th"]

        inequality = operator_inequality_check(dual, x_th, cfg.n_max)
        theorem1 = [theorem1_operator_check(beta, cfg.n_max) for beta in sorted({0.0, dual.beta_R})]
        passed = inequality["passed"] and all(check["passed"] for check in theorem1)

        report = {
            "lambda_min": inequality["lambda_min"],
            "n_max": inequality["n_max"],
            "converged": inequality["converged"],
            "truncation_shift": inequality["truncation_shift"],
            "tolerance": inequality["tolerance"],
            "passed": passed,
            "operator_inequality": inequality,
            "theorem1": theorem1,
        }
        if not passed:
            raise VerificationError("operator verification breached its tolerance", report=report)
        return report

    def monte_carlo(self, cfg: RunConfig) -> Dict:
        """Sample, then compare every estimate with its closed form at the configured number of standard errors."""
        p = cfg.protocol or ProtocolParams(alpha=MC_DEFAULT_POINT['alpha'], x_th=MC_DEFAULT_POINT['x_th'])
        ch = cfg.channel or ChannelParams(eta=MC_DEFAULT_POINT['eta'], xi=MC_DEFAULT_POINT['xi'])
        report = sample_homodyne(p, ch, cfg.mc, workers=self.workers)

        checks = self.closed_form_checks(report, p, ch)
        passed = all(check["passed"] for check in checks)
        payload = report.model_dump(exclude={"power_sums"})
        payload["checks"] = checks
        payload["passed"] = passed
        if not passed:
            raise VerificationError("Monte Carlo estimates disagree with the closed forms", report=payload)
        return payload

    @staticmethod
    def closed_form_checks(report: McReport, p: ProtocolParams, ch: ChannelParams,
                           n_sigmas: float = VERIFY_TOLERANCES['mc_sigmas']) -> List[Dict]:
        expected_plus = output_moments(ch, p.alpha, 1)
        expected_minus = output_moments(ch, p.alpha, -1)
        pairs = [
            ("p_sift", report.p_sift_hat, report.p_sift_se, sift_probability(p, ch)),
            ("e_bit", report.e_bit_hat, report.e_bit_se, bit_error_rate(p, ch)),
            ("f0", report.f0_hat, report.f0_se, f0_gaussian(p, ch, report.beta)),
        ]
        for label, estimate, expected in (("plus", report.moments_plus, expected_plus),
                                          ("minus", report.moments_minus, expected_minus)):
            for field in ("mean_x", "mean_p", "mean_x2", "mean_p2"):
                pairs.append((f"{field}_{label}", getattr(estimate, field),
                              getattr(estimate, f"se_{field}"), getattr(expected, field)))

        checks = []
        for name, estimate, se, expected in pairs:
            allowed = max(n_sigmas * se, 1e-12) if math.isfinite(se) else math.inf
            deviation = abs(estimate - expected)
            checks.append({
                "quantity": name,
                "estimate": estimate,
                "standard_error": se,
                "closed_form": expected,
                "passed": bool(deviation <= allowed),
            })
        return checks
