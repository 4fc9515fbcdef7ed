"""
Truncated Fock-space verification of the phase-error operator inequality and of the
closed-form parity overlaps.

Joint operators live on {|0>_A, |1>_A} x {|0>, ..., |n_max>}; index a * (n_max + 1) + n.
Truncated coherent vectors are kept unnormalized so every operator here is the exact
compression of its infinite-dimensional counterpart.
"""

import logging
import math
from functools import lru_cache
from typing import Dict

import numpy as np
from scipy.special import gammaln

from exceptions import DomainError
from models import CoherentVector, DualParams, FockOperator
from optimization_config import FOCK_CONFIG, VERIFY_TOLERANCES
from services.phase_error import b_constant
from utils.special_math import hermite_psi_table, integrate_tail, sym_eig_extreme

logger = logging.getLogger(__name__)

PLUS = 0.5 * np.array([[1.0, 1.0], [1.0, 1.0]])
MINUS = 0.5 * np.array([[1.0, -1.0], [-1.0, 1.0]])
QUBIT_ZERO = np.array([[1.0, 0.0], [0.0, 0.0]])
QUBIT_ONE = np.array([[0.0, 0.0], [0.0, 1.0]])


def coherent_fock(beta: float, n_max: int) -> CoherentVector:
    """Entries exp(-beta^2/2) beta^n / sqrt(n!) for n = 0..n_max, evaluated in the log domain."""
    if n_max < 0:
        raise DomainError(f"n_max must be ≥ 0, got {n_max}", value=n_max)
    beta = float(beta)
    n = np.arange(n_max + 1)
    amplitudes = np.zeros(n_max + 1)
    if beta == 0.0:
        amplitudes[0] = 1.0
    else:
        log_mag = -0.5 * beta * beta + n * math.log(abs(beta)) - 0.5 * gammaln(n + 1.0)
        amplitudes = np.where((beta < 0.0) & (n % 2 == 1), -1.0, 1.0) * np.exp(log_mag)
    weight = max(0.0, 1.0 - float(amplitudes @ amplitudes))
    return CoherentVector(amplitudes=amplitudes, truncation_weight=weight)


@lru_cache(maxsize=32)
def _tail_overlaps(x_th: float, n_max: int) -> np.ndarray:
    """2 * integral_{x_th}^inf psi_m psi_n for all m, n; read-only."""
    def integrand(points):
        psi = hermite_psi_table(n_max, points)
        return psi[:, None, :] * psi[None, :, :]

    overlaps = 2.0 * integrate_tail(integrand, x_th)
    overlaps = 0.5 * (overlaps + overlaps.T)
    overlaps.setflags(write=False)
    logger.debug(f"Computed tail overlaps for x_th={x_th}, n_max={n_max}")
    return overlaps


def _parity_mask(parity: str, n_max: int) -> np.ndarray:
    if parity not in ("even", "odd"):
        raise DomainError(f"parity must be 'even' or 'odd', got {parity!r}", value=parity)
    selected = (np.arange(n_max + 1) % 2) == (0 if parity == "even" else 1)
    return selected[:, None] & selected[None, :]


def m_suc_matrix(parity: str, x_th: float, n_max: int = FOCK_CONFIG['n_max']) -> FockOperator:
    if x_th < 0.0:
        raise DomainError(f"postselection threshold must be ≥ 0, got {x_th}", value=x_th)
    mask = _parity_mask(parity, n_max)
    matrix = np.where(mask, _tail_overlaps(float(x_th), int(n_max)), 0.0)
    return FockOperator(n_max=n_max, matrix=matrix, basis_tag="mode")


def m_ph_suc(x_th: float, n_max: int = FOCK_CONFIG['n_max']) -> FockOperator:
    m_od = m_suc_matrix("odd", x_th, n_max).matrix
    m_ev = m_suc_matrix("even", x_th, n_max).matrix
    matrix = np.kron(PLUS, m_od) + np.kron(MINUS, m_ev)
    return FockOperator(n_max=n_max, matrix=matrix, basis_tag="qubit_mode")


def coherent_expectation(parity: str, beta: float, x_th: float, n_max: int = FOCK_CONFIG['n_max']) -> float:
    """<beta|M_parity|beta> with the truncated coherent vector."""
    v = coherent_fock(beta, n_max).amplitudes
    return float(v @ m_suc_matrix(parity, x_th, n_max).matrix @ v)


def fidelity_projector(beta: float, n_max: int) -> FockOperator:
    v = coherent_fock(beta, n_max).amplitudes
    w = coherent_fock(-beta, n_max).amplitudes
    matrix = np.kron(QUBIT_ZERO, np.outer(v, v)) + np.kron(QUBIT_ONE, np.outer(w, w))
    return FockOperator(n_max=n_max, matrix=matrix, basis_tag="qubit_mode")


def inequality_gap_operator(dual: DualParams, x_th: float, n_max: int) -> FockOperator:
    """W = B*1 - kappa*Pi_fid + gamma*Pi_minus - M_ph; positive semidefinite when the bound holds."""
    if dual.beta_I != 0.0:
        raise DomainError("operator checks support real beta only (beta_I must be 0)", value=dual.beta_I)
    dim = 2 * (n_max + 1)
    b = b_constant(dual, x_th)
    matrix = (b * np.eye(dim)
              - dual.kappa * fidelity_projector(dual.beta_R, n_max).matrix
              + dual.gamma * np.kron(MINUS, np.eye(n_max + 1))
              - m_ph_suc(x_th, n_max).matrix)
    return FockOperator(n_max=n_max, matrix=matrix, basis_tag="qubit_mode")


def operator_inequality_check(dual: DualParams, x_th: float,
                              n_max: int = FOCK_CONFIG['n_max'],
                              tolerance: float = VERIFY_TOLERANCES['operator_inequality'],
                              shift_tolerance: float = VERIFY_TOLERANCES['truncation_shift']) -> Dict:
    if n_max < 1:
        raise DomainError(f"n_max must be ≥ 1, got {n_max}", value=n_max)
    confirm_n = FOCK_CONFIG['confirm_factor'] * n_max

    lambda_min = sym_eig_extreme(inequality_gap_operator(dual, x_th, n_max).matrix, "min")
    lambda_confirm = sym_eig_extreme(inequality_gap_operator(dual, x_th, confirm_n).matrix, "min")
    shift = abs(lambda_min - lambda_confirm)
    converged = shift < shift_tolerance
    # positivity at both truncations decides; the shift is reported only
    passed = bool(lambda_min >= -tolerance and lambda_confirm >= -tolerance)

    report = {
        "check": "operator_inequality",
        "kappa": dual.kappa,
        "gamma": dual.gamma,
        "beta": dual.beta_R,
        "x_th": x_th,
        "lambda_min": lambda_min,
        "lambda_min_confirm": lambda_confirm,
        "n_max": n_max,
        "n_max_confirm": confirm_n,
        "truncation_shift": shift,
        "converged": bool(converged),
        "tolerance": tolerance,
        "passed": passed,
    }
    if not converged:
        logger.debug(f"lambda_min moved by {shift:.3e} between n_max={n_max} and {confirm_n}")
    log = logger.info if passed else logger.warning
    log(f"Operator inequality at kappa={dual.kappa}, gamma={dual.gamma}, beta={dual.beta_R}, "
        f"x_th={x_th}: lambda_min={lambda_min:.3e} (n_max={n_max}), {lambda_confirm:.3e} (n_max={confirm_n})")
    return report


def ladder_operator(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1.0, n_max + 1.0)), k=1)


def theorem1_difference(beta: float, n_max: int) -> np.ndarray:
    """|beta><beta| - (3/2)*1 + (x - beta)^2 + p^2 on the truncated basis."""
    a = ladder_operator(n_max)
    identity = np.eye(n_max + 1)
    x_shift = 0.5 * (a + a.T) - beta * identity
    antisym = a - a.T
    p_squared = -0.25 * (antisym @ antisym)
    v = coherent_fock(beta, n_max).amplitudes
    return np.outer(v, v) - 1.5 * identity + x_shift @ x_shift + p_squared


def _inner_lambda_min(beta: float, n_max: int) -> float:
    # Squared quadratures couple the top states to |n_max+1>, |n_max+2>; drop them.
    inner = theorem1_difference(beta, n_max)[: n_max - 1, : n_max - 1]
    return sym_eig_extreme(inner, "min")


def theorem1_operator_check(beta: float, n_max: int = FOCK_CONFIG['n_max'],
                            tolerance: float = VERIFY_TOLERANCES['theorem1'],
                            confirm: bool = True) -> Dict:
    if n_max < 2:
        raise DomainError(f"n_max must be ≥ 2, got {n_max}", value=n_max)
    lambda_min = _inner_lambda_min(beta, n_max)
    report = {
        "check": "theorem1",
        "beta": beta,
        "lambda_min": lambda_min,
        "n_max": n_max,
        "tolerance": tolerance,
    }
    passed = lambda_min >= -tolerance
    if confirm:
        confirm_n = FOCK_CONFIG['confirm_factor'] * n_max
        lambda_confirm = _inner_lambda_min(beta, confirm_n)
        shift = abs(lambda_min - lambda_confirm)
        report.update({
            "lambda_min_confirm": lambda_confirm,
            "n_max_confirm": confirm_n,
            "truncation_shift": shift,
            "converged": bool(shift < tolerance),
        })
        passed = passed and lambda_confirm >= -tolerance
    report["passed"] = bool(passed)
    logger.info(f"Moment fidelity operator check at beta={beta}: lambda_min={lambda_min:.3e}, passed={passed}")
    return report
