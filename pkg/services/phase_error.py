"""
Phase-error bound and key rate.

B is the larger of the top eigenvalues of a 4x4 "error" matrix and a 2x2 "correlation"
matrix built from the coherent-state parity weights C and the postselected parity
overlaps D. The phase-error bound is

    e_ph <= [B + gamma * (1 - exp(-2 alpha^2)) / 2 - kappa * F0] / p_sift

and the rate is p_sift * max(0, 1 - h(e_ph) - f * h(e_bit)).

Every batch routine broadcasts over arrays of kappa and gamma so a whole dual grid is
evaluated with one eigen-solve per matrix stack.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np

from exceptions import DomainError, UndefinedRateError
from models import BElements, ChannelParams, DualParams, KeyRateBreakdown, ProtocolParams
from services.channel import bit_error_rate, sift_probability
from services.fidelity_bounds import exact_fidelity_displaced, f0_gaussian, lambda_bound
from utils.special_math import binary_entropy, erfc, sym_eig_extreme

logger = logging.getLogger(__name__)

FIDELITY_MODELS = ("homodyne", "heterodyne", "exact")

# Below this |beta|^2 the odd-parity quotient is replaced by its beta -> 0 limit
SMALL_BETA2 = 1e-8


def b_elements(dual: DualParams, x_th: float) -> BElements:
    if x_th < 0.0:
        raise DomainError(f"postselection threshold must be ≥ 0, got {x_th}", value=x_th)

    beta2 = dual.beta_abs2
    c_ev = 0.5 * (1.0 + math.exp(-2.0 * beta2))
    c_od = -0.5 * math.expm1(-2.0 * beta2)

    root2 = math.sqrt(2.0)
    outer = erfc(root2 * (x_th - dual.beta_R)) + erfc(root2 * (x_th + dual.beta_R))
    cross = (2.0 * math.exp(-2.0 * dual.beta_R ** 2) * math.cos(2.0 * dual.beta_R * dual.beta_I)
             * erfc(root2 * x_th))

    d_ev = (outer + cross) / (4.0 * c_ev)
    if beta2 < SMALL_BETA2:
        logger.debug(f"|beta|^2 = {beta2:.3e} below {SMALL_BETA2}; using the beta -> 0 limit for D_od")
        d_od = erfc(root2 * x_th) + 2.0 * math.sqrt(2.0 / math.pi) * x_th * math.exp(-2.0 * x_th * x_th)
    else:
        d_od = (outer - cross) / (4.0 * c_od)

    d_ev = min(max(d_ev, 0.0), 1.0)
    d_od = min(max(d_od, 0.0), 1.0)
    return BElements(
        c_ev=c_ev,
        c_od=c_od,
        d_ev=d_ev,
        d_od=d_od,
        v_ev=max(d_ev - d_ev * d_ev, 0.0),
        v_od=max(d_od - d_od * d_od, 0.0),
    )


def assemble_matrices(el: BElements, kappa, gamma) -> Tuple[np.ndarray, np.ndarray]:
    """Error (…, 4, 4) and correlation (…, 2, 2) matrices, broadcast over kappa and gamma."""
    kappa, gamma = np.broadcast_arrays(np.asarray(kappa, dtype=np.float64),
                                       np.asarray(gamma, dtype=np.float64))
    shape = kappa.shape
    cross = kappa * math.sqrt(el.c_od * el.c_ev)
    sv_od = math.sqrt(el.v_od)
    sv_ev = math.sqrt(el.v_ev)

    m4 = np.zeros(shape + (4, 4))
    m4[..., 0, 0] = 1.0
    m4[..., 0, 1] = m4[..., 1, 0] = sv_od
    m4[..., 1, 1] = kappa * el.c_od + el.d_od
    m4[..., 1, 2] = m4[..., 2, 1] = cross
    m4[..., 2, 2] = kappa * el.c_ev + el.d_ev - gamma
    m4[..., 2, 3] = m4[..., 3, 2] = sv_ev
    m4[..., 3, 3] = 1.0 - gamma

    m2 = np.zeros(shape + (2, 2))
    m2[..., 0, 0] = kappa * el.c_ev
    m2[..., 0, 1] = m2[..., 1, 0] = cross
    m2[..., 1, 1] = kappa * el.c_od - gamma
    return m4, m2


def b_constant_batch(el: BElements, kappa, gamma) -> np.ndarray:
    m4, m2 = assemble_matrices(el, kappa, gamma)
    return np.maximum(sym_eig_extreme(m4, "max"), sym_eig_extreme(m2, "max"))


def b_constant(dual: DualParams, x_th: float, elements: Optional[BElements] = None) -> float:
    el = elements or b_elements(dual, x_th)
    return float(b_constant_batch(el, dual.kappa, dual.gamma))


def minus_term(alpha: float) -> float:
    """(1 - exp(-2 alpha^2)) / 2"""
    return -0.5 * math.expm1(-2.0 * alpha * alpha)


def fidelity_term(p: ProtocolParams, ch: ChannelParams, dual: DualParams,
                  fidelity_model: str = "homodyne") -> float:
    """F0 under the selected fidelity model; beta_I is ignored on these Gaussian-channel paths."""
    if fidelity_model == "homodyne":
        return f0_gaussian(p, ch, dual.beta_R)
    if fidelity_model == "exact":
        return exact_fidelity_displaced(ch, p.alpha, dual.beta_R)
    if fidelity_model == "heterodyne":
        matched = math.sqrt(ch.eta) * p.alpha
        if abs(dual.beta_R - matched) > 1e-12 * max(1.0, matched):
            raise DomainError(
                f"heterodyne bound is only defined at beta = sqrt(eta)*alpha = {matched}, got {dual.beta_R}",
                value=dual.beta_R,
            )
        return lambda_bound(ch.xi)
    raise DomainError(f"unknown fidelity model {fidelity_model!r}; expected one of {FIDELITY_MODELS}",
                      value=fidelity_model)


def phase_error_bound(p: ProtocolParams, ch: ChannelParams, dual: DualParams,
                      fidelity_model: str = "homodyne") -> float:
    p_sift = sift_probability(p, ch)
    if p_sift <= 0.0:
        raise UndefinedRateError(
            f"phase-error bound needs p_sift > 0 (alpha={p.alpha}, x_th={p.x_th}, eta={ch.eta}, xi={ch.xi})"
        )
    b = b_constant(dual, p.x_th)
    f0 = fidelity_term(p, ch, dual, fidelity_model)
    return (b + dual.gamma * minus_term(p.alpha) - dual.kappa * f0) / p_sift


def rate_from_terms(p_sift: float, e_bit: float, e_ph, f_ec: float):
    """p_sift * max(0, 1 - h(e_ph) - f*h(e_bit)); e_ph below 0 counts as 0, at or above 1/2 gives 0."""
    e_ph = np.asarray(e_ph, dtype=np.float64)
    certified = e_ph < 0.5
    clamped = np.where(certified, np.clip(e_ph, 0.0, 0.5), 0.5)
    bracket = 1.0 - binary_entropy(clamped) - f_ec * binary_entropy(e_bit)
    rate = np.where(certified, p_sift * np.maximum(bracket, 0.0), 0.0)
    if rate.ndim == 0:
        return float(rate)
    return rate


def key_rate_batch(p: ProtocolParams, ch: ChannelParams, beta: float, kappa, gamma,
                   fidelity_model: str = "homodyne",
                   elements: Optional[BElements] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Rates over a broadcast grid of (kappa, gamma) at a fixed real beta.

    Returns:
        (rate, e_ph_bound, b_const) arrays, all shaped like the broadcast grid
    """
    dual0 = DualParams(kappa=0.0, gamma=0.0, beta_R=beta, beta_I=0.0)
    el = elements or b_elements(dual0, p.x_th)
    kappa, gamma = np.broadcast_arrays(np.asarray(kappa, dtype=np.float64),
                                       np.asarray(gamma, dtype=np.float64))
    p_sift = sift_probability(p, ch)
    b = b_constant_batch(el, kappa, gamma)
    if p_sift <= 0.0:
        return np.zeros(kappa.shape), np.ones(kappa.shape), b

    e_bit = bit_error_rate(p, ch)
    f0 = fidelity_term(p, ch, dual0, fidelity_model)
    e_ph = (b + gamma * minus_term(p.alpha) - kappa * f0) / p_sift
    return np.asarray(rate_from_terms(p_sift, e_bit, e_ph, p.f_ec)), e_ph, b


def key_rate(p: ProtocolParams, ch: ChannelParams, dual: DualParams,
             fidelity_model: str = "homodyne") -> KeyRateBreakdown:
    p_sift = sift_probability(p, ch)
    e_bit = bit_error_rate(p, ch)
    f0 = fidelity_term(p, ch, dual, fidelity_model)
    b = b_constant(dual, p.x_th)
    m_term = minus_term(p.alpha)

    if p_sift <= 0.0:
        logger.warning(f"p_sift = 0 at alpha={p.alpha}, x_th={p.x_th}; rate reported as 0")
        e_ph = 1.0
        rate = 0.0
    else:
        e_ph = (b + dual.gamma * m_term - dual.kappa * f0) / p_sift
        rate = rate_from_terms(p_sift, e_bit, e_ph, p.f_ec)

    logger.debug(
        f"key_rate alpha={p.alpha} x_th={p.x_th} kappa={dual.kappa} gamma={dual.gamma} "
        f"beta={dual.beta_R}: e_ph={e_ph:.6g} rate={rate:.6g}"
    )
    return KeyRateBreakdown(
        p_sift=p_sift,
        e_bit=e_bit,
        f0=f0,
        b_const=b,
        minus_term=m_term,
        e_ph_bound=e_ph,
        rate=rate,
    )
