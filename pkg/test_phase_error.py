import math

import numpy as np
import pytest

from exceptions import DomainError, UndefinedRateError
from models import ChannelParams, DualParams, ProtocolParams
from services.channel import bit_error_rate, sift_probability
from services.fidelity_bounds import exact_fidelity_displaced, lambda_bound
from services.phase_error import (
    assemble_matrices,
    b_constant,
    b_constant_batch,
    b_elements,
    fidelity_term,
    key_rate,
    key_rate_batch,
    minus_term,
    phase_error_bound,
    rate_from_terms,
)

LOSSLESS = ChannelParams(eta=1.0, xi=0.0)
ALPHA = math.sqrt(0.35)


def _largest_root(a: np.ndarray) -> float:
    n = a.shape[0]
    char = lambda lam: (-1.0) ** n * np.linalg.det(a - lam * np.eye(n))
    hi = float(np.max(np.sum(np.abs(a), axis=1))) + 1.0
    lo = hi
    while char(lo) > 0.0:
        lo -= 1e-3
    hi = lo + 1e-3
    for _ in range(200):
        mid = 0.5 * (hi + lo)
        if char(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (hi + lo)


def _top_2x2(m: np.ndarray) -> float:
    return 0.5 * (m[0, 0] + m[1, 1]) + math.hypot(0.5 * (m[0, 0] - m[1, 1]), m[0, 1])


# b_elements

@pytest.mark.parametrize("beta_R,beta_I,x_th", [(0.0, 0.0, 0.3), (0.5, 0.0, 0.3), (0.8, 0.4, 1.0), (2.0, 0.0, 0.0)])
def test_element_invariants(beta_R, beta_I, x_th):
    el = b_elements(DualParams(kappa=0.0, gamma=0.0, beta_R=beta_R, beta_I=beta_I), x_th)
    assert el.c_ev + el.c_od == pytest.approx(1.0, rel=1e-15)
    assert 0.5 <= el.c_ev <= 1.0
    for d, v in ((el.d_ev, el.v_ev), (el.d_od, el.v_od)):
        assert 0.0 <= d <= 1.0
        assert v == pytest.approx(max(d - d * d, 0.0), abs=1e-16)


def test_vacuum_target_elements():
    x_th = 0.3
    el = b_elements(DualParams(kappa=0.0, gamma=0.0), x_th)
    assert el.c_ev == 1.0
    assert el.c_od == 0.0
    assert el.d_ev == pytest.approx(math.erfc(math.sqrt(2.0) * x_th), rel=1e-13)
    expected_od = math.erfc(math.sqrt(2.0) * x_th) + 2.0 * math.sqrt(2.0 / math.pi) * x_th * math.exp(-2.0 * x_th ** 2)
    assert el.d_od == pytest.approx(expected_od, rel=1e-13)


def test_small_target_matches_vacuum_limit():
    limit = b_elements(DualParams(kappa=0.0, gamma=0.0), 0.4)
    nearby = b_elements(DualParams(kappa=0.0, gamma=0.0, beta_R=1e-3), 0.4)
    assert nearby.d_od == pytest.approx(limit.d_od, abs=1e-5)
    assert nearby.d_ev == pytest.approx(limit.d_ev, abs=1e-5)


def test_no_postselection_keeps_full_overlap():
    el = b_elements(DualParams(kappa=0.0, gamma=0.0, beta_R=0.7), 0.0)
    assert el.d_ev == pytest.approx(1.0, rel=1e-14)
    assert el.d_od == pytest.approx(1.0, rel=1e-14)
    assert el.v_ev == pytest.approx(0.0, abs=1e-13)


def test_negative_threshold_rejected():
    with pytest.raises(DomainError):
        b_elements(DualParams(kappa=0.0, gamma=0.0), -0.1)


def test_imaginary_target_sign_symmetry():
    up = DualParams(kappa=3.0, gamma=0.4, beta_R=0.6, beta_I=0.25)
    down = DualParams(kappa=3.0, gamma=0.4, beta_R=0.6, beta_I=-0.25)
    assert b_elements(up, 0.2) == b_elements(down, 0.2)
    assert b_constant(up, 0.2) == b_constant(down, 0.2)


# B constant

def test_zero_duals_reduce_to_overlap_blocks():
    x_th = 0.5
    dual = DualParams(kappa=0.0, gamma=0.0, beta_R=0.6)
    el = b_elements(dual, x_th)
    blocks = [
        np.array([[1.0, math.sqrt(el.v_od)], [math.sqrt(el.v_od), el.d_od]]),
        np.array([[el.d_ev, math.sqrt(el.v_ev)], [math.sqrt(el.v_ev), 1.0]]),
    ]
    expected = max(_top_2x2(m) for m in blocks)
    assert b_constant(dual, x_th) == pytest.approx(expected, rel=1e-12)


def test_quartic_matches_characteristic_polynomial():
    dual = DualParams(kappa=5.0, gamma=0.5, beta_R=0.5)
    el = b_elements(dual, 0.3)
    m4, m2 = assemble_matrices(el, 5.0, 0.5)
    expected = max(_largest_root(m4), _top_2x2(m2))
    assert b_constant(dual, 0.3) == pytest.approx(expected, rel=1e-10)


def test_b_constant_is_at_least_one():
    for kappa in (0.0, 1.0, 10.0):
        for gamma in (0.0, 0.5, 2.0):
            assert b_constant(DualParams(kappa=kappa, gamma=gamma, beta_R=0.4), 0.6) >= 1.0 - 1e-12


def test_batch_shapes_and_values():
    el = b_elements(DualParams(kappa=0.0, gamma=0.0, beta_R=0.5), 0.3)
    kappa = np.array([[0.5], [2.0], [7.5]])
    gamma = np.array([[0.1, 0.4, 1.0, 1.6]])
    m4, m2 = assemble_matrices(el, kappa, gamma)
    assert m4.shape == (3, 4, 4, 4)
    assert m2.shape == (3, 4, 2, 2)
    batch = b_constant_batch(el, kappa, gamma)
    for i in range(3):
        for j in range(4):
            single = b_constant(DualParams(kappa=kappa[i, 0], gamma=gamma[0, j], beta_R=0.5), 0.3)
            assert batch[i, j] == pytest.approx(single, rel=1e-12)


# rate

def test_minus_term():
    assert minus_term(ALPHA) == pytest.approx(0.5 * (1.0 - math.exp(-0.7)), rel=1e-15)


def test_rate_from_terms_clamps():
    assert rate_from_terms(0.8, 0.1, 0.5, 1.0) == 0.0
    assert rate_from_terms(0.8, 0.1, 0.9, 1.0) == 0.0
    assert rate_from_terms(1.0, 0.0, -0.3, 1.0) == pytest.approx(1.0)
    assert rate_from_terms(0.5, 0.0, 0.0, 1.0) == pytest.approx(0.5)
    rates = rate_from_terms(1.0, 0.05, np.array([0.0, 0.1, 0.6]), 1.2)
    assert rates.shape == (3,)
    assert rates[0] > rates[1] > 0.0 == rates[2]


def test_lossless_channel_has_positive_rate():
    p = ProtocolParams(alpha=ALPHA, x_th=0.0)
    dual = DualParams(kappa=30.0, gamma=2.0, beta_R=ALPHA)
    result = key_rate(p, LOSSLESS, dual)
    assert result.p_sift == pytest.approx(1.0, abs=1e-15)
    assert result.e_bit == pytest.approx(bit_error_rate(p, LOSSLESS))
    assert result.f0 == pytest.approx(1.0, abs=1e-15)
    assert result.e_ph_bound == pytest.approx(0.0328, abs=5e-4)
    assert result.rate > 0.2


def test_zero_duals_certify_nothing():
    p = ProtocolParams(alpha=ALPHA, x_th=0.2)
    result = key_rate(p, LOSSLESS, DualParams(kappa=0.0, gamma=0.0, beta_R=ALPHA))
    assert result.e_ph_bound >= 1.0
    assert result.rate == 0.0


def test_phase_error_grows_with_noise():
    p = ProtocolParams(alpha=ALPHA, x_th=0.0)
    dual = DualParams(kappa=10.0, gamma=1.5, beta_R=ALPHA)
    bounds = [phase_error_bound(p, ChannelParams(eta=1.0, xi=xi), dual) for xi in np.linspace(0.0, 0.2, 11)]
    assert all(a < b for a, b in zip(bounds, bounds[1:]))
    assert bounds[1] - bounds[0] == pytest.approx(10.0 * 0.01, rel=1e-9)


def test_breakdown_fields_are_consistent():
    p = ProtocolParams(alpha=0.6, x_th=0.3, f_ec=1.1)
    ch = ChannelParams(eta=0.8, xi=0.04)
    dual = DualParams(kappa=12.0, gamma=1.2, beta_R=math.sqrt(0.8) * 0.6)
    r = key_rate(p, ch, dual)
    assert r.p_sift == sift_probability(p, ch)
    assert r.e_ph_bound == pytest.approx((r.b_const + dual.gamma * r.minus_term - dual.kappa * r.f0) / r.p_sift,
                                         rel=1e-14)
    assert r.rate == pytest.approx(rate_from_terms(r.p_sift, r.e_bit, r.e_ph_bound, 1.1), rel=1e-14)
    assert set(r.model_dump()) == {"p_sift", "e_bit", "f0", "b_const", "minus_term", "e_ph_bound", "rate"}


def test_batch_matches_pointwise():
    p = ProtocolParams(alpha=0.55, x_th=0.25)
    ch = ChannelParams(eta=0.7, xi=0.02)
    beta = math.sqrt(0.7) * 0.55
    kappa = np.array([[4.0], [16.0]])
    gamma = np.array([[0.6, 1.4]])
    rate, e_ph, b = key_rate_batch(p, ch, beta, kappa, gamma)
    assert rate.shape == (2, 2)
    for i in range(2):
        for j in range(2):
            single = key_rate(p, ch, DualParams(kappa=kappa[i, 0], gamma=gamma[0, j], beta_R=beta))
            assert rate[i, j] == pytest.approx(single.rate, rel=1e-11, abs=1e-11)
            assert e_ph[i, j] == pytest.approx(single.e_ph_bound, rel=1e-11, abs=1e-12)
            assert b[i, j] == pytest.approx(single.b_const, rel=1e-12)


# fidelity models

def test_fidelity_models():
    p = ProtocolParams(alpha=0.6)
    ch = ChannelParams(eta=0.8, xi=0.1)
    matched = DualParams(kappa=1.0, gamma=0.1, beta_R=math.sqrt(0.8) * 0.6)
    assert fidelity_term(p, ch, matched, "homodyne") == pytest.approx(0.95, rel=1e-14)
    assert fidelity_term(p, ch, matched, "heterodyne") == lambda_bound(0.1)
    assert fidelity_term(p, ch, matched, "exact") == exact_fidelity_displaced(ch, 0.6, matched.beta_R)


def test_exact_fidelity_never_lowers_the_rate():
    p = ProtocolParams(alpha=0.6, x_th=0.3)
    ch = ChannelParams(eta=0.8, xi=0.05)
    dual = DualParams(kappa=15.0, gamma=1.5, beta_R=0.5)
    assert key_rate(p, ch, dual, "exact").rate >= key_rate(p, ch, dual, "homodyne").rate


def test_heterodyne_bound_needs_matched_target():
    p = ProtocolParams(alpha=0.6)
    ch = ChannelParams(eta=0.8, xi=0.1)
    with pytest.raises(DomainError):
        fidelity_term(p, ch, DualParams(kappa=1.0, gamma=0.1, beta_R=0.3), "heterodyne")


def test_unknown_fidelity_model():
    with pytest.raises(DomainError):
        fidelity_term(ProtocolParams(alpha=0.6), LOSSLESS, DualParams(kappa=1.0, gamma=0.1), "fock")


# undefined sifting

def test_phase_error_undefined_without_sifted_events():
    p = ProtocolParams(alpha=0.1, x_th=40.0)
    with pytest.raises(UndefinedRateError):
        phase_error_bound(p, LOSSLESS, DualParams(kappa=1.0, gamma=0.5, beta_R=0.1))


def test_key_rate_reports_zero_without_sifted_events():
    p = ProtocolParams(alpha=0.1, x_th=40.0)
    result = key_rate(p, LOSSLESS, DualParams(kappa=1.0, gamma=0.5, beta_R=0.1))
    assert result.p_sift == 0.0
    assert result.rate == 0.0
    assert result.e_ph_bound == 1.0
