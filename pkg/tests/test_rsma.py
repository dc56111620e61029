import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nfcovert.errors import InvalidArgument
from nfcovert.rsma import (BeamformingState, allocate_common_rate, qos_deficit, rates,
                           received_signal_mc, sinr_common, sinr_private, sinr_matrix)

from conftest import crandn


def state_for(rng, k=3, m=4, n=8, p_c=None):
    return BeamformingState(crandn(rng, m), crandn(rng, k, m), rng.uniform(0, 6, n),
                            np.zeros(k) if p_c is None else p_c)


def dot(a, b):
    # independent inner product: sum of conj(a_i) b_i written out
    return sum(complex(x).conjugate() * complex(y) for x, y in zip(a, b))


def test_sinr_common_zero_precoder(rng):
    s = state_for(rng).replace(w_c=np.zeros(4))
    assert sinr_common(crandn(rng, 4), s, 1.0) == 0.0


def test_sinr_common_unit_ratio():
    h = np.array([1.0, 0.0])
    s = BeamformingState(np.array([0.5, 0.0]), np.zeros((2, 2)), np.zeros(1), np.zeros(2))
    assert math.isclose(sinr_common(h, s, 0.25), 1.0)


def test_sinr_against_scalar_oracle(rng):
    s = state_for(rng)
    h = crandn(rng, 3, 4)
    for k in range(3):
        sig_c = abs(dot(h[k], s.w_c)) ** 2
        terms = [abs(dot(h[k], s.w[i])) ** 2 for i in range(3)]
        ref_c = sig_c / (sum(terms) + 0.3)
        ref_p = terms[k] / (sum(terms) - terms[k] + 0.3)
        assert math.isclose(sinr_common(h[k], s, 0.3), ref_c, rel_tol=1e-12)
        assert math.isclose(sinr_private(h[k], s, k, 0.3), ref_p, rel_tol=1e-12)
    gc, gp = sinr_matrix(h, s.w_c, s.w, 0.3)
    assert np.allclose(gc, [sinr_common(h[k], s, 0.3) for k in range(3)])
    assert np.allclose(gp, [sinr_private(h[k], s, k, 0.3) for k in range(3)])


def test_sinr_private_single_user(rng):
    h, w = crandn(rng, 4), crandn(rng, 1, 4)
    s = BeamformingState(crandn(rng, 4), w, np.zeros(2), np.zeros(1))
    assert math.isclose(sinr_private(h, s, 0, 0.7), abs(dot(h, w[0])) ** 2 / 0.7)


def test_sinr_private_zero_precoder(rng):
    s = state_for(rng)
    w = s.w.copy()
    w[1] = 0
    assert sinr_private(crandn(rng, 4), s.replace(w=w), 1, 1.0) == 0.0


def test_sinr_rejects_nonpositive_noise(rng):
    s = state_for(rng)
    with pytest.raises(InvalidArgument):
        sinr_common(crandn(rng, 4), s, 0.0)
    with pytest.raises(InvalidArgument):
        sinr_private(crandn(rng, 4), s, 0, -1.0)


def test_rates_trivial_cases():
    h = np.eye(2, dtype=complex)
    zero = BeamformingState(np.zeros(2), np.zeros((2, 2)), np.zeros(1), np.zeros(2))
    rep = rates(zero, h, 1.0)
    assert np.all(rep.R_c == 0) and np.all(rep.R_p == 0) and rep.R_total == 0
    # orthogonal users with |h^H w_k|^2 = noise: gamma_p = 1 -> 1 bit
    unit = BeamformingState(np.zeros(2), np.eye(2), np.zeros(1), np.zeros(2))
    assert np.allclose(rates(unit, h, 1.0).R_p, 1.0)


def test_rates_match_oracle_sinrs(rng):
    s = state_for(rng, p_c=np.array([0.1, 0.0, 0.05]))
    h = crandn(rng, 3, 4)
    rep = rates(s, h, 0.5)
    ref_p = [math.log2(1 + sinr_private(h[k], s, k, 0.5)) for k in range(3)]
    ref_c = [math.log2(1 + sinr_common(h[k], s, 0.5)) for k in range(3)]
    assert np.allclose(rep.R_p, ref_p) and np.allclose(rep.R_c, ref_c)
    assert math.isclose(rep.R_total, 0.15 + sum(ref_p))


def test_rates_flag_common_violation(rng):
    s = state_for(rng, p_c=np.array([50.0, 0.0, 0.0]))
    assert rates(s, crandn(rng, 3, 4), 1.0).common_violation


def test_allocation_tie_break_to_covert_user():
    share, ok = allocate_common_rate(np.array([2.0, 3.0]), np.array([0.0, 0.2]),
                                     np.array([0.0, 0.5]))
    assert ok and np.allclose(share, [1.7, 0.3])
    short, ok = allocate_common_rate(np.array([0.1, 3.0]), np.array([0.0, 0.0]),
                                     np.array([0.0, 0.5]))
    assert not ok and math.isclose(short.sum(), 0.1)
    assert math.isclose(qos_deficit(np.array([0.1, 3.0]), np.zeros(2), np.array([0.0, 0.5])), 0.4)


@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_power_scaling_raises_sinrs(seed, alpha):
    r = np.random.default_rng(seed)
    s, h = state_for(r), crandn(r, 3, 4)
    gc, gp = sinr_matrix(h, s.w_c, s.w, 0.2)
    gc2, gp2 = sinr_matrix(h, np.sqrt(alpha) * s.w_c, np.sqrt(alpha) * s.w, 0.2)
    lo, hi = (gc, gc2) if alpha >= 1 else (gc2, gc)
    assert np.all(hi >= lo * (1 - 1e-12))
    lo, hi = (gp, gp2) if alpha >= 1 else (gp2, gp)
    assert np.all(hi >= lo * (1 - 1e-12))
    if alpha > 1.001:
        assert np.all(gc2 > gc) and np.all(gp2 > gp)
    # without noise the ratios are scale free
    n0 = 1e-300
    a, b = sinr_matrix(h, s.w_c, s.w, n0)
    c, d = sinr_matrix(h, np.sqrt(alpha) * s.w_c, np.sqrt(alpha) * s.w, n0)
    assert np.allclose(a, c) and np.allclose(b, d)


@given(st.integers(0, 10_000))
def test_private_sinr_ignores_common_precoder(seed):
    r = np.random.default_rng(seed)
    s, h = state_for(r), crandn(r, 3, 4)
    _, gp = sinr_matrix(h, s.w_c, s.w, 1.0)
    _, gp2 = sinr_matrix(h, 10 * crandn(r, 4), s.w, 1.0)
    assert np.allclose(gp, gp2)


@given(st.integers(0, 10_000))
def test_sinrs_invariant_under_unitary_rotation(seed):
    r = np.random.default_rng(seed)
    s, h = state_for(r), crandn(r, 3, 4)
    U, _ = np.linalg.qr(crandn(r, 4, 4))
    a = sinr_matrix(h, s.w_c, s.w, 0.4)
    b = sinr_matrix(h @ U.T, U @ s.w_c, s.w @ U.T, 0.4)
    assert np.allclose(a[0], b[0]) and np.allclose(a[1], b[1])


@given(st.integers(0, 10_000), st.integers(0, 2), st.floats(0, 2.0))
def test_total_rate_monotone_in_common_share(seed, k, bump):
    r = np.random.default_rng(seed)
    s, h = state_for(r), crandn(r, 3, 4)
    base = rates(s, h, 1.0).R_total
    p_c = s.p_c.copy()
    p_c[k] += bump
    assert rates(s.replace(p_c=p_c), h, 1.0).R_total >= base


def test_state_json_round_trip(rng):
    s = state_for(rng, p_c=np.array([0.2, 0.0, 0.1]))
    back = BeamformingState.from_json(s.to_json())
    assert np.allclose(back.W, s.W) and np.allclose(back.theta, s.theta)
    assert np.all((s.theta >= 0) & (s.theta < 2 * np.pi))


def test_received_signal_mc_matches_analytic(rng):
    s = state_for(rng, k=2)
    h = crandn(rng, 2, 4)
    est = received_signal_mc(s, h, 0.5, rng, n_samples=200_000)
    gc, gp = sinr_matrix(h, s.w_c, s.w, 0.5)
    assert np.all(np.abs(est["gamma_c"] - gc) < 3 * est["se_c"])
    assert np.all(np.abs(est["gamma_p"] - gp) < 3 * est["se_p"])


def test_received_signal_mc_degenerate_cases(rng):
    h = np.array([[1.0, 0.0]], dtype=complex)
    s = BeamformingState(np.array([1.0, 0.0]), np.zeros((1, 2)), np.zeros(1), np.zeros(1))
    est = received_signal_mc(s, h, 1e-300, rng, n_samples=2000)
    assert est["gamma_c"][0] > 1e20
    s0 = s.replace(w_c=np.zeros(2), w=np.array([[1.0, 0.0]]))
    assert received_signal_mc(s0, h, 1.0, rng, n_samples=2000)["common_power"][0] == 0.0
    with pytest.raises(InvalidArgument):
        received_signal_mc(s, h, 1.0, rng, n_samples=10)
