import cmath
import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nfcovert.channel import (CHANNEL_JSON_SCHEMA, ArrayGeometry, ChannelRealization,
                              NoiseUncertainty, PathSet, cascaded_channel, nf_response,
                              near_field_lower_bound, rayleigh_distance, realize,
                              sample_bs_ris_channel, sample_ris_user_channel,
                              sample_willie_noise, ula_steering, upa_steering)
from nfcovert.config import SystemConfig
from nfcovert.errors import InvalidArgument

from conftest import crandn

LAM = 3e8 / 28e9
D = LAM / 2
angles = st.floats(-1.5, 1.5)


# -- steering vectors ---------------------------------------------------------

def test_ula_broadside():
    assert np.allclose(ula_steering(0.0, 4, D, LAM), np.ones(4) / 2)


def test_ula_single_element():
    assert np.allclose(ula_steering(0.7, 1, D, LAM), [1.0])


def test_ula_matches_elementwise_loop():
    a = ula_steering(math.pi / 6, 8, D, LAM)
    ref = [cmath.exp(1j * 2 * math.pi * D / LAM * i * math.sin(math.pi / 6)) / math.sqrt(8)
           for i in range(8)]
    assert np.allclose(a, ref, atol=1e-14)
    # half-wavelength spacing at 30 degrees: phase step pi/2
    assert np.allclose(np.angle(a[1] / a[0]), math.pi * 0.5)


@pytest.mark.parametrize("bad", [dict(m=0), dict(d=0.0), dict(wavelength=-1.0)])
def test_ula_rejects_bad_arguments(bad):
    kw = dict(theta=0.1, m=4, d=D, wavelength=LAM)
    kw.update(bad)
    with pytest.raises(InvalidArgument):
        ula_steering(**kw)


def test_upa_all_zero_phases():
    assert np.allclose(upa_steering(0, 0, 2, 2, D, LAM), np.ones(4) / 2)
    assert np.allclose(upa_steering(0.3, 0.2, 1, 1, D, LAM), [1.0])


def test_upa_matches_double_loop():
    th, ph, ny, nz = math.pi / 4, math.pi / 6, 4, 4
    ref = np.empty(ny * nz, dtype=complex)
    for p in range(ny):
        for q in range(nz):
            ref[p * nz + q] = cmath.exp(1j * 2 * math.pi * D / LAM
                                        * (p * math.sin(th) * math.cos(ph) + q * math.sin(ph)))
    assert np.allclose(upa_steering(th, ph, ny, nz, D, LAM), ref / 4, atol=1e-14)


def test_nf_single_element():
    assert np.allclose(nf_response(0.4, 3.0, 1, D, LAM), [1.0])


def test_nf_exact_distance_formula():
    r = 5 * LAM
    b = nf_response(0.0, r, 3, D, LAM)
    ref = []
    for n in (1, 2, 3):
        delta = (2 * n - 3 - 1) / 2
        rn = math.sqrt(r ** 2 + (delta * D) ** 2)
        ref.append(cmath.exp(-1j * 2 * math.pi / LAM * (rn - r)) / math.sqrt(3))
    assert np.allclose(b, ref, atol=1e-13)
    assert abs(np.angle(b[1])) < 1e-12


@given(angles)
def test_nf_converges_to_far_field(theta):
    n = 8
    b = nf_response(theta, 1e6 * LAM, n, D, LAM)
    # first-order expansion: r_n - r = -delta d sin(theta)
    delta = (2 * np.arange(1, n + 1) - n - 1) / 2
    ff = np.exp(1j * 2 * np.pi / LAM * delta * D * np.sin(theta)) / np.sqrt(n)
    assert np.max(np.abs(np.angle(b / ff))) < 1e-3
    # the same thing, up to a common phase, as the ULA steering vector
    a = ula_steering(theta, n, D, LAM)
    rel = np.angle(b / a)
    assert np.max(np.abs(np.angle(np.exp(1j * (rel - rel[0]))))) < 1e-3


def test_nf_rejects_nonpositive_range():
    with pytest.raises(InvalidArgument):
        nf_response(0.1, 0.0, 4, D, LAM)


@given(angles, angles, st.integers(1, 6), st.integers(1, 6), st.floats(0.05, 100.0))
def test_responses_have_unit_norm(theta, phi, ny, nz, r):
    assert np.isclose(np.linalg.norm(ula_steering(theta, ny, D, LAM)), 1.0)
    assert np.isclose(np.linalg.norm(upa_steering(theta, phi, ny, nz, D, LAM)), 1.0)
    assert np.isclose(np.linalg.norm(nf_response(theta, r, ny * nz, D, LAM)), 1.0)


# -- link samplers ------------------------------------------------------------

GEOM = ArrayGeometry(m_bs=4, n_y=2, n_z=4, d=D, wavelength=LAM)


def test_bs_ris_single_path_is_rank_one():
    paths = PathSet([1.0], aod=[0.2], aoa=[-0.3], azimuth=[0.1], path_loss=1.0)
    H = sample_bs_ris_channel(GEOM, paths)
    scale = math.sqrt(GEOM.m_bs * GEOM.n)
    ref = scale * np.outer(upa_steering(-0.3, 0.1, 2, 4, D, LAM), ula_steering(0.2, 4, D, LAM).conj())
    assert np.allclose(H, ref)
    assert np.linalg.matrix_rank(H) == 1
    assert np.isclose(np.linalg.norm(H), scale)


def test_bs_ris_three_paths_sum_of_terms(rng):
    g = crandn(rng, 3)
    aod, aoa, az = rng.uniform(-1, 1, (3, 3))
    paths = PathSet(g, aod=aod, aoa=aoa, azimuth=az, path_loss=0.3)
    H = sample_bs_ris_channel(GEOM, paths)
    ref = np.zeros((GEOM.n, GEOM.m_bs), dtype=complex)
    for j in range(3):
        for r in range(GEOM.n):
            for m in range(GEOM.m_bs):
                ref[r, m] += g[j] * upa_steering(aoa[j], az[j], 2, 4, D, LAM)[r] * \
                    np.conj(ula_steering(aod[j], 4, D, LAM)[m])
    assert np.allclose(H, math.sqrt(GEOM.m_bs * GEOM.n * 0.3 / 3) * ref)


def test_bs_ris_power_moment(rng):
    vals = [np.linalg.norm(sample_bs_ris_channel(GEOM, rng=rng, n_paths=3, path_loss=2.0)) ** 2
            for _ in range(10_000)]
    assert abs(np.mean(vals) / (GEOM.m_bs * GEOM.n * 2.0) - 1) < 0.05


def test_ris_user_single_path():
    paths = PathSet([1.0], theta=[0.3], ranges=[4.0])
    g = sample_ris_user_channel(GEOM, paths)
    assert np.allclose(g, math.sqrt(GEOM.n) * nf_response(0.3, 4.0, GEOM.n, D, LAM))
    assert np.isclose(np.linalg.norm(g), math.sqrt(GEOM.n))


def test_ris_user_two_paths(rng):
    a = crandn(rng, 2)
    paths = PathSet(a, theta=[0.3, -0.5], ranges=[4.0, 6.5])
    ref = sum(a[l] * nf_response(t, r, GEOM.n, D, LAM)
              for l, (t, r) in enumerate([(0.3, 4.0), (-0.5, 6.5)]))
    assert np.allclose(sample_ris_user_channel(GEOM, paths), math.sqrt(GEOM.n / 2) * ref)


def test_ris_user_power_moment(rng):
    vals = [np.linalg.norm(sample_ris_user_channel(GEOM, rng=rng, distance=5.0)) ** 2
            for _ in range(10_000)]
    assert abs(np.mean(vals) / GEOM.n - 1) < 0.05


def test_path_counts_must_be_positive(rng):
    with pytest.raises(InvalidArgument):
        sample_bs_ris_channel(GEOM, rng=rng, n_paths=0)
    with pytest.raises(InvalidArgument):
        sample_ris_user_channel(GEOM, rng=rng, distance=3.0, n_paths=0)
    with pytest.raises(InvalidArgument):
        PathSet([])


# -- cascaded channel ---------------------------------------------------------

def test_cascaded_identity_phases(rng):
    H, g = crandn(rng, 6, 3), crandn(rng, 6)
    assert np.allclose(cascaded_channel(H, np.zeros(6), g), H.conj().T @ g)


def test_cascaded_scalar_case():
    h, g, th = 0.3 - 0.8j, 1.1 + 0.2j, 0.9
    out = cascaded_channel(np.array([[h]]), np.array([th]), np.array([g]))
    assert np.isclose(out[0], np.conj(h) * cmath.exp(1j * th) * g)


def test_cascaded_matches_triple_loop(rng):
    H, g, th = crandn(rng, 4, 2), crandn(rng, 4), rng.uniform(0, 6, 4)
    ref = np.zeros(2, dtype=complex)
    for m in range(2):
        for n in range(4):
            ref[m] += np.conj(H[n, m]) * cmath.exp(1j * th[n]) * g[n]
    assert np.allclose(cascaded_channel(H, th, g), ref)


def test_cascaded_dimension_mismatch(rng):
    with pytest.raises(InvalidArgument):
        cascaded_channel(crandn(rng, 4, 2), np.zeros(3), crandn(rng, 4))


@given(st.integers(0, 10_000), st.floats(-6.0, 6.0), st.complex_numbers(max_magnitude=5))
def test_cascaded_linearity_and_phase_offset(seed, offset, c):
    r = np.random.default_rng(seed)
    H, g1, g2, th = crandn(r, 5, 3), crandn(r, 5), crandn(r, 5), r.uniform(0, 6, 5)
    h1 = cascaded_channel(H, th, g1)
    assert np.allclose(cascaded_channel(H, th, g1 + c * g2), h1 + c * cascaded_channel(H, th, g2))
    # conjugate-linear in H
    assert np.allclose(cascaded_channel(c * H, th, g1), np.conj(c) * h1)
    shifted = cascaded_channel(H, th + offset, g1)
    assert np.allclose(shifted, np.exp(1j * offset) * h1)
    assert np.isclose(np.linalg.norm(shifted), np.linalg.norm(h1))


# -- Rayleigh distance --------------------------------------------------------

def test_rayleigh_distance_hand_value():
    assert math.isclose(rayleigh_distance(0.5, 0.0, 28e9), 2 * 0.5 * 28e9 / 3e8)
    assert math.isclose(rayleigh_distance(0.5, 0.0, 28e9), 93.333, rel_tol=1e-4)


def test_rayleigh_distance_degenerate_and_linear():
    assert rayleigh_distance(0.0, 0.0, 28e9) == 0.0
    assert math.isclose(rayleigh_distance(0.2, 0.1, 56e9), 2 * rayleigh_distance(0.2, 0.1, 28e9))
    assert math.isclose(near_field_lower_bound(0.5, 28e9), 0.62 * math.sqrt(0.5 / (3e8 / 28e9)))
    with pytest.raises(InvalidArgument):
        rayleigh_distance(0.1, 0.0, 0.0)


# -- warden noise -------------------------------------------------------------

def test_willie_noise_rho_one(rng):
    nu = NoiseUncertainty(2.5, 1.0)
    assert sample_willie_noise(nu, rng) == 2.5
    assert np.all(sample_willie_noise(nu, rng, size=100) == 2.5)


def test_willie_noise_cdf(rng):
    rho = 3.0
    x = np.sort(sample_willie_noise(NoiseUncertainty(1.0, rho), rng, size=100_000))
    cdf = np.log(x * rho) / (2 * math.log(rho))
    emp = np.arange(1, x.size + 1) / x.size
    ks = max(np.max(emp - cdf), np.max(cdf - (emp - 1 / x.size)))
    assert ks < 0.01


@given(st.floats(1.0, 10.0), st.floats(1e-15, 1e3), st.integers(0, 2 ** 32 - 1))
def test_willie_noise_support(rho, nominal, seed):
    x = sample_willie_noise(NoiseUncertainty(nominal, rho), np.random.default_rng(seed), size=500)
    lo, hi = NoiseUncertainty(nominal, rho).support
    assert np.all(x >= lo * (1 - 1e-12)) and np.all(x <= hi * (1 + 1e-12))


def test_willie_noise_rejects_rho_below_one():
    with pytest.raises(InvalidArgument):
        NoiseUncertainty(1.0, 0.5)


# -- realizations -------------------------------------------------------------

def test_realization_is_deterministic():
    cfg = SystemConfig(n_ris=16)
    a, b = realize(cfg, 7), realize(cfg, 7)
    assert a.to_json() == b.to_json()
    assert a.H_br.tobytes() == b.H_br.tobytes()
    assert realize(cfg, 8).to_json() != a.to_json()


def test_realization_shapes_and_readonly():
    cfg = SystemConfig(n_ris=16, m_bs=4, n_users=3)
    r = realize(cfg, 0)
    assert r.H_br.shape == (16, 4) and r.g_users.shape == (3, 16) and r.g_rw.shape == (16,)
    with pytest.raises(ValueError):
        r.H_br[0, 0] = 0


def test_realization_json_schema_round_trip():
    r = realize(SystemConfig(n_ris=8), 3)
    doc = json.loads(r.to_json())
    jsonschema.validate(doc, CHANNEL_JSON_SCHEMA)
    back = ChannelRealization.from_json(r.to_json())
    assert np.array_equal(back.H_br, r.H_br) and np.array_equal(back.g_rw, r.g_rw)


def test_distance_sweeps_share_draws():
    a = realize(SystemConfig(n_ris=16, willie_distance=2.0), 5)
    b = realize(SystemConfig(n_ris=16, willie_distance=9.0), 5)
    assert np.array_equal(a.H_br, b.H_br)
    assert np.array_equal(a.g_users, b.g_users)
