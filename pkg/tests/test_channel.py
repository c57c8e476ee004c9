import cmath
import math

import numpy as np
import pytest

from sagin_isac.channel import (
    ChannelInnovations,
    array_response,
    draw_channels,
    estimation_error_var,
    ml_estimate,
    pilot_slots,
    relay_channel,
    sensing_cov,
)


def test_array_response_examples():
    assert np.allclose(array_response(1, 0.3, 0.2), [1.0])
    a = array_response(2, math.radians(45), 0.0)
    assert a[1] == pytest.approx(cmath.exp(1j * 2.22144), abs=1e-5)
    assert np.allclose(array_response(2, 0.0, 0.7), [1.0, 1.0])
    tx = array_response(2, math.radians(45), 0.0, transmit_side=True)
    assert np.allclose(tx, a.conj())


def test_array_response_unit_modulus():
    a = array_response(8, 1.1, -0.4)
    assert a[0] == 1.0
    assert np.allclose(np.abs(a), 1.0)
    with pytest.raises(ValueError):
        array_response(0, 0.0, 0.0)


def test_sensing_cov(scenario, contexts):
    cov = sensing_cov(contexts[0], scenario)
    assert np.allclose(cov.omega_h, cov.omega_h.conj().T, atol=1e-12)
    assert np.trace(cov.omega_g).real == pytest.approx(2 * contexts[0].sigma_beta2)
    assert np.linalg.matrix_rank(cov.omega_g, tol=1e-12 * contexts[0].sigma_beta2) == 1
    zero = sensing_cov(contexts[0], scenario, sigma_beta2=0.0)
    assert np.allclose(zero.omega_h, scenario.sigma_c2 * np.eye(2))


def test_sensing_cov_broadside_unit(scenario, contexts):
    s = scenario.replace(sensing_azimuth=0.0)
    from sagin_isac.scenario import trajectory
    cov = sensing_cov(trajectory(s)[0], s, sigma_beta2=1.0)
    assert np.allclose(cov.omega_g, [[1, 1], [1, 1]])


def test_relay_gain_and_mrt(scenario, contexts, rng):
    ctx = contexts[-1]
    d = draw_channels(ctx, scenario, 0.5, rng)
    assert np.linalg.norm(d.w) == pytest.approx(1.0)
    assert d.relay_gain == pytest.approx(10**2.5 / 600_041.65**2, rel=1e-6)
    assert d.relay_gain == pytest.approx(8.78e-10, rel=1e-3)
    s4 = scenario.replace(m_tx=4)
    d4 = draw_channels(ctx, s4, 0.5, rng)
    for _ in range(20):
        u = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        u /= np.linalg.norm(u)
        assert d4.relay_gain >= abs(np.vdot(d4.h_al, u)) ** 2 - 1e-24
    # array gain: M_t unit-modulus entries
    assert np.linalg.norm(relay_channel(ctx, s4)) ** 2 == pytest.approx(
        4 * scenario.g0 * scenario.antenna_gain / ctx.d_al**2)


def test_draw_structure(scenario, contexts, rng):
    d = draw_channels(contexts[3], scenario, 0.4, rng)
    assert np.allclose(d.h_est - d.h, d.e, rtol=0, atol=1e-15)
    with pytest.raises(ValueError):
        draw_channels(contexts[3], scenario, 0.0, rng)


def test_noiseless_estimate_is_exact(scenario, contexts, rng):
    s = scenario.replace(sigma_c2=1e-300, sigma_z2=1e-300)
    d = draw_channels(contexts[0], s, 0.5, rng, literal=True, n_slots=8)
    assert np.allclose(d.h_est, d.g, rtol=1e-12, atol=1e-150)


def test_ml_estimate_recovers_channel(rng):
    h = np.array([1 + 2j, -0.5j])
    x = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    assert np.allclose(ml_estimate(np.outer(h, x), x), h)


@pytest.mark.parametrize("literal", [False, True])
def test_estimation_error_variance(scenario, contexts, literal):
    rng = np.random.default_rng(7)
    n_p = 0.3
    errs = np.array([draw_channels(contexts[0], scenario, n_p, rng, literal=literal).e
                     for _ in range(4000)])
    emp = np.mean(np.abs(errs) ** 2)
    assert emp == pytest.approx(estimation_error_var(scenario, n_p), rel=0.06)


def test_clutter_covariance_converges(scenario, contexts):
    rng = np.random.default_rng(3)
    hs = np.array([draw_channels(contexts[0], scenario, 0.5, rng).h for _ in range(10_000)])
    emp = hs.T @ hs.conj() / len(hs)
    target = sensing_cov(contexts[0], scenario).omega_h
    assert np.max(np.abs(emp - target)) <= 0.05 * np.trace(target).real


def test_pilot_slots(scenario):
    assert pilot_slots(scenario, 0.5) == 500_000
    assert pilot_slots(scenario, 0.5, cap=64) == 64
    assert pilot_slots(scenario, 1e-9) == 1


def test_innovations_deterministic(scenario, contexts):
    a = ChannelInnovations.from_seed(scenario, 9).realize(contexts, scenario, 0.5)
    b = ChannelInnovations.from_seed(scenario, 9).realize(contexts, scenario, 0.5)
    assert all(np.array_equal(x.h_est, y.h_est) for x, y in zip(a, b))
    c = ChannelInnovations.from_seed(scenario, 10).realize(contexts, scenario, 0.5)
    assert not np.array_equal(a[0].h_est, c[0].h_est)
