import numpy as np
import pytest

from sagin_isac.sca.surrogates import (
    SurrogateState,
    cubic_exponent,
    surrogate_energy,
    surrogate_energy_derivs,
    surrogate_exponent,
    surrogate_exponent_derivs,
    true_compute_grad,
    true_exponent,
)


def make(rho_v=0.4, l_v=(1e5, 2e5), **kw):
    base = dict(rho_v=rho_v, l_v=np.array(l_v, dtype=float), tau_rho=1e-2, tau_l=1e-12,
                energy_scale=4e-16, exponent_scale=2e-6, a_coef=np.array([1e-3, 2e-3]),
                l_ref=1e5)
    base.update(kw)
    return SurrogateState(**base)


def test_energy_value_at_point():
    st = make()
    k = st.energy_scale
    expect = 2 * k * (1 - st.rho_v) ** 3 * st.l_v**3
    assert np.allclose(surrogate_energy(st, st.rho_v, st.l_v), expect, rtol=1e-14)


def test_energy_with_zero_point():
    st = make(l_v=(0.0, 0.0))
    l = np.array([3e4, 5e4])
    rho = 0.7
    expect = (st.energy_scale * (1 - st.rho_v) ** 3 * l**3
              + 0.5 * st.tau_rho * (rho - st.rho_v) ** 2 + 0.5 * st.tau_l * l**2)
    assert np.allclose(surrogate_energy(st, rho, l), expect, rtol=1e-14)


def test_energy_gradient_consistent_with_true():
    st = make()
    (g_r, g_l), _ = surrogate_energy_derivs(st, st.rho_v, st.l_v)
    t_r, t_l = true_compute_grad(st, st.rho_v, st.l_v)
    assert np.allclose(g_r, t_r, rtol=1e-12)
    assert np.allclose(g_l, t_l, rtol=1e-12)


def test_exponent_tight_and_gradient():
    st = make()
    assert np.allclose(surrogate_exponent(st, st.rho_v, st.l_v),
                       true_exponent(st, st.rho_v, st.l_v), rtol=1e-14)
    (g_r, g_l), _ = surrogate_exponent_derivs(st, st.rho_v, st.l_v)
    assert np.allclose(g_r, st.l_v * st.exponent_scale, rtol=1e-12)
    assert np.allclose(g_l, st.rho_v * st.exponent_scale, rtol=1e-12)


@pytest.mark.parametrize("rho_v,l_v", [(0.4, (1e5, 2e5)), (0.0, (1e5, 0.0)), (1.0, (0.0, 5.0))])
def test_exponent_majorizes(rho_v, l_v, rng):
    st = make(rho_v=rho_v, l_v=l_v)
    rho = rng.uniform(0, 1, 100)
    l = rng.uniform(0, 4e5, (100, 2))
    for r, ll in zip(rho, l):
        assert np.all(surrogate_exponent(st, r, ll) >= true_exponent(st, r, ll) * (1 - 1e-12))


def test_curvature_safeguard():
    assert np.allclose(make(rho_v=0.5, l_v=(1e5, 2e5)).curvature, [2e5, 4e5])
    st = make(rho_v=0.5, l_v=(1e5, 0.0))
    assert st.curvature[1] == st.l_ref
    assert np.all(make(rho_v=0.0).curvature == 1e5)


def test_cubic_form_does_not_majorize():
    st = make(tau_rho=1e-30, tau_l=1e-30)
    at = cubic_exponent(st, st.rho_v, st.l_v)
    assert not np.allclose(at, true_exponent(st, st.rho_v, st.l_v), rtol=1e-3)


def test_state_validation():
    with pytest.raises(ValueError):
        make(tau_rho=0.0)
    with pytest.raises(ValueError):
        make(rho_v=1.2)
    with pytest.raises(ValueError):
        make(l_v=(-1.0, 0.0))
