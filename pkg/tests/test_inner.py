import math

import numpy as np
import pytest

from sagin_isac.sca import Problem
from sagin_isac.sca.inner import (
    InnerInfeasibleError,
    InnerProblem,
    make_state,
    phase1,
    solve_fixed_rho,
    solve_inner,
)
from sagin_isac.sca.surrogates import surrogate_exponent


def micro_instance(scenario, seed, n_frames=2):
    """Two-frame instance with the data requirement scaled to the frame count."""
    s = scenario.replace(n_frames=n_frames, l_bar=scenario.l_bar * n_frames / scenario.n_frames)
    problem = Problem.build(s, seed=seed, check_speed=False)
    budget = problem.budget(0.5)
    rng = np.random.default_rng(seed)
    rho_v = float(rng.uniform(0.2, 0.8))
    l_v, energy, _, _ = solve_fixed_rho(budget, rho_v)
    state = make_state(budget, rho_v, l_v, objective_scale=energy / n_frames)
    return budget, state


def grid_oracle(problem, pitch=1e-2):
    """Exhaustive search over (rho, l_1, l_2), each axis split into 1/pitch steps.

    Objective and constraints are re-derived here from their closed forms.
    Energy grows with every ``l_n``, so the data constraint binds and no
    ``l_n`` exceeds ``l_bar`` at an optimum: ``[0, l_bar]`` is each bit
    variable's range.
    """
    bud, st = problem.budget, problem.state
    k = int(round(1 / pitch))
    lo = np.zeros(2)
    hi = np.minimum(bud.cap_iot, bud.l_bar)
    rho = np.linspace(0.0, 1.0, k + 1)[1:-1]
    L1, L2 = np.meshgrid(np.linspace(lo[0], hi[0], k + 1), np.linspace(lo[1], hi[1], k + 1),
                         indexing="ij")
    l = np.stack([L1.ravel(), L2.ravel()])
    lv, s, a = st.l_v[:, None], st.curvature[:, None], bud.a_coef[:, None]
    best = math.inf
    for r in rho:
        b = st.exponent_scale * (r * lv + st.rho_v * l - st.rho_v * lv
                                 + 0.5 * (s * (r - st.rho_v) ** 2 + (l - lv) ** 2 / s))
        e_a = (st.energy_scale * ((1 - r) ** 3 * lv**3 + (1 - st.rho_v) ** 3 * l**3)
               + 0.5 * st.tau_rho * (r - st.rho_v) ** 2 + 0.5 * st.tau_l * (l - lv) ** 2)
        total = np.sum(e_a + a * (2.0**b - 1.0), axis=0) + np.sum(bud.e_ch)
        ok = (np.all(b <= bud.exp_cap[:, None], axis=0) & (l.sum(axis=0) >= bud.l_bar)
              & np.all(l <= bud.cap_iot[:, None], axis=0) & np.all(l >= 0, axis=0))
        if ok.any():
            best = min(best, float(total[ok].min()))
    return best


@pytest.mark.parametrize("seed", range(3))
def test_matches_grid_search(scenario, seed):
    budget, state = micro_instance(scenario, seed)
    res = solve_inner(budget, state)
    problem = InnerProblem(budget, state)
    oracle = grid_oracle(problem)
    assert res.status == "converged"
    assert abs(res.value - oracle) <= 0.02 * oracle
    assert res.value <= oracle * (1 + 1e-9)
    for name, slack in problem.constraint_slacks(res.rho, res.l).items():
        assert np.min(slack) >= -1e-6, name


def test_solution_feasible_for_true_constraints(scenario):
    budget, state = micro_instance(scenario, 5, n_frames=20)
    res = solve_inner(budget, state)
    true_b = budget.exponent_scale * res.rho * res.l
    assert np.all(true_b <= surrogate_exponent(state, res.rho, res.l) + 1e-15)
    assert np.all(true_b <= budget.exp_cap)
    assert np.sum(res.l) >= budget.l_bar
    assert np.all(res.l <= budget.cap_iot)


def test_phase1_strictly_feasible(scenario):
    budget, state = micro_instance(scenario, 7, n_frames=10)
    problem = InnerProblem(budget, state)
    x = phase1(problem)
    assert math.isfinite(problem.barrier(x))


def test_no_data_requirement_gives_estimation_floor(scenario):
    s = scenario.replace(n_frames=4, l_bar=0.0)
    budget = Problem.build(s, seed=1, check_speed=False).budget(0.5)
    state = make_state(budget, 0.5, np.zeros(4), objective_scale=float(budget.e_ch[0]))
    res = solve_inner(budget, state)
    assert np.all(res.l < 1e-6 * np.max(budget.cap_iot))
    assert res.rho == pytest.approx(0.5, abs=1e-4)
    # the barrier stops at a duality gap of tol * max(1, |f|)
    assert 0.0 <= res.value - float(np.sum(budget.e_ch)) <= 1e-8


def test_fixed_rho_infeasible(scenario):
    s = scenario.replace(n_frames=2, l_bar=1e9)
    budget = Problem.build(s, seed=1, check_speed=False).budget(0.5)
    with pytest.raises(InnerInfeasibleError):
        solve_fixed_rho(budget, 0.5)


def test_fixed_rho_kkt(scenario):
    """Equal marginal energy across frames away from the caps."""
    budget, _ = micro_instance(scenario, 3, n_frames=8)
    l, energy, gap, status = solve_fixed_rho(budget, 0.5)
    assert status == "converged"
    k, c = budget.energy_scale * 0.125, math.log(2) * budget.exponent_scale * 0.5
    marginal = 3 * k * l**2 + budget.a_coef * c * np.exp(c * l)
    free = (l < 0.999 * budget.cap_iot) & (c * l < 0.999 * budget.exp_cap * math.log(2) * 0.5 / 0.5)
    assert np.ptp(marginal[free]) <= 1e-4 * np.mean(marginal[free])
    assert np.sum(l) == pytest.approx(budget.l_bar, rel=1e-6)
