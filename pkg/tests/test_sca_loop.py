import csv
import math

import numpy as np
import pytest

from sagin_isac.sca import (
    DiminishingSteps,
    Problem,
    baseline,
    harmonic_steps,
    optimize,
    sca_loop,
    sca_point,
)
from sagin_isac.sca.loop import fixed_rho_point


def test_step_schedules():
    steps = DiminishingSteps()
    vals = [steps(v) for v in range(500)]
    assert vals[0] == 1.0 and all(b < a for a, b in zip(vals, vals[1:]))
    assert sum(vals) > 50          # nonsummable in practice
    assert harmonic_steps(0) == 1.0 and harmonic_steps(3) == 0.25
    with pytest.raises(ValueError):
        DiminishingSteps(eps=0.0)


def test_fixed_point_stops_after_one_iteration(problem):
    res = sca_point(problem, 0.5)
    assert res.status == "converged"
    budget = problem.budget(0.5)
    again = sca_loop(budget, res.allocation.rho, res.allocation.l_d)
    assert again.iterations == 1 and again.status == "converged"


def test_zero_iterations_returns_start(problem):
    start = fixed_rho_point(problem, 0.5)
    budget = problem.budget(0.5)
    trace = sca_loop(budget, 0.5, start.allocation.l_d, max_iters=0)
    assert trace.status == "max-iters"
    assert trace.rho == 0.5 and np.array_equal(trace.l, start.allocation.l_d)
    assert trace.history == [pytest.approx(start.objective, rel=1e-15)]


def test_harmonic_steps_monotone(problem):
    res = sca_point(problem, 0.4, schedule=harmonic_steps)
    hist = np.array(res.history)
    assert np.all(hist[1:] <= hist[:-1] * (1 + 1e-9))
    assert res.status == "converged"


def test_sca_improves_on_fixed_ratio(problem):
    for n_p in (0.3, 0.5, 0.7):
        assert sca_point(problem, n_p).objective <= fixed_rho_point(problem, n_p).objective


def test_converged_points_are_feasible(problem):
    for n_p in problem.grid():
        res = sca_point(problem, n_p)
        if res.feasible:
            assert res.report.feasible(rel_tol=1e-6), (n_p, res.report.violations())


def test_single_candidate_grid(scenario):
    p = Problem.build(scenario.replace(grid_step=scenario.frame_len / 2))
    assert p.grid() == [0.5]
    res = optimize(p)
    assert [row[0] for row in res.trace] == [0.5]


def test_unreachable_sinr_is_infeasible(scenario, problem):
    top = problem.sinr(scenario.frame_len - scenario.grid_step)
    hard = problem.with_gamma(top * 1.01)
    for mode in ("proposed", "opt_f", "opt_o", "fixed"):
        res = baseline(mode, hard)
        assert res.status == "infeasible" and math.isinf(res.objective)
        assert res.allocation is None


def test_fixed_mode_cliff(problem):
    limit = problem.sinr(0.5)
    below = baseline("fixed", problem.with_gamma(limit * 0.999))
    at = baseline("fixed", problem.with_gamma(limit))
    above = baseline("fixed", problem.with_gamma(limit * 1.001))
    assert below.feasible and at.feasible and not above.feasible
    assert below.objective == at.objective == baseline("fixed", problem).objective


def test_nested_baselines(problem):
    e = {m: baseline(m, problem).objective for m in ("proposed", "opt_f", "opt_o", "fixed")}
    assert e["proposed"] <= e["opt_f"]
    assert e["proposed"] <= e["opt_o"] <= e["fixed"]


def test_no_requirements_gives_estimation_floor(scenario):
    s = scenario.replace(l_bar=0.0, gamma_s=0.0)
    p = Problem.build(s)
    res = optimize(p)
    n_p = res.allocation.n_p
    assert n_p == p.grid()[0]
    floor = float(np.sum(p.budget(n_p).e_ch))
    assert res.objective == pytest.approx(floor, rel=1e-6)


def test_determinism(scenario):
    a = optimize(Problem.build(scenario, seed=99))
    b = optimize(Problem.build(scenario, seed=99))
    assert a.objective == b.objective and a.history == b.history
    assert np.array_equal(a.allocation.l_d, b.allocation.l_d)
    assert a.trace == b.trace


def test_trace_csv_rereduction(tmp_path, problem):
    res = optimize(problem)
    path = tmp_path / "trace.csv"
    res.trace_csv(path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(problem.grid())
    energies = [(float(r["energy_total"]), float(r["n_p"])) for r in rows
                if r["energy_total"] != "infeasible"]
    best = min(energies)
    assert best[0] == res.objective and best[1] == pytest.approx(res.allocation.n_p)


def test_unknown_mode(problem):
    with pytest.raises(ValueError):
        baseline("greedy", problem)
