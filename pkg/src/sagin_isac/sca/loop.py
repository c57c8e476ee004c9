"""SCA iteration, outer grid over the pilot duration, and the baselines."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..channel import ChannelDraw, ChannelInnovations
from ..link_energy import (
    Allocation,
    ConstraintReport,
    FrameBudget,
    check_constraints,
    frame_budget,
)
from ..scenario import FrameContext, Scenario, trajectory
from ..sensing import sensing_sinr
from .inner import InnerInfeasibleError, fixed_rho_upper, make_state, solve_fixed_rho, solve_inner

log = logging.getLogger(__name__)

MODES = ("proposed", "opt_f", "opt_o", "fixed")
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 200
BASELINE_RHO = 0.5
ARMIJO = 1e-4


# ---------------------------------------------------------------------------
# step sizes


def harmonic_steps(v: int) -> float:
    return 1.0 / (v + 1.0)


@dataclass(frozen=True)
class DiminishingSteps:
    """``gamma(v+1) = gamma(v) * (1 - eps * gamma(v))``, ``gamma(0) = gamma0``.

    Decays like ``1 / (eps * v)``: nonsummable, tends to zero.
    """

    gamma0: float = 1.0
    eps: float = 1e-2

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma0 <= 1.0 or not 0.0 < self.eps < 1.0:
            raise ValueError("need gamma0 in (0, 1] and eps in (0, 1)")

    def __call__(self, v: int) -> float:
        g = self.gamma0
        for _ in range(v):
            g *= 1.0 - self.eps * g
        return g


# ---------------------------------------------------------------------------
# true objective on a budget


def true_total(budget: FrameBudget, rho: float, l: np.ndarray) -> float:
    return float(np.sum(budget.true_energy(rho, l)))


def true_gradient(budget: FrameBudget, rho: float, l: np.ndarray) -> tuple[float, np.ndarray]:
    k, kappa = budget.energy_scale, budget.exponent_scale
    w = budget.a_coef * math.log(2.0) * kappa * np.exp(math.log(2.0) * kappa * rho * l)
    g_rho = float(np.sum(-3.0 * k * (1.0 - rho) ** 2 * l**3 + w * l))
    g_l = 3.0 * k * (1.0 - rho) ** 3 * l**2 + w * rho
    return g_rho, g_l


# ---------------------------------------------------------------------------
# SCA


@dataclass
class ScaTrace:
    rho: float
    l: np.ndarray
    history: list[float]
    steps: list[float]
    kkt_residual: float
    status: str

    @property
    def iterations(self) -> int:
        return len(self.history) - 1


def sca_loop(budget: FrameBudget, rho0: float, l0: np.ndarray, *,
             schedule: Callable[[int], float] = DiminishingSteps(),
             tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
             inner_tol: float = 1e-8, tau_factor: float = 1e-3) -> ScaTrace:
    """Successive convex approximation from a feasible ``(rho0, l0)``.

    Each step moves toward the surrogate minimizer by ``gamma(v)``, halved
    until the true energy shows sufficient decrease, so the history is
    nonincreasing.  Stops when ``|E_t - E_{t-1}| < tol * E_t``.
    """
    rho, l = float(rho0), np.array(l0, dtype=float)
    energy = true_total(budget, rho, l)
    history, steps = [energy], []
    scale = max(energy / budget.n_frames, 1e-300)
    gap = math.nan
    for v in range(max_iters):
        state = make_state(budget, rho, l, objective_scale=scale, tau_factor=tau_factor)
        try:
            inner = solve_inner(budget, state, tol=inner_tol)
        except InnerInfeasibleError:
            log.debug("subproblem lost its interior at iteration %d", v)
            return ScaTrace(rho, l, history, steps, gap, "max-iters")
        gap = inner.gap
        d_rho, d_l = inner.rho - rho, inner.l - l
        g_rho, g_l = true_gradient(budget, rho, l)
        slope = g_rho * d_rho + float(g_l @ d_l)
        gamma = schedule(v) if slope < 0.0 else 0.0
        new_energy = energy
        while gamma > 0.0:
            cand_rho = rho + gamma * d_rho
            cand_l = np.maximum(l + gamma * d_l, 0.0)
            cand = true_total(budget, cand_rho, cand_l)
            if cand <= energy + ARMIJO * gamma * slope:
                rho, l, new_energy = cand_rho, cand_l, cand
                break
            gamma *= 0.5
            if gamma < 1e-12:
                gamma = 0.0
        steps.append(gamma)
        history.append(new_energy)
        change = abs(energy - new_energy)
        energy = new_energy
        if change < tol * abs(energy):
            return ScaTrace(rho, l, history, steps, gap, "converged")
    return ScaTrace(rho, l, history, steps, gap, "max-iters")


# ---------------------------------------------------------------------------
# problem bundle


@dataclass
class Problem:
    """Scenario, frame geometry and the fixed channel randomness.

    Channel draws for a pilot duration are derived from the same
    innovations, so every candidate and every baseline sees common random
    numbers.  Results per pilot duration are cached.
    """

    s: Scenario
    contexts: list[FrameContext]
    innovations: ChannelInnovations
    _budgets: dict = field(default_factory=dict, repr=False)
    _fixed: dict = field(default_factory=dict, repr=False)
    _sca: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, s: Scenario, *, seed: int | None = None, check_speed: bool = True) -> "Problem":
        contexts = trajectory(s, check_speed=check_speed)
        return cls(s, contexts, ChannelInnovations.from_seed(s, seed))

    def draws(self, n_p: float) -> list[ChannelDraw]:
        return self.innovations.realize(self.contexts, self.s, n_p)

    def budget(self, n_p: float) -> FrameBudget:
        key = _key(n_p)
        if key not in self._budgets:
            n_d = self.s.frame_len - n_p
            self._budgets[key] = frame_budget(self.draws(n_p), self.s, n_p, n_d)
        return self._budgets[key]

    def with_gamma(self, gamma_s: float) -> "Problem":
        """Same channels and shared caches under another SINR threshold.

        Cached solves never depend on the threshold; it only filters them.
        """
        return Problem(self.s.replace(gamma_s=gamma_s), self.contexts, self.innovations,
                       self._budgets, self._fixed, self._sca)

    def sinr(self, n_p: float) -> float:
        return sensing_sinr(self.s, self.contexts, n_p)

    def sinr_ok(self, n_p: float) -> bool:
        return self.sinr(n_p) >= self.s.gamma_s

    def grid(self) -> list[float]:
        step, t = self.s.grid_step, self.s.frame_len
        count = int(math.floor(t / step + 1e-9))
        pts = [round(k * step, 12) for k in range(1, count + 1)]
        return [p for p in pts if p < t - 1e-12]


def _key(n_p: float) -> float:
    return round(float(n_p), 12)


# ---------------------------------------------------------------------------
# results


@dataclass
class SolveResult:
    allocation: Allocation | None
    objective: float
    history: list[float]
    kkt_residual: float
    report: ConstraintReport | None
    status: str  # converged | max-iters | infeasible
    mode: str = "proposed"
    trace: list[tuple[float, float, int, str]] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status != "infeasible"

    @property
    def iterations(self) -> int:
        return max(len(self.history) - 1, 0)

    def trace_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["n_p", "energy_total", "iters", "status"])
            for n_p, energy, iters, status in self.trace:
                e = format(energy, ".17g") if math.isfinite(energy) else "infeasible"
                writer.writerow([format(n_p, ".12g"), e, iters, status])


def _infeasible(mode: str, trace=None) -> SolveResult:
    return SolveResult(None, math.inf, [], math.nan, None, "infeasible", mode, trace or [])


def _finish(problem: Problem, n_p: float, rho: float, l: np.ndarray, history, gap, status,
            mode: str) -> SolveResult:
    s = problem.s
    budget = problem.budget(n_p)
    l = np.asarray(l, dtype=float)
    q = budget.a_coef * np.expm1(math.log(2.0) * budget.exponent_scale * rho * l)
    alloc = Allocation(n_p=n_p, n_d=s.frame_len - n_p, rho=float(min(max(rho, 0.0), 1.0)),
                       l_d=l, q=q)
    report = check_constraints(problem.draws(n_p), s, alloc, problem.contexts)
    energy = true_total(budget, alloc.rho, l)
    return SolveResult(alloc, energy, list(history), gap, report, status, mode)


# ---------------------------------------------------------------------------
# per-candidate solves


def fixed_rho_point(problem: Problem, n_p: float, rho: float = BASELINE_RHO) -> SolveResult:
    """Optimal bit schedule for fixed ``(n_p, rho)``; cached."""
    if not problem.sinr_ok(n_p):
        return _infeasible("fixed")
    key = (_key(n_p), rho)
    if key not in problem._fixed:
        try:
            l, energy, gap, status = solve_fixed_rho(problem.budget(n_p), rho)
        except InnerInfeasibleError:
            problem._fixed[key] = _infeasible("fixed")
        else:
            problem._fixed[key] = _finish(problem, n_p, rho, l, [energy], gap, status, "fixed")
    return problem._fixed[key]


def initial_point(budget: FrameBudget, rho: float = BASELINE_RHO) -> np.ndarray:
    """``l = l_bar / N`` clipped to the caps, deficit spread over the headroom."""
    upper = fixed_rho_upper(budget, rho)
    if np.sum(upper) < budget.l_bar:
        raise InnerInfeasibleError("rate caps cannot carry the required data")
    l = np.minimum(budget.l_bar / budget.n_frames, upper)
    deficit = budget.l_bar - np.sum(l)
    if deficit > 0.0:
        room = upper - l
        l = l + room * (deficit / np.sum(room))
    return l


def sca_point(problem: Problem, n_p: float, *, schedule=None, tol: float = DEFAULT_TOL,
              max_iters: int = DEFAULT_MAX_ITERS) -> SolveResult:
    """SCA over ``(rho, l)`` at a fixed pilot duration; cached.

    Warm-started from the optimal schedule at ``rho = 0.5``, so the result
    never exceeds that baseline's energy.
    """
    if not problem.sinr_ok(n_p):
        return _infeasible("proposed")
    key = _key(n_p)
    default = schedule is None and tol == DEFAULT_TOL and max_iters == DEFAULT_MAX_ITERS
    if default and key in problem._sca:
        return problem._sca[key]
    start = fixed_rho_point(problem, n_p)
    if not start.feasible:
        result = _infeasible("proposed")
    else:
        trace = sca_loop(problem.budget(n_p), start.allocation.rho, start.allocation.l_d,
                         schedule=schedule or DiminishingSteps(), tol=tol, max_iters=max_iters)
        result = _finish(problem, n_p, trace.rho, trace.l, trace.history,
                         trace.kkt_residual, trace.status, "proposed")
    if default:
        problem._sca[key] = result
    return result


def _over_grid(problem: Problem, solve: Callable[[float], SolveResult], mode: str,
               grid: list[float] | None) -> SolveResult:
    trace = []
    best = None
    for n_p in grid if grid is not None else problem.grid():
        res = solve(n_p)
        trace.append((n_p, res.objective, res.iterations, res.status))
        # strict inequality keeps the smallest n_p among ties
        if res.feasible and (best is None or res.objective < best.objective):
            best = res
    if best is None:
        return _infeasible(mode, trace)
    return SolveResult(best.allocation, best.objective, best.history, best.kkt_residual,
                       best.report, best.status, mode, trace)


def optimize(problem: Problem, *, grid: list[float] | None = None) -> SolveResult:
    """Joint optimization: grid over ``n_p``, SCA over ``(rho, l)`` at each point."""
    return _over_grid(problem, lambda n_p: sca_point(problem, n_p), "proposed", grid)


def baseline(mode: str, problem: Problem, *, grid: list[float] | None = None) -> SolveResult:
    """Benchmark schemes; every mode still optimizes the bit schedule."""
    half = problem.s.frame_len / 2.0
    if mode == "proposed":
        return optimize(problem, grid=grid)
    if mode == "opt_f":
        return _over_grid(problem, lambda n_p: fixed_rho_point(problem, n_p), mode, grid)
    if mode == "opt_o":
        res = sca_point(problem, half)
    elif mode == "fixed":
        res = fixed_rho_point(problem, half)
    else:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    return SolveResult(res.allocation, res.objective, res.history, res.kkt_residual,
                       res.report, res.status, mode,
                       [(half, res.objective, res.iterations, res.status)])
