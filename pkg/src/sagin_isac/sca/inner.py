"""Per-iteration convex subproblem and the fixed-offloading-ratio problem.

The offloading slack ``q_n`` is eliminated as ``A_n (2^{B_bar_n} - 1)``: the
objective increases strictly in ``q_n``, so its lower bound is active at
every optimum.  What remains is a smooth convex program in
``x = (rho, l_1, ..., l_N)`` with box, halfspace and one convex constraint
per frame, solved with the barrier method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..link_energy import FrameBudget
from .barrier import Bordered, barrier_minimize, path_following
from .surrogates import (
    SurrogateState,
    surrogate_energy,
    surrogate_energy_derivs,
    surrogate_exponent,
    surrogate_exponent_derivs,
)

LN2 = math.log(2.0)
_INTERIOR_MARGIN = 1e-9


class InnerInfeasibleError(ValueError):
    """The subproblem's constraint set has no strictly feasible point."""


def make_state(budget: FrameBudget, rho_v: float, l_v: np.ndarray, *,
               objective_scale: float, tau_factor: float = 1e-3) -> SurrogateState:
    """Surrogate state with proximal weights proportional to ``objective_scale``."""
    l_ref = max(budget.l_bar / budget.n_frames, 1.0)
    return SurrogateState(
        rho_v=float(rho_v),
        l_v=np.asarray(l_v, dtype=float),
        tau_rho=tau_factor * objective_scale,
        tau_l=tau_factor * objective_scale / l_ref**2,
        energy_scale=budget.energy_scale,
        exponent_scale=budget.exponent_scale,
        a_coef=budget.a_coef,
        l_ref=l_ref,
    )


@dataclass
class InnerProblem:
    """Surrogate problem around ``state``'s expansion point."""

    budget: FrameBudget
    state: SurrogateState

    @property
    def n_frames(self) -> int:
        return self.budget.n_frames

    @property
    def n_constraints(self) -> int:
        return 2 + 3 * self.n_frames + (self.budget.l_bar > 0.0)

    def objective(self, x: np.ndarray, derivs: bool = False):
        rho, l = x[0], x[1:]
        st, bud = self.state, self.budget
        e_a = surrogate_energy(st, rho, l)
        b = surrogate_exponent(st, rho, l)
        with np.errstate(over="ignore"):
            e_tx = bud.a_coef * np.expm1(LN2 * b)
        val = float(np.sum(bud.e_ch) + np.sum(e_a) + np.sum(e_tx))
        if not derivs:
            return val
        (ga_r, ga_l), (ha_rr, ha_ll) = surrogate_energy_derivs(st, rho, l)
        (gb_r, gb_l), (hb_rr, hb_ll) = surrogate_exponent_derivs(st, rho, l)
        w = bud.a_coef * LN2 * np.exp(LN2 * b)
        grad = np.concatenate([[np.sum(ga_r) + np.sum(w * gb_r)], ga_l + w * gb_l])
        hess = Bordered(
            diag=ha_ll + w * (hb_ll + LN2 * gb_l**2),
            corner=float(np.sum(ha_rr) + np.sum(w * (hb_rr + LN2 * gb_r**2))),
            border=w * LN2 * gb_r * gb_l,
        )
        return val, grad, hess

    def barrier(self, x: np.ndarray, derivs: bool = False):
        rho, l = x[0], x[1:]
        bud = self.budget
        slack_b = bud.exp_cap - surrogate_exponent(self.state, rho, l)
        hi = bud.cap_iot - l
        total = float(np.sum(l) - bud.l_bar)
        if (not 0.0 < rho < 1.0 or np.any(l <= 0.0) or np.any(hi <= 0.0)
                or np.any(slack_b <= 0.0) or (bud.l_bar > 0.0 and total <= 0.0)):
            return (math.inf, None, None) if derivs else math.inf
        val = -(math.log(rho) + math.log(1.0 - rho) + np.sum(np.log(l))
                + np.sum(np.log(hi)) + np.sum(np.log(slack_b)))
        if bud.l_bar > 0.0:
            val -= math.log(total)
        if not derivs:
            return float(val)
        (gb_r, gb_l), (hb_rr, hb_ll) = surrogate_exponent_derivs(self.state, rho, l)
        inv_b = 1.0 / slack_b
        g_rho = -1.0 / rho + 1.0 / (1.0 - rho) + np.sum(gb_r * inv_b)
        g_l = -1.0 / l + 1.0 / hi + gb_l * inv_b
        hess = Bordered(
            diag=1.0 / l**2 + 1.0 / hi**2 + hb_ll * inv_b + (gb_l * inv_b) ** 2,
            corner=float(1.0 / rho**2 + 1.0 / (1.0 - rho) ** 2
                         + np.sum(hb_rr * inv_b + (gb_r * inv_b) ** 2)),
            border=gb_r * gb_l * inv_b**2,
        )
        grad = np.concatenate([[g_rho], g_l])
        if bud.l_bar > 0.0:
            ones = np.concatenate([[0.0], np.ones(self.n_frames)])
            grad = grad - ones / total
            hess.add_rank1(1.0 / total**2, ones)
        return float(val), grad, hess

    def constraint_slacks(self, rho: float, l: np.ndarray) -> dict[str, np.ndarray]:
        bud = self.budget
        return {
            "exponent": bud.exp_cap - surrogate_exponent(self.state, rho, l),
            "rate_iot": bud.cap_iot - l,
            "l_nonneg": np.asarray(l, dtype=float),
            "rho_box": np.array([rho, 1.0 - rho]),
            "data_total": np.atleast_1d(np.sum(l) - bud.l_bar),
        }

    def l_interval(self, rho: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-frame open interval of ``l`` that is strictly feasible at ``rho``."""
        st, bud = self.state, self.budget
        s, kappa = st.curvature, st.exponent_scale
        # kappa * (l^2 / (2s) + (rho_v - l_v/s) l + c0) < exp_cap
        qa = kappa / (2.0 * s)
        qb = kappa * (st.rho_v - st.l_v / s)
        qc = kappa * (rho * st.l_v - st.rho_v * st.l_v + 0.5 * s * (rho - st.rho_v) ** 2
                      + st.l_v**2 / (2.0 * s)) - bud.exp_cap
        disc = qb**2 - 4.0 * qa * qc
        root = np.sqrt(np.maximum(disc, 0.0))
        lo = np.where(disc > 0.0, (-qb - root) / (2.0 * qa), np.inf)
        hi = np.where(disc > 0.0, (-qb + root) / (2.0 * qa), -np.inf)
        lo = np.maximum(lo, 0.0)
        hi = np.minimum(hi, bud.cap_iot)
        pad = _INTERIOR_MARGIN * np.maximum(hi - lo, 0.0)
        return lo + pad, hi - pad


def _fill(lo: np.ndarray, hi: np.ndarray, l_bar: float) -> tuple[np.ndarray, float] | None:
    """Midpoint-style fill of the intervals with ``sum > l_bar``; score in (0, 1]."""
    width = hi - lo
    if np.any(width <= 0.0):
        return None
    total_w = float(np.sum(width))
    theta_min = (l_bar - float(np.sum(lo))) / total_w
    if theta_min >= 1.0:
        return None
    theta_min = max(theta_min, 0.0)
    theta = theta_min + 0.5 * (1.0 - theta_min)
    return lo + theta * width, 1.0 - theta_min


def phase1(problem: InnerProblem, n_rho: int = 99) -> np.ndarray:
    """A strictly feasible point of the subproblem.

    One-dimensional search over ``rho``; for each candidate the feasible
    ``l`` intervals are known in closed form and filled so that the data
    constraint holds with room to spare.
    """
    st = problem.state
    candidates = [min(max(st.rho_v, 1e-3), 1.0 - 1e-3)]
    candidates += list(np.linspace(0.01, 0.99, n_rho))
    best, best_score = None, -math.inf
    for rho in candidates:
        filled = _fill(*problem.l_interval(rho), problem.budget.l_bar)
        if filled is None:
            continue
        l, score = filled
        if score > best_score:
            best, best_score = np.concatenate([[rho], l]), score
        if score >= 0.5:
            break
    if best is None or not math.isfinite(problem.barrier(best)):
        raise InnerInfeasibleError("subproblem has no strictly feasible point")
    return best


@dataclass
class InnerResult:
    rho: float
    l: np.ndarray
    value: float
    gap: float
    newton_steps: int
    status: str


def solve_inner(budget: FrameBudget, state: SurrogateState, *, tol: float = 1e-8,
                start: np.ndarray | None = None) -> InnerResult:
    """Minimize the surrogate problem around ``state``'s expansion point.

    The barrier starts halfway between the expansion point and the Phase I
    point (strictly feasible by convexity).
    """
    problem = InnerProblem(budget, state)
    if start is None:
        anchor = np.concatenate([[state.rho_v], state.l_v])
        x0 = 0.5 * (anchor + phase1(problem))
        if not math.isfinite(problem.barrier(x0)):
            x0 = phase1(problem)
    else:
        x0 = np.asarray(start, dtype=float)
    res = path_following(problem, x0, tol=tol)
    return InnerResult(rho=float(res.x[0]), l=res.x[1:], value=res.value, gap=res.gap,
                       newton_steps=res.newton_steps, status=res.status)


# ---------------------------------------------------------------------------
# true problem with the offloading ratio held fixed (convex in l)


def fixed_rho_upper(budget: FrameBudget, rho: float) -> np.ndarray:
    """Per-frame cap on ``l`` from both rate constraints at a fixed ``rho``."""
    if rho <= 0.0:
        return budget.cap_iot.copy()
    return np.minimum(budget.cap_iot, budget.exp_cap / (budget.exponent_scale * rho))


def solve_fixed_rho(budget: FrameBudget, rho: float, *, tol: float = 1e-8
                    ) -> tuple[np.ndarray, float, float, str]:
    """Exact minimizer of the true energy over ``l`` for a fixed ``rho``.

    Returns ``(l, energy, gap, status)``.  Raises
    :class:`InnerInfeasibleError` when the rate caps cannot carry ``l_bar``.
    """
    upper = fixed_rho_upper(budget, rho)
    if np.sum(upper) <= budget.l_bar or np.any(upper <= 0.0):
        raise InnerInfeasibleError("rate caps cannot carry the required data")
    k = budget.energy_scale * (1.0 - rho) ** 3
    c = LN2 * budget.exponent_scale * rho
    e_ch = float(np.sum(budget.e_ch))

    def f(l, derivs=False):
        ex = np.exp(c * l)
        val = e_ch + float(np.sum(k * l**3 + budget.a_coef * (ex - 1.0)))
        if not derivs:
            return val
        grad = 3.0 * k * l**2 + budget.a_coef * c * ex
        hess = Bordered(diag=6.0 * k * l + budget.a_coef * c**2 * ex)
        return val, grad, hess

    ones = np.ones(budget.n_frames)
    if budget.l_bar > 0.0:
        res = barrier_minimize(f, np.zeros(budget.n_frames), upper, ones, budget.l_bar, tol=tol)
    else:
        res = barrier_minimize(f, np.zeros(budget.n_frames), upper, tol=tol)
    return res.x, res.value, res.gap, res.status
