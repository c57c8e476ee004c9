"""Log-barrier Newton method with structured Hessians, plus projected gradient.

The inner problems have one coupling variable (the offloading ratio) and
one separable variable per frame, so their Hessians are arrowhead matrices
plus a few rank-one terms.  :class:`Bordered` solves such systems in O(n).
Dense ``ndarray`` Hessians are accepted everywhere as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np


@dataclass
class Bordered:
    """``[[corner, border^T], [border, diag(diag)]] + sum_k w_k v_k v_k^T``.

    With ``corner=None`` the matrix is ``diag(diag)`` plus the low-rank part.
    """

    diag: np.ndarray
    corner: float | None = None
    border: np.ndarray | None = None
    low_rank: list[tuple[float, np.ndarray]] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.diag) + (self.corner is not None)

    def add_rank1(self, weight: float, vec: np.ndarray) -> "Bordered":
        self.low_rank.append((float(weight), np.asarray(vec, dtype=float)))
        return self

    def scaled(self, alpha: float) -> "Bordered":
        return Bordered(
            diag=alpha * self.diag,
            corner=None if self.corner is None else alpha * self.corner,
            border=None if self.border is None else alpha * self.border,
            low_rank=[(alpha * w, v) for w, v in self.low_rank],
        )

    def __add__(self, other: "Bordered") -> "Bordered":
        if (self.corner is None) != (other.corner is None):
            raise ValueError("cannot add bordered and unbordered matrices")
        if self.corner is None:
            corner, border = None, None
        else:
            corner = self.corner + other.corner
            border = _add_opt(self.border, other.border, len(self.diag))
        return Bordered(self.diag + other.diag, corner, border,
                        self.low_rank + other.low_rank)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.corner is None:
            out = self.diag * x
        else:
            b = self._border()
            out = np.empty_like(x)
            out[0] = self.corner * x[0] + b @ x[1:]
            out[1:] = b * x[0] + self.diag * x[1:]
        for w, v in self.low_rank:
            out = out + w * (v @ x) * v
        return out

    def to_dense(self) -> np.ndarray:
        n = self.size
        if self.corner is None:
            h = np.diag(self.diag).astype(float)
        else:
            h = np.zeros((n, n))
            h[0, 0] = self.corner
            h[0, 1:] = h[1:, 0] = self._border()
            h[1:, 1:] = np.diag(self.diag)
        for w, v in self.low_rank:
            h += w * np.outer(v, v)
        return h

    def _border(self) -> np.ndarray:
        return np.zeros(len(self.diag)) if self.border is None else self.border

    def _base_solve(self, rhs: np.ndarray) -> np.ndarray:
        if np.any(self.diag <= 0.0):
            raise np.linalg.LinAlgError("diagonal block is not positive definite")
        r = rhs if rhs.ndim == 2 else rhs[:, None]
        if self.corner is None:
            out = r / self.diag[:, None]
        else:
            b = self._border()
            dinv_b = b / self.diag
            schur = self.corner - b @ dinv_b
            if not schur > 0.0:
                raise np.linalg.LinAlgError("arrowhead Schur complement is not positive")
            dinv_r1 = r[1:] / self.diag[:, None]
            x0 = (r[0] - b @ dinv_r1) / schur
            out = np.vstack([x0[None, :], dinv_r1 - dinv_b[:, None] * x0[None, :]])
        return out if rhs.ndim == 2 else out[:, 0]

    def solve(self, rhs: np.ndarray, refine: int = 2) -> np.ndarray:
        """Solve ``H x = rhs`` by block elimination and Woodbury.

        Barrier Hessians get badly conditioned near the boundary, so the
        solution is polished with ``refine`` steps of iterative refinement.
        """
        rhs = np.asarray(rhs, dtype=float)
        if self.low_rank:
            w = np.array([w for w, _ in self.low_rank])
            v = np.column_stack([v for _, v in self.low_rank])
            z = self._base_solve(v)
            cap = np.eye(len(w)) + w[:, None] * (v.T @ z)
        else:
            w = v = z = cap = None

        def apply_inverse(r):
            y = self._base_solve(r)
            if w is None:
                return y
            return y - z @ np.linalg.solve(cap, w * (v.T @ y))

        x = apply_inverse(rhs)
        for _ in range(refine):
            x = x + apply_inverse(rhs - self.matvec(x))
        return x


def _add_opt(a, b, n):
    if a is None and b is None:
        return None
    return (np.zeros(n) if a is None else a) + (np.zeros(n) if b is None else b)


def _combine(t: float, hf, hb):
    if isinstance(hf, Bordered) and isinstance(hb, Bordered):
        return hf.scaled(t) + hb
    as_dense = lambda h: h.to_dense() if isinstance(h, Bordered) else h  # noqa: E731
    return t * as_dense(hf) + as_dense(hb)


def newton_direction(h, g: np.ndarray) -> np.ndarray:
    if isinstance(h, Bordered):
        try:
            return -h.solve(g)
        except np.linalg.LinAlgError:
            h = h.to_dense()
    try:
        c = np.linalg.cholesky(h)
        return -np.linalg.solve(c.T, np.linalg.solve(c, g))
    except np.linalg.LinAlgError:
        shift = 1e-10 * max(1.0, float(np.max(np.abs(np.diag(h)))))
        return -np.linalg.solve(h + shift * np.eye(len(g)), g)


# ---------------------------------------------------------------------------
# path following


class BarrierProblem(Protocol):
    n_constraints: int

    def objective(self, x: np.ndarray, derivs: bool = False): ...

    def barrier(self, x: np.ndarray, derivs: bool = False): ...


@dataclass
class BarrierResult:
    x: np.ndarray
    value: float
    gap: float
    newton_steps: int
    status: str  # "converged" | "max-iters"


def path_following(problem: BarrierProblem, x0: np.ndarray, *, tol: float = 1e-8,
                   mu: float = 20.0, t0: float | None = None,
                   newton_tol: float = 1e-7, max_newton: int = 2000,
                   max_centering: int = 100) -> BarrierResult:
    """Minimize ``objective`` over the strictly feasible set of ``barrier``.

    Stops when the duality-gap bound ``m / t`` falls below
    ``tol * max(1, |f|)``.  ``x0`` must be strictly feasible.
    """
    x = np.array(x0, dtype=float)
    m = problem.n_constraints
    f0 = problem.objective(x)
    b0 = problem.barrier(x)
    if not (math.isfinite(f0) and math.isfinite(b0)):
        raise ValueError("starting point is not strictly feasible")
    if t0 is None:
        t0 = _initial_t(problem, x, m, f0)
    t = t0
    steps = 0

    def merit(y):
        fb = problem.barrier(y)
        if not math.isfinite(fb):
            return math.inf
        return t * problem.objective(y) + fb

    while True:
        # centering; the decrement floors at roundoff level for large t
        for _ in range(max_centering):
            if steps >= max_newton:
                break
            f, gf, hf = problem.objective(x, derivs=True)
            fb, gb, hb = problem.barrier(x, derivs=True)
            g = t * gf + gb
            dx = newton_direction(_combine(t, hf, hb), g)
            decrement = -float(g @ dx)
            steps += 1
            if not decrement > 2.0 * newton_tol:
                break
            phi = t * f + fb
            # merit values near the optimum are only known to roundoff
            slack = 16.0 * np.finfo(float).eps * (abs(t * f) + abs(fb))
            step = 1.0
            while step > 1e-14:
                if merit(x + step * dx) <= phi - 0.25 * step * decrement + slack:
                    break
                step *= 0.5
            else:
                break
            x = x + step * dx
        f = problem.objective(x)
        gap = m / t
        if gap <= tol * max(1.0, abs(f)) or m == 0:
            return BarrierResult(x, f, gap, steps, "converged")
        if steps >= max_newton:
            return BarrierResult(x, f, gap, steps, "max-iters")
        t *= mu


def _initial_t(problem: BarrierProblem, x: np.ndarray, m: int, f0: float) -> float:
    """``t`` making ``x`` as central as possible (least-squares gradient fit)."""
    _, gf, _ = problem.objective(x, derivs=True)
    _, gb, _ = problem.barrier(x, derivs=True)
    fallback = max(m, 1) / max(1.0, abs(f0))
    gg = float(gf @ gf)
    if gg > 0.0:
        t = -float(gf @ gb) / gg
        if math.isfinite(t) and t > 0.0:
            return min(max(t, 1e-3 * fallback), 1e3 * fallback)
    return fallback


# ---------------------------------------------------------------------------
# box + halfspace constraints


@dataclass
class BoxHalfspace:
    """``lower < x < upper`` and ``a @ x > c`` (halfspace optional)."""

    lower: np.ndarray
    upper: np.ndarray
    a: np.ndarray | None = None
    c: float = 0.0

    def __post_init__(self) -> None:
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.a is not None:
            self.a = np.asarray(self.a, dtype=float)

    @property
    def n_constraints(self) -> int:
        finite = np.isfinite(self.lower).sum() + np.isfinite(self.upper).sum()
        return int(finite) + (self.a is not None)

    def barrier(self, x: np.ndarray, derivs: bool = False, bordered: bool = False):
        lo_s = x - self.lower
        hi_s = self.upper - x
        if np.any(lo_s <= 0.0) or np.any(hi_s <= 0.0):
            return (math.inf, None, None) if derivs else math.inf
        fin_lo, fin_hi = np.isfinite(self.lower), np.isfinite(self.upper)
        val = -np.sum(np.log(lo_s[fin_lo])) - np.sum(np.log(hi_s[fin_hi]))
        h_slack = None
        if self.a is not None:
            h_slack = float(self.a @ x - self.c)
            if h_slack <= 0.0:
                return (math.inf, None, None) if derivs else math.inf
            val -= math.log(h_slack)
        if not derivs:
            return float(val)
        inv_lo = np.where(fin_lo, 1.0 / np.where(fin_lo, lo_s, 1.0), 0.0)
        inv_hi = np.where(fin_hi, 1.0 / np.where(fin_hi, hi_s, 1.0), 0.0)
        grad = -inv_lo + inv_hi
        hess = Bordered(diag=inv_lo**2 + inv_hi**2)
        if h_slack is not None:
            grad = grad - self.a / h_slack
            hess.add_rank1(1.0 / h_slack**2, self.a)
        return float(val), grad, hess

    def interior_point(self, margin: float = 0.5) -> np.ndarray:
        """A strictly feasible point, or ValueError if the set has no interior."""
        if np.any(~np.isfinite(self.lower)) or np.any(~np.isfinite(self.upper)):
            raise ValueError("interior point search needs finite bounds")
        if np.any(self.upper <= self.lower):
            raise ValueError("box has empty interior")
        width = self.upper - self.lower
        if self.a is None:
            return self.lower + margin * width
        # a @ x is affine in theta along lower + theta * width on the favourable corner
        base = np.where(self.a >= 0.0, self.lower, self.upper)
        span = np.where(self.a >= 0.0, width, -width)
        lo_val, gain = float(self.a @ base), float(self.a @ span)
        if lo_val + gain <= self.c:
            raise ValueError("halfspace does not intersect the box interior")
        theta_min = max(0.0, (self.c - lo_val) / gain) if gain > 0 else 0.0
        theta = theta_min + margin * (1.0 - theta_min)
        return base + theta * span


@dataclass
class _Composite:
    f: Callable
    cons: BoxHalfspace

    @property
    def n_constraints(self) -> int:
        return self.cons.n_constraints

    def objective(self, x, derivs=False):
        return self.f(x, derivs)

    def barrier(self, x, derivs=False):
        return self.cons.barrier(x, derivs)


def barrier_minimize(f: Callable, lower, upper, a=None, c: float = 0.0, *,
                     x0: np.ndarray | None = None, tol: float = 1e-8,
                     max_newton: int = 2000) -> BarrierResult:
    """Minimize a smooth convex ``f`` over a box intersected with ``a @ x >= c``.

    ``f(x, derivs)`` returns the value, or ``(value, grad, hessian)`` when
    ``derivs`` is true; the Hessian may be dense or :class:`Bordered`.
    """
    cons = BoxHalfspace(lower, upper, a, c)
    start = cons.interior_point() if x0 is None else np.asarray(x0, dtype=float)
    return path_following(_Composite(f, cons), start, tol=tol, max_newton=max_newton)


def project_box_halfspace(y: np.ndarray, lower, upper, a=None, c: float = 0.0,
                          iters: int = 200) -> np.ndarray:
    """Euclidean projection onto ``{lower <= x <= upper, a @ x >= c}``."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = np.clip(y, lower, upper)
    if a is None or a @ x >= c:
        return x
    a = np.asarray(a, dtype=float)
    top = float(a @ np.where(a >= 0.0, upper, lower))
    if top < c:
        raise ValueError("constraint set is empty")
    # x(lam) = clip(y + lam a) has a @ x(lam) nondecreasing in lam
    lam_hi = 1.0
    while a @ np.clip(y + lam_hi * a, lower, upper) < c:
        lam_hi *= 2.0
    lam_lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lam_lo + lam_hi)
        if a @ np.clip(y + mid * a, lower, upper) >= c:
            lam_hi = mid
        else:
            lam_lo = mid
        if lam_hi - lam_lo <= 1e-16 * lam_hi:
            break
    return np.clip(y + lam_hi * a, lower, upper)


def projected_gradient(f: Callable, x0: np.ndarray, lower, upper, a=None, c: float = 0.0, *,
                       max_iters: int = 100_000, tol: float = 1e-12,
                       step0: float = 1.0) -> tuple[np.ndarray, float, int]:
    """Projected gradient with backtracking on the quadratic upper model.

    ``f(x, derivs)`` as in :func:`barrier_minimize`; only the gradient is used.
    Returns ``(x, f(x), iterations)``.
    """
    proj = lambda z: project_box_halfspace(z, lower, upper, a, c)  # noqa: E731
    x = proj(np.asarray(x0, dtype=float))
    fx, g, _ = f(x, True)
    step = step0
    for it in range(1, max_iters + 1):
        while True:
            x_new = proj(x - step * g)
            d = x_new - x
            f_new = f(x_new, False)
            if f_new <= fx + g @ d + (d @ d) / (2.0 * step) + 1e-15 * abs(fx):
                break
            step *= 0.5
            if step < 1e-300:
                return x, fx, it
        if np.linalg.norm(d) <= tol * max(1.0, np.linalg.norm(x)):
            return x_new, f_new, it
        if f_new >= fx:
            # roundoff floor: accepted steps no longer decrease f
            return (x_new, f_new, it) if f_new <= fx else (x, fx, it)
        x = x_new
        fx, g, _ = f(x, True)
        step *= 2.0
    return x, fx, max_iters
