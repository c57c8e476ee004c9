"""Convex surrogates of the local-processing energy and the offloading exponent.

Both act per frame on ``(rho, l_n)`` around an expansion point
``(rho_v, l_v)``.  Values are vectors over frames; derivatives are returned
as the three distinct entries of each 2x2 Hessian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SAFEGUARD_EPS = 1e-3


@dataclass(frozen=True)
class SurrogateState:
    rho_v: float
    l_v: np.ndarray
    tau_rho: float
    tau_l: float
    energy_scale: float     # gamma_u * C_A^3 / N_d^2
    exponent_scale: float   # T / (B N_d)
    a_coef: np.ndarray      # offloading energy coefficient A_n
    l_ref: float = 1.0      # bit scale used by the safeguard
    eps: float = SAFEGUARD_EPS

    def __post_init__(self) -> None:
        object.__setattr__(self, "l_v", np.asarray(self.l_v, dtype=float))
        object.__setattr__(self, "a_coef", np.asarray(self.a_coef, dtype=float))
        if not (self.tau_rho > 0.0 and self.tau_l > 0.0):
            raise ValueError("proximal weights must be positive")
        if not 0.0 <= self.rho_v <= 1.0 or np.any(self.l_v < 0.0):
            raise ValueError("expansion point violates the box constraints")

    @property
    def curvature(self) -> np.ndarray:
        """Per-frame weight ``s`` of the exponent majorizer.

        ``s = l_v / rho_v`` gives the quadratic-over-point form; near the
        boundary the safeguard falls back to ``s = l_ref``.
        """
        safe = (self.rho_v >= self.eps) & (self.l_v >= self.eps * self.l_ref)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = self.l_v / self.rho_v
        return np.where(safe, ratio, self.l_ref)


# ---------------------------------------------------------------------------
# local processing energy


def true_compute_energy(state: SurrogateState, rho, l):
    return state.energy_scale * ((1.0 - rho) * np.asarray(l, dtype=float)) ** 3


def true_compute_grad(state: SurrogateState, rho, l):
    l = np.asarray(l, dtype=float)
    k = state.energy_scale
    return -3.0 * k * (1.0 - rho) ** 2 * l**3, 3.0 * k * (1.0 - rho) ** 3 * l**2


def surrogate_energy(state: SurrogateState, rho, l):
    """Product-of-convex surrogate of ``k (1-rho)^3 l^3`` plus proximal terms."""
    l = np.asarray(l, dtype=float)
    k = state.energy_scale
    return (k * ((1.0 - rho) ** 3 * state.l_v**3 + (1.0 - state.rho_v) ** 3 * l**3)
            + 0.5 * state.tau_rho * (rho - state.rho_v) ** 2
            + 0.5 * state.tau_l * (l - state.l_v) ** 2)


def surrogate_energy_derivs(state: SurrogateState, rho, l):
    """Gradient ``(d_rho, d_l)`` and Hessian diagonal ``(h_rr, h_ll)``.

    The surrogate is separable, so the mixed second derivative is zero.
    """
    l = np.asarray(l, dtype=float)
    k = state.energy_scale
    g_rho = -3.0 * k * (1.0 - rho) ** 2 * state.l_v**3 + state.tau_rho * (rho - state.rho_v)
    g_l = 3.0 * k * (1.0 - state.rho_v) ** 3 * l**2 + state.tau_l * (l - state.l_v)
    h_rr = 6.0 * k * (1.0 - rho) * state.l_v**3 + state.tau_rho
    h_ll = 6.0 * k * (1.0 - state.rho_v) ** 3 * l + state.tau_l
    return (g_rho, g_l), (h_rr, h_ll)


# ---------------------------------------------------------------------------
# offloading exponent


def true_exponent(state: SurrogateState, rho, l):
    return state.exponent_scale * rho * np.asarray(l, dtype=float)


def surrogate_exponent(state: SurrogateState, rho, l):
    """Convex majorizer of ``kappa * rho * l``, tight to first order at the point.

    Written as the linearization plus ``(s (rho - rho_v)^2 + (l - l_v)^2 / s) / 2``,
    which by AM-GM bounds the bilinear remainder for any ``s > 0``.
    """
    l = np.asarray(l, dtype=float)
    s = state.curvature
    d_rho, d_l = rho - state.rho_v, l - state.l_v
    lin = rho * state.l_v + state.rho_v * l - state.rho_v * state.l_v
    return state.exponent_scale * (lin + 0.5 * (s * d_rho**2 + d_l**2 / s))


def surrogate_exponent_derivs(state: SurrogateState, rho, l):
    """Gradient and Hessian diagonal of :func:`surrogate_exponent` (no cross term)."""
    l = np.asarray(l, dtype=float)
    s = state.curvature
    kappa = state.exponent_scale
    g_rho = kappa * (state.l_v + s * (rho - state.rho_v))
    g_l = kappa * (state.rho_v + (l - state.l_v) / s)
    return (g_rho, g_l), (kappa * s, kappa / s)


def cubic_exponent(state: SurrogateState, rho, l):
    """The cubic product form applied to the exponent, kept for comparison.

    It neither matches the exponent's value nor majorizes it.
    """
    l = np.asarray(l, dtype=float)
    return (state.exponent_scale
            * ((1.0 - rho) ** 3 * state.l_v**3 + (1.0 - state.rho_v) ** 3 * l**3)
            + 0.5 * state.tau_rho * (rho - state.rho_v) ** 2
            + 0.5 * state.tau_l * (l - state.l_v) ** 2)
