"""Achievable rates, AAV energy terms and the constraint oracle."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelDraw
from .scenario import FrameContext, Scenario
from .sensing import sensing_sinr


class InfeasibleEnergyError(ValueError):
    """A load is scheduled into a phase of zero duration."""


@dataclass
class Allocation:
    """Decision variables: pilot/data durations, offloading ratio, data bits."""

    n_p: float
    n_d: float
    rho: float
    l_d: np.ndarray
    q: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.l_d = np.asarray(self.l_d, dtype=float)
        if self.n_p < 0.0 or self.n_d < 0.0:
            raise ValueError("durations must be nonnegative")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if np.any(self.l_d < 0.0):
            raise ValueError("l_d must be nonnegative")

    @classmethod
    def split(cls, s: Scenario, n_p: float, rho: float, l_d, q=None) -> "Allocation":
        return cls(n_p=n_p, n_d=s.frame_len - n_p, rho=rho, l_d=l_d, q=q)

    def check_frame(self, s: Scenario) -> None:
        if abs(self.n_p + self.n_d - s.frame_len) > 1e-12 * s.frame_len:
            raise ValueError("n_p + n_d must equal the frame length")
        if len(self.l_d) != s.n_frames:
            raise ValueError("l_d must have one entry per frame")

    def to_mapping(self) -> dict:
        out = {"n_p": self.n_p, "n_d": self.n_d, "rho": self.rho,
               "l_d": [float(x) for x in self.l_d]}
        if self.q is not None:
            out["q"] = [float(x) for x in self.q]
        return out


# ---------------------------------------------------------------------------
# rates


def _rate_scale(s: Scenario) -> float:
    return s.bandwidth if s.rate_bandwidth_product == "literal" else 1.0


def iot_snr_coeff(s: Scenario, n_p: float) -> float:
    """Effective SNR per unit ||h_est||^2 of the IoT -> AAV data link."""
    num = s.p_pilot * s.p_data * n_p
    return num / (s.p_data * s.sigma_z2 + s.p_pilot * n_p * s.sigma_z2)


def rate_iot_aav(draw: ChannelDraw, s: Scenario, n_p: float, n_d: float) -> float:
    """IoT -> AAV rate with the ML estimate used as the channel.

    Evaluated through ``det(I + a v v^H) = 1 + a ||v||^2``.
    """
    if not n_p > 0.0:
        raise ValueError("n_p must be positive: channel estimate undefined")
    if n_d < 0.0:
        raise ValueError("n_d must be nonnegative")
    gain = float(np.vdot(draw.h_est, draw.h_est).real)
    return n_d / s.frame_len * math.log2(1.0 + iot_snr_coeff(s, n_p) * gain)


def rate_aav_leo(draw: ChannelDraw, s: Scenario, n_d: float, p_aav_tx: float | None = None) -> float:
    """AAV -> LEO rate under MRT beamforming."""
    if n_d < 0.0:
        raise ValueError("n_d must be nonnegative")
    p_a = s.p_aav_tx if p_aav_tx is None else p_aav_tx
    return n_d / s.frame_len * math.log2(1.0 + p_a * draw.relay_gain / s.sigma_l2)


# ---------------------------------------------------------------------------
# energies


def energy_channel_est(s: Scenario, n_p: float, l_p: float) -> float:
    if l_p == 0.0:
        return 0.0
    if not n_p > 0.0:
        raise InfeasibleEnergyError("channel estimation load with zero pilot duration")
    return s.gamma_u * (s.c_ch * l_p) ** 3 / n_p**2


def energy_compute(s: Scenario, n_d: float, rho: float, l_dn):
    """Local processing energy; vectorizes over ``l_dn``."""
    load = (1.0 - rho) * np.asarray(l_dn, dtype=float)
    if n_d <= 0.0:
        if np.any(load > 0.0):
            raise InfeasibleEnergyError("local processing load with zero data duration")
        return np.zeros_like(load) if load.ndim else 0.0
    out = s.gamma_u * (s.c_a * load) ** 3 / n_d**2
    return out if out.ndim else float(out)


def offload_coeff(s: Scenario, n_d: float, relay_gain) -> np.ndarray | float:
    """``A_n = N_d sigma^2 / |h^H w|^2``, the energy scale of offloading."""
    return n_d * s.sigma_l2 / np.asarray(relay_gain, dtype=float)


def energy_offload_tx(draw: ChannelDraw, s: Scenario, n_d: float, rho: float, l_dn: float) -> float:
    bits = rho * l_dn
    if bits == 0.0:
        return 0.0
    if not n_d > 0.0:
        raise InfeasibleEnergyError("offloading load with zero data duration")
    exponent = bits * s.frame_len / (s.bandwidth * n_d)
    return float(offload_coeff(s, n_d, draw.relay_gain) * math.expm1(exponent * math.log(2.0)))


@dataclass
class EnergyReport:
    e_ch: np.ndarray
    e_comp: np.ndarray
    e_tx: np.ndarray

    @property
    def per_frame(self) -> np.ndarray:
        return self.e_ch + self.e_comp + self.e_tx

    @property
    def total(self) -> float:
        return float(np.sum(self.e_ch) + np.sum(self.e_comp) + np.sum(self.e_tx))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["frame", "e_ch", "e_comp", "e_tx"])
            for n, row in enumerate(zip(self.e_ch, self.e_comp, self.e_tx), start=1):
                writer.writerow([n] + [format(float(x), ".17g") for x in row])


def total_energy(draws: list[ChannelDraw], s: Scenario, alloc: Allocation) -> EnergyReport:
    """Per-frame and total AAV energy for an allocation."""
    if len(draws) != len(alloc.l_d):
        raise ValueError("one channel draw per frame is required")
    e_ch = np.full(len(draws), energy_channel_est(s, alloc.n_p, s.pilot_bits(alloc.n_p)))
    e_comp = np.asarray(energy_compute(s, alloc.n_d, alloc.rho, alloc.l_d), dtype=float)
    e_tx = np.array([energy_offload_tx(d, s, alloc.n_d, alloc.rho, l)
                     for d, l in zip(draws, alloc.l_d)])
    return EnergyReport(e_ch=e_ch, e_comp=e_comp, e_tx=e_tx)


# ---------------------------------------------------------------------------
# constraints


@dataclass
class ConstraintReport:
    """Slack of every constraint; nonnegative slack means satisfied.

    Rate slacks are in bits per frame, the SINR slack is linear.
    """

    data_total: float
    rate_iot: np.ndarray
    rate_leo: np.ndarray
    sinr: float
    rho_low: float
    rho_high: float
    scales: dict = field(default_factory=dict, repr=False)

    def violations(self, rel_tol: float = 1e-6) -> dict[str, float]:
        """Worst relative violation per constraint group, only for violated ones."""
        out = {}
        groups = {
            "data_total": np.atleast_1d(self.data_total),
            "rate_iot": self.rate_iot,
            "rate_leo": self.rate_leo,
            "sinr": np.atleast_1d(self.sinr),
            "rho": np.array([self.rho_low, self.rho_high]),
        }
        for name, slack in groups.items():
            scale = self.scales.get(name, 1.0)
            worst = float(np.min(slack)) / scale if slack.size else 0.0
            if worst < -rel_tol:
                out[name] = worst
        return out

    def feasible(self, rel_tol: float = 1e-6) -> bool:
        return not self.violations(rel_tol)


def check_constraints(draws: list[ChannelDraw], s: Scenario, alloc: Allocation,
                      contexts: list[FrameContext]) -> ConstraintReport:
    """Evaluate the data, rate, sensing and offloading-ratio constraints."""
    scale = _rate_scale(s)
    cap_iot = np.array([rate_iot_aav(d, s, alloc.n_p, alloc.n_d) for d in draws]) * scale
    cap_leo = np.array([rate_aav_leo(d, s, alloc.n_d) for d in draws]) * scale
    sinr = sensing_sinr(s, contexts, alloc.n_p)
    l_ref = max(s.l_bar / s.n_frames, 1.0)
    return ConstraintReport(
        data_total=float(np.sum(alloc.l_d) - s.l_bar),
        rate_iot=cap_iot - alloc.l_d,
        rate_leo=cap_leo - alloc.rho * alloc.l_d,
        sinr=sinr - s.gamma_s,
        rho_low=alloc.rho,
        rho_high=1.0 - alloc.rho,
        scales={"data_total": max(s.l_bar, 1.0), "rate_iot": l_ref, "rate_leo": l_ref,
                "sinr": max(s.gamma_s, 1e-12)},
    )


# ---------------------------------------------------------------------------
# vectorized per-frame coefficients for the optimizer


@dataclass(frozen=True)
class FrameBudget:
    """Everything the inner problem needs for fixed (N_p, N_d).

    ``cap_iot`` bounds ``l_d`` per frame, ``exp_cap`` bounds the offloading
    exponent ``rho * l * T / (B N_d)``.
    """

    n_p: float
    n_d: float
    e_ch: np.ndarray         # per frame, J
    energy_scale: float      # gamma_u * C_A^3 / N_d^2
    exponent_scale: float    # T / (B N_d)
    a_coef: np.ndarray       # A_n
    cap_iot: np.ndarray      # bits
    exp_cap: np.ndarray      # dimensionless
    l_bar: float

    @property
    def n_frames(self) -> int:
        return len(self.a_coef)

    def true_energy(self, rho: float, l_d: np.ndarray) -> np.ndarray:
        """Per-frame true objective, matching :func:`total_energy`."""
        l_d = np.asarray(l_d, dtype=float)
        e_a = self.energy_scale * ((1.0 - rho) * l_d) ** 3
        with np.errstate(over="ignore"):
            e_tx = self.a_coef * np.expm1(math.log(2.0) * self.exponent_scale * rho * l_d)
        return self.e_ch + e_a + e_tx


def frame_budget(draws: list[ChannelDraw], s: Scenario, n_p: float, n_d: float) -> FrameBudget:
    if not (n_p > 0.0 and n_d > 0.0):
        raise ValueError("both phases need positive duration")
    gains = np.array([d.relay_gain for d in draws])
    h_est2 = np.array([np.vdot(d.h_est, d.h_est).real for d in draws])
    scale = _rate_scale(s)
    cap_iot = n_d / s.frame_len * np.log2(1.0 + iot_snr_coeff(s, n_p) * h_est2) * scale
    # rho*l <= (N_d/T) log2(1 + P_A g / sigma^2) * scale, rewritten on the exponent
    exp_cap = np.log2(1.0 + s.p_aav_tx * gains / s.sigma_l2) * scale / s.bandwidth
    return FrameBudget(
        n_p=n_p,
        n_d=n_d,
        e_ch=np.full(len(draws), energy_channel_est(s, n_p, s.pilot_bits(n_p))),
        energy_scale=s.gamma_u * s.c_a**3 / n_d**2,
        exponent_scale=s.frame_len / (s.bandwidth * n_d),
        a_coef=np.asarray(offload_coeff(s, n_d, gains)),
        cap_iot=cap_iot,
        exp_cap=exp_cap,
        l_bar=s.l_bar,
    )
