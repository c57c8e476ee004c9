"""Sensing and relay channels, MRT beamforming and the ML channel estimate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import FrameContext, Scenario

LITERAL_DEFAULT_SLOTS = 64


def array_response(m_antennas: int, azimuth: float, elevation: float,
                   transmit_side: bool = False) -> np.ndarray:
    """ULA steering vector with half-wavelength spacing.

    Entry ``m`` is ``exp(+/- j*pi*m*sin(azimuth)*cos(elevation))``; the
    transmit array uses the negative sign.
    """
    if m_antennas < 1:
        raise ValueError("m_antennas must be at least 1")
    sign = -1.0 if transmit_side else 1.0
    phase = sign * math.pi * math.sin(azimuth) * math.cos(elevation)
    return np.exp(1j * phase * np.arange(m_antennas))


def sensing_response(ctx: FrameContext, s: Scenario) -> np.ndarray:
    return array_response(s.m_rx, *ctx.angles_s)


def relay_channel(ctx: FrameContext, s: Scenario) -> np.ndarray:
    """Line-of-sight AAV -> LEO channel vector (M_t entries)."""
    a = array_response(s.m_tx, *ctx.angles_a, transmit_side=True)
    return math.sqrt(s.g0 * s.antenna_gain / ctx.d_al**2) * a


@dataclass(frozen=True)
class SensingCov:
    omega_g: np.ndarray
    omega_c: np.ndarray

    @property
    def omega_h(self) -> np.ndarray:
        return self.omega_g + self.omega_c


def sensing_cov(ctx: FrameContext, s: Scenario,
                sigma_beta2: float | None = None) -> SensingCov:
    """Target, clutter and total covariance of the IoT -> target -> AAV channel."""
    a = sensing_response(ctx, s)
    sb2 = ctx.sigma_beta2 if sigma_beta2 is None else sigma_beta2
    return SensingCov(
        omega_g=sb2 * np.outer(a, a.conj()),
        omega_c=s.sigma_c2 * np.eye(s.m_rx, dtype=complex),
    )


@dataclass(frozen=True)
class ChannelDraw:
    g: np.ndarray
    c: np.ndarray
    e: np.ndarray
    h_al: np.ndarray
    w: np.ndarray

    @property
    def h(self) -> np.ndarray:
        return self.g + self.c

    @property
    def h_est(self) -> np.ndarray:
        return self.h + self.e

    @property
    def relay_gain(self) -> float:
        """|h_al^H w|^2, equal to ||h_al||^2 under MRT."""
        return float(abs(np.vdot(self.h_al, self.w)) ** 2)


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance circularly symmetric complex Gaussian samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def estimation_error_var(s: Scenario, n_p: float) -> float:
    if not n_p > 0.0:
        raise ValueError("n_p must be positive: estimation variance is undefined")
    return s.sigma_z2 / (s.p_pilot * n_p)


def pilot_slots(s: Scenario, n_p: float, cap: int | None = None) -> int:
    """Number of stacked pilot columns simulated for a pilot of duration n_p.

    ``ceil(bandwidth * n_p)``, clipped to ``cap`` when one is given.  The
    pilot energy ``P_p * n_p`` is spread evenly over the slots, so the ML
    estimate's error variance does not depend on the slot count.
    """
    k = max(1, math.ceil(s.bandwidth * n_p - 1e-9))
    return k if cap is None else min(k, cap)


def ml_estimate(y: np.ndarray, x_p: np.ndarray) -> np.ndarray:
    """ML channel estimate from the pilot block, ``Y x_p^* / ||x_p||^2``."""
    return y @ x_p.conj() / np.vdot(x_p, x_p).real


def _relay(ctx: FrameContext, s: Scenario) -> tuple[np.ndarray, np.ndarray]:
    h_al = relay_channel(ctx, s)
    return h_al, h_al / np.linalg.norm(h_al)


def draw_channels(ctx: FrameContext, s: Scenario, n_p: float,
                  rng: np.random.Generator, *, literal: bool = False,
                  n_slots: int | None = None) -> ChannelDraw:
    """One random realization of the sensing channel and its ML estimate.

    By default the estimation error is drawn from its exact distribution
    ``CN(0, sigma_z^2 / (P_p n_p) I)``.  With ``literal=True`` a pilot block
    of ``n_slots`` constant-modulus symbols with random phases (total energy
    exactly ``P_p n_p``) is transmitted through the channel and the
    estimate is formed with :func:`ml_estimate`.
    """
    err_var = estimation_error_var(s, n_p)
    a = sensing_response(ctx, s)
    beta = math.sqrt(ctx.sigma_beta2) * _cn(rng, ())
    g = beta * a
    c = math.sqrt(s.sigma_c2) * _cn(rng, s.m_rx)
    if literal:
        k = n_slots or pilot_slots(s, n_p, s.max_pilot_slots or LITERAL_DEFAULT_SLOTS)
        x_p = math.sqrt(s.p_pilot * n_p / k) * np.exp(2j * math.pi * rng.random(k))
        z = math.sqrt(s.sigma_z2) * _cn(rng, (s.m_rx, k))
        y = np.outer(g + c, x_p) + z
        e = ml_estimate(y, x_p) - (g + c)
    else:
        e = math.sqrt(err_var) * _cn(rng, s.m_rx)
    h_al, w = _relay(ctx, s)
    return ChannelDraw(g=g, c=c, e=e, h_al=h_al, w=w)


@dataclass(frozen=True)
class ChannelInnovations:
    """Unit-variance randomness behind one channel realization per frame.

    The same innovations are rescaled for every pilot duration, so outer-loop
    candidates and baselines see common random numbers.
    """

    beta: np.ndarray   # (N,)
    clutter: np.ndarray  # (N, M_r)
    error: np.ndarray    # (N, M_r)

    @classmethod
    def sample(cls, n_frames: int, m_rx: int, rng: np.random.Generator) -> "ChannelInnovations":
        return cls(
            beta=_cn(rng, n_frames),
            clutter=_cn(rng, (n_frames, m_rx)),
            error=_cn(rng, (n_frames, m_rx)),
        )

    @classmethod
    def from_seed(cls, s: Scenario, seed: int | None = None) -> "ChannelInnovations":
        rng = np.random.default_rng(s.rng_seed if seed is None else seed)
        return cls.sample(s.n_frames, s.m_rx, rng)

    def realize(self, contexts: list[FrameContext], s: Scenario, n_p: float) -> list[ChannelDraw]:
        if len(contexts) != len(self.beta):
            raise ValueError("innovations and contexts cover different frame counts")
        sd_e = math.sqrt(estimation_error_var(s, n_p))
        sd_c = math.sqrt(s.sigma_c2)
        draws = []
        for n, ctx in enumerate(contexts):
            a = sensing_response(ctx, s)
            h_al, w = _relay(ctx, s)
            draws.append(ChannelDraw(
                g=math.sqrt(ctx.sigma_beta2) * self.beta[n] * a,
                c=sd_c * self.clutter[n],
                e=sd_e * self.error[n],
                h_al=h_al,
                w=w,
            ))
        return draws


def draw_frames(contexts: list[FrameContext], s: Scenario, n_p: float,
                rng: np.random.Generator) -> list[ChannelDraw]:
    return ChannelInnovations.sample(len(contexts), s.m_rx, rng).realize(contexts, s, n_p)
