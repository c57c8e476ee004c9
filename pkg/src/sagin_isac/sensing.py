"""Whitened two-hypothesis model, Neyman-Pearson detector, ROC and sensing SINR.

Per frame the whitened pilot block is ``n_slots`` i.i.d. columns with
covariance ``I`` (target absent) or ``I + D Lambda D`` (target present).
``D Lambda D`` has rank one, ``mu * u u^H`` with ``u`` the normalized
steering vector, so every block's quadratic form ``r^H A r`` reduces to
``mu/(1+mu) * |u^H r|^2``.  Summed over a frame's slots this is a scaled
Gamma(n_slots) variable, which is what :func:`sample_statistic` draws.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import pilot_slots, sensing_response
from .scenario import FrameContext, Scenario, frame_array

DEFAULT_CALIBRATION_TRIALS = 100_000
_CHUNK = 10_000


def sensing_sinr(s: Scenario, contexts: list[FrameContext], n_p: float) -> float:
    """Closed-form sensing SINR aggregated over all frames (linear)."""
    if n_p < 0.0:
        raise ValueError("n_p must be nonnegative")
    sb2 = frame_array(contexts, "sigma_beta2")
    energy = s.p_pilot * n_p * s.m_rx
    num = np.sum(energy * sb2)
    den = np.sum(energy * s.sigma_c2 + s.sigma_z2 * np.ones_like(sb2))
    return float(num / den)


def db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


@dataclass(frozen=True)
class DetectorSpec:
    """Stacked quadratic detector for one pilot duration.

    ``d_blocks`` are the per-frame whitening scalars, ``lambda_blocks`` and
    ``a_blocks`` the per-frame ``M_r x M_r`` blocks, repeated ``n_slots``
    times along the block diagonal.
    """

    n_p: float
    n_slots: int
    slot_power: float
    d_blocks: np.ndarray       # (N,)
    lambda_blocks: np.ndarray  # (N, M, M)
    a_blocks: np.ndarray       # (N, M, M)
    mu: np.ndarray             # (N,) nonzero eigenvalue of D Lambda D
    steering: np.ndarray       # (N, M) unit eigenvector
    threshold: float
    p_fa_target: float

    @property
    def weights(self) -> np.ndarray:
        """Nonzero eigenvalue of each A block."""
        return self.mu / (1.0 + self.mu)

    @property
    def shape(self) -> tuple[int, int, int]:
        n, m, _ = self.a_blocks.shape
        return n, self.n_slots, m

    def h0_mean(self) -> float:
        return float(self.n_slots * np.sum(self.weights))

    def with_threshold(self, threshold: float, p_fa: float | None = None) -> "DetectorSpec":
        return dataclasses.replace(self, threshold=float(threshold),
                                   p_fa_target=self.p_fa_target if p_fa is None else p_fa)


def detector_blocks(s: Scenario, contexts: list[FrameContext], n_p: float,
                    max_slots: int | None = None,
                    sigma_beta2: np.ndarray | None = None) -> DetectorSpec:
    """Whitening and detector blocks without a calibrated threshold."""
    if not n_p > 0.0:
        raise ValueError("n_p must be positive")
    k = pilot_slots(s, n_p, max_slots if max_slots is not None else s.max_pilot_slots)
    p_slot = s.p_pilot * n_p / k
    sb2 = frame_array(contexts, "sigma_beta2") if sigma_beta2 is None else np.asarray(sigma_beta2, float)
    d = 1.0 / np.sqrt(p_slot * s.sigma_c2 + s.sigma_z2) * np.ones_like(sb2)
    steer = np.array([sensing_response(c, s) for c in contexts])
    lam = p_slot * sb2[:, None, None] * np.einsum("ni,nj->nij", steer, steer.conj())
    dld = d[:, None, None] ** 2 * lam
    eye = np.eye(s.m_rx)
    a_blocks = np.array([x @ np.linalg.inv(x + eye) for x in dld])
    mu = d**2 * p_slot * sb2 * s.m_rx
    return DetectorSpec(
        n_p=n_p,
        n_slots=k,
        slot_power=p_slot,
        d_blocks=d,
        lambda_blocks=lam,
        a_blocks=a_blocks,
        mu=mu,
        steering=steer / math.sqrt(s.m_rx),
        threshold=math.inf,
        p_fa_target=0.0,
    )


def sample_statistic(spec: DetectorSpec, target_present: bool, n_trials: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Draw the stacked detector statistic under one hypothesis.

    Uses the rank-one reduction: each frame contributes
    ``w_n * (1 + mu_n * H) * Gamma(n_slots, 1)``.
    """
    scale = spec.weights * (1.0 + spec.mu) if target_present else spec.weights
    out = np.empty(n_trials)
    for start in range(0, n_trials, _CHUNK):
        stop = min(n_trials, start + _CHUNK)
        gam = rng.gamma(spec.n_slots, size=(stop - start, len(scale)))
        out[start:stop] = gam @ scale
    return out


def sample_observation(spec: DetectorSpec, target_present: bool, n_trials: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Stacked whitened pilot observations, shape (trials, N, n_slots, M_r)."""
    n, k, m = spec.shape
    w = (rng.standard_normal((n_trials, n, k, m))
         + 1j * rng.standard_normal((n_trials, n, k, m))) / math.sqrt(2.0)
    if not target_present:
        return w
    # (I + mu u u^H)^{1/2} = I + (sqrt(1 + mu) - 1) u u^H
    u = spec.steering
    proj = np.einsum("nm,tnkm->tnk", u.conj(), w)
    gain = (np.sqrt(1.0 + spec.mu) - 1.0)[None, :, None]
    return w + (gain * proj)[..., None] * u[None, :, None, :]


def frame_statistics(spec: DetectorSpec, r: np.ndarray) -> np.ndarray:
    """Per-frame quadratic forms ``sum_t r_t^H A_n r_t`` (diagnostics)."""
    return np.einsum("...nkm,nml,...nkl->...n", r.conj(), spec.a_blocks, r).real


def statistic(spec: DetectorSpec, r: np.ndarray) -> np.ndarray | float:
    _check_shape(spec, r)
    return frame_statistics(spec, r).sum(axis=-1)


def detect(spec: DetectorSpec, r: np.ndarray) -> bool:
    """Decide target present iff ``r^H A r`` exceeds the threshold."""
    r = np.asarray(r)
    if r.shape != spec.shape:
        raise ValueError(f"observation shape {r.shape} does not match detector {spec.shape}")
    return bool(statistic(spec, r) > spec.threshold)


def _check_shape(spec: DetectorSpec, r: np.ndarray) -> None:
    if r.shape[-3:] != spec.shape:
        raise ValueError(f"observation shape {r.shape} does not match detector {spec.shape}")


def build_detector(s: Scenario, contexts: list[FrameContext], n_p: float, p_fa: float,
                   rng: np.random.Generator | None = None,
                   n_calibration: int = DEFAULT_CALIBRATION_TRIALS,
                   max_slots: int | None = None) -> DetectorSpec:
    """Detector with threshold at the empirical (1 - p_fa) quantile under H0."""
    if not 0.0 < p_fa < 1.0:
        raise ValueError("p_fa must lie in (0, 1)")
    spec = detector_blocks(s, contexts, n_p, max_slots=max_slots)
    if not np.any(spec.weights > 0.0):
        # No target energy: the statistic is identically zero.
        return spec.with_threshold(0.0, p_fa)
    rng = rng if rng is not None else np.random.default_rng(s.rng_seed)
    h0 = sample_statistic(spec, False, n_calibration, rng)
    return spec.with_threshold(float(np.quantile(h0, 1.0 - p_fa)), p_fa)


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray
    p_fa: np.ndarray
    p_d: np.ndarray
    n_trials: int
    sinr: float
    n_p: float

    @property
    def sinr_db(self) -> float:
        return db(self.sinr)

    def p_d_at(self, p_fa: float) -> float:
        """Detection probability at a false-alarm level (linear interpolation)."""
        order = np.argsort(self.p_fa, kind="stable")
        return float(np.interp(p_fa, self.p_fa[order], self.p_d[order]))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["p_fa", "p_d", "sinr_db", "n_trials"])
            for pf, pd in zip(self.p_fa, self.p_d):
                writer.writerow([_fmt(pf), _fmt(pd), _fmt(self.sinr_db), self.n_trials])


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def empirical_curve(h0: np.ndarray, h1: np.ndarray, n_points: int = 101
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thresholds at H0 quantiles, bracketed by zero and +inf."""
    levels = np.linspace(0.0, 1.0, n_points)[1:-1]
    inner = np.quantile(h0, levels)
    thresholds = np.concatenate([[0.0], inner, [np.inf]])
    h0s, h1s = np.sort(h0), np.sort(h1)
    p_fa = 1.0 - np.searchsorted(h0s, thresholds, side="right") / len(h0s)
    p_d = 1.0 - np.searchsorted(h1s, thresholds, side="right") / len(h1s)
    return thresholds, p_fa, p_d


def roc(s: Scenario, contexts: list[FrameContext], n_p: float, n_trials: int,
        rng: np.random.Generator, *, n_points: int = 101,
        max_slots: int | None = None) -> RocCurve:
    """Empirical ROC of the stacked detector from ``n_trials`` draws per hypothesis."""
    if n_trials < 1000:
        raise ValueError("n_trials must be at least 1000")
    spec = detector_blocks(s, contexts, n_p, max_slots=max_slots)
    h0 = sample_statistic(spec, False, n_trials, rng)
    h1 = sample_statistic(spec, True, n_trials, rng)
    thresholds, p_fa, p_d = empirical_curve(h0, h1, n_points)
    return RocCurve(thresholds=thresholds, p_fa=p_fa, p_d=p_d, n_trials=n_trials,
                    sinr=sensing_sinr(s, contexts, n_p), n_p=n_p)


def detection_probability(s: Scenario, contexts: list[FrameContext], n_p: float, p_fa: float,
                          n_trials: int, rng: np.random.Generator,
                          max_slots: int | None = None) -> tuple[float, DetectorSpec]:
    """P_d at a calibrated threshold, using independent H0 and H1 sets."""
    spec = build_detector(s, contexts, n_p, p_fa, rng, n_trials, max_slots=max_slots)
    h1 = sample_statistic(spec, True, n_trials, rng)
    return float(np.mean(h1 > spec.threshold)), spec
