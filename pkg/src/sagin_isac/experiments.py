"""Experiment runners behind the CLI: ROC curves and the two energy sweeps.

Every run writes CSV files plus ``manifest.yaml`` recording the scenario,
seed, sweep and a SHA-256 of each output, which :func:`replay` uses to
check bit-for-bit reproduction.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np
import yaml

from . import __version__
from .link_energy import total_energy
from .scenario import Scenario, scenario_from_mapping, scenario_hash, scenario_to_mapping, trajectory
from .sca import MODES, Problem, baseline
from .sensing import roc
from .svgplot import line_plot

log = logging.getLogger(__name__)

EXPERIMENTS = ("roc", "energy_vs_frames", "energy_vs_gamma")
DEFAULT_SWEEPS: dict[str, tuple[float, ...]] = {
    "roc": (0.2, 0.4, 0.6),
    "energy_vs_frames": tuple(float(n) for n in range(100, 801, 100)),
    "energy_vs_gamma": tuple(round(-2.0 + 0.1 * k, 10) for k in range(9)),
}
DEFAULT_TRIALS = 100_000
INFEASIBLE = "infeasible"
MANIFEST = "manifest.yaml"


def parse_sweep(text: str) -> tuple[float, ...]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(p) for p in text.split(":"))
        except ValueError:
            raise ValueError(f"bad sweep {text!r}; expected start:stop:step") from None
        if step == 0.0 or (stop - start) / step < 0.0:
            raise ValueError(f"sweep {text!r} is empty")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = tuple(round(start + k * step, 10) for k in range(count))
    else:
        try:
            values = tuple(float(p) for p in text.split(",") if p.strip())
        except ValueError:
            raise ValueError(f"bad sweep {text!r}") from None
    if not values:
        raise ValueError("sweep must not be empty")
    return values


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    scenario: Scenario
    sweep: tuple[float, ...]
    seed: int
    out_dir: Path
    trials: int = DEFAULT_TRIALS
    jobs: int = 1
    plot: bool = False

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if not self.sweep:
            raise ValueError("sweep must not be empty")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.experiment == "roc" and self.trials < 1000:
            raise ValueError("roc needs at least 1000 trials")
        if self.experiment == "energy_vs_frames" and any(
                v != int(v) or v < 1 for v in self.sweep):
            raise ValueError("frame counts must be positive integers")
        object.__setattr__(self, "out_dir", Path(self.out_dir))

    @classmethod
    def default(cls, experiment: str, scenario: Scenario, out_dir, **kw) -> "ExperimentSpec":
        kw.setdefault("seed", scenario.rng_seed)
        kw.setdefault("sweep", DEFAULT_SWEEPS.get(experiment, ()))
        return cls(experiment=experiment, scenario=scenario, out_dir=out_dir, **kw)


def _fmt(x: float) -> str:
    return format(float(x), ".17g") if math.isfinite(x) else INFEASIBLE


def _write_csv(path: Path, header: list[str], rows: Iterable[list[str]]) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _map(fn: Callable, items: list, jobs: int) -> list:
    """Ordered map, in worker processes when ``jobs > 1``."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# ROC


def _roc_cell(args) -> tuple[float, Any]:
    s, n_p, trials, seed_seq = args
    contexts = trajectory(s)
    return n_p, roc(s, contexts, n_p, trials, np.random.default_rng(seed_seq))


def run_roc(spec: ExperimentSpec) -> list[Path]:
    """One ROC CSV per pilot duration plus a summary at ``p_fa = 0.1``."""
    seeds = np.random.SeedSequence(spec.seed).spawn(len(spec.sweep))
    cells = [(spec.scenario, float(n_p), spec.trials, ss) for n_p, ss in zip(spec.sweep, seeds)]
    curves = _map(_roc_cell, cells, spec.jobs)
    paths = []
    for n_p, curve in curves:
        path = spec.out_dir / f"roc_np{n_p:g}.csv"
        curve.to_csv(path)
        paths.append(path)
    paths.append(_write_csv(
        spec.out_dir / "roc_summary.csv", ["n_p", "sinr_db", "p_d_at_pfa_0.1", "n_trials"],
        [[format(n_p, "g"), _fmt(c.sinr_db), _fmt(c.p_d_at(0.1)), c.n_trials] for n_p, c in curves],
    ))
    if spec.plot:
        series = {f"N_p={n_p:g} ({c.sinr_db:.2f} dB)": (list(c.p_fa), list(c.p_d))
                  for n_p, c in curves}
        line_plot(series, spec.out_dir / "roc.svg", xlabel="false-alarm probability",
                  ylabel="detection probability", title="ROC")
    return paths


# ---------------------------------------------------------------------------
# energy sweeps


def _mode_energies(problem: Problem) -> list[float]:
    return [baseline(mode, problem).objective for mode in MODES]


def _frames_cell(args) -> list[float]:
    s, n_frames, seed = args
    problem = Problem.build(s.replace(n_frames=int(n_frames)), seed=seed, check_speed=False)
    return _mode_energies(problem)


def energy_vs_frames(spec: ExperimentSpec) -> list[tuple[int, list[float]]]:
    cells = [(spec.scenario, n, spec.seed) for n in spec.sweep]
    return list(zip((int(n) for n in spec.sweep), _map(_frames_cell, cells, spec.jobs)))


def energy_vs_gamma(spec: ExperimentSpec) -> list[tuple[float, list[float]]]:
    """Sequential: all thresholds share one problem and its per-candidate cache."""
    base = Problem.build(spec.scenario, seed=spec.seed)
    return [(g_db, _mode_energies(base.with_gamma(10.0 ** (g_db / 10.0))))
            for g_db in spec.sweep]


def _energy_table(spec: ExperimentSpec, key: str, rows, key_fmt) -> list[Path]:
    path = _write_csv(spec.out_dir / f"{spec.experiment}.csv", [key, *MODES],
                      [[key_fmt(k), *(_fmt(e) for e in energies)] for k, energies in rows])
    if spec.plot:
        xs = [float(k) for k, _ in rows]
        series = {m: (xs, [e[j] for _, e in rows]) for j, m in enumerate(MODES)}
        line_plot(series, spec.out_dir / f"{spec.experiment}.svg", xlabel=key,
                  ylabel="AAV energy (J)", title=spec.experiment)
    return [path]


def run_energy_vs_frames(spec: ExperimentSpec) -> list[Path]:
    return _energy_table(spec, "N", energy_vs_frames(spec), str)


def run_energy_vs_gamma(spec: ExperimentSpec) -> list[Path]:
    return _energy_table(spec, "gamma_s_db", energy_vs_gamma(spec), lambda g: format(g, ".10g"))


RUNNERS = {
    "roc": run_roc,
    "energy_vs_frames": run_energy_vs_frames,
    "energy_vs_gamma": run_energy_vs_gamma,
}


# ---------------------------------------------------------------------------
# manifest and replay


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_experiment(spec: ExperimentSpec) -> list[Path]:
    """Run, write outputs and the manifest; returns the CSV paths."""
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    log.info("running %s over %d sweep values", spec.experiment, len(spec.sweep))
    paths = RUNNERS[spec.experiment](spec)
    manifest = {
        "experiment": spec.experiment,
        "seed": spec.seed,
        "sweep": [float(v) for v in spec.sweep],
        "trials": spec.trials,
        "code_version": __version__,
        "scenario_sha256": scenario_hash(spec.scenario),
        "scenario": scenario_to_mapping(spec.scenario),
        "outputs": {p.name: file_digest(p) for p in paths},
    }
    (spec.out_dir / MANIFEST).write_text(yaml.safe_dump(manifest, sort_keys=False))
    return paths


def load_manifest(path: str | Path) -> dict:
    doc = yaml.safe_load(Path(path).read_text())
    if not isinstance(doc, dict) or "experiment" not in doc or "scenario" not in doc:
        raise ValueError(f"{path} is not an experiment manifest")
    return doc


@dataclass
class ReplayReport:
    matched: list[str] = field(default_factory=list)
    mismatched: list[str] = field(default_factory=list)
    version_note: str | None = None

    @property
    def ok(self) -> bool:
        return not self.mismatched


def replay(manifest_path: str | Path, out_dir: str | Path, jobs: int = 1) -> ReplayReport:
    """Rerun a manifest into ``out_dir`` and compare output digests."""
    doc = load_manifest(manifest_path)
    scenario = scenario_from_mapping(doc["scenario"])
    if scenario_hash(scenario) != doc["scenario_sha256"]:
        raise ValueError("manifest scenario does not match its recorded hash")
    spec = ExperimentSpec(experiment=doc["experiment"], scenario=scenario,
                          sweep=tuple(doc["sweep"]), seed=int(doc["seed"]),
                          out_dir=Path(out_dir), trials=int(doc["trials"]), jobs=jobs)
    run_experiment(spec)
    report = ReplayReport()
    if doc.get("code_version") != __version__:
        report.version_note = f"recorded with {doc.get('code_version')}, replayed with {__version__}"
    for name, digest in doc["outputs"].items():
        target = Path(out_dir) / name
        same = target.exists() and file_digest(target) == digest
        (report.matched if same else report.mismatched).append(name)
    return report


# ---------------------------------------------------------------------------
# single optimization


def run_optimize(s: Scenario, out_dir: str | Path, *, seed: int | None = None,
                 mode: str = "proposed"):
    """Optimize one scenario and write the grid trace, allocation and energy split."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = Problem.build(s, seed=seed)
    result = baseline(mode, problem)
    result.trace_csv(out / "trace.csv")
    doc: dict[str, Any] = {"mode": mode, "status": result.status,
                           "seed": s.rng_seed if seed is None else seed,
                           "scenario_sha256": scenario_hash(s)}
    if result.allocation is not None:
        doc["energy_total"] = result.objective
        doc["sca_iterations"] = result.iterations
        doc["allocation"] = result.allocation.to_mapping()
        report = total_energy(problem.draws(result.allocation.n_p), s, result.allocation)
        report.to_csv(out / "energy.csv")
    (out / "allocation.yaml").write_text(yaml.safe_dump(doc, sort_keys=False))
    return result
