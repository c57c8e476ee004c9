"""Scenario configuration, geometry and the AAV's fixed trajectory."""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

VECTOR_FIELDS = ("p_iot", "p_target", "p_leo", "p_aav_final")
BETA_MODELS = ("frequency", "wavelength")
RATE_PRODUCTS = ("literal", "rate_only")
SPEED_OF_LIGHT = 299_792_458.0


class ScenarioError(ValueError):
    """Raised when a scenario document or value fails validation."""


class InfeasibleTrajectoryError(ScenarioError):
    """The straight path to the final waypoint is too long for the mission time."""


@dataclass(frozen=True)
class Scenario:
    """All physical and protocol parameters in SI linear units.

    Positions are metres, powers watts, gains linear.  Optional knobs
    (``sensing_azimuth``, ``beta_model``, ...) select between model
    variants; see README for their meaning.
    """

    p_iot: tuple[float, float, float]
    p_target: tuple[float, float, float]
    p_leo: tuple[float, float, float]
    p_aav_final: tuple[float, float, float]
    aav_speed: float
    n_frames: int
    frame_len: float
    bandwidth: float
    p_total: float
    m_tx: int
    m_rx: int
    f_c: float
    sigma_c2: float
    g0: float
    l_bar: float
    pilot_power_frac: float = 0.5
    p_aav_tx: float | None = None
    sigma_z2: float = 1.0
    sigma_l2: float = 1.0e-9
    antenna_gain: float = 1.0e6
    gamma_s: float = 10 ** (-0.3)
    gamma_u: float = 1.0e-28
    c_ch: float = 100.0
    c_a: float = 1.0e4
    l_pilot_per_frame: float | None = None
    grid_step: float = 0.05
    rng_seed: int = 0
    sensing_azimuth: float | None = None
    beta_model: str = "frequency"
    rate_bandwidth_product: str = "literal"
    max_pilot_slots: int | None = None
    speed_tolerance: float = 0.02

    def __post_init__(self) -> None:
        if self.p_aav_tx is None:
            object.__setattr__(self, "p_aav_tx", self.p_total)
        _validate(self)

    @property
    def p_pilot(self) -> float:
        return self.pilot_power_frac * self.p_total

    @property
    def p_data(self) -> float:
        return (1.0 - self.pilot_power_frac) * self.p_total

    @property
    def mission_time(self) -> float:
        return self.n_frames * self.frame_len

    @property
    def aav_altitude(self) -> float:
        return self.p_aav_final[2]

    def pilot_bits(self, n_p: float) -> float:
        """Bits processed for channel estimation in one frame."""
        if self.l_pilot_per_frame is not None:
            return self.l_pilot_per_frame
        return self.bandwidth * n_p

    def replace(self, **changes: Any) -> "Scenario":
        return dataclasses.replace(self, **changes)


def _validate(s: Scenario) -> None:
    for name in VECTOR_FIELDS:
        vec = getattr(s, name)
        if len(vec) != 3 or not all(math.isfinite(v) for v in vec):
            raise ScenarioError(f"{name} must be a finite 3-vector")
    if s.p_iot[2] != 0.0:
        raise ScenarioError("p_iot must lie on the ground (z = 0)")
    if s.p_target[2] != 0.0:
        raise ScenarioError("p_target must lie on the ground (z = 0)")
    if not s.p_aav_final[2] > 0.0:
        raise ScenarioError("p_aav_final altitude must be positive")
    if not s.p_leo[2] > s.p_aav_final[2]:
        raise ScenarioError("p_leo altitude must exceed the AAV altitude")

    positive = (
        "aav_speed", "frame_len", "bandwidth", "p_total", "p_aav_tx", "f_c",
        "sigma_c2", "sigma_z2", "sigma_l2", "g0", "antenna_gain",
        "gamma_u", "c_ch", "c_a",
    )
    for name in positive:
        value = getattr(s, name)
        if not (math.isfinite(value) and value > 0.0):
            raise ScenarioError(f"{name} must be positive")
    for name in ("n_frames", "m_tx", "m_rx"):
        value = getattr(s, name)
        if int(value) != value or value < 1:
            raise ScenarioError(f"{name} must be a positive integer")
    if not 0.0 < s.pilot_power_frac < 1.0:
        raise ScenarioError("pilot_power_frac must lie in (0, 1)")
    if not (math.isfinite(s.l_bar) and s.l_bar >= 0.0):
        raise ScenarioError("l_bar must be nonnegative")
    if not (math.isfinite(s.gamma_s) and s.gamma_s >= 0.0):
        raise ScenarioError("gamma_s must be nonnegative")
    if not 0.0 < s.grid_step < s.frame_len:
        raise ScenarioError("grid_step must lie in (0, frame_len)")
    if s.l_pilot_per_frame is not None and s.l_pilot_per_frame < 0.0:
        raise ScenarioError("l_pilot_per_frame must be nonnegative")
    if s.max_pilot_slots is not None and s.max_pilot_slots < 1:
        raise ScenarioError("max_pilot_slots must be at least 1")
    if s.beta_model not in BETA_MODELS:
        raise ScenarioError(f"beta_model must be one of {BETA_MODELS}")
    if s.rate_bandwidth_product not in RATE_PRODUCTS:
        raise ScenarioError(f"rate_bandwidth_product must be one of {RATE_PRODUCTS}")
    if not s.speed_tolerance >= 0.0:
        raise ScenarioError("speed_tolerance must be nonnegative")
    if not 0 <= s.rng_seed < 2**64:
        raise ScenarioError("rng_seed must be an unsigned 64-bit integer")


# ---------------------------------------------------------------------------
# config documents

_FIELDS = {f.name: f for f in dataclasses.fields(Scenario)}
_REQUIRED = tuple(
    f.name for f in dataclasses.fields(Scenario)
    if f.default is dataclasses.MISSING
)
_INT_FIELDS = ("n_frames", "m_tx", "m_rx", "rng_seed", "max_pilot_slots")
_STR_FIELDS = ("beta_model", "rate_bandwidth_product")


def _convert(name: str, raw: Any, unit: str) -> Any:
    if name in VECTOR_FIELDS:
        if not isinstance(raw, (list, tuple)) or len(raw) != 3:
            raise ScenarioError(f"{name} must be a list of three numbers")
        try:
            vec = tuple(float(v) for v in raw)
        except (TypeError, ValueError):
            raise ScenarioError(f"{name} must be a list of three numbers") from None
        if unit == "km":
            vec = tuple(1000.0 * v for v in vec)
        return vec
    if raw is None:
        return None
    if name in _STR_FIELDS:
        return str(raw)
    if isinstance(raw, str):
        # YAML 1.1 reads exponents without a sign ("1.0e6") as strings
        try:
            raw = float(raw)
        except ValueError:
            raise ScenarioError(f"{name} must be a number") from None
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ScenarioError(f"{name} must be a number")
    if name in _INT_FIELDS:
        if unit or int(raw) != raw:
            raise ScenarioError(f"{name} must be an integer")
        return int(raw)
    value = float(raw)
    if unit == "km":
        value *= 1000.0
    elif unit == "db":
        value = 10.0 ** (value / 10.0)
    elif unit == "deg":
        value = math.radians(value)
    return value


def scenario_from_mapping(doc: Mapping[str, Any]) -> Scenario:
    """Build a validated :class:`Scenario` from a parsed config document."""
    if not isinstance(doc, Mapping):
        raise ScenarioError("scenario document must be a mapping")
    values: dict[str, Any] = {}
    for key, raw in doc.items():
        name, unit = str(key), ""
        for suffix in ("_km", "_db", "_deg"):
            if name.endswith(suffix) and name[: -len(suffix)] in _FIELDS:
                name, unit = name[: -len(suffix)], suffix[1:]
                break
        if name not in _FIELDS:
            raise ScenarioError(f"unknown key '{key}'")
        if name in values:
            raise ScenarioError(f"{name} given more than once")
        values[name] = _convert(name, raw, unit)
    missing = [name for name in _REQUIRED if name not in values]
    if missing:
        raise ScenarioError(f"missing key '{missing[0]}'")
    try:
        return Scenario(**values)
    except TypeError as exc:
        raise ScenarioError(str(exc)) from None


def load_scenario(source: str | Path | Mapping[str, Any] | None = None) -> Scenario:
    """Load a scenario from a YAML path, YAML text, a mapping, or the defaults.

    ``None`` loads the packaged default (defaults.yaml).
    """
    if source is None:
        text = resources.files("sagin_isac").joinpath("data/defaults.yaml").read_text()
        return scenario_from_mapping(yaml.safe_load(text))
    if isinstance(source, Mapping):
        return scenario_from_mapping(source)
    text = str(source)
    if isinstance(source, Path) or ("\n" not in text and ":" not in text):
        path = Path(source)
        if not path.is_file():
            raise ScenarioError(f"scenario file not found: {path}")
        text = path.read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"scenario document does not parse: {exc}") from None
    return scenario_from_mapping(doc)


def scenario_to_mapping(s: Scenario) -> dict[str, Any]:
    """Canonical SI mapping; ``scenario_from_mapping`` inverts it exactly."""
    out: dict[str, Any] = {}
    for f in dataclasses.fields(Scenario):
        value = getattr(s, f.name)
        out[f.name] = list(value) if f.name in VECTOR_FIELDS else value
    return out


def dump_scenario(s: Scenario) -> str:
    header = "# Scenario, SI linear units (metres, watts, linear gains).\n"
    return header + yaml.safe_dump(scenario_to_mapping(s), sort_keys=False)


def scenario_hash(s: Scenario) -> str:
    return hashlib.sha256(dump_scenario(s).encode()).hexdigest()


# ---------------------------------------------------------------------------
# geometry


def _angles(src: np.ndarray, dst: np.ndarray) -> tuple[float, float]:
    d = dst - src
    return math.atan2(d[1], d[0]), math.atan2(d[2], math.hypot(d[0], d[1]))


def target_gain(s: Scenario, d_is: float, d_sa: float) -> float:
    """Swerling-I scattering variance for the IoT -> target -> AAV path."""
    if s.beta_model == "frequency":
        numerator = s.f_c**2
    else:
        numerator = (SPEED_OF_LIGHT / s.f_c) ** 2
    return numerator / ((4.0 * math.pi) ** 3 * d_is**2 * d_sa**2)


@dataclass(frozen=True)
class FrameContext:
    index: int
    p_aav: tuple[float, float, float]
    d_is: float
    d_sa: float
    d_al: float
    angles_s: tuple[float, float]
    angles_a: tuple[float, float]
    sigma_beta2: float


def trajectory(s: Scenario, *, check_speed: bool = True) -> list[FrameContext]:
    """Per-frame geometry along the straight, constant-altitude flight path.

    Frame ``n`` sits at fraction ``n / N`` of the way from ``(0, 0, h)`` to
    ``p_aav_final``.  Raises :class:`InfeasibleTrajectoryError` when the
    horizontal path exceeds ``aav_speed * mission_time`` by more than
    ``speed_tolerance`` (relative), unless ``check_speed`` is false.
    """
    h = s.aav_altitude
    start = np.array([0.0, 0.0, h])
    end = np.array(s.p_aav_final, dtype=float)
    path = math.hypot(end[0], end[1])
    reach = s.aav_speed * s.mission_time
    if check_speed and path > reach * (1.0 + s.speed_tolerance):
        raise InfeasibleTrajectoryError(
            f"path of {path:.1f} m exceeds {reach:.1f} m reachable at {s.aav_speed} m/s"
        )

    p_iot = np.array(s.p_iot, dtype=float)
    p_tgt = np.array(s.p_target, dtype=float)
    p_leo = np.array(s.p_leo, dtype=float)
    d_is = float(np.linalg.norm(p_tgt - p_iot))

    frames = []
    for n in range(1, s.n_frames + 1):
        p = start + (end - start) * (n / s.n_frames)
        d_sa = float(np.linalg.norm(p - p_tgt))
        d_al = float(np.linalg.norm(p_leo - p))
        az_s, el_s = _angles(p_tgt, p)
        if s.sensing_azimuth is not None:
            az_s = s.sensing_azimuth
        frames.append(
            FrameContext(
                index=n,
                p_aav=(float(p[0]), float(p[1]), float(p[2])),
                d_is=d_is,
                d_sa=d_sa,
                d_al=d_al,
                angles_s=(az_s, el_s),
                angles_a=_angles(p, p_leo),
                sigma_beta2=target_gain(s, d_is, d_sa),
            )
        )
    return frames


def frame_array(contexts: list[FrameContext], name: str) -> np.ndarray:
    """Stack one scalar attribute across frames."""
    return np.array([getattr(c, name) for c in contexts], dtype=float)
