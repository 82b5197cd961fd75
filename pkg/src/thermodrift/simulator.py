"""Synthetic scenario generator.

A scenario is a sequence of rest and movement phases.  Movement phases drive
the rod to a target in steps of at most ``increment`` mm; each step and the
stabilisation window after it are masked invalid, as interferometry is not
trusted while the structure vibrates.  The motor heats the leg for the whole
movement phase.

Each temperature sensor is a first-order node relaxing toward ambient with
time constant ``tau`` and a steady-state rise ``gain`` while heated.  The
measured expansion is the mean of three beams, each carrying its own static
offset and Gaussian noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_Q0_MM,
    DEFAULT_STROKE_MM,
    ExpansionModel,
    ScenarioDataset,
    SensorConfig,
    TimeSeries,
    Unit,
    apply_zero_reference,
    first_valid_index,
    predict_expansion,
)
from .errors import InputError, SpecError, StabilityError

N_BEAMS = 3


@dataclass(frozen=True)
class Phase:
    kind: str  # "movement" or "rest"
    duration: float
    target_q: float | None = None

    def __post_init__(self):
        if self.kind not in ("movement", "rest"):
            raise SpecError(f"unknown phase kind {self.kind!r}")
        if not self.duration > 0:
            raise SpecError(f"phase duration must be positive, got {self.duration}")
        if self.kind == "movement" and self.target_q is None:
            raise SpecError("movement phase needs a target_q")


@dataclass(frozen=True)
class ScenarioSpec:
    """Phase structure of one scenario.

    ``speed`` (mm/s) fixes how long a step takes.  The steps of a movement
    phase are spread evenly over the phase: each starts a slot of
    ``duration / n_steps`` seconds.
    """

    phases: tuple[Phase, ...]
    increment: float = 10.0
    stabilization_window: float = 5.0
    sample_dt: float = 1.0
    speed: float = 5.0
    q_start: float = 0.0
    stroke: float = DEFAULT_STROKE_MM

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise SpecError("scenario has no phases")
        for name in ("increment", "sample_dt", "speed"):
            if not getattr(self, name) > 0:
                raise SpecError(f"{name} must be positive")
        if self.stabilization_window < 0:
            raise SpecError("stabilization_window must be >= 0")
        for q in [self.q_start] + [p.target_q for p in self.phases if p.kind == "movement"]:
            if not 0.0 <= q <= self.stroke:
                raise SpecError(f"target {q} mm outside stroke [0, {self.stroke}]")

    @property
    def total_duration(self) -> float:
        return sum(p.duration for p in self.phases)

    @property
    def n_samples(self) -> int:
        return int(round(self.total_duration / self.sample_dt))


@dataclass(frozen=True)
class Step:
    start: float
    duration: float
    q_from: float
    q_to: float


def split_steps(q_from: float, q_to: float, increment: float) -> list[tuple[float, float]]:
    """Break a move into full ``increment`` steps plus a shorter remainder."""
    dist = abs(q_to - q_from)
    if dist == 0:
        return []
    n_full = int(math.floor(dist / increment + 1e-9))
    sign = 1.0 if q_to > q_from else -1.0
    points = [q_from + sign * increment * k for k in range(n_full + 1)]
    if dist - n_full * increment > 1e-9 * max(1.0, dist):
        points.append(q_to)
    points[-1] = q_to
    return list(zip(points[:-1], points[1:]))


def plan_steps(spec: ScenarioSpec) -> list[Step]:
    steps = []
    t = 0.0
    q = spec.q_start
    for phase in spec.phases:
        if phase.kind == "movement":
            moves = split_steps(q, phase.target_q, spec.increment)
            if moves:
                slot = phase.duration / len(moves)
                for n, (a, b) in enumerate(moves):
                    step_time = abs(b - a) / spec.speed
                    if step_time + spec.stabilization_window > slot + 1e-9:
                        raise SpecError(
                            f"movement phase of {phase.duration} s too short for "
                            f"{len(moves)} steps at {spec.speed} mm/s"
                        )
                    steps.append(Step(t + n * slot, step_time, a, b))
            q = phase.target_q
        t += phase.duration
    return steps


def generate_motion(spec: ScenarioSpec, t0: float = 0.0) -> TimeSeries:
    """Setpoint trace in mm with the motion validity mask."""
    n = spec.n_samples
    times = spec.sample_dt * np.arange(n)
    q = np.full(n, float(spec.q_start))
    valid = np.ones(n, dtype=bool)
    for step in plan_steps(spec):
        end = step.start + step.duration
        ramp = (times >= step.start) & (times < end)
        frac = (times[ramp] - step.start) / step.duration
        q[ramp] = step.q_from + frac * (step.q_to - step.q_from)
        q[times >= end] = step.q_to
        valid[(times >= step.start) & (times < end + spec.stabilization_window)] = False
    return TimeSeries(t0, spec.sample_dt, q, valid, Unit.MILLIMETRE)


def heating_duty(spec: ScenarioSpec) -> np.ndarray:
    """Motor duty u(t): 1 during movement phases, 0 during rest."""
    times = spec.sample_dt * np.arange(spec.n_samples)
    u = np.zeros(times.size)
    t = 0.0
    for phase in spec.phases:
        if phase.kind == "movement":
            u[(times >= t) & (times < t + phase.duration)] = 1.0
        t += phase.duration
    return u


@dataclass(frozen=True)
class ThermalPlantSpec:
    """Lumped thermal plant plus the ground-truth expansion and beam model."""

    tau: tuple[float, ...]
    gain: tuple[float, ...]
    true_model: ExpansionModel
    ambient_amplitude: float = 0.0
    ambient_rate_cap: float = 1.0  # K/h
    beam_sigma: float = 0.0
    beam_offsets: tuple[float, ...] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "tau", tuple(float(x) for x in self.tau))
        object.__setattr__(self, "gain", tuple(float(x) for x in self.gain))
        object.__setattr__(self, "beam_offsets", tuple(float(x) for x in self.beam_offsets))
        if len(self.tau) != len(self.gain) or not self.tau:
            raise SpecError("tau and gain need one entry per sensor")
        if any(not t > 0 for t in self.tau):
            raise SpecError("every time constant must be positive")
        if not 0.0 <= self.ambient_amplitude <= 2.0:
            raise SpecError("ambient drift amplitude must lie in [0, 2] K")
        if not 0.0 < self.ambient_rate_cap <= 1.0:
            raise SpecError("ambient rate cap must lie in (0, 1] K/h")
        if self.beam_sigma < 0:
            raise SpecError("beam noise sigma must be >= 0")
        if len(self.beam_offsets) != N_BEAMS:
            raise SpecError(f"need {N_BEAMS} beam offsets")
        if max(self.true_model.config.sensors) > len(self.tau):
            raise SpecError("ground-truth model references a sensor the plant lacks")

    @property
    def n_sensors(self) -> int:
        return len(self.tau)


def ambient_profile(plant: ThermalPlantSpec, times: np.ndarray, rng=None) -> np.ndarray:
    """Ambient excursion (K) relative to its value at t=0.

    A sinusoid of the configured amplitude whose period keeps the slope under
    the rate cap; the phase is drawn from ``rng`` when supplied.
    """
    a = plant.ambient_amplitude
    if a == 0:
        return np.zeros_like(times, dtype=float)
    omega = (plant.ambient_rate_cap / 3600.0) / a
    phase = 0.0 if rng is None else rng.uniform(0.0, 2.0 * np.pi)
    return a * (np.sin(omega * times + phase) - np.sin(phase))


def simulate_thermals(
    plant: ThermalPlantSpec,
    motion: TimeSeries,
    duty,
    ambient=None,
) -> list[TimeSeries]:
    """Integrate every sensor node with explicit Euler at the motion sample period.

    ``duty`` is the heating indicator per sample; ``ambient`` the ambient
    excursion per sample (zeros when omitted).  Output is referenced to t=0.
    """
    dt = motion.dt
    if dt >= min(plant.tau) / 2:
        raise StabilityError(
            f"sample period {dt} s too coarse for tau_min={min(plant.tau)} s (need dt < tau/2)"
        )
    n = len(motion)
    u = np.asarray(duty, dtype=float)
    amb = np.zeros(n) if ambient is None else np.asarray(ambient, dtype=float)
    if u.shape != (n,) or amb.shape != (n,):
        raise InputError("duty and ambient must match the motion length")
    tau = np.asarray(plant.tau)
    gain = np.asarray(plant.gain)
    T = np.zeros((n, tau.size))
    for k in range(1, n):
        prev = T[k - 1]
        T[k] = prev + dt * (-(prev - amb[k - 1]) + gain * u[k - 1]) / tau
    return [TimeSeries(motion.t0, dt, T[:, s], motion.valid, Unit.KELVIN) for s in range(tau.size)]


def observe_expansion(
    true_model: ExpansionModel,
    q: TimeSeries,
    thermals: Sequence[TimeSeries],
    beam_sigma: float = 0.0,
    offsets: Sequence[float] = (0.0, 0.0, 0.0),
    rng=None,
) -> TimeSeries:
    """Interferometer reading: mean of three noisy beams, zeroed at t=0."""
    n = len(q)
    if any(len(th) != n for th in thermals):
        raise InputError("thermal traces and motion are not aligned")
    dT = np.column_stack([th.values for th in thermals])
    truth = np.asarray(predict_expansion(true_model, q.values, dT), dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    beams = truth[:, None] + offsets[None, :]
    if beam_sigma > 0:
        if rng is None:
            raise InputError("a random generator is required when beam noise is enabled")
        beams = beams + rng.normal(0.0, beam_sigma, size=beams.shape)
    measured = beams.mean(axis=1)
    return TimeSeries(q.t0, q.dt, measured - measured[0], q.valid, Unit.MICROMETRE)


def assemble_dataset(
    motion: TimeSeries,
    thermals: Sequence[TimeSeries],
    expansion: TimeSeries,
    q0: float = DEFAULT_Q0_MM,
    tag: str = "",
    stroke: float = DEFAULT_STROKE_MM,
) -> ScenarioDataset:
    """Join the traces into a dataset zero-referenced at its first valid sample."""
    series = [motion, expansion, *thermals]
    if any(len(s) != len(motion) for s in series):
        raise InputError("trace lengths differ")
    if any(s.dt != motion.dt for s in series):
        raise InputError("trace sample periods differ")
    valid = motion.valid & expansion.valid
    first_valid_index(valid)
    dT = np.column_stack([th.values for th in thermals])
    dT, dq = apply_zero_reference(dT, expansion.values, valid)
    return ScenarioDataset(
        time=motion.times - motion.t0,
        q=motion.values,
        delta_T=dT,
        delta_q_measured=dq,
        valid=valid,
        q0=q0,
        tag=tag,
        stroke=stroke,
    )


def simulate_scenario(
    plant: ThermalPlantSpec,
    scenario: ScenarioSpec,
    seed=None,
    q0: float = DEFAULT_Q0_MM,
    tag: str = "",
) -> ScenarioDataset:
    """Run motion, thermal and observation stages for one scenario."""
    rng = np.random.default_rng(seed)
    motion = generate_motion(scenario)
    ambient = ambient_profile(plant, motion.times - motion.t0, rng)
    thermals = simulate_thermals(plant, motion, heating_duty(scenario), ambient)
    expansion = observe_expansion(
        plant.true_model, motion, thermals, plant.beam_sigma, plant.beam_offsets, rng
    )
    return assemble_dataset(motion, thermals, expansion, q0, tag, scenario.stroke)


# Config-file parsing


def scenario_from_dict(d: dict, defaults: dict | None = None) -> ScenarioSpec:
    d = {**(defaults or {}), **d}
    try:
        phases = tuple(
            Phase(p["kind"], float(p["duration_s"]), p.get("target_q_mm")) for p in d["phases"]
        )
        return ScenarioSpec(
            phases=phases,
            increment=float(d.get("increment_mm", 10.0)),
            stabilization_window=float(d.get("stabilization_window_s", 5.0)),
            sample_dt=float(d.get("sample_dt_s", 1.0)),
            speed=float(d.get("speed_mm_per_s", 5.0)),
            q_start=float(d.get("q_start_mm", 0.0)),
            stroke=float(d.get("stroke_mm", DEFAULT_STROKE_MM)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"bad scenario description: {exc}") from None


def plant_from_dict(d: dict) -> ThermalPlantSpec:
    try:
        truth = d["true_model"]
        config = SensorConfig(tuple(truth["sensors"]))
        model = ExpansionModel(
            config,
            tuple((float(a), float(b)) for a, b in zip(truth["A"], truth["B"])),
            float(d.get("q0_mm", DEFAULT_Q0_MM)),
        )
        return ThermalPlantSpec(
            tau=tuple(d["tau_s"]),
            gain=tuple(d["gain_K"]),
            true_model=model,
            ambient_amplitude=float(d.get("ambient_amplitude_K", 0.0)),
            ambient_rate_cap=float(d.get("ambient_rate_cap_K_per_h", 1.0)),
            beam_sigma=float(d.get("beam_sigma_um", 0.0)),
            beam_offsets=tuple(d.get("beam_offsets_um", (0.0, 0.0, 0.0))),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"bad plant description: {exc}") from None


@dataclass
class SimulationConfig:
    plant: ThermalPlantSpec
    scenarios: dict[str, ScenarioSpec] = field(default_factory=dict)
    q0: float = DEFAULT_Q0_MM


def config_from_dict(d: dict) -> SimulationConfig:
    """Parse a simulation config document.

    ``{"plant": {...}, "scenario_defaults": {...}, "scenarios": {"name": {...}}}``
    """
    try:
        plant_d = d["plant"]
        scen_d = d["scenarios"]
    except (KeyError, TypeError):
        raise SpecError("config needs 'plant' and 'scenarios' sections") from None
    if not scen_d:
        raise SpecError("config lists no scenarios")
    defaults = d.get("scenario_defaults", {})
    plant = plant_from_dict(plant_d)
    scenarios = {name: scenario_from_dict(s, defaults) for name, s in scen_d.items()}
    return SimulationConfig(plant, scenarios, plant.true_model.q0)


def simulate_config(config: SimulationConfig, seed: int) -> dict[str, ScenarioDataset]:
    """Simulate every scenario; each gets an independent child seed."""
    children = np.random.SeedSequence(seed).spawn(len(config.scenarios))
    return {
        name: simulate_scenario(config.plant, spec, child, config.q0, tag=name)
        for (name, spec), child in zip(config.scenarios.items(), children)
    }
