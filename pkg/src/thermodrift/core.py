"""Domain types and the expansion-model arithmetic.

Unit conventions are fixed across the package: rod displacement ``q`` and
contracted length ``q0`` in millimetres, expansion in micrometres, temperature
differences in kelvins.  Model coefficients are therefore in um/(mm*K), which
is numerically the same as um/(m*K) divided by 1000.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, InputError

DEFAULT_STROKE_MM = 250.0
DEFAULT_Q0_MM = 500.0


class Unit(str, enum.Enum):
    MILLIMETRE = "mm"
    MICROMETRE = "um"
    KELVIN = "K"

    @property
    def is_length(self) -> bool:
        return self is not Unit.KELVIN


_TO_MM = {Unit.MILLIMETRE: 1.0, Unit.MICROMETRE: 1e-3}


def convert_length(values, src: Unit, dst: Unit):
    """Convert a length array between mm and um."""
    if not (src.is_length and dst.is_length):
        raise InputError(f"cannot convert {src.value} to {dst.value}")
    if src is dst:
        return values
    return np.asarray(values, dtype=float) * (_TO_MM[src] / _TO_MM[dst])


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled scalar channel with a validity mask."""

    t0: float
    dt: float
    values: np.ndarray
    valid: np.ndarray
    unit: Unit

    def __post_init__(self):
        values = _frozen(self.values)
        valid = _frozen(self.valid, dtype=bool)
        if values.ndim != 1 or values.shape != valid.shape or values.size < 1:
            raise InputError("values and valid must be 1-D with identical length >= 1")
        if not self.dt > 0:
            raise InputError(f"sample period must be positive, got {self.dt}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "unit", Unit(self.unit))

    def __len__(self):
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.t0 == other.t0
            and self.dt == other.dt
            and self.unit is other.unit
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.valid, other.valid)
        )

    __hash__ = None


def first_valid_index(valid) -> int:
    idx = np.flatnonzero(np.asarray(valid, dtype=bool))
    if idx.size == 0:
        raise InputError("dataset has no valid sample to use as zero reference")
    return int(idx[0])


def apply_zero_reference(delta_T, delta_q, valid):
    """Shift temperature and expansion columns so the first valid sample is 0."""
    k0 = first_valid_index(valid)
    delta_T = np.asarray(delta_T, dtype=float)
    delta_q = np.asarray(delta_q, dtype=float)
    return delta_T - delta_T[k0], delta_q - delta_q[k0]


@dataclass(frozen=True, eq=False)
class ScenarioDataset:
    """Aligned record of one scenario.

    ``delta_T`` has one column per sensor; sensor ``i`` lives in column
    ``i - 1``.  ``tag`` identifies the scenario for train/validation leakage
    checks.
    """

    time: np.ndarray
    q: np.ndarray
    delta_T: np.ndarray
    delta_q_measured: np.ndarray
    valid: np.ndarray
    q0: float = DEFAULT_Q0_MM
    tag: str = ""
    stroke: float = DEFAULT_STROKE_MM

    def __post_init__(self):
        time = _frozen(self.time)
        q = _frozen(self.q)
        dT = _frozen(self.delta_T)
        if dT.ndim == 1:
            dT = _frozen(dT[:, None])
        dq = _frozen(self.delta_q_measured)
        valid = _frozen(self.valid, dtype=bool)
        n = time.size
        if n < 1 or dT.ndim != 2 or dT.shape[1] < 1:
            raise InputError("dataset needs at least one sample and one sensor column")
        if not (q.shape == dq.shape == valid.shape == (n,) and dT.shape[0] == n):
            raise InputError("all dataset columns must share one length")
        if n > 1 and not np.all(np.diff(time) > 0):
            raise InputError("dataset time column must be strictly increasing")
        k0 = first_valid_index(valid)
        if np.any(dT[k0] != 0.0) or dq[k0] != 0.0:
            raise InputError("first valid sample must be the zero reference (all dT and dq equal 0)")
        if np.any(q < 0.0) or np.any(q > self.stroke):
            raise InputError(f"rod displacement outside [0, {self.stroke}] mm")
        if not (math.isfinite(self.q0) and self.q0 > 0):
            raise InputError(f"q0 must be a positive length, got {self.q0}")
        for name, arr in (("time", time), ("q", q), ("delta_T", dT), ("delta_q", dq)):
            if not np.all(np.isfinite(arr)):
                raise InputError(f"non-finite values in {name}")
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "delta_T", dT)
        object.__setattr__(self, "delta_q_measured", dq)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "q0", float(self.q0))
        object.__setattr__(self, "stroke", float(self.stroke))

    @property
    def n_samples(self) -> int:
        return self.time.size

    @property
    def n_sensors(self) -> int:
        return self.delta_T.shape[1]

    @property
    def sensor_ids(self) -> tuple[int, ...]:
        return tuple(range(1, self.n_sensors + 1))

    def sensor_column(self, sensor_id: int) -> np.ndarray:
        if not 1 <= sensor_id <= self.n_sensors:
            raise ConfigurationError(
                f"sensor {sensor_id} not present (dataset has sensors 1..{self.n_sensors})"
            )
        return self.delta_T[:, sensor_id - 1]

    def replace(self, **changes) -> "ScenarioDataset":
        kw = {
            "time": self.time,
            "q": self.q,
            "delta_T": self.delta_T,
            "delta_q_measured": self.delta_q_measured,
            "valid": self.valid,
            "q0": self.q0,
            "tag": self.tag,
            "stroke": self.stroke,
        }
        kw.update(changes)
        return ScenarioDataset(**kw)

    def __eq__(self, other):
        if not isinstance(other, ScenarioDataset):
            return NotImplemented
        return (
            self.q0 == other.q0
            and self.tag == other.tag
            and self.stroke == other.stroke
            and all(
                a.shape == b.shape and np.array_equal(a, b)
                for a, b in (
                    (self.time, other.time),
                    (self.q, other.q),
                    (self.delta_T, other.delta_T),
                    (self.delta_q_measured, other.delta_q_measured),
                    (self.valid, other.valid),
                )
            )
        )

    __hash__ = None


@dataclass(frozen=True)
class SensorConfig:
    """A single sensor or an unordered pair, stored in canonical (ascending) order."""

    sensors: tuple[int, ...]

    def __post_init__(self):
        ids = tuple(int(s) for s in self.sensors)
        if len(ids) not in (1, 2):
            raise ConfigurationError("a configuration holds one or two sensors")
        if any(s < 1 for s in ids):
            raise ConfigurationError(f"sensor ids start at 1, got {ids}")
        if len(ids) == 2 and ids[0] == ids[1]:
            raise ConfigurationError(f"pair needs two distinct sensors, got {ids}")
        object.__setattr__(self, "sensors", tuple(sorted(ids)))

    @classmethod
    def single(cls, i: int) -> "SensorConfig":
        return cls((i,))

    @classmethod
    def pair(cls, i: int, j: int) -> "SensorConfig":
        return cls((i, j))

    @classmethod
    def parse(cls, text: str) -> "SensorConfig":
        """Parse ``"7"``, ``"7,15"`` or ``"7-15"``."""
        parts = [p for p in text.replace("-", ",").split(",") if p.strip()]
        try:
            return cls(tuple(int(p) for p in parts))
        except ValueError:
            raise ConfigurationError(f"cannot parse sensor configuration {text!r}") from None

    @property
    def kind(self) -> str:
        return "single" if len(self.sensors) == 1 else "pair"

    @property
    def label(self) -> str:
        return "-".join(str(s) for s in self.sensors)

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class ExpansionModel:
    """Identified linear expansion model.

    ``coeffs`` holds one ``(A, B)`` tuple per sensor of ``config`` in the same
    order.  ``A`` multiplies ``q0 * dT`` (fixed part), ``B`` multiplies
    ``q * dT`` (moving rod).  ``training_tags`` records the scenarios the
    coefficients were identified on.
    """

    config: SensorConfig
    coeffs: tuple[tuple[float, float], ...]
    q0: float = DEFAULT_Q0_MM
    training_tags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        coeffs = tuple((float(a), float(b)) for a, b in self.coeffs)
        if len(coeffs) != len(self.config.sensors):
            raise ConfigurationError(
                f"{len(coeffs)} coefficient pairs for {len(self.config.sensors)} sensors"
            )
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "q0", float(self.q0))
        object.__setattr__(self, "training_tags", tuple(self.training_tags))

    @classmethod
    def from_vector(cls, config: SensorConfig, vector, q0: float, training_tags=()):
        """Build from ``[A_i, B_i, A_j, B_j]`` ordered like the design columns."""
        v = [float(x) for x in vector]
        return cls(config, tuple(zip(v[0::2], v[1::2])), q0, tuple(training_tags))

    @property
    def vector(self) -> np.ndarray:
        return np.array([c for ab in self.coeffs for c in ab])

    def coefficients_for(self, sensor_id: int) -> tuple[float, float]:
        return self.coeffs[self.config.sensors.index(sensor_id)]


def _sensor_values(delta_T, sensor_id: int):
    if isinstance(delta_T, Mapping):
        try:
            return np.asarray(delta_T[sensor_id], dtype=float)
        except KeyError:
            raise ConfigurationError(f"no temperature supplied for sensor {sensor_id}") from None
    arr = np.asarray(delta_T, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] < sensor_id:
        raise ConfigurationError(f"no temperature column for sensor {sensor_id}")
    return arr[..., sensor_id - 1]


def predict_expansion(model: ExpansionModel, q, delta_T):
    """Predicted thermal expansion in um.

    ``delta_T`` is either a mapping ``sensor_id -> dT`` or an array whose last
    axis is indexed by ``sensor_id - 1``.  ``q`` and the temperatures
    broadcast against each other.
    """
    q = np.asarray(q, dtype=float)
    total = None
    for sensor, (a, b) in zip(model.config.sensors, model.coeffs):
        dT = _sensor_values(delta_T, sensor)
        term = a * model.q0 * dT + b * q * dT
        total = term if total is None else total + term
    return total if total.ndim else float(total)


def residual_norms(residuals) -> tuple[float, float]:
    """Return ``(rmse, linf)`` of a residual vector."""
    r = np.asarray(residuals, dtype=float).ravel()
    if r.size == 0:
        raise DomainError("residual norms need at least one residual")
    linf = float(np.max(np.abs(r)))
    if linf == 0.0:
        return 0.0, 0.0
    # scale by the peak so squaring neither underflows nor overflows
    s = r / linf
    l2 = linf * math.sqrt(math.fsum(s * s))
    return l2 / math.sqrt(r.size), linf


@dataclass(frozen=True, eq=False)
class FitReport:
    residuals: np.ndarray
    rmse: float
    linf: float
    n_samples: int
    n_outliers_removed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "residuals", _frozen(self.residuals))

    @classmethod
    def from_residuals(cls, residuals, n_outliers_removed: int = 0) -> "FitReport":
        r = np.asarray(residuals, dtype=float)
        rmse, linf = residual_norms(r)
        return cls(r, rmse, linf, int(r.size), int(n_outliers_removed))

    def __eq__(self, other):
        if not isinstance(other, FitReport):
            return NotImplemented
        return (
            self.rmse == other.rmse
            and self.linf == other.linf
            and self.n_samples == other.n_samples
            and self.n_outliers_removed == other.n_outliers_removed
            and np.array_equal(self.residuals, other.residuals)
        )

    __hash__ = None
