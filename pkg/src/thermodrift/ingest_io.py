"""Dataset and report files, raw-channel ingestion and grid alignment.

Dataset CSV layout::

    # q0_mm=500.0
    # tag=scenario-a
    # stroke_mm=250.0
    time_s,q_mm,valid,dq_um,dT01_K,dT02_K,...
    0.0,0.0,1,0.0,0.0,0.0,...

Leading ``#`` lines carry scalar metadata.  Floats are written with the
shortest decimal that round-trips, so ``read_dataset(write_dataset(x))``
reproduces ``x`` bit for bit.

Raw channel files share the metadata lines and use a ``time_s`` column
followed by ``<channel>_<unit>`` columns, where a channel is ``q``, ``dq``,
``T<id>`` (absolute temperature) or ``dT<id>``.  An empty cell means the
channel has no sample at that timestamp, which is how several sample rates
coexist in one file.  An optional ``<channel>_valid`` column (0/1) marks
unusable samples.
"""
from __future__ import annotations

import contextlib
import csv
import io
import json
import math
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    DEFAULT_Q0_MM,
    DEFAULT_STROKE_MM,
    ExpansionModel,
    FitReport,
    ScenarioDataset,
    SensorConfig,
    Unit,
    apply_zero_reference,
    convert_length,
    first_valid_index,
)
from .errors import InputError
from .selection import CriteriaMatrices, ParetoPoint, ParetoResult, normalize_for_display
from .validation import ScenarioMetrics, ValidationReport

DATASET_FIXED = ("time_s", "q_mm", "valid", "dq_um")
_TEMP_COL = re.compile(r"^dT(\d+)_K$")
_RAW_COL = re.compile(r"^(q|dq|d?T(\d+))_([A-Za-z]+)$")


def fmt(x: float) -> str:
    return repr(float(x))


# Atomic writes


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary sibling file and rename over the target."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


class StagedOutputs:
    """Collect several output files and publish them only if all were produced."""

    def __init__(self):
        self._items: list[tuple[Path, str]] = []

    def add(self, path, text: str) -> None:
        self._items.append((Path(path), text))

    def commit(self) -> None:
        temps = []
        try:
            for path, text in self._items:
                path.parent.mkdir(parents=True, exist_ok=True)
                fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
                temps.append((tmp, path))
                with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
        except BaseException:
            for tmp, _ in temps:
                with contextlib.suppress(FileNotFoundError):
                    os.unlink(tmp)
            raise
        for tmp, path in temps:
            os.replace(tmp, path)


# Dataset CSV


def _read_lines(path) -> tuple[dict[str, str], list[list[str]]]:
    meta: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if sep:
                meta[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise InputError(f"{path}: no header row")
    return meta, rows


def _meta_float(meta, key, default):
    try:
        return float(meta[key]) if key in meta else default
    except ValueError:
        raise InputError(f"metadata {key}={meta[key]!r} is not a number") from None


def dataset_to_csv(ds: ScenarioDataset) -> str:
    buf = io.StringIO()
    buf.write(f"# q0_mm={fmt(ds.q0)}\n# tag={ds.tag}\n# stroke_mm={fmt(ds.stroke)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(DATASET_FIXED) + [f"dT{s:02d}_K" for s in ds.sensor_ids])
    for k in range(ds.n_samples):
        w.writerow(
            [fmt(ds.time[k]), fmt(ds.q[k]), int(ds.valid[k]), fmt(ds.delta_q_measured[k])]
            + [fmt(v) for v in ds.delta_T[k]]
        )
    return buf.getvalue()


def write_dataset(path, ds: ScenarioDataset) -> None:
    atomic_write_text(path, dataset_to_csv(ds))


def is_dataset_header(header) -> bool:
    return tuple(header[:4]) == DATASET_FIXED


def read_dataset(path, q0: float | None = None) -> ScenarioDataset:
    """Load a dataset CSV; ``q0`` overrides the file's metadata when given.

    The tag defaults to the file stem when the metadata has none.
    """
    meta, rows = _read_lines(path)
    header = rows[0]
    if not is_dataset_header(header):
        raise InputError(f"{path}: header must start with {','.join(DATASET_FIXED)}")
    ids = []
    for col in header[4:]:
        m = _TEMP_COL.match(col)
        if not m:
            raise InputError(f"{path}: unexpected column {col!r}")
        ids.append(int(m.group(1)))
    if ids != list(range(1, len(ids) + 1)):
        raise InputError(f"{path}: temperature columns must be dT01_K..dTNN_K in order")
    try:
        data = [[float(x) for x in row] for row in rows[1:]]
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    if not data:
        raise InputError(f"{path}: no samples")
    if any(len(r) != len(header) for r in data):
        raise InputError(f"{path}: ragged rows")
    arr = np.array(data)
    if not np.all(np.isin(arr[:, 2], (0.0, 1.0))):
        raise InputError(f"{path}: valid column must hold 0 or 1")
    return ScenarioDataset(
        time=arr[:, 0],
        q=arr[:, 1],
        delta_T=arr[:, 4:],
        delta_q_measured=arr[:, 3],
        valid=arr[:, 2] == 1.0,
        q0=q0 if q0 is not None else _meta_float(meta, "q0_mm", DEFAULT_Q0_MM),
        tag=meta.get("tag") or Path(path).stem,
        stroke=_meta_float(meta, "stroke_mm", DEFAULT_STROKE_MM),
    )


# Raw channels


@dataclass(frozen=True, eq=False)
class RawChannel:
    name: str
    kind: str  # "q", "dq" or "T"
    sensor_id: int | None
    unit: Unit
    times: np.ndarray
    values: np.ndarray
    valid: np.ndarray


def _parse_unit(token: str, column: str) -> Unit:
    try:
        return Unit(token)
    except ValueError:
        raise InputError(f"unknown unit {token!r} in column {column!r}") from None


def load_raw_channels(path) -> dict[str, RawChannel]:
    """Parse a raw multi-rate channel file into named channels.

    Channel names are ``"q"``, ``"dq"`` and ``"T01"``, ``"T02"``... regardless
    of whether the file held absolute (``T``) or relative (``dT``)
    temperatures.  Lengths are converted to mm (``q``) and um (``dq``).
    """
    _, rows = _read_lines(path)
    header = rows[0]
    if not header or header[0] != "time_s":
        raise InputError(f"{path}: first column must be time_s")
    if len(set(header)) != len(header):
        raise InputError(f"{path}: duplicate column names")
    value_cols: dict[str, tuple[int, str, int | None, Unit]] = {}
    valid_cols: dict[str, int] = {}
    for idx, col in enumerate(header[1:], start=1):
        if col.endswith("_valid"):
            valid_cols[col[: -len("_valid")]] = idx
            continue
        m = _RAW_COL.match(col)
        if not m:
            raise InputError(f"{path}: cannot interpret column {col!r}")
        base, sid, token = m.group(1), m.group(2), m.group(3)
        unit = _parse_unit(token, col)
        if sid is None:
            kind, name = base, base
            if not unit.is_length:
                raise InputError(f"column {col!r}: {kind} needs a length unit")
        else:
            kind, name = "T", f"T{int(sid):02d}"
            if unit is not Unit.KELVIN:
                raise InputError(f"column {col!r}: temperatures must be in K")
        if name in value_cols:
            other = header[value_cols[name][0]]
            raise InputError(f"duplicate sensor id: columns {other!r} and {col!r}")
        value_cols[name] = (idx, base, None if sid is None else int(sid), unit)
    valid_by_name = {}
    for base, idx in valid_cols.items():
        m = _RAW_COL.match(f"{base}_K") or _RAW_COL.match(f"{base}_mm")
        if not m:
            raise InputError(f"{path}: validity column for unknown channel {base!r}")
        name = base if m.group(2) is None else f"T{int(m.group(2)):02d}"
        valid_by_name[name] = idx
    for needed in ("q", "dq"):
        if needed not in value_cols:
            raise InputError(f"{path}: missing {needed} channel")
    if not any(n.startswith("T") for n in value_cols):
        raise InputError(f"{path}: no temperature channel")

    body = rows[1:]
    try:
        times = np.array([float(r[0]) for r in body])
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: bad timestamp ({exc})") from None
    if times.size == 0:
        raise InputError(f"{path}: no samples")
    if np.any(np.diff(times) <= 0):
        raise InputError(f"{path}: timestamps are not strictly increasing")

    channels = {}
    for name, (idx, base, sid, unit) in value_cols.items():
        ts, vs, ok = [], [], []
        vidx = valid_by_name.get(name)
        for r, t in zip(body, times):
            cell = r[idx].strip() if idx < len(r) else ""
            if not cell:
                continue
            try:
                v = float(cell)
                flag = True if vidx is None or not r[vidx].strip() else float(r[vidx]) == 1.0
            except ValueError as exc:
                raise InputError(f"{path}: column {header[idx]!r}: {exc}") from None
            ts.append(t)
            vs.append(v)
            ok.append(flag)
        if not ts:
            raise InputError(f"{path}: channel {name} has no samples")
        values = np.array(vs)
        kind = "T" if sid is not None else base
        if kind == "q":
            values, unit = convert_length(values, unit, Unit.MILLIMETRE), Unit.MILLIMETRE
        elif kind == "dq":
            values, unit = convert_length(values, unit, Unit.MICROMETRE), Unit.MICROMETRE
        channels[name] = RawChannel(name, kind, sid, unit, np.array(ts), values, np.array(ok))
    return channels


def read_metadata(path) -> dict[str, str]:
    return _read_lines(path)[0]


def dataset_channels(ds: ScenarioDataset) -> dict[str, RawChannel]:
    """View a dataset as raw channels sharing one time base."""
    ch = {
        "q": RawChannel("q", "q", None, Unit.MILLIMETRE, ds.time, ds.q, ds.valid),
        "dq": RawChannel("dq", "dq", None, Unit.MICROMETRE, ds.time, ds.delta_q_measured, ds.valid),
    }
    for s in ds.sensor_ids:
        name = f"T{s:02d}"
        ch[name] = RawChannel(name, "T", s, Unit.KELVIN, ds.time, ds.sensor_column(s), ds.valid)
    return ch


def resample(channel: RawChannel, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Linear interpolation onto ``grid`` with conjunctive validity.

    A grid point hitting a sample exactly inherits that sample's flag;
    otherwise both bracketing samples must be valid.
    """
    t, v, ok = channel.times, channel.values, channel.valid
    values = np.interp(grid, t, v)
    right = np.clip(np.searchsorted(t, grid, side="left"), 0, t.size - 1)
    exact = t[right] == grid
    left = np.clip(right - 1, 0, t.size - 1)
    valid = np.where(exact, ok[right], ok[left] & ok[right])
    return values, valid


def align_and_zero(
    channels,
    grid_dt: float | None = None,
    q0: float | None = None,
    tag: str | None = None,
    stroke: float | None = None,
) -> ScenarioDataset:
    """Resample channels onto a uniform grid and apply the zero reference.

    ``channels`` is a mapping from :func:`load_raw_channels` or a
    :class:`ScenarioDataset`, in which case its own period and metadata are
    the defaults.  The grid spans the overlap of all channels; the output
    time column counts seconds from the first grid point.
    """
    if isinstance(channels, ScenarioDataset):
        ds = channels
        if grid_dt is None and ds.n_samples > 1:
            grid_dt = float(ds.time[1] - ds.time[0])
        q0 = ds.q0 if q0 is None else q0
        tag = ds.tag if tag is None else tag
        stroke = ds.stroke if stroke is None else stroke
        channels = dataset_channels(ds)
    grid_dt = 1.0 if grid_dt is None else float(grid_dt)
    if not grid_dt > 0:
        raise InputError("grid period must be positive")
    start = max(float(c.times[0]) for c in channels.values())
    end = min(float(c.times[-1]) for c in channels.values())
    if end < start:
        raise InputError("channels do not overlap in time")
    n = int(math.floor((end - start) / grid_dt + 1e-9)) + 1
    offsets = grid_dt * np.arange(n)
    grid = start + offsets

    q, q_ok = resample(channels["q"], grid)
    dq, dq_ok = resample(channels["dq"], grid)
    valid = q_ok & dq_ok
    temps = sorted((c for c in channels.values() if c.kind == "T"), key=lambda c: c.sensor_id)
    ids = [c.sensor_id for c in temps]
    if ids != list(range(1, len(ids) + 1)):
        raise InputError(f"temperature sensors must be numbered 1..N, got {ids}")
    cols = []
    for c in temps:
        v, ok = resample(c, grid)
        cols.append(v)
        valid &= ok
    if not valid.any():
        raise InputError("no grid sample is valid in every channel")
    dT, dq = apply_zero_reference(np.column_stack(cols), dq, valid)
    return ScenarioDataset(
        time=offsets,
        q=q,
        delta_T=dT,
        delta_q_measured=dq,
        valid=valid,
        q0=DEFAULT_Q0_MM if q0 is None else q0,
        tag=tag or "",
        stroke=DEFAULT_STROKE_MM if stroke is None else stroke,
    )


def load_dataset(path, grid_dt: float | None = None, q0: float | None = None, stroke=None) -> ScenarioDataset:
    """Read either a dataset CSV or a raw channel file (aligned on the fly)."""
    meta, rows = _read_lines(path)
    if is_dataset_header(rows[0]):
        ds = read_dataset(path, q0)
        return ds if stroke is None else ds.replace(stroke=stroke)
    channels = load_raw_channels(path)
    return align_and_zero(
        channels,
        grid_dt,
        q0 if q0 is not None else _meta_float(meta, "q0_mm", DEFAULT_Q0_MM),
        meta.get("tag") or Path(path).stem,
        stroke if stroke is not None else _meta_float(meta, "stroke_mm", DEFAULT_STROKE_MM),
    )


# JSON reports


def _num(x):
    x = float(x)
    return None if math.isnan(x) else x


def _unnum(x):
    return math.nan if x is None else float(x)


def model_to_dict(m: ExpansionModel) -> dict:
    return {
        "type": "expansion_model",
        "sensors": list(m.config.sensors),
        "A_um_per_mm_K": [a for a, _ in m.coeffs],
        "B_um_per_mm_K": [b for _, b in m.coeffs],
        "q0_mm": m.q0,
        "training_tags": list(m.training_tags),
    }


def model_from_dict(d: dict) -> ExpansionModel:
    return ExpansionModel(
        SensorConfig(tuple(d["sensors"])),
        tuple(zip(d["A_um_per_mm_K"], d["B_um_per_mm_K"])),
        d["q0_mm"],
        tuple(d.get("training_tags", ())),
    )


def fit_report_to_dict(r: FitReport) -> dict:
    return {
        "type": "fit_report",
        "rmse_um": r.rmse,
        "linf_um": r.linf,
        "n_samples": r.n_samples,
        "n_outliers_removed": r.n_outliers_removed,
        "residuals_um": [float(x) for x in r.residuals],
    }


def fit_report_from_dict(d: dict) -> FitReport:
    return FitReport(
        np.array(d["residuals_um"], dtype=float),
        d["rmse_um"],
        d["linf_um"],
        d["n_samples"],
        d["n_outliers_removed"],
    )


def _metrics_to_dict(m: ScenarioMetrics) -> dict:
    return {
        "scenario": m.tag,
        "n_samples": m.n_samples,
        "max_drift_um": m.max_drift_um,
        "max_residual_um": m.max_residual_um,
        "mean_abs_drift_um": m.mean_abs_drift_um,
        "mean_abs_residual_um": m.mean_abs_residual_um,
        "reduction_max_pct": m.reduction_max_pct,
        "reduction_mean_pct": m.reduction_mean_pct,
    }


def _metrics_from_dict(d: dict) -> ScenarioMetrics:
    return ScenarioMetrics(
        d["scenario"],
        d["n_samples"],
        d["max_drift_um"],
        d["max_residual_um"],
        d["mean_abs_drift_um"],
        d["mean_abs_residual_um"],
        d["reduction_max_pct"],
        d["reduction_mean_pct"],
    )


def validation_to_dict(r: ValidationReport) -> dict:
    return {
        "type": "validation_report",
        "config": r.config,
        "scenarios": [_metrics_to_dict(m) for m in r.scenarios],
        "pooled": _metrics_to_dict(r.pooled),
    }


def validation_from_dict(d: dict) -> ValidationReport:
    return ValidationReport(
        d["config"],
        tuple(_metrics_from_dict(m) for m in d["scenarios"]),
        _metrics_from_dict(d["pooled"]),
    )


def _matrix(m) -> list:
    return [[_num(x) for x in row] for row in np.asarray(m)]


def criteria_to_dict(c: CriteriaMatrices) -> dict:
    return {
        "type": "criteria_matrices",
        "n": c.n,
        "n_fits": c.n_fits,
        "rmse_um": _matrix(c.rmse),
        "linf_um": _matrix(c.linf),
        "status": [list(map(str, row)) for row in c.status],
        "rmse_display": _matrix(normalize_for_display(c.rmse, c.status)),
        "linf_display": _matrix(normalize_for_display(c.linf, c.status)),
    }


def criteria_from_dict(d: dict) -> CriteriaMatrices:
    unpack = lambda m: np.array([[_unnum(x) for x in row] for row in m])  # noqa: E731
    return CriteriaMatrices(
        d["n"],
        unpack(d["rmse_um"]),
        unpack(d["linf_um"]),
        np.array(d["status"], dtype="<U10"),
        d["n_fits"],
    )


def _point(p: ParetoPoint | None):
    if p is None:
        return None
    return {"sensors": list(p.config.sensors), "config": p.config.label, "rmse_um": p.rmse, "linf_um": p.linf}


def _unpoint(d):
    if d is None:
        return None
    return ParetoPoint(SensorConfig(tuple(d["sensors"])), d["rmse_um"], d["linf_um"])


def pareto_to_dict(p: ParetoResult) -> dict:
    return {
        "type": "pareto_result",
        "front": [_point(x) for x in p.front],
        "dominated_count": p.dominated_count,
        "best_single": _point(p.best_single),
    }


def pareto_from_dict(d: dict) -> ParetoResult:
    return ParetoResult(
        tuple(_unpoint(x) for x in d["front"]), d["dominated_count"], _unpoint(d["best_single"])
    )


_ENCODERS = [
    (ExpansionModel, model_to_dict),
    (FitReport, fit_report_to_dict),
    (ValidationReport, validation_to_dict),
    (CriteriaMatrices, criteria_to_dict),
    (ParetoResult, pareto_to_dict),
]
_DECODERS = {
    "expansion_model": model_from_dict,
    "fit_report": fit_report_from_dict,
    "validation_report": validation_from_dict,
    "criteria_matrices": criteria_from_dict,
    "pareto_result": pareto_from_dict,
}


def report_to_dict(obj) -> dict:
    for cls, enc in _ENCODERS:
        if isinstance(obj, cls):
            return enc(obj)
    raise TypeError(f"no report encoding for {type(obj).__name__}")


def dumps_report(obj) -> str:
    doc = obj if isinstance(obj, dict) else report_to_dict(obj)
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def loads_report(text: str):
    try:
        doc = json.loads(text)
        return _DECODERS[doc["type"]](doc)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"unreadable report: {exc}") from None


def write_report(path, obj) -> None:
    atomic_write_text(path, dumps_report(obj))


def read_report(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return loads_report(text)


def read_model(path) -> ExpansionModel:
    obj = read_report(path)
    if not isinstance(obj, ExpansionModel):
        raise InputError(f"{path} does not hold an expansion model")
    return obj


# Plot-ready CSV exports


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def criteria_cells_csv(c: CriteriaMatrices, pareto: ParetoResult | None = None) -> str:
    """One row per upper-triangle cell, with display-normalised values."""
    rd = normalize_for_display(c.rmse, c.status)
    ld = normalize_for_display(c.linf, c.status)
    on_front = {p.config for p in pareto.front} if pareto else set()
    rows = []
    for cfg, r, l, st in c.cells():
        i, j = cfg.sensors[0], cfg.sensors[-1]
        rows.append(
            [
                i,
                j,
                cfg.kind,
                st,
                "" if math.isnan(r) else fmt(r),
                "" if math.isnan(l) else fmt(l),
                fmt(rd[i - 1, j - 1]),
                fmt(ld[i - 1, j - 1]),
                int(cfg in on_front),
            ]
        )
    header = ["i", "j", "kind", "status", "rmse_um", "linf_um", "rmse_display", "linf_display", "pareto"]
    return rows_to_csv(header, rows)
