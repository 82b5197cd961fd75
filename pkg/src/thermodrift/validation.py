"""Cross-validation of frozen models on held-out scenarios."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import regression
from .core import ExpansionModel, ScenarioDataset
from .errors import LeakageError


def reduction_pct(drift: float, residual: float) -> float | None:
    """Percentage by which the residual undercuts the raw drift; None if drift is 0."""
    if drift <= 0:
        return None
    return 100.0 * (1.0 - residual / drift)


@dataclass(frozen=True)
class ScenarioMetrics:
    tag: str
    n_samples: int
    max_drift_um: float
    max_residual_um: float
    mean_abs_drift_um: float
    mean_abs_residual_um: float
    reduction_max_pct: float | None
    reduction_mean_pct: float | None

    @classmethod
    def from_arrays(cls, tag: str, measured, residual) -> "ScenarioMetrics":
        drift = np.abs(np.asarray(measured, dtype=float))
        res = np.abs(np.asarray(residual, dtype=float))
        max_d, max_r = float(drift.max()), float(res.max())
        mean_d, mean_r = float(drift.mean()), float(res.mean())
        return cls(
            tag,
            int(drift.size),
            max_d,
            max_r,
            mean_d,
            mean_r,
            reduction_pct(max_d, max_r),
            reduction_pct(mean_d, mean_r),
        )


@dataclass(frozen=True)
class ValidationReport:
    config: str
    scenarios: tuple[ScenarioMetrics, ...]
    pooled: ScenarioMetrics


def check_leakage(scenarios: Iterable[ScenarioDataset], training_tags) -> None:
    """Refuse scenarios whose tag was used for training; untagged data cannot be checked."""
    seen = {t for t in training_tags if t}
    leaked = sorted({ds.tag for ds in scenarios if ds.tag in seen})
    if leaked:
        raise LeakageError(f"validation scenarios were used in training: {', '.join(leaked)}")


def cross_validate(model: ExpansionModel, scenarios, training_tags=None) -> ValidationReport:
    """Score a frozen model on held-out scenarios, per scenario and pooled.

    ``training_tags`` defaults to the tags recorded on the model.
    """
    scenarios = regression.as_dataset_list(scenarios)
    check_leakage(scenarios, model.training_tags if training_tags is None else training_tags)
    per, all_meas, all_res = [], [], []
    for ds in scenarios:
        pred = regression.predictions(model, ds)
        meas = ds.delta_q_measured[ds.valid]
        res = meas - pred[ds.valid]
        per.append(ScenarioMetrics.from_arrays(ds.tag, meas, res))
        all_meas.append(meas)
        all_res.append(res)
    pooled = ScenarioMetrics.from_arrays("pooled", np.concatenate(all_meas), np.concatenate(all_res))
    return ValidationReport(model.config.label, tuple(per), pooled)


TRACE_HEADER = ("scenario", "time_s", "q_mm", "valid", "measured_um", "predicted_um", "residual_um")


def trace_rows(model: ExpansionModel, scenarios):
    """Per-sample (measured, predicted, residual) rows for every scenario."""
    for ds in regression.as_dataset_list(scenarios):
        pred = regression.predictions(model, ds)
        res = ds.delta_q_measured - pred
        for k in range(ds.n_samples):
            yield (
                ds.tag,
                float(ds.time[k]),
                float(ds.q[k]),
                int(ds.valid[k]),
                float(ds.delta_q_measured[k]),
                float(pred[k]),
                float(res[k]),
            )
