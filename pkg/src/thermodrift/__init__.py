"""Thermal drift model identification and compensation for telescopic actuators."""
from .core import (
    ExpansionModel,
    FitReport,
    ScenarioDataset,
    SensorConfig,
    TimeSeries,
    Unit,
    predict_expansion,
    residual_norms,
)
from .correction import batch_correct, correct_setpoint
from .regression import build_design, evaluate, fit
from .selection import pareto_front, rank_all
from .validation import cross_validate

__version__ = "0.1.0"

__all__ = [
    "ExpansionModel",
    "FitReport",
    "ScenarioDataset",
    "SensorConfig",
    "TimeSeries",
    "Unit",
    "batch_correct",
    "build_design",
    "correct_setpoint",
    "cross_validate",
    "evaluate",
    "fit",
    "pareto_front",
    "predict_expansion",
    "rank_all",
    "residual_norms",
]
