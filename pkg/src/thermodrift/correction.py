"""Setpoint correction with an identified expansion model."""
from __future__ import annotations

import numpy as np

from .core import DEFAULT_STROKE_MM, ExpansionModel, TimeSeries, Unit, predict_expansion
from .errors import ConfigurationError, CorrectionRangeError, InputError, NumericError

TOLERANCE_MM = 1e-6
MAX_ITERATIONS = 10
UM_PER_MM = 1000.0


def correct_setpoint(
    model: ExpansionModel,
    q_setpoint: float,
    delta_T,
    stroke: float = DEFAULT_STROKE_MM,
    tol: float = TOLERANCE_MM,
    max_iter: int = MAX_ITERATIONS,
) -> float:
    """Command that lands the expanded leg on ``q_setpoint``.

    The expansion depends on the commanded extension itself, so the command
    is the fixed point of ``q = q_setpoint - expansion(q) / 1000``, iterated
    from ``q_setpoint``.
    """
    q_setpoint = float(q_setpoint)
    if not 0.0 <= q_setpoint <= stroke:
        raise CorrectionRangeError(f"setpoint {q_setpoint} mm outside [0, {stroke}]", q_setpoint)
    q = q_setpoint
    for _ in range(max_iter):
        q_next = q_setpoint - predict_expansion(model, q, delta_T) / UM_PER_MM
        step = abs(q_next - q)
        q = q_next
        if step < tol:
            break
    else:
        raise NumericError(f"setpoint correction did not converge in {max_iter} iterations")
    if not 0.0 <= q <= stroke:
        raise CorrectionRangeError(
            f"corrected setpoint {q!r} mm outside [0, {stroke}]; keeping uncorrected {q_setpoint}",
            q_setpoint,
        )
    return q


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Causal moving average over ``window`` samples (shorter at the start)."""
    if window <= 1:
        return values
    csum = np.cumsum(values, axis=0)
    out = np.empty_like(values, dtype=float)
    out[:window] = csum[:window] / np.arange(1, window + 1).reshape((-1,) + (1,) * (values.ndim - 1))
    out[window:] = (csum[window:] - csum[:-window]) / window
    return out


def batch_correct(
    model: ExpansionModel,
    motion: TimeSeries,
    thermals,
    stroke: float = DEFAULT_STROKE_MM,
    smoothing_window: int = 0,
) -> TimeSeries:
    """Correct every sample of a setpoint trace.

    ``thermals`` is an ``(n, n_sensors)`` array or a sequence of per-sensor
    traces.  Samples whose correction would leave the stroke keep the
    uncorrected setpoint and are flagged ``valid=False`` in the output.
    """
    if isinstance(thermals, (list, tuple)) and thermals and isinstance(thermals[0], TimeSeries):
        dT = np.column_stack([t.values for t in thermals])
    else:
        dT = np.asarray(thermals, dtype=float)
    if dT.ndim == 1:
        dT = dT[:, None]
    if dT.shape[0] != len(motion):
        raise InputError("temperature traces and setpoint trace differ in length")
    if max(model.config.sensors) > dT.shape[1]:
        raise ConfigurationError("temperature traces lack a sensor the model needs")
    if motion.unit is not Unit.MILLIMETRE:
        raise InputError("setpoint trace must be in millimetres")
    dT = moving_average(dT, smoothing_window)
    out = np.empty(len(motion))
    ok = np.ones(len(motion), dtype=bool)
    for k, q_sp in enumerate(motion.values):
        try:
            out[k] = correct_setpoint(model, q_sp, dT[k], stroke)
        except CorrectionRangeError as exc:
            out[k] = exc.fallback
            ok[k] = False
    return TimeSeries(motion.t0, motion.dt, out, ok, Unit.MILLIMETRE)
