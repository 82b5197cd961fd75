"""Least-squares identification of expansion-model coefficients."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import ExpansionModel, FitReport, ScenarioDataset, SensorConfig, predict_expansion
from .errors import ConfigurationError, DegenerateDataError, InsufficientDataError

COND_LIMIT = 1e12
DEFAULT_OUTLIER_C = 5.0
# Consistency constant turning a MAD into a Gaussian standard deviation.
MAD_TO_SIGMA = 1.4826


def as_dataset_list(datasets) -> list[ScenarioDataset]:
    if isinstance(datasets, ScenarioDataset):
        return [datasets]
    out = list(datasets)
    if not out:
        raise InsufficientDataError("no dataset supplied")
    return out


def common_q0(datasets: Sequence[ScenarioDataset]) -> float:
    q0s = {d.q0 for d in datasets}
    if len(q0s) != 1:
        raise ConfigurationError(f"datasets disagree on q0: {sorted(q0s)}")
    return q0s.pop()


def column_names(config: SensorConfig) -> list[str]:
    return [name for s in config.sensors for name in (f"q0*dT{s:02d}", f"q*dT{s:02d}")]


def build_design(datasets, config: SensorConfig) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix and response over the valid samples of one or more datasets.

    Columns are ``[q0*dT_i, q*dT_i, q0*dT_j, q*dT_j]`` (the last two only for
    pairs); the response is the measured expansion in um.  Several datasets
    are stacked row-wise into one design.
    """
    datasets = as_dataset_list(datasets)
    blocks, ys = [], []
    for ds in datasets:
        m = ds.valid
        q = ds.q[m]
        cols = []
        for s in config.sensors:
            dT = ds.sensor_column(s)[m]
            cols.append(ds.q0 * dT)
            cols.append(q * dT)
        blocks.append(np.column_stack(cols))
        ys.append(ds.delta_q_measured[m])
    X = np.vstack(blocks)
    y = np.concatenate(ys)
    k = X.shape[1]
    if X.shape[0] < k:
        raise InsufficientDataError(
            f"{X.shape[0]} valid samples for {k} coefficients (config {config.label})"
        )
    return X, y


def _check_rank(X: np.ndarray, config: SensorConfig, cond_limit: float):
    names = column_names(config)
    for idx, s in enumerate(config.sensors):
        if not np.any(X[:, 2 * idx : 2 * idx + 2]):
            raise DegenerateDataError(
                f"sensor {s} never departs from its reference temperature",
                names[2 * idx : 2 * idx + 2],
            )
    _, sv, vt = np.linalg.svd(X, full_matrices=False)
    cond = np.inf if sv[-1] == 0 else sv[0] / sv[-1]
    if cond > cond_limit:
        null = np.abs(vt[-1])
        involved = [n for n, w in zip(names, null) if w > 1e-3 * null.max()]
        raise DegenerateDataError(
            f"design is rank deficient (condition number {cond:.3g}); "
            f"collinear columns: {', '.join(involved)}",
            involved,
        )


def solve_least_squares(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimise ||y - X c||_2 through a thin Householder QR factorisation."""
    Q, R = np.linalg.qr(X, mode="reduced")
    rhs = Q.T @ y
    k = R.shape[1]
    c = np.zeros(k)
    for i in range(k - 1, -1, -1):
        c[i] = (rhs[i] - R[i, i + 1 :] @ c[i + 1 :]) / R[i, i]
    return c


def robust_sigma(residuals: np.ndarray) -> float:
    med = np.median(residuals)
    return MAD_TO_SIGMA * float(np.median(np.abs(residuals - med)))


def fit(
    datasets,
    config: SensorConfig,
    outlier_c: float = DEFAULT_OUTLIER_C,
    cond_limit: float = COND_LIMIT,
) -> tuple[ExpansionModel, FitReport]:
    """Identify the model coefficients for ``config``.

    One outlier pass is made when ``outlier_c > 0``: samples whose residual
    magnitude exceeds ``outlier_c`` robust standard deviations (from the
    median absolute deviation) are dropped and the model is refit once.  A
    zero MAD disables the pass, since every non-zero residual would
    otherwise count as an outlier.
    """
    datasets = as_dataset_list(datasets)
    q0 = common_q0(datasets)
    X, y = build_design(datasets, config)
    _check_rank(X, config, cond_limit)
    coef = solve_least_squares(X, y)
    resid = y - X @ coef
    removed = 0

    if outlier_c > 0:
        sigma = robust_sigma(resid)
        if sigma > 0:
            keep = np.abs(resid) <= outlier_c * sigma
            removed = int(keep.size - np.count_nonzero(keep))
            if removed:
                X, y = X[keep], y[keep]
                if X.shape[0] < X.shape[1]:
                    raise InsufficientDataError(
                        f"only {X.shape[0]} samples left after outlier removal"
                    )
                _check_rank(X, config, cond_limit)
                coef = solve_least_squares(X, y)
                resid = y - X @ coef

    tags = tuple(ds.tag for ds in datasets)
    model = ExpansionModel.from_vector(config, coef, q0, tags)
    return model, FitReport.from_residuals(resid, removed)


def predictions(model: ExpansionModel, dataset: ScenarioDataset) -> np.ndarray:
    """Model prediction (um) at every sample of ``dataset``, valid or not."""
    if dataset.q0 != model.q0:
        raise ConfigurationError(
            f"model was identified with q0={model.q0} mm but dataset has q0={dataset.q0} mm"
        )
    return np.asarray(predict_expansion(model, dataset.q, dataset.delta_T), dtype=float)


def evaluate(model: ExpansionModel, datasets) -> FitReport:
    """Residuals of a frozen model on the valid samples; nothing is refit."""
    res = []
    for ds in as_dataset_list(datasets):
        pred = predictions(model, ds)
        res.append((ds.delta_q_measured - pred)[ds.valid])
    return FitReport.from_residuals(np.concatenate(res))

