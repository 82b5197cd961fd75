"""Exhaustive sensor-configuration ranking and Pareto analysis."""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import regression
from .core import ExpansionModel, SensorConfig
from .errors import DegenerateDataError, EmptyFrontError, InsufficientDataError

OK = "ok"
DEGENERATE = "degenerate"
# Largest subset size evaluated: singles and pairs only.
MAX_ARITY = 2
DISPLAY_SENTINEL = -1.0


def all_configs(n: int, arity: int = MAX_ARITY) -> list[SensorConfig]:
    """Singles first, then pairs, each in lexicographic order."""
    ids = range(1, n + 1)
    return [SensorConfig(c) for r in range(1, arity + 1) for c in itertools.combinations(ids, r)]


def _cell(config: SensorConfig) -> tuple[int, int]:
    s = config.sensors
    return s[0] - 1, s[-1] - 1


@dataclass(frozen=True, eq=False)
class CriteriaMatrices:
    """Symmetric RMSE and L-infinity matrices (um); singles on the diagonal.

    Degenerate cells hold NaN and ``status == "degenerate"``.
    """

    n: int
    rmse: np.ndarray
    linf: np.ndarray
    status: np.ndarray
    n_fits: int = 0
    models: dict = field(default_factory=dict)
    reasons: dict = field(default_factory=dict)

    def ok(self, i: int, j: int) -> bool:
        return self.status[i - 1, j - 1] == OK

    def cells(self):
        """Yield ``(config, rmse, linf, status)`` for the upper triangle."""
        for i in range(self.n):
            for j in range(i, self.n):
                cfg = SensorConfig((i + 1,)) if i == j else SensorConfig((i + 1, j + 1))
                yield cfg, float(self.rmse[i, j]), float(self.linf[i, j]), str(self.status[i, j])


def rank_all(datasets, outlier_c: float = regression.DEFAULT_OUTLIER_C, workers: int = 1) -> CriteriaMatrices:
    """Fit every single sensor and every unordered pair.

    Cells are independent, so ``workers > 1`` runs fits on a thread pool;
    results are placed by configuration index, never by completion order.
    """
    datasets = regression.as_dataset_list(datasets)
    n = datasets[0].n_sensors
    if any(ds.n_sensors != n for ds in datasets):
        raise InsufficientDataError("datasets have different sensor counts")
    configs = all_configs(n)

    def run(cfg):
        try:
            model, report = regression.fit(datasets, cfg, outlier_c)
            return model, report, None
        except (DegenerateDataError, InsufficientDataError) as exc:
            return None, None, str(exc)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, configs))
    else:
        results = [run(cfg) for cfg in configs]

    rmse = np.full((n, n), np.nan)
    linf = np.full((n, n), np.nan)
    status = np.full((n, n), DEGENERATE, dtype="<U10")
    models: dict[SensorConfig, ExpansionModel] = {}
    reasons: dict[SensorConfig, str] = {}
    for cfg, (model, report, err) in zip(configs, results):
        i, j = _cell(cfg)
        if err is not None:
            reasons[cfg] = err
            continue
        models[cfg] = model
        for a, b in ((i, j), (j, i)):
            rmse[a, b] = report.rmse
            linf[a, b] = report.linf
            status[a, b] = OK
    return CriteriaMatrices(n, rmse, linf, status, len(configs), models, reasons)


def nondominated(points: Sequence[tuple[float, float]]) -> list[int]:
    """Indices of points not dominated under minimisation of both coordinates.

    Points equal on both coordinates do not dominate each other, so ties are
    all kept.  Runs in O(m log m) by sweeping groups of equal first
    coordinate.
    """
    order = sorted(range(len(points)), key=lambda k: (points[k][0], points[k][1]))
    keep = []
    best_prev = np.inf
    g = 0
    while g < len(order):
        h = g
        x = points[order[g]][0]
        while h < len(order) and points[order[h]][0] == x:
            h += 1
        group_min = points[order[g]][1]
        if group_min < best_prev:
            keep.extend(k for k in order[g:h] if points[k][1] == group_min)
        best_prev = min(best_prev, group_min)
        g = h
    return sorted(keep)


@dataclass(frozen=True)
class ParetoPoint:
    config: SensorConfig
    rmse: float
    linf: float


@dataclass(frozen=True)
class ParetoResult:
    front: tuple[ParetoPoint, ...]
    dominated_count: int
    best_single: ParetoPoint | None = None


def candidates(matrices: CriteriaMatrices) -> list[ParetoPoint]:
    return [ParetoPoint(cfg, r, l) for cfg, r, l, st in matrices.cells() if st == OK]


def pareto_front(matrices: CriteriaMatrices) -> ParetoResult:
    """Nondominated configurations over (rmse, linf), sorted by rmse."""
    cands = candidates(matrices)
    if not cands:
        raise EmptyFrontError("every configuration is degenerate; no Pareto front")
    idx = nondominated([(c.rmse, c.linf) for c in cands])
    front = sorted((cands[k] for k in idx), key=lambda p: (p.rmse, p.linf, p.config.sensors))
    singles = [c for c in cands if c.config.kind == "single"]
    best = min(singles, key=lambda p: (p.rmse, p.linf, p.config.sensors)) if singles else None
    return ParetoResult(tuple(front), len(cands) - len(front), best)


def normalize_for_display(matrix, status=None, sentinel: float = DISPLAY_SENTINEL) -> np.ndarray:
    """Min-max scale the usable cells of one matrix to [0, 1].

    Cells whose status is not ok (or that are not finite when no status is
    given) become ``sentinel``.  A constant matrix maps to zeros.
    """
    m = np.asarray(matrix, dtype=float)
    usable = np.isfinite(m) if status is None else (np.asarray(status) == OK) & np.isfinite(m)
    out = np.full(m.shape, sentinel)
    if not usable.any():
        return out
    lo, hi = m[usable].min(), m[usable].max()
    out[usable] = 0.0 if hi == lo else (m[usable] - lo) / (hi - lo)
    return out
