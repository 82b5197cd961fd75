import numpy as np
import pytest

from thermodrift import regression
from thermodrift.core import ExpansionModel, ScenarioDataset, SensorConfig
from thermodrift.errors import LeakageError
from thermodrift.validation import ScenarioMetrics, cross_validate, reduction_pct, trace_rows


def test_reported_drift_reductions():
    # maximum drift 7.81 um against residual 1.28 um
    assert reduction_pct(7.81, 1.28) == pytest.approx(83.61, abs=0.01)
    # mean drift 2.50 um against residual 0.28 um: exact ratio, not the rounded 85 %
    assert reduction_pct(2.50, 0.28) == pytest.approx(88.8, abs=1e-9)


def test_zero_drift_is_undefined():
    assert reduction_pct(0.0, 0.0) is None
    m = ScenarioMetrics.from_arrays("flat", np.zeros(5), np.zeros(5))
    assert m.reduction_max_pct is None and m.reduction_mean_pct is None


def test_metrics_definitions():
    m = ScenarioMetrics.from_arrays("s", [0.0, -4.0, 2.0, 2.0], [0.0, 1.0, -0.5, 0.5])
    assert m.max_drift_um == 4.0 and m.max_residual_um == 1.0
    assert m.mean_abs_drift_um == 2.0 and m.mean_abs_residual_um == 0.5
    assert m.reduction_max_pct == 75.0 and m.reduction_mean_pct == 75.0


def test_truth_on_own_noiseless_data(noiseless_dataset):
    true = ExpansionModel(SensorConfig.pair(1, 2), ((1.2e-3, 0.8e-3), (0.6e-3, 0.4e-3)), 500.0)
    rep = cross_validate(true, noiseless_dataset, training_tags=())
    assert rep.pooled.max_residual_um < 1e-9
    assert rep.pooled.reduction_max_pct == pytest.approx(100.0, abs=1e-6)
    assert rep.pooled.reduction_mean_pct == pytest.approx(100.0, abs=1e-6)


def test_leakage_refused(noiseless_dataset):
    model, _ = regression.fit(noiseless_dataset, SensorConfig.single(1))
    with pytest.raises(LeakageError):
        cross_validate(model, noiseless_dataset)
    rep = cross_validate(model, noiseless_dataset.replace(tag="held-out"))
    assert rep.scenarios[0].tag == "held-out"


def test_frozen_and_repeatable(noiseless_dataset):
    model, _ = regression.fit(noiseless_dataset, SensorConfig.single(1))
    before = model.vector.copy()
    other = noiseless_dataset.replace(tag="b")
    a = cross_validate(model, [other])
    b = cross_validate(model, [other])
    assert a == b
    assert np.array_equal(model.vector, before)


def test_pooled_spans_scenarios(noiseless_dataset):
    model, _ = regression.fit(noiseless_dataset, SensorConfig.single(3))
    s1 = noiseless_dataset.replace(tag="a")
    s2 = noiseless_dataset.replace(tag="b", delta_q_measured=noiseless_dataset.delta_q_measured * 2)
    rep = cross_validate(model, [s1, s2])
    assert rep.pooled.n_samples == rep.scenarios[0].n_samples + rep.scenarios[1].n_samples
    assert rep.pooled.max_drift_um == max(s.max_drift_um for s in rep.scenarios)


def test_invalid_samples_excluded():
    n = 6
    ds = ScenarioDataset(
        time=np.arange(n, dtype=float),
        q=np.full(n, 100.0),
        delta_T=np.array([[0.0], [1.0], [1.0], [1.0], [1.0], [1.0]]),
        delta_q_measured=np.array([0.0, 1.2, 50.0, 1.2, 1.2, 1.2]),
        valid=np.array([True, True, False, True, True, True]),
        tag="v",
    )
    model = ExpansionModel(SensorConfig.single(1), ((2e-3, 2e-3),), 500.0)
    rep = cross_validate(model, ds)
    assert rep.pooled.max_drift_um == 1.2
    rows = list(trace_rows(model, ds))
    assert len(rows) == n and rows[2][3] == 0
    assert rows[1][5] == pytest.approx(1.2) and rows[1][6] == pytest.approx(0.0, abs=1e-12)
