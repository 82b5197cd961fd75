import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import normal_equations_solve
from thermodrift import regression
from thermodrift.core import ExpansionModel, ScenarioDataset, SensorConfig
from thermodrift.errors import DegenerateDataError, InsufficientDataError


def _ds(q, dT, dq, valid=None, q0=500.0, tag=""):
    n = len(q)
    return ScenarioDataset(
        time=np.arange(n, dtype=float),
        q=q,
        delta_T=dT,
        delta_q_measured=dq,
        valid=np.ones(n, bool) if valid is None else valid,
        q0=q0,
        tag=tag,
    )


def test_design_single_row_by_hand():
    ds = _ds([50.0, 100.0], [[0.0, 0.0], [2.0, 9.0]], [0.0, 1.0])
    X, y = regression.build_design(ds, SensorConfig.single(1))
    assert X.shape == (2, 2)
    assert X[1].tolist() == [1000.0, 200.0]
    assert y.tolist() == [0.0, 1.0]


def test_design_uses_only_requested_sensor_and_valid_rows():
    ds = _ds(
        [10.0, 20.0, 30.0, 40.0, 50.0],
        [[0, 0], [1, 5], [2, 6], [3, 7], [4, 1]],
        [0.0, 1.0, 2.0, 3.0, 4.0],
        valid=[True, True, False, True, True],
    )
    X, y = regression.build_design(ds, SensorConfig.single(2))
    assert X.tolist() == [[0, 0], [2500, 100], [3500, 280], [500, 50]]
    assert y.tolist() == [0.0, 1.0, 3.0, 4.0]
    Xp, _ = regression.build_design(ds, SensorConfig.pair(2, 1))
    assert Xp.tolist() == [[0, 0, 0, 0], [500, 20, 2500, 100], [1500, 120, 3500, 280], [2000, 200, 500, 50]]


def test_design_all_zero_temperatures_flagged_degenerate():
    ds = _ds([0.0, 5.0, 9.0], np.zeros((3, 1)), [0.0, 0.0, 0.0])
    X, _ = regression.build_design(ds, SensorConfig.single(1))
    assert not X.any()
    with pytest.raises(DegenerateDataError) as err:
        regression.fit(ds, SensorConfig.single(1))
    assert "q0*dT01" in err.value.columns


def test_insufficient_rows():
    ds = _ds([0.0, 5.0, 9.0], [[0, 0], [1, 2], [2, 1]], [0.0, 1.0, 2.0], valid=[True, True, False])
    with pytest.raises(InsufficientDataError):
        regression.build_design(ds, SensorConfig.pair(1, 2))


def test_constant_rod_position_is_rank_deficient():
    n = 20
    dT = np.linspace(0, 2, n)[:, None]
    ds = _ds(np.full(n, 80.0), dT, 1.5 * dT[:, 0])
    with pytest.raises(DegenerateDataError) as err:
        regression.fit(ds, SensorConfig.single(1))
    assert set(err.value.columns) == {"q0*dT01", "q*dT01"}


def test_noiseless_recovery(noiseless_dataset):
    model, report = regression.fit(noiseless_dataset, SensorConfig.pair(1, 2))
    truth = np.array([1.2e-3, 0.8e-3, 0.6e-3, 0.4e-3])
    assert np.max(np.abs(model.vector - truth) / truth) < 1e-9
    assert report.rmse < 1e-9


def test_zero_expansion_gives_zero_coefficients(noiseless_dataset):
    ds = noiseless_dataset.replace(delta_q_measured=np.zeros(noiseless_dataset.n_samples))
    model, report = regression.fit(ds, SensorConfig.pair(1, 3))
    assert np.all(model.vector == 0.0)
    assert report.rmse == 0.0 and report.linf == 0.0


def test_pair_order_irrelevant(noiseless_dataset):
    m1, r1 = regression.fit(noiseless_dataset, SensorConfig.pair(1, 3))
    m2, r2 = regression.fit(noiseless_dataset, SensorConfig.pair(3, 1))
    assert m1 == m2 and r1 == r2


def test_temperature_scaling_divides_coefficients(noiseless_dataset):
    cfg = SensorConfig.pair(2, 3)
    m1, _ = regression.fit(noiseless_dataset, cfg)
    lam = 4.0
    scaled = noiseless_dataset.replace(delta_T=noiseless_dataset.delta_T * lam)
    m2, _ = regression.fit(scaled, cfg)
    assert m2.vector == pytest.approx(m1.vector / lam, rel=1e-9)
    p1 = regression.predictions(m1, noiseless_dataset)
    p2 = regression.predictions(m2, scaled)
    assert np.max(np.abs(p1 - p2)) < 1e-12


def test_outlier_pass_removes_spikes(noiseless_dataset, rng):
    ds = noiseless_dataset
    k0 = ds.valid.nonzero()[0][0]
    dq = ds.delta_q_measured + rng.normal(0, 0.05, ds.n_samples)
    spikes = ds.valid.nonzero()[0][[50, 400, 900]]
    dq[spikes] += 8.0
    noisy = ds.replace(delta_q_measured=dq - dq[k0])
    model, report = regression.fit(noisy, SensorConfig.pair(1, 2), outlier_c=5.0)
    assert report.n_outliers_removed >= 3
    assert report.linf < 1.0
    _, kept_all = regression.fit(noisy, SensorConfig.pair(1, 2), outlier_c=0)
    assert kept_all.n_outliers_removed == 0
    assert kept_all.linf > 7.0
    assert report.n_samples == kept_all.n_samples - report.n_outliers_removed


def test_evaluate_matches_fit_residuals_without_outliers(noiseless_dataset):
    model, rep = regression.fit(noiseless_dataset, SensorConfig.single(2), outlier_c=0)
    ev = regression.evaluate(model, noiseless_dataset)
    assert ev.n_samples == rep.n_samples
    assert np.allclose(ev.residuals, rep.residuals, atol=1e-12)


def test_concatenated_datasets(noiseless_dataset):
    other = noiseless_dataset.replace(tag="copy")
    model, rep = regression.fit([noiseless_dataset, other], SensorConfig.pair(1, 2))
    assert model.training_tags == ("noiseless", "copy")
    assert rep.n_samples == 2 * np.count_nonzero(noiseless_dataset.valid) - rep.n_outliers_removed


def _random_design(rng, p, k):
    while True:
        X = rng.uniform(-2.0, 2.0, size=(p, k)) * rng.uniform(0.5, 200.0, size=k)
        if np.linalg.cond(X) < 1e6:
            return X


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(0, 46))
def test_solver_matches_elimination_oracle(seed, k, extra):
    rng = np.random.default_rng(seed)
    p = k + extra
    X = _random_design(rng, p, k)
    y = rng.normal(size=p) * 3.0
    got = regression.solve_least_squares(X, y)
    ref = np.array(normal_equations_solve(X, y))
    assert np.max(np.abs(got - ref)) <= 1e-8 * max(np.max(np.abs(ref)), 1e-300)
    r = y - X @ got
    assert np.max(np.abs(X.T @ r)) <= 1e-6 * np.linalg.norm(y)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_least_squares_optimality(seed):
    rng = np.random.default_rng(seed)
    n = 60
    q = np.concatenate([[0.0], rng.uniform(0, 250, n - 1)])
    dT = np.vstack([np.zeros(2), rng.normal(0, 1.5, (n - 1, 2))])
    dq = np.concatenate([[0.0], rng.normal(0, 2.0, n - 1)])
    ds = _ds(q, dT, dq)
    cfg = SensorConfig.pair(1, 2)
    model, _ = regression.fit(ds, cfg, outlier_c=0)
    best = regression.evaluate(model, ds).rmse
    for _ in range(5):
        other = ExpansionModel.from_vector(cfg, model.vector + rng.normal(0, 1e-4, 4), 500.0)
        assert best <= regression.evaluate(other, ds).rmse
