import json
import sys
from pathlib import Path

import numpy as np
import pytest

from thermodrift import simulator as sim
from thermodrift.core import ExpansionModel, SensorConfig

ROOT = Path(__file__).resolve().parents[1]
DESK_CONFIG = ROOT / "configs" / "desk17.json"

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def desk_doc():
    return json.loads(DESK_CONFIG.read_text())


@pytest.fixture(scope="session")
def desk_config(desk_doc):
    return sim.config_from_dict(desk_doc)


@pytest.fixture(scope="session")
def desk_datasets(desk_config):
    return sim.simulate_config(desk_config, seed=2024)


def small_plant(true_model=None, n=3, sigma=0.0, offsets=(0.0, 0.0, 0.0), ambient=0.0):
    tau = tuple(300.0 + 250.0 * k for k in range(n))
    gain = tuple(1.0 + 0.7 * k for k in range(n))
    if true_model is None:
        true_model = ExpansionModel(SensorConfig((1, 2)), ((1.2e-3, 0.8e-3), (0.6e-3, 0.4e-3)), 500.0)
    return sim.ThermalPlantSpec(
        tau, gain, true_model, ambient_amplitude=ambient, ambient_rate_cap=0.5,
        beam_sigma=sigma, beam_offsets=offsets,
    )


def short_scenario(targets=(120, 30, 200), rest=400.0, move=600.0, q_start=0.0):
    phases = [sim.Phase("rest", 120.0)]
    for t in targets:
        phases += [sim.Phase("movement", move, float(t)), sim.Phase("rest", rest)]
    return sim.ScenarioSpec(tuple(phases), q_start=q_start)


@pytest.fixture
def noiseless_dataset():
    return sim.simulate_scenario(small_plant(), short_scenario(), seed=1, tag="noiseless")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_RESULTS: dict[str, tuple[str, str]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion's outcome under the test's docstring title."""
    title = (request.function.__doc__ or request.node.name).strip().splitlines()[0]
    detail = {"text": ""}
    yield detail
    rep = getattr(request.node, "rep_call", None)
    status = "PASS" if rep is not None and rep.passed else "FAIL"
    ACCEPTANCE_RESULTS[request.node.name] = (f"{status}  {title}", detail["text"])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line, detail in ACCEPTANCE_RESULTS.values():
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
