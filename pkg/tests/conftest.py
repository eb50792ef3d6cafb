import numpy as np
import pytest

from exoportrait.dynamics import PlantModel
from exoportrait.gait import NominalGait
from exoportrait.scenarios import leader
from exoportrait.sim.trial import TrialConfig, run_trial


@pytest.fixture(scope="session")
def model():
    return PlantModel()


@pytest.fixture(scope="session")
def gait():
    return NominalGait.default()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def short_trials():
    """One 12 s block per controller plus natural walking, shared by io and cli tests."""
    out = {}
    for c in ("TBC", "HTC", "AMTC", "NONE"):
        cfg = TrialConfig(controller=c, schedule=((0.6, 12.0),), policy=leader(), seed=3,
                          subject="S1")
        out[c] = run_trial(cfg)
    return out


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
