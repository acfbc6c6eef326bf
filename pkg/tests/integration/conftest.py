"""
Integration Test Fixtures

Experiment files for end-to-end run / verify / report workflows.
"""

import pytest

# exp(x + t) solved on [0,1] with dt = h²/4
WAVE_SOLVE = """
grid.n = 1
grid.points = 17
grid.dt = 0.0009765625
grid.t1 = 0.01
operator.kind = heat
initial.kind = exp_wave
initial.waves = 1
boundary.kind = exact
"""

# exp(x + t) sampled from the closed form
WAVE_CLOSED = WAVE_SOLVE + "initial.source = closed_form\n"

QUADRATIC = """
grid.n = 2
grid.points = 9
grid.dt = 0.125
grid.t1 = 1
operator.kind = heat
initial.kind = quadratic_drift
initial.q = 1,0;0,0
initial.b = 0.5,0
initial.source = closed_form
"""


def pytest_collection_modifyitems(items):
    for item in items:
        if "integration" in str(item.fspath):
            item.add_marker(pytest.mark.integration)


@pytest.fixture
def wave_solve(experiment):
    return experiment(WAVE_SOLVE, "wave_solve.cfg")


@pytest.fixture
def wave_closed(experiment):
    return experiment(WAVE_CLOSED, "wave_closed.cfg")


@pytest.fixture
def quadratic(experiment):
    return experiment(QUADRATIC, "quadratic.cfg")
