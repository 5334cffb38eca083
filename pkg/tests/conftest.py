import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from terrainplan.terrain import ElevationMap, flat_map  # noqa: E402


@pytest.fixture
def flat():
    return flat_map(0.0, cols=300, rows=150)


def ramp_map(grade, cols=300, rows=300, res=0.01, axis="x"):
    """Linear field h = grade * coordinate, offset so heights stay >= 0."""
    c = np.arange(cols) * res
    r = np.arange(rows) * res
    X, Y = np.meshgrid(c, r)
    h = grade * (X if axis == "x" else Y)
    h = h - h.min()
    return ElevationMap(h, res)


@pytest.fixture
def ramp():
    return ramp_map


@pytest.fixture(scope="session")
def tiny_model_dynamics():
    """A random (untrained) full-size model: non-trivial attitudes, no training cost."""
    from terrainplan.dynamics import DynamicsConfig
    from terrainplan.neuralnet import init_model

    model = init_model(11)
    for w in model.weights:
        w *= 0.5
    return DynamicsConfig(model=model)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
