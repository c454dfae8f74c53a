import numpy as np
import pytest

from pfcsav.model import PfcParams
from pfcsav.spectral import interpolate_initial, make_grid


def trig(x, y):
    return np.sin(np.pi * x / 16) * np.cos(np.pi * y / 16)


@pytest.fixture
def acc_grid():
    return make_grid(32.0, 32.0, 64)


@pytest.fixture
def acc_params():
    return PfcParams(M=1.0, beta=1.0, eps=0.025, lam=0.01, S=5.0, dt=0.2)


@pytest.fixture
def trig_field(acc_grid):
    return interpolate_initial(trig, acc_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
