import numpy as np
import pytest

from fairshift.data import Dataset
from fairshift.synth import Disparity, default_cohort_spec, generate_synthetic


def make_dataset(n=200, m=3, seed=0, binary=()):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, m))
    theta = np.linspace(1.0, -0.5, m)
    y = (rng.random(n) < 1 / (1 + np.exp(-(X @ theta - 0.5)))).astype(int)
    z = (rng.random(n) < 0.7).astype(int)
    # guarantee every (Y, Z) cell is populated
    y[:4], z[:4] = [1, 1, 0, 0], [1, 0, 1, 0]
    names = tuple(f"x{j}" for j in range(m))
    return Dataset(X, y, z, names, binary)


@pytest.fixture
def small():
    return make_dataset()


@pytest.fixture(scope="session")
def biased_cohort():
    spec = default_cohort_spec(4000, Disparity("label_noise", 0, flip_rate=0.3), seed=7)
    return generate_synthetic(spec)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
