import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rbfmol.geometry import random_surface_points, sample_quasi_uniform, sphere  # noqa: E402


@pytest.fixture(scope="session")
def unit_sphere():
    return sphere()


@pytest.fixture(scope="session")
def sphere_658(unit_sphere):
    return sample_quasi_uniform(unit_sphere, 658, seed=0, compute_stats=False)


@pytest.fixture(scope="session")
def sphere_987(unit_sphere):
    return sample_quasi_uniform(unit_sphere, 987, seed=1, compute_stats=False)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture(scope="session")
def sphere_eval(unit_sphere):
    return random_surface_points(unit_sphere, 5000, np.random.default_rng(1000))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
