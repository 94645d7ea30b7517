import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nhqrc.operators import ModelParams, ReservoirModel

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_model():
    """Four spins on a ring with transverse and longitudinal disorder."""
    return ReservoirModel.sample(ModelParams(n=4, k=2, jx=0.5, delta_x=0.3), graph_seed=1, disorder_seed=2)


@pytest.fixture(scope="session")
def full_model():
    return ReservoirModel.sample(ModelParams(), graph_seed=11, disorder_seed=12)


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_report(request):
    """Collects one line per acceptance criterion; printed in the terminal summary."""
    return request.config.stash.setdefault(ACCEPTANCE_LINES, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
