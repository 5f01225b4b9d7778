import numpy as np
import pytest
from hypothesis import settings

from diffgrn.genome import Genome

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_genome(n_in=2, n_out=1, n_reg=3, seed=0, **kw):
    g = Genome.random(n_in, n_out, n_reg, np.random.default_rng(seed))
    return g.replace(**kw) if kw else g


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
