import numpy as np
import pytest
from hypothesis import settings

from pomd import make_random_mdp

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_policy(rng, H, S, A):
    return rng.dirichlet(np.ones(A), size=(H, S))


def random_kernel(rng, H, S, A):
    p = rng.dirichlet(np.ones(S), size=(H, S, A))
    return p / p.sum(axis=-1, keepdims=True)


@pytest.fixture
def small_model():
    return make_random_mdp(4, 2, 3, seed=7)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
