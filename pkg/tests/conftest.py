import functools

import numpy as np
import pytest

from fairhedge import fixtures
from fairhedge.generate import random_claim, random_generator, random_tree

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion; printed at the end of the run."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])


@pytest.fixture
def tri():
    return fixtures.trinomial()


@pytest.fixture
def binom():
    return fixtures.binomial()


@functools.lru_cache(maxsize=None)
def seeded_instances(seed, count, max_horizon=3, max_assets=3):
    """(tree, eta, H) triples with node-dependent drift and a random numeraire generator."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        T = int(rng.integers(1, max_horizon + 1))
        d = int(rng.integers(1, max_assets + 1))
        tree = random_tree(rng, T, d, max_children=4)
        out.append((tree, random_generator(tree, rng), random_claim(tree, rng)))
    return tuple(out)
