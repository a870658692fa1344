import numpy as np
import pytest
from hypothesis import settings

from textcausal.drcore import ScoreRows
from textcausal.synthetic import GroupEffect, SyntheticConfig, generate

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    line = f"acceptance {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_synth():
    return generate(SyntheticConfig(n_units=1000, effect=GroupEffect(), seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_rows(y, t, g1, g0, mu, group=None, fold=None, ids=None, eps=0.01):
    n = len(y)
    ids = [f"r{i}" for i in range(n)] if ids is None else ids
    group = ["g"] * n if group is None else group
    fold = np.zeros(n, dtype=np.int64) if fold is None else fold
    return ScoreRows.build(ids, fold, y, t, group, g1, g0, mu, eps=eps)


@pytest.fixture
def random_rows(rng):
    n = 400
    t = (rng.uniform(size=n) < 0.4).astype(int)
    y = rng.uniform(size=n)
    g1 = rng.uniform(0.2, 0.8, size=n)
    g0 = rng.uniform(0.2, 0.8, size=n)
    mu = rng.uniform(0.1, 0.9, size=n)
    group = rng.choice(["a", "b", "c"], size=n)
    return make_rows(y, t, g1, g0, mu, group=list(group), fold=rng.integers(0, 4, size=n))
