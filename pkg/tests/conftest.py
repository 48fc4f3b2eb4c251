import numpy as np
import pytest

from crashsev.encoding import DesignEncoder, stratified_split
from crashsev.schema import DesignMatrix, crash_schema
from crashsev.synth import CRASH_EFFECTS, synth_generate


def random_design(rng, n=200, p=4, positive_share=0.3, names=None):
    """Gaussian features with labels from a random logit; both classes guaranteed."""
    X = rng.normal(size=(n, p))
    beta = rng.normal(scale=0.8, size=p)
    prob = 1.0 / (1.0 + np.exp(-(X @ beta + np.log(positive_share / (1 - positive_share)))))
    y = (rng.random(n) < prob).astype(int)
    y[0], y[1] = 0, 1
    return DesignMatrix(names or [f"x{j}" for j in range(p)], X, y)


def crash_split(seed, n=4520, rate=0.12):
    """Synthetic crash data with the planted effects, split and encoded with train-side statistics."""
    schema = crash_schema()
    data = synth_generate(schema, n, rate, CRASH_EFFECTS, seed=seed)
    split = stratified_split(data, 0.2, seed)
    enc = DesignEncoder().fit(split.train)
    return enc.transform(split.train), enc.transform(split.test)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def crash_data():
    return crash_split(seed=7)


ACCEPTANCE_LINES = []


def record_acceptance(criterion, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
