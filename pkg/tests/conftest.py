import numpy as np
import pytest

from lurlab.core import LabeledBatch, init_params


def jittered_model(dims, seed, scale=0.3, activation="tanh"):
    """Seeded model with non-zero biases so every parameter is exercised."""
    model = init_params(dims, activation, seed)
    rng = np.random.default_rng(1000 + seed)
    return model.with_params(model.params.with_data(
        model.params.data + scale * rng.standard_normal(len(model.params))))


def random_batch(n, d, classes, seed):
    rng = np.random.default_rng(seed)
    return LabeledBatch(rng.standard_normal((n, d)), rng.integers(0, classes, n))


@pytest.fixture
def small_net():
    return jittered_model((2, 4, 2), seed=3)


@pytest.fixture
def batches():
    return random_batch(12, 2, 2, seed=11), random_batch(6, 2, 2, seed=12)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
