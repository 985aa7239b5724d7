import numpy as np
import pytest

from random_anc.keygen import generate_pool
from random_anc.networks import AncModel


def hand_built_model(n_bits: int = 8, n_proj: int = 4, weight: float = 3.0) -> AncModel:
    """A trio with every weight set to ``weight`` and zero biases.

    Each bit then behaves as sign(x * k): Alice emits XNOR of message and key
    bits and Bob undoes it, so this model is exactly correct without training.
    """
    model = AncModel.initialize(n_bits, n_proj, seed=0)
    for p in model.parameters():
        is_bias = p.name.split(".")[-1].startswith(("b", "B"))
        p.values[...] = 0.0 if is_bias else weight
    model.converged = True
    return model


@pytest.fixture(scope="session")
def pool():
    return generate_pool(8, 5)


@pytest.fixture
def xnor_model():
    return hand_built_model()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Acceptance lines are collected here and printed once at the end of the run,
# so they show up even when pytest captures per-test output.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].lstrip("C"))):
            terminalreporter.write_line(line)
