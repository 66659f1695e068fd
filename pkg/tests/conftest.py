import numpy as np
import pytest

from infosieve.synth import GenSpec, generate


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def single_source():
    """m=1, k=10, C=4 nats, N=500."""
    return generate(GenSpec(m=1, k=10, total_capacity=4.0, N=500, seed=7))


@pytest.fixture(scope="session")
def three_sources():
    return generate(GenSpec(m=3, k=4, total_capacity=4.0, N=2000, seed=11))


ACCEPTANCE_LINES = []


def record_acceptance(number, name, ok, detail):
    line = f"criterion {number:>2} {name}: {'PASS' if ok else 'FAIL'}  ({detail})"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
