import numpy as np
import pytest

from skewlab.recurrence_builder import BuilderConfig, RecurrentSequence

RESULTS: list[str] = []


def report(criterion: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    RESULTS.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def default_config():
    return BuilderConfig(seed=42)


@pytest.fixture(scope="session")
def sequence(default_config):
    """Generators for seed 42 with the length-8 relation check, extended to 500 letters."""
    return RecurrentSequence.build(default_config).extend(500)


@pytest.fixture(scope="session")
def quick_sequence():
    """Same construction without the relation check; shares generators when no retry occurs."""
    return RecurrentSequence.build(BuilderConfig(seed=42, relation_length=0)).extend(200)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
