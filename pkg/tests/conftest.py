import time

import numpy as np
import pytest

from sagdetect.experiment import ExperimentConfig, run_all

BENCH_SEEDS = tuple(range(10))

# criterion lines collected by test_acceptance, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []
# wall time of the shared benchmark, filled in by the fixture
BENCH_TIMING: dict[str, float] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def bench_config():
    return ExperimentConfig(seeds=BENCH_SEEDS, save_models=True)


@pytest.fixture(scope="session")
def bench_results(bench_config):
    """Paired clean/shortcut runs on the default synthetic family, seeds 0-9 (a few minutes)."""
    t0 = time.perf_counter()
    results = run_all(bench_config)
    BENCH_TIMING["seconds"] = time.perf_counter() - t0
    return results


def pytest_collection_modifyitems(items):
    for item in items:
        if "bench_results" in getattr(item, "fixturenames", ()):
            item.add_marker(pytest.mark.slow)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
