"""Shared desk-scale datasets and the acceptance summary."""
import pytest

from fppshape import dataset as ds

DESK_SIMS = {"train": 1500, "test": 300, "pareto": 150}
DESK_SEEDS = {"train": 1, "test": 2, "pareto": 3}

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def desk_raw():
    """Raw-variant desk datasets keyed by regime (50,000 edges per simulation)."""
    out = {}
    for regime, n in DESK_SIMS.items():
        out[regime] = ds.build_dataset(n, regime, ds.DESK_BUDGET, "raw", DESK_SEEDS[regime])
    return out


@pytest.fixture(scope="session")
def desk(desk_raw):
    """Mean-transformed desk datasets keyed by regime."""
    return {k: v.to_variant("mean_transformed") for k, v in desk_raw.items()}


@pytest.fixture
def criterion():
    def record(number, name, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        _ACCEPTANCE.append((number, line))
        print(line, flush=True)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
