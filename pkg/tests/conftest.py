import numpy as np
import pytest

from powercal import synthgen
from powercal.core import align, stack_pairs


def lead_data(cfg, lead):
    panel, obs, meta = synthgen.generate(cfg)
    X, y = stack_pairs(align(panel, obs, lead))
    return X, y, meta


@pytest.fixture(scope="session")
def biased_deflated():
    """3,000 dates at lead 10: bias -5 MW, dispersion deflation 0.5."""
    cfg = synthgen.ScenarioConfig(n_dates=3000, leads=(10,), bias=-5.0, deflation=0.5, seed=7)
    return lead_data(cfg, 10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
