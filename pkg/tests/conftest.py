import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from relaycap import netio

DATA = Path(__file__).parent / "data"

settings.register_profile(
    "default", deadline=None, max_examples=100,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", deadline=None, max_examples=300, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def corpus(model=None, max_nodes=None):
    """Every network file in tests/data, optionally filtered."""
    out = []
    for path in sorted(DATA.glob("*.json")):
        net = netio.load_network(path)
        if model is not None and net.model != model:
            continue
        if max_nodes is not None and net.n > max_nodes:
            continue
        out.append((path.stem, net))
    return out


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def link():
    return netio.load_network(DATA / "gaussian_link.json")


@pytest.fixture
def diamond():
    return netio.load_network(DATA / "gaussian_diamond.json")


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


# acceptance verdicts, printed once at the end of the session
ACCEPTANCE: dict = {}


@pytest.fixture
def verdict():
    def record(number: int, ok: bool, detail: str):
        ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
