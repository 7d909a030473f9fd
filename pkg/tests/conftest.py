from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from heatgen import demo  # noqa: E402
from heatgen.config import EngineConfig  # noqa: E402
from heatgen.ingest import normalize_buildings  # noqa: E402
from heatgen.pipeline import RunSpec, prepare_stock, run_stock  # noqa: E402
from heatgen.weather import Calendar  # noqa: E402

DEMO_SEED = 42


@pytest.fixture(scope="session")
def demo_inputs(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo_inputs")
    return demo.write_demo_inputs(out)


@pytest.fixture(scope="session")
def demo_weather():
    return demo.demo_weather()


@pytest.fixture(scope="session")
def demo_calendar(demo_weather):
    return Calendar.for_weather(demo_weather)


@pytest.fixture(scope="session")
def demo_matrices():
    return demo.demo_matrices()


@pytest.fixture(scope="session")
def demo_table():
    return demo.demo_archetypes()


@pytest.fixture(scope="session")
def demo_buildings():
    town = demo.demo_town()
    norm, _ = normalize_buildings(town.buildings, town.cadaster)
    return norm


@pytest.fixture(scope="session")
def demo_stock(demo_buildings, demo_table, demo_weather):
    stock, _, failed = prepare_stock(demo_buildings, demo_table, demo_weather, EngineConfig(), DEMO_SEED)
    assert failed == 0
    return stock


@pytest.fixture(scope="session")
def demo_baseline(demo_stock, demo_weather, demo_matrices):
    """Base run of the demo stock with per-building series kept (int watts)."""
    return run_stock(RunSpec(demo_stock, demo_weather, demo_matrices, EngineConfig(), keep_heat=True))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s[7:9])):
            terminalreporter.write_line(line)
