import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from leoroute.config import RunConfig, load_config  # noqa: E402
from leoroute.env import build_scenario  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
FIXTURE_CONFIG = ROOT / "configs" / "fixture.yaml"

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = {}


def record_criterion(number: int, ok: bool, detail: str) -> str:
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line, flush=True)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture(scope="session")
def fixture_cfg() -> RunConfig:
    return load_config(FIXTURE_CONFIG)


@pytest.fixture(scope="session")
def fixture_scenario(fixture_cfg):
    return build_scenario(fixture_cfg)


@pytest.fixture(scope="session")
def short_cfg(fixture_cfg) -> RunConfig:
    """Fixture scenario cut to 30 slots for quick end-to-end checks."""
    return fixture_cfg.replace(**{"time.num_slots": 30})


@pytest.fixture(scope="session")
def short_scenario(short_cfg):
    return build_scenario(short_cfg)
