from __future__ import annotations

import functools
from importlib import resources
from pathlib import Path

import pytest

from feederopt.feeder_io import load_feeder
from feederopt.opf import solve_scheduling

DATA = Path(str(resources.files("feederopt") / "data"))
SMOKE = "feeder_smoke_4bus"
IEEE13 = "feeder_unbalanced_13"
HIGHLOAD = "feeder_unbalanced_13_highload"
HIGHPV = "feeder_unbalanced_13_highpv"
BUNDLED = (SMOKE, IEEE13, HIGHLOAD, HIGHPV)


def feeder_path(name: str) -> Path:
    return DATA / f"{name}.feeder.json"


@functools.lru_cache(maxsize=None)
def bundled(name: str):
    return load_feeder(feeder_path(name))


@functools.lru_cache(maxsize=None)
def solved(name: str, mode: str, segments: int = 12):
    """Scheduling result, shared across tests (treat as read-only)."""
    from feederopt.opf import ScheduleConfig

    return solve_scheduling(bundled(name), mode, ScheduleConfig(segments=segments))


@pytest.fixture
def smoke():
    return bundled(SMOKE)


@pytest.fixture
def ieee13():
    return bundled(IEEE13)


# -- acceptance verdicts, echoed after the run --------------------------
VERDICTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[n])
