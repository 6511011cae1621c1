import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from bplab.modelio import load_model

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

DATA = Path(os.environ.get("BPLAB_FIXTURE_DIR", Path(__file__).parent / "data"))
GROSS_FILES = {"Z": DATA / "gross_hz.dm", "X": DATA / "gross_hx.dm"}


def gross_fixture(basis):
    path = GROSS_FILES[basis]
    if not path.exists():
        pytest.skip(f"gross-code circuit-level fixture {path.name} not bundled")
    return load_model(path)


@pytest.fixture
def gross_z():
    return gross_fixture("Z")


@pytest.fixture
def gross_x():
    return gross_fixture("X")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_criteria: dict = {}


def pytest_runtest_logreport(report):
    label = dict(report.user_properties).get("criterion")
    if label is None:
        return
    if report.when == "call" or report.outcome != "passed":
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        if report.outcome == "skipped" and isinstance(report.longrepr, tuple):
            status += f" ({report.longrepr[2].removeprefix('Skipped: ')})"
        _criteria[label] = status


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    m = item.get_closest_marker("criterion")
    if m is not None:
        item.user_properties.append(("criterion", (m.args[0], m.args[1])))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (n, title), status in sorted(_criteria.items()):
        terminalreporter.write_line(f"criterion {n:>2} {status.split()[0]:<4} {title}{status[4:]}")
