import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from datacapsule import abe  # noqa: E402
from datacapsule.pairing import get_suite  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", help="run slow exhaustive tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def suite():
    return get_suite()


@pytest.fixture(scope="session")
def authority():
    return abe.setup(rng=random.Random(20270415))


@pytest.fixture
def rng(request):
    # stable per test, independent across tests
    return random.Random(request.node.nodeid)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)
