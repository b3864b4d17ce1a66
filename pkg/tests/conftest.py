import pytest

from bearingleak import synthetic

# One line per acceptance criterion, printed after the run.
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def uored_disk(tmp_path_factory):
    """UORED-like manifest with signals on disk (20 bearings x 3 states, 10 s each)."""
    return synthetic.build_uored_like(tmp_path_factory.mktemp("uored"), seed=0)


@pytest.fixture(scope="session")
def uored_records():
    return synthetic.build_uored_like(None)


@pytest.fixture(scope="session")
def pu_records():
    return synthetic.build_pu_like(None)


@pytest.fixture(scope="session")
def cwru_records():
    return synthetic.build_cwru_like(None)


@pytest.fixture(scope="session")
def small_uored(tmp_path_factory):
    """Short recordings for quick end-to-end checks."""
    cfg = synthetic.SignalConfig(duration_s=3.0)
    return synthetic.build_uored_like(tmp_path_factory.mktemp("uored_small"), seed=1, cfg=cfg)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
