import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kaze.parallel import set_num_threads  # noqa: E402

ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


@pytest.fixture(autouse=True)
def _single_thread():
    set_num_threads(1)
    yield
    set_num_threads(1)


@pytest.fixture
def verdict():
    """Record one acceptance criterion's outcome, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE_RESULTS[number] = ("PASS" if ok else "FAIL", detail)
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        status, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {detail}")
