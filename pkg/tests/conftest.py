import contextlib
import time

import pytest

_CRITERIA = []


@pytest.fixture
def criterion():
    """Context manager recording one acceptance criterion's outcome and runtime."""

    @contextlib.contextmanager
    def check(number, title, limit_s):
        start = time.perf_counter()
        ok = False
        try:
            yield
            elapsed = time.perf_counter() - start
            assert elapsed < limit_s, f"took {elapsed:.1f} s, limit {limit_s} s"
            ok = True
        finally:
            elapsed = time.perf_counter() - start
            _CRITERIA.append((number, title, ok, elapsed))
            print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {title} ({elapsed:.2f} s)")

    return check


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, elapsed in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}  [{elapsed:.2f} s]")
