import time

import pytest

_LINES_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES_KEY] = []


@pytest.fixture
def criterion(request):
    """Time a block and record a PASS/FAIL line for the acceptance summary.

    Usage: ``with criterion(3, "title", limit=60) as c: ...; c.ok = cond``.
    """
    lines = request.config.stash[_LINES_KEY]

    class _Block:
        def __init__(self, number, title, limit):
            self.number, self.title, self.limit = number, title, limit
            self.ok, self.detail = False, ""

        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, exc_type, exc, tb):
            self.elapsed = time.perf_counter() - self.t0
            within = self.limit is None or self.elapsed <= self.limit
            passed = exc_type is None and self.ok and within
            budget = f"limit {self.limit:g} s" if self.limit is not None else "no stated limit"
            note = self.detail if exc_type is None else f"{exc_type.__name__}: {exc}"
            lines.append(f"criterion {self.number} {'PASS' if passed else 'FAIL'}  {self.title}  "
                         f"[{self.elapsed:.2f} s, {budget}]  {note}")
            self.passed = passed
            return False

    return _Block


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
