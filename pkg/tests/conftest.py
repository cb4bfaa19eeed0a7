import time
from contextlib import contextmanager

import pytest

_LINES = pytest.StashKey[list]()


class _Criterion:
    def __init__(self):
        self.checks = []

    def check(self, ok, detail):
        self.checks.append((bool(ok), detail))


@pytest.fixture
def criterion(request):
    """Context manager that times one acceptance criterion and records a PASS/FAIL line."""
    lines = request.config.stash.setdefault(_LINES, [])

    @contextmanager
    def run(number, title, limit_s):
        c = _Criterion()
        t0 = time.perf_counter()
        error = None
        try:
            yield c
        except Exception as exc:  # recorded, then re-raised
            error = exc
        elapsed = time.perf_counter() - t0
        c.check(elapsed < limit_s, f"runtime {elapsed:.2f}s < {limit_s:g}s")
        if error is not None:
            c.check(False, f"{type(error).__name__}: {error}")
        ok = all(flag for flag, _ in c.checks)
        detail = "; ".join(("" if flag else "FAILED ") + d for flag, d in c.checks)
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        lines.append(line)
        print(line)
        if error is not None:
            raise error
        assert ok, line

    return run


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
