import contextlib
import time

CRITERIA = []


@contextlib.contextmanager
def criterion(number, label, budget_s):
    """Record one PASS/FAIL line per acceptance criterion; runtime counts against the budget."""
    t0 = time.perf_counter()
    detail = {}
    try:
        yield detail
        elapsed = time.perf_counter() - t0
        ok = elapsed < budget_s
        msg = ", ".join(f"{k}={v}" for k, v in detail.items())
        CRITERIA.append((number, "PASS" if ok else "FAIL", f"{label} [{elapsed:.1f}s < {budget_s}s] {msg}"))
        assert ok, f"criterion {number} took {elapsed:.1f}s (budget {budget_s}s)"
    except AssertionError as exc:
        if not CRITERIA or CRITERIA[-1][0] != number:
            CRITERIA.append((number, "FAIL", f"{label}: {exc}"))
        raise
    except Exception as exc:
        CRITERIA.append((number, "FAIL", f"{label}: {type(exc).__name__}: {exc}"))
        raise


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, text in sorted(CRITERIA):
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {text}")
