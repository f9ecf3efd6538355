import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE: list[tuple[int, str, bool, str]] = []


class _Outcome:
    detail = ""


@contextmanager
def record_criterion(number: int, title: str):
    """Record a pass/fail line for an acceptance criterion and echo it immediately."""
    out = _Outcome()
    try:
        yield out
    except BaseException as exc:
        msg = str(exc).strip().splitlines()[0][:160] if str(exc).strip() else type(exc).__name__
        ACCEPTANCE.append((number, title, False, msg))
        print(f"\nACCEPTANCE {number:>2} FAIL  {title}: {msg}")
        raise
    else:
        ACCEPTANCE.append((number, title, True, out.detail))
        print(f"\nACCEPTANCE {number:>2} PASS  {title}: {out.detail}")


@pytest.fixture
def criterion():
    return record_criterion


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number:>2}: {title} ({detail})")
