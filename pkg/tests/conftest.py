import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

MNIST5K = Path(__file__).resolve().parents[1] / "data" / "mnist5k"


@pytest.fixture(scope="session")
def mnist_dir():
    return MNIST5K


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def verdict():
    """Record one PASS/FAIL line per acceptance criterion and print it immediately."""
    def record(number, title, ok, detail):
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
