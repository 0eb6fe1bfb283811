import numpy as np
import pytest

ACCEPTANCE_LINES: list = []


def record(criterion: int, passed: bool, text: str) -> None:
    ACCEPTANCE_LINES.append((criterion, passed, text))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, text in sorted(ACCEPTANCE_LINES, key=lambda t: t[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {text}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_kernel(rng, n, scale=2.0, zero_prob=0.0):
    a = rng.uniform(0, scale, size=(n, n))
    if zero_prob:
        a[rng.random((n, n)) < zero_prob] = 0.0
    return np.triu(a) + np.triu(a, 1).T
