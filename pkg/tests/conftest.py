import numpy as np
import pytest

from tokenbalance.topology import TopologyKind, TopologySpec, build_schedule

ACCEPTANCE_LINES: list[str] = []


def dense_matching(n, pairs):
    m = np.eye(n)
    for a, b in pairs:
        m[a, a] = m[b, b] = m[a, b] = m[b, a] = 0.5
    return m


def dense_round_matrix(schedule):
    """Round matrix by explicit dense products of the matching matrices."""
    m = np.eye(schedule.n)
    for pairs in schedule.matchings:
        m = m @ dense_matching(schedule.n, pairs)
    return m


def sched(kind, n, **kw):
    return build_schedule(TopologySpec(TopologyKind(kind), n, **kw))


@pytest.fixture
def acceptance_log():
    def record(criterion: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
