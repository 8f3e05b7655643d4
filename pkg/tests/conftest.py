import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from signed_rigidity.framework import Framework, make_graph

settings.register_profile(
    "repo", max_examples=40, deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

# Four agents with three distances and two signed angles (rank 5 when edge (1,4) is kept).
ARC_POSITIONS = np.array([[0.0, 3.0], [-2.0, 0.0], [2.0, 0.0], [4.0, 3.0]])

# Five planar agents: |z12|^2 = |z15|^2 = 9, |z13|^2 = |z14|^2 = 25, right angles at 2, 1 and 5.
STAR_POSITIONS = np.array([[0.0, 0.0], [1.8, -2.4], [5.0, 0.0], [0.0, 5.0], [-2.4, 1.8]])
STAR_EDGES = [(0, 1), (0, 4), (0, 2), (0, 3)]
STAR_SIGNED = [(1, 2, 0), (0, 2, 3), (4, 0, 3)]
STAR_BASELINE_EDGES = STAR_EDGES + [(1, 2), (3, 4), (2, 3)]

_S3 = math.sqrt(3.0)
_C = np.array([1.5, _S3 / 2, 0.0])
# Triangular bipyramid with unit-3 edges; apexes 1 (up) and 5 (down).
BIPYRAMID_POSITIONS = np.array([
    _C + [0, 0, math.sqrt(6.0)], [0, 0, 0], [3, 0, 0], [1.5, 3 * _S3 / 2, 0], _C - [0, 0, math.sqrt(6.0)],
])
BIPYRAMID_EDGES = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (1, 4), (2, 4), (3, 4)]
BIPYRAMID_SIGNED = [(1, 0, 2, 3), (1, 4, 2, 3)]


@pytest.fixture
def arc_framework():
    g = make_graph(4, edges=[(0, 1), (1, 2), (0, 3)], signed_angles=[(0, 1, 2), (3, 0, 2)])
    return Framework(g, 2, ARC_POSITIONS)


@pytest.fixture
def arc_framework_loose():
    g = make_graph(4, edges=[(0, 1), (1, 2)], signed_angles=[(0, 1, 2), (3, 0, 2)])
    return Framework(g, 2, ARC_POSITIONS)


@pytest.fixture
def star_framework():
    return Framework(make_graph(5, edges=STAR_EDGES, signed_angles=STAR_SIGNED), 2, STAR_POSITIONS)


@pytest.fixture
def bipyramid_framework():
    g = make_graph(5, edges=BIPYRAMID_EDGES, signed_volumes=BIPYRAMID_SIGNED)
    return Framework(g, 3, BIPYRAMID_POSITIONS)


_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


class _Criterion:
    def __init__(self, label):
        self.label = label
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        reason = str(exc).splitlines()[0][:100] if exc is not None and str(exc) else ""
        detail = self.detail if ok else f"{self.detail} [{exc_type.__name__}: {reason}]"
        _ACCEPTANCE[self.label] = (ok, " ".join(detail.split()))
        return False


@pytest.fixture
def criterion():
    """``with criterion("3 ..") as c:`` records PASS/FAIL (and ``c.detail``) for the summary."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE, key=lambda s: (int(s.split()[0].rstrip("ab")), s)):
        ok, detail = _ACCEPTANCE[label]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
