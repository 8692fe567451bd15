"""Small hand-built problems and maps shared across the test modules."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from foliated_repmap.atlas import BaseRoadmap, GaussianComponent
from foliated_repmap.environment import Box, Environment
from foliated_repmap.foliation import (CoParameter, ConstraintFamily, Foliation,
                                       IntersectionWitness, LeafId)
from foliated_repmap.problem import Problem
from foliated_repmap.repmap import FoliatedRepMap


def components_on_line(xs, y=5.0, var=1.0, dim=2):
    """Isotropic components with equal weights centred at ``(x, y)``."""
    out = []
    for j, x in enumerate(xs):
        mean = np.zeros(dim)
        mean[0], mean[1] = x, y
        out.append(GaussianComponent(j, mean, var * np.eye(dim), 1.0 / len(xs)))
    return out


def plane_problem(rows, cols=(), witnesses=(), start=None, goal=None, start_leaf=(0, 0),
                  goal_leaf=None, sigma=None, env=None):
    """2-D problem: foliation 0 fixes ``y`` to each of ``rows``, foliation 1 fixes ``x``.

    ``witnesses`` are ``(row_index, col_index)`` pairs placed at the crossing
    point of the two lines.
    """
    env = env or Environment(Box((0.0, 0.0), (10.0, 10.0)))
    fols = [Foliation(0, ConstraintFamily.coordinates((1,), 2),
                      tuple(CoParameter((r,), f"y{k}") for k, r in enumerate(rows)),
                      name="rows", similarity_bandwidth=sigma)]
    if cols:
        fols.append(Foliation(1, ConstraintFamily.coordinates((0,), 2),
                              tuple(CoParameter((c,), f"x{k}") for k, c in enumerate(cols)),
                              name="cols", similarity_bandwidth=sigma))
    ws = [IntersectionWitness(LeafId(0, a), LeafId(1, b), np.array([cols[b], rows[a]]))
          for a, b in witnesses]
    start_leaf = LeafId(*start_leaf)
    goal_leaf = LeafId(*(goal_leaf or start_leaf))
    if start is None:
        start = np.array([1.0, rows[start_leaf.coparam]]) if start_leaf.foliation == 0 else \
            np.array([cols[start_leaf.coparam], 1.0])
    if goal is None:
        goal = np.array([9.0, rows[goal_leaf.coparam]]) if goal_leaf.foliation == 0 else \
            np.array([cols[goal_leaf.coparam], 9.0])
    return Problem("plane", env, tuple(fols), tuple(ws), np.asarray(start, float), start_leaf,
                   np.asarray(goal, float), goal_leaf)


def random_map(rng: np.random.Generator, max_nodes: int, count_scale: int = 6,
               p_edge: float = 0.6) -> FoliatedRepMap:
    """A random small map with random integer counts.

    Up to two foliations, one to three distributions, random roadmap edges and
    random witnesses; the total node count never exceeds ``max_nodes``.
    """
    while True:
        k = int(rng.integers(1, 4))
        n_rows = int(rng.integers(1, 4))
        n_cols = int(rng.integers(0, 3))
        if (n_rows + n_cols) * k <= max_nodes and (n_rows + n_cols) * k >= 2:
            break
    rows = sorted(rng.choice(np.arange(1, 10), n_rows, replace=False).astype(float))
    cols = sorted(rng.choice(np.arange(1, 10), n_cols, replace=False).astype(float))
    xs = rng.uniform(0.5, 9.5, k)
    comps = [GaussianComponent(j, np.array([xs[j], rng.uniform(0.5, 9.5)]), np.eye(2), 1.0 / k)
             for j in range(k)]
    edges = {p for p in itertools.combinations(range(k), 2) if rng.random() < p_edge}
    pairs = [(a, b) for a in range(n_rows) for b in range(n_cols) if rng.random() < 0.5]
    p = plane_problem(rows, cols, pairs)
    m = FoliatedRepMap.instantiate(BaseRoadmap(comps, edges), p)
    for i in range(len(m.foliations)):
        m.valid[i][:] = rng.integers(0, count_scale, m.valid[i].shape)
        m.object_invalid[i][:] = rng.integers(0, count_scale, m.valid[i].shape) * (rng.random() < 0.7)
        m.const_invalid[i][:] = rng.integers(0, count_scale, m.valid[i].shape) * (rng.random() < 0.5)
    m.robot_invalid[:] = rng.integers(0, count_scale, k) * (rng.random() < 0.5)
    return m


# PASS/FAIL lines from the acceptance suite, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict(capsys):
    """Print and remember one PASS/FAIL line; returns the boolean."""

    def report(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}" + (f" [{detail}]" if detail else "")
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def line_base():
    """Five components in a row joined as a path 0-1-2-3-4."""
    return BaseRoadmap(components_on_line([1.0, 3.0, 5.0, 7.0, 9.0]),
                       {(0, 1), (1, 2), (2, 3), (3, 4)})


@pytest.fixture
def two_row_problem():
    """Two parallel row leaves linked by one column leaf at x = 5."""
    return plane_problem([2.0, 8.0], [5.0], witnesses=[(0, 0), (1, 0)], goal_leaf=(0, 1))
