"""Bidirectional RRT-Connect with optional projection of every extension.

The planner is agnostic to where configurations come from and how they are
checked: the caller passes a sampler, a projection and a batch tagger.
Every configuration the planner evaluates is appended to ``samples``
together with its tag.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .environment import ValidityTag

VALID = int(ValidityTag.VALID)
CONSTRAINT_INVALID = int(ValidityTag.CONSTRAINT_INVALID)

def _norm(v: np.ndarray) -> float:
    # same arithmetic as np.linalg.norm on a vector, without the dispatch cost
    return math.sqrt(float(v @ v))


Tagger = Callable[[np.ndarray], np.ndarray]
Projector = Callable[[np.ndarray], "np.ndarray | None"]


@dataclass
class RRTResult:
    success: bool
    path: list[np.ndarray] | None
    samples: list[np.ndarray] = field(default_factory=list)
    tags: list[int] = field(default_factory=list)
    iterations: int = 0


class _Tree:
    def __init__(self, root: np.ndarray, capacity: int):
        self.nodes = np.empty((capacity, root.shape[0]))
        self.nodes[0] = root
        self.parent = [-1]
        self.n = 1

    def add(self, q, parent):
        if self.n == self.nodes.shape[0]:
            self.nodes = np.concatenate([self.nodes, np.empty_like(self.nodes)])
        self.nodes[self.n] = q
        self.parent.append(parent)
        self.n += 1
        return self.n - 1

    def nearest(self, q):
        d = self.nodes[: self.n] - q
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def branch(self, idx):
        out = []
        while idx >= 0:
            out.append(self.nodes[idx])
            idx = self.parent[idx]
        return out


class SegmentChecker:
    """Resolution-bounded straight-segment checks shared by planning and smoothing."""

    def __init__(self, tagger: Tagger, resolution: float, project: Projector | None = None):
        self.tagger = tagger
        self.resolution = resolution
        self.project = project

    def points(self, a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
        """Interior points of ``a -> b``; ``None`` if one fails to project."""
        n = max(1, math.ceil(_norm(b - a) / self.resolution))
        t = (np.arange(1, n) / n)[:, None]
        pts = a + t * (b - a)
        if self.project is not None:
            projected = [self.project(p) for p in pts]
            if any(p is None for p in projected):
                return None
            pts = np.array(projected).reshape(-1, a.shape[0])
        return pts

    def first_failure(self, a, b):
        """Return ``(ok, interior_points, failing_point, failing_tag)``."""
        pts = self.points(a, b)
        if pts is None:
            return False, None, None, None
        if len(pts) == 0:
            return True, pts, None, None
        tags = self.tagger(pts)
        bad = np.flatnonzero(tags != VALID)
        if bad.size:
            k = bad[0]
            return False, pts, pts[k], int(tags[k])
        return True, pts, None, None


def bidirectional_rrt(
    start: np.ndarray,
    goal: np.ndarray,
    sample: Callable[[], np.ndarray],
    tagger: Tagger,
    rng: np.random.Generator,
    *,
    project: Projector | None = None,
    step_size: float = 0.5,
    max_iterations: int = 1000,
    time_budget: float | None = None,
    goal_bias: float = 0.05,
    interpolate_projected: bool = False,
) -> RRTResult:
    """Grow trees from ``start`` and ``goal`` until they connect.

    Returned paths have consecutive waypoints at most ``step_size`` apart and
    every interior point at ``step_size / 4`` resolution tagged valid.
    """
    res = RRTResult(False, None)
    checker = SegmentChecker(tagger, step_size / 4.0,
                             project if interpolate_projected else None)
    proj = project or (lambda q: q)

    def record(q, tag):
        res.samples.append(np.array(q, dtype=float))
        res.tags.append(int(tag))

    def tag_alone(q) -> bool:
        tag = int(tagger(q[None, :])[0])
        record(q, tag)
        return tag == VALID

    def steer(tree: _Tree, target: np.ndarray, target_checked: bool):
        # an unchecked target is tagged in the same batch as the extension and
        # recorded first; nothing else is recorded when it turns out invalid
        near = tree.nearest(target)
        q_near = tree.nodes[near]
        d = target - q_near
        dist = _norm(d)
        reached = dist <= step_size
        lead = not target_checked and not reached
        if dist < 1e-12:
            if not target_checked and not tag_alone(target):
                return None, False
            return near, True
        if reached:
            q_new = target
        else:
            q_new = proj(q_near + d * (step_size / dist))
            if q_new is None or not 1e-12 <= _norm(q_new - q_near) <= step_size:
                if lead and not tag_alone(target):
                    return None, False
                if q_new is None:
                    record(q_near + d * (step_size / dist), CONSTRAINT_INVALID)
                return None, False
        pts = checker.points(q_near, q_new)
        if pts is None:
            if lead:
                tag_alone(target)
            return None, False
        # endpoint and interior in one batch; the endpoint verdict comes first
        check_end = not (reached and target_checked)
        parts = ([target[None, :]] if lead else []) + [pts] + ([q_new[None, :]] if check_end else [])
        batch = np.vstack(parts)
        tags = tagger(batch) if len(batch) else np.empty(0, dtype=np.int8)
        if lead:
            tag = int(tags[0])
            record(target, tag)
            if tag != VALID:
                return None, False
            tags = tags[1:]
        if check_end:
            tag = int(tags[-1])
            record(q_new, tag)
            if tag != VALID:
                return None, False
            tags = tags[:-1]
        bad = np.flatnonzero(tags != VALID)
        if bad.size:
            record(pts[bad[0]], int(tags[bad[0]]))
            return None, False
        return tree.add(q_new, near), reached

    deadline = None if time_budget is None else time.monotonic() + time_budget
    ta, tb = _Tree(start, 256), _Tree(goal, 256)
    a_is_start = True
    for it in range(max_iterations):
        res.iterations = it + 1
        if deadline is not None and time.monotonic() > deadline:
            break
        if rng.random() < goal_bias:
            target, checked = tb.nodes[0].copy(), True
        else:
            raw = sample()
            target = proj(raw)
            if target is None:
                record(raw, CONSTRAINT_INVALID)
                ta, tb, a_is_start = tb, ta, not a_is_start
                continue
            checked = False
        new_idx, _ = steer(ta, target, checked)
        if new_idx is not None:
            q_new = ta.nodes[new_idx].copy()
            while True:
                idx_b, reached = steer(tb, q_new, True)
                if idx_b is None:
                    break
                if reached:
                    first = ta.branch(new_idx)[::-1]
                    second = tb.branch(idx_b)[1:]
                    path = first + second
                    if not a_is_start:
                        path = path[::-1]
                    res.success = True
                    res.path = [np.array(p) for p in path]
                    return res
        ta, tb, a_is_start = tb, ta, not a_is_start
    return res


def shortcut(path: list[np.ndarray], checker: SegmentChecker, rng: np.random.Generator,
             attempts: int, step_size: float) -> list[np.ndarray]:
    """Random shortcutting; replacement segments are re-densified from checked points."""
    path = [np.asarray(p) for p in path]
    for _ in range(attempts):
        if len(path) < 3:
            break
        i, j = sorted(rng.choice(len(path), size=2, replace=False))
        if j - i < 2:
            continue
        ok, pts, _, _ = checker.first_failure(path[i], path[j])
        if not ok:
            continue
        # keep every 4th checked point so consecutive waypoints stay <= step_size
        n = len(pts) + 1
        stride = max(1, int(step_size // checker.resolution))
        keep = [pts[k - 1] for k in range(stride, n, stride)]
        new_len = sum(np.linalg.norm(b - a) for a, b in zip([path[i]] + keep, keep + [path[j]]))
        old_len = sum(np.linalg.norm(path[k + 1] - path[k]) for k in range(i, j))
        if new_len < old_len - 1e-12:
            path = path[: i + 1] + keep + path[j:]
    return path


def path_length(path) -> float:
    return float(sum(np.linalg.norm(np.asarray(b) - np.asarray(a)) for a, b in zip(path, path[1:])))
