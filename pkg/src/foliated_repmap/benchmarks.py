"""Seeded generators for the simple / sequential / crossing benchmark families.

All problems live in ``C = [0, 10] x [0, 10] x [0, 1]``: ``(x, y)`` is the
robot's table position and ``z`` its grasp angle in half turns. Placement leaves fix
``(x, y)`` (vertical lines); grasp leaves fix ``z`` (horizontal planes) and
slide a rod-shaped object whose direction depends on the grasp. Maze walls
are low: they stop the object but not the robot, so a narrow corridor
blocks some grasps and not others. A few tall pillars stop both.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .environment import Box, Environment, ValidityTag, check_validity_batch
from .foliation import (
    CarriedObject,
    CoParameter,
    ConstraintFamily,
    ContractError,
    Foliation,
    IntersectionWitness,
    LeafId,
)
from .problem import CATEGORIES, Problem

Z_MAX = 1.0
TABLE = ((0.0, 0.0), (10.0, 10.0))
OFFSET = 1.6
ROD_DISCS = 9

# rooms and corridors of the maze used by the sequential family; walls are
# only the dividers, so most of the table stays usable
ROOM_A = ((0.0, 0.0), (4.0, 4.2))
CORRIDOR_H = ((4.0, 1.5), (6.2, 2.9))
ROOM_B = ((6.2, 0.0), (10.0, 4.6))
CORRIDOR_V = ((7.3, 4.6), (8.7, 6.4))
ROOM_C = ((0.0, 6.4), (10.0, 10.0))
MAZE = (ROOM_A, CORRIDOR_H, ROOM_B, CORRIDOR_V, ROOM_C)
# crossing maze: two rooms joined by one corridor that only some grasps fit through
CROSS_ROOM_A = ((0.0, 0.0), (4.0, 10.0))
CROSS_CORRIDOR = ((4.0, 4.4), (6.0, 5.6))
CROSS_ROOM_B = ((6.0, 0.0), (10.0, 10.0))
CROSS_MAZE = (CROSS_ROOM_A, CROSS_CORRIDOR, CROSS_ROOM_B)
# tall pillars in room corners, clear of every start, goal and re-grasp spot
MAZE_PILLARS = (((9.3, 0.4), (9.7, 0.8)), ((9.2, 9.3), (9.6, 9.7)))
CROSS_PILLARS = (((0.6, 7.2), (1.0, 7.6)), ((9.0, 2.4), (9.4, 2.8)))


def complement_boxes(free, outer=TABLE):
    """Cover ``outer`` minus the union of ``free`` rectangles with disjoint boxes."""
    xs = sorted({outer[0][0], outer[1][0], *[r[0][0] for r in free], *[r[1][0] for r in free]})
    ys = sorted({outer[0][1], outer[1][1], *[r[0][1] for r in free], *[r[1][1] for r in free]})
    boxes = []
    for y0, y1 in zip(ys, ys[1:]):
        run = None
        for x0, x1 in zip(xs, xs[1:]):
            cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
            blocked = not any(r[0][0] <= cx <= r[1][0] and r[0][1] <= cy <= r[1][1] for r in free)
            if blocked:
                run = (run[0], x1) if run else (x0, x1)
            elif run:
                boxes.append(((run[0], y0), (run[1], y1)))
                run = None
        if run:
            boxes.append(((run[0], y0), (run[1], y1)))
    return boxes


def _environment(walls2d, pillars2d=()) -> Environment:
    robot = tuple(Box((lo[0], lo[1], 0.0), (hi[0], hi[1], Z_MAX)) for lo, hi in pillars2d)
    obj = tuple(Box(lo, hi) for lo, hi in (*walls2d, *pillars2d))
    return Environment(
        bounds=Box((0.0, 0.0, 0.0), (10.0, 10.0, Z_MAX)),
        robot_obstacles=robot,
        object_obstacles=obj,
        object_radius=0.1,
        object_bounds=Box(*TABLE),
    )


def _placements(points: dict[str, tuple[float, float]], fid: int = 0) -> Foliation:
    return Foliation(
        id=fid,
        constraint=ConstraintFamily.coordinates((0, 1), 3),
        co_params=tuple(CoParameter(p, label) for label, p in points.items()),
        name="placement",
    )


def _grasps(fid: int, angles, phase: float, name: str, prefix: str) -> Foliation:
    # blocked grasps come in angular bands, so similarity should fade within
    # about one grasp spacing rather than across the whole set
    return Foliation(
        id=fid,
        constraint=ConstraintFamily.coordinates((2,), 3),
        co_params=tuple(CoParameter((a,), f"{prefix}{k}") for k, a in enumerate(angles)),
        name=name,
        carried=CarriedObject(OFFSET, phase, ROD_DISCS, math.pi),
        similarity_bandwidth=Z_MAX / len(angles),
    )


def _angles(rng, n, shift):
    spacing = Z_MAX / n
    return [spacing * (k + shift) + rng.uniform(-0.1, 0.1) * spacing for k in range(n)]


def _witnesses(env, foliations, pairs):
    out = []
    for (pf, pk), (gf, gk) in pairs:
        p = foliations[pf].co_params[pk].value
        a = foliations[gf].co_params[gk].value[0]
        q = np.array([p[0], p[1], a])
        ok = all(check_validity_batch(q, leaf, env, foliations)[0] == ValidityTag.VALID
                 for leaf in (LeafId(pf, pk), LeafId(gf, gk)))
        if ok:
            out.append(IntersectionWitness(LeafId(pf, pk), LeafId(gf, gk), q))
    return out


# -- brute-force grid reachability (generator self-check) --------------------

def _grid_axes(problem: Problem, leaf: LeafId, resolution: float):
    cons = problem.foliations[leaf.foliation].constraint
    a = np.asarray(cons.matrix)
    fixed = [int(np.flatnonzero(row)[0]) for row in a]
    free = [d for d in range(problem.dim) if d not in fixed]
    theta = problem.foliations[leaf.foliation].co_params[leaf.coparam].array
    axes = [np.arange(problem.env.lower[d], problem.env.upper[d] + 1e-9, resolution) for d in free]
    return fixed, free, theta, axes


def leaf_components(problem: Problem, leaf: LeafId, resolution: float = 0.1, clearance: int = 1):
    """Label connected free cells of a coordinate-aligned leaf.

    Cells count as free only when every cell within ``clearance`` is valid,
    so connected labels correspond to comfortably wide passages.
    """
    fixed, free, theta, axes = _grid_axes(problem, leaf, resolution)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.zeros((mesh[0].size, problem.dim))
    for d, m in zip(free, mesh):
        pts[:, d] = m.ravel()
    for d, t in zip(fixed, theta):
        pts[:, d] = t
    ok = (check_validity_batch(pts, leaf, problem.env, problem.foliations) == 0).reshape(mesh[0].shape)
    if clearance:
        ok = ndimage.binary_erosion(ok, structure=np.ones((3,) * len(free)),
                                    iterations=clearance, border_value=1)
    labels, _ = ndimage.label(ok)
    return labels, free, axes


def _label_at(labels, free, axes, q, radius=3):
    idx = tuple(int(round((q[d] - ax[0]) / (ax[1] - ax[0]))) for d, ax in zip(free, axes))
    # nearest labelled cell within a small window, since eroded grids can miss the port itself
    best = None
    ranges = [range(max(0, i - radius), min(n, i + radius + 1)) for i, n in zip(idx, labels.shape)]
    for cell in np.ndindex(*[len(r) for r in ranges]):
        c = tuple(r[k] for r, k in zip(ranges, cell))
        if labels[c]:
            dist = sum((a - b) ** 2 for a, b in zip(c, idx))
            if best is None or dist < best[0]:
                best = (dist, labels[c])
    return None if best is None else best[1]


def leaf_reachable(problem: Problem, leaf, a, b, resolution=0.1, clearance=1) -> bool:
    labels, free, axes = leaf_components(problem, LeafId(*leaf), resolution, clearance)
    la, lb = _label_at(labels, free, axes, a), _label_at(labels, free, axes, b)
    return la is not None and la == lb


def feasible_leaf_route(problem: Problem, resolution=0.1, clearance=1):
    """Leaf sequence whose every single-leaf hop is grid-reachable, or ``None``."""
    ports = {"start": (problem.start_leaf, problem.start), "goal": (problem.goal_leaf, problem.goal)}
    for n, w in enumerate(problem.witnesses):
        ports[n] = (None, w.config)
    by_leaf: dict[LeafId, list] = {}
    by_leaf.setdefault(problem.start_leaf, []).append("start")
    by_leaf.setdefault(problem.goal_leaf, []).append("goal")
    for n, w in enumerate(problem.witnesses):
        by_leaf.setdefault(w.leaf_a, []).append(n)
        by_leaf.setdefault(w.leaf_b, []).append(n)
    adj: dict = {p: [] for p in ports}
    for leaf, names in by_leaf.items():
        labels, free, axes = leaf_components(problem, leaf, resolution, clearance)
        lab = {p: _label_at(labels, free, axes, ports[p][1]) for p in names}
        for p in names:
            for r in names:
                if p != r and lab[p] is not None and lab[p] == lab[r]:
                    adj[p].append((r, leaf))
    prev = {"start": None}
    todo = ["start"]
    while todo:
        u = todo.pop(0)
        if u == "goal":
            route = []
            while prev[u] is not None:
                u, leaf = prev[u]
                route.append(leaf)
            return route[::-1]
        for v, leaf in adj[u]:
            if v not in prev:
                prev[v] = (u, leaf)
                todo.append(v)
    return None


# -- generators --------------------------------------------------------------

def _simple(rng, obstacles):
    walls = []
    n_boxes = int(round(6 * obstacles))
    for _ in range(n_boxes):
        cx, cy = rng.uniform(3.6, 6.4), rng.uniform(0.8, 9.2)
        w, h = rng.uniform(0.4, 1.2), rng.uniform(0.4, 1.2)
        walls.append(((cx - w / 2, cy - h / 2), (cx + w / 2, cy + h / 2)))
    env = _environment([], walls)
    place = _placements({"start": (2.0, 5.0), "goal": (8.0, 5.0)})
    grasp = _grasps(1, _angles(rng, 6, 0.5), rng.uniform(0, math.pi), "grasp", "g")
    fols = (place, grasp)
    pairs = [((0, k), (1, g)) for k in range(2) for g in range(len(grasp))]
    return env, fols, _witnesses(env, fols, pairs)


def _mid_point(rng):
    return (8.0 + rng.uniform(-0.15, 0.15), 2.4 + rng.uniform(-0.3, 0.3))


def _sequential(rng, obstacles):
    env = _environment(complement_boxes(MAZE), MAZE_PILLARS)
    place = _placements({"start": (2.0, 2.2), "goal": (7.7, 8.15), "mid": _mid_point(rng)})
    drag = _grasps(1, _angles(rng, 6, 0.25), rng.uniform(0, math.pi), "drag", "d")
    deliver = _grasps(2, _angles(rng, 6, 0.75), rng.uniform(0, math.pi), "deliver", "v")
    fols = (place, drag, deliver)
    pairs = ([((0, 0), (1, g)) for g in range(len(drag))]
             + [((0, 2), (1, g)) for g in range(len(drag))]
             + [((0, 2), (2, g)) for g in range(len(deliver))]
             + [((0, 1), (2, g)) for g in range(len(deliver))])
    return env, fols, _witnesses(env, fols, pairs)


def _crossing(rng, obstacles, n_mid=2, n_grasps=8):
    env = _environment(complement_boxes(CROSS_MAZE), CROSS_PILLARS)
    pts = {"start": (2.0, 5.0), "goal": (8.0, 5.0)}
    for k in range(n_mid):
        # re-grasp spots alternate between the two rooms
        cx = 2.2 if k % 2 == 0 else 7.8
        pts[f"mid{k}"] = (cx + rng.uniform(-0.2, 0.2), 5.0 + rng.choice([-1, 1]) * rng.uniform(0.8, 1.1))
    place = _placements(pts)
    grasp = _grasps(1, _angles(rng, n_grasps, 0.5), rng.uniform(0, math.pi), "grasp", "g")
    fols = (place, grasp)
    pairs = [((0, k), (1, g)) for k in range(len(place)) for g in range(len(grasp))]
    return env, fols, _witnesses(env, fols, pairs)


def _blocked_split(problem: Problem, fid: int, targets) -> tuple[int, int]:
    """Count grasp leaves of ``fid`` that can / cannot carry the object from start-side ports."""
    ok = blocked = 0
    for k in range(len(problem.foliations[fid])):
        leaf = LeafId(fid, k)
        ws = [w for w in problem.witnesses if leaf in (w.leaf_a, w.leaf_b)]
        src = [w for w in ws if (w.leaf_a if w.leaf_b == leaf else w.leaf_b) in targets[0]]
        dst = [w for w in ws if (w.leaf_a if w.leaf_b == leaf else w.leaf_b) in targets[1]]
        if not src or not dst:
            blocked += 1
            continue
        labels, free, axes = leaf_components(problem, leaf)
        ls = {_label_at(labels, free, axes, w.config) for w in src} - {None}
        ld = {_label_at(labels, free, axes, w.config) for w in dst} - {None}
        if ls & ld:
            ok += 1
        else:
            blocked += 1
    return ok, blocked


def make_benchmark(category: str, seed: int, obstacles: float = 0.0,
                   max_attempts: int = 200) -> Problem:
    """Deterministic problem for ``(category, seed)``.

    ``obstacles`` in [0, 1] scatters boxes on the simple table; the maze
    families have their walls built in. Candidates are redrawn until a
    grid-verified route exists and, for the maze families, each grasp
    foliation has both passable and blocked leaves.
    """
    if category not in CATEGORIES:
        raise ContractError(f"unknown benchmark category {category!r}")
    if not 0.0 <= obstacles <= 1.0:
        raise ContractError("obstacles must be in [0, 1]")
    rng = np.random.default_rng([seed, CATEGORIES.index(category)])
    build = {"simple": _simple, "sequential": _sequential, "crossing": _crossing}[category]
    for _ in range(max_attempts):
        env, fols, witnesses = build(rng, obstacles)
        z0, z1 = rng.uniform(0.1, 0.9, size=2) * Z_MAX
        start_p, goal_p = fols[0].co_params[0].value, fols[0].co_params[1].value
        problem = Problem(
            name=f"{category}-{seed}",
            env=env,
            foliations=fols,
            witnesses=tuple(witnesses),
            start=np.array([start_p[0], start_p[1], z0]),
            start_leaf=LeafId(0, 0),
            goal=np.array([goal_p[0], goal_p[1], z1]),
            goal_leaf=LeafId(0, 1),
            category=category,
        ).validate()
        if not _acceptable(problem):
            continue
        return problem
    raise RuntimeError(f"no acceptable {category} problem for seed {seed}")


def _acceptable(problem: Problem) -> bool:
    if feasible_leaf_route(problem) is None:
        return False
    cat = problem.category
    if cat == "sequential":
        d_ok, d_bad = _blocked_split(problem, 1, ({LeafId(0, 0)}, {LeafId(0, 2)}))
        v_ok, v_bad = _blocked_split(problem, 2, ({LeafId(0, 2)}, {LeafId(0, 1)}))
        return d_ok > 0 and d_bad > 0 and v_ok > 0 and v_bad > 0
    if cat == "crossing":
        through, blocked = _blocked_split(problem, 1, ({LeafId(0, 0)}, {LeafId(0, 1)}))
        return through > 0 and blocked > 0
    return True
