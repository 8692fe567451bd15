"""Analytic desk-scale environments and the validity check.

The "robot" is a point in the ambient space. Robot obstacles are convex
shapes over the full configuration; object obstacles live in the 2-D table
plane and are tested against the carried object's footprint discs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np

from .foliation import ContractError, Foliation, LeafId, leaf_of


class ValidityTag(IntEnum):
    VALID = 0
    ROBOT_INVALID = 1
    OBJECT_INVALID = 2
    CONSTRAINT_INVALID = 3


@dataclass(frozen=True)
class Box:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ContractError(f"degenerate box {self.lower} - {self.upper}")
        object.__setattr__(self, "lower", tuple(lo.tolist()))
        object.__setattr__(self, "upper", tuple(hi.tolist()))

    @property
    def dim(self):
        return len(self.lower)

    def distance(self, p: np.ndarray) -> np.ndarray:
        """Euclidean distance from points ``p`` (``(n, d)``) to the box, 0 inside."""
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        gap = np.maximum(np.maximum(lo - p, p - hi), 0.0)
        return np.linalg.norm(gap, axis=-1)

    def to_dict(self):
        return {"type": "box", "lower": list(self.lower), "upper": list(self.upper)}


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ContractError("ball radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def dim(self):
        return len(self.center)

    def distance(self, p: np.ndarray) -> np.ndarray:
        return np.maximum(np.linalg.norm(p - np.asarray(self.center), axis=-1) - self.radius, 0.0)

    def to_dict(self):
        return {"type": "ball", "center": list(self.center), "radius": self.radius}


def shape_from_dict(d: dict):
    kind = d.get("type")
    if kind == "box":
        return Box(tuple(d["lower"]), tuple(d["upper"]))
    if kind == "ball":
        return Ball(tuple(d["center"]), float(d["radius"]))
    raise ContractError(f"unknown shape type {kind!r}")


@dataclass(frozen=True)
class Environment:
    bounds: Box
    robot_obstacles: tuple = ()
    object_obstacles: tuple = ()
    object_radius: float = 0.1
    object_bounds: Box | None = None
    _boxes: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "robot_obstacles", tuple(self.robot_obstacles))
        object.__setattr__(self, "object_obstacles", tuple(self.object_obstacles))
        for s in self.robot_obstacles:
            if s.dim != self.dim:
                raise ContractError("robot obstacle dimension differs from the ambient space")
        for s in self.object_obstacles:
            if s.dim != 2:
                raise ContractError("object obstacles live in the 2-D table plane")
        # stacked box arrays for the vectorised checks
        object.__setattr__(self, "_boxes", {
            "robot": _stack(self.robot_obstacles),
            "object": _stack(self.object_obstacles),
            "lo": np.asarray(self.bounds.lower, float),
            "hi": np.asarray(self.bounds.upper, float),
        })
        if self.object_bounds is not None:
            self._boxes["obj_lo"] = np.asarray(self.object_bounds.lower, float) + self.object_radius
            self._boxes["obj_hi"] = np.asarray(self.object_bounds.upper, float) - self.object_radius

    @property
    def dim(self) -> int:
        return self.bounds.dim

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.bounds.lower)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.bounds.upper)

    def in_bounds(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q)
        return ((q >= self._boxes["lo"]) & (q <= self._boxes["hi"])).all(axis=-1)

    def robot_collides(self, q: np.ndarray) -> np.ndarray:
        """Points outside the bounds or touching a robot obstacle."""
        q = np.atleast_2d(q)
        hit = ~self.in_bounds(q)
        hit |= _hits(self._boxes["robot"], q, 0.0)
        return hit

    def object_collides(self, p: np.ndarray) -> np.ndarray:
        """Footprint discs at ``p[..., 2]``; any hit along the last-but-one axis counts."""
        p = np.asarray(p, dtype=float)
        if p.ndim == 3:
            return self.object_collides(p.reshape(-1, 2)).reshape(p.shape[:2]).any(axis=1)
        p = np.atleast_2d(p)
        hit = _hits(self._boxes["object"], p, self.object_radius)
        if self.object_bounds is not None:
            hit |= ~((p >= self._boxes["obj_lo"]) & (p <= self._boxes["obj_hi"])).all(axis=-1)
        return hit


def _stack(shapes):
    boxes = [s for s in shapes if isinstance(s, Box)]
    balls = [s for s in shapes if isinstance(s, Ball)]
    out = {}
    if boxes:
        out["lo"] = np.array([b.lower for b in boxes])
        out["hi"] = np.array([b.upper for b in boxes])
    if balls:
        out["c"] = np.array([b.center for b in balls])
        out["r"] = np.array([b.radius for b in balls])
    return out


def _hits(stacked, p: np.ndarray, margin: float) -> np.ndarray:
    hit = np.zeros(p.shape[0], dtype=bool)
    if "lo" in stacked:
        lo, hi = stacked["lo"], stacked["hi"]
        if margin == 0.0:
            pp = p[:, None, :]
            hit |= ((pp >= lo) & (pp <= hi)).all(axis=-1).any(axis=1)
        else:
            gap = np.maximum(np.maximum(lo - p[:, None, :], p[:, None, :] - hi), 0.0)
            hit |= ((gap * gap).sum(axis=-1) <= margin * margin).any(axis=1)
    if "c" in stacked:
        d = np.linalg.norm(p[:, None, :] - stacked["c"], axis=-1)
        hit |= (d <= stacked["r"] + margin).any(axis=1)
    return hit


def check_validity_batch(qs, leaf: LeafId | None, env: Environment,
                         foliations: Sequence[Foliation] = ()) -> np.ndarray:
    """Tag each row of ``qs``; precedence robot > object > constraint."""
    qs = np.atleast_2d(np.asarray(qs, dtype=float))
    if qs.shape[1] != env.dim:
        raise ContractError(f"configuration dimension {qs.shape[1]} != {env.dim}")
    tags = np.full(qs.shape[0], ValidityTag.VALID, dtype=np.int8)
    robot = env.robot_collides(qs)
    if leaf is not None:
        fol, theta = leaf_of(foliations, leaf)
        if fol.carried is not None:
            obj = env.object_collides(fol.carried.footprint(qs, theta))
        else:
            obj = np.zeros_like(robot)
        off_leaf = fol.constraint.residual(qs, theta) > fol.constraint.tolerance
        tags[off_leaf] = ValidityTag.CONSTRAINT_INVALID
        tags[obj] = ValidityTag.OBJECT_INVALID
    tags[robot] = ValidityTag.ROBOT_INVALID
    return tags


class LeafTagger:
    """Validity tagging for one leaf with every per-leaf quantity precomputed.

    Gives the same tags as :func:`check_validity_batch` for ``(n, D)``
    batches; the motion planner calls it thousands of times per task, so it
    trades generality for fewer array operations per call. On a carried-object
    leaf the footprint offsets are fixed, so each wall box is shifted back by
    every disc offset once and the hand point alone is tested against them.
    """

    def __init__(self, env: Environment, leaf: LeafId, foliations: Sequence[Foliation]):
        fol, theta = leaf_of(foliations, leaf)
        cons = fol.constraint
        self.env = env
        lo, hi = env._boxes["lo"], env._boxes["hi"]
        robot, obj = env._boxes["robot"], env._boxes["object"]
        # row 0 is the workspace (must be inside), the rest are robot boxes (must be outside)
        self.box_lo = np.vstack([lo[None, :], robot["lo"]]) if "lo" in robot else lo[None, :]
        self.box_hi = np.vstack([hi[None, :], robot["hi"]]) if "lo" in robot else hi[None, :]
        self.robot_balls = {"c": robot["c"], "r": robot["r"]} if "c" in robot else None
        self.r2 = env.object_radius ** 2
        self.tol = cons.tolerance
        self.theta = theta.array
        self.affine = cons._a.T if cons.kind == "affine" else None
        self.cons, self.theta_cp = cons, theta
        self.offsets = None
        if fol.carried is not None:
            off = fol.carried.footprint(np.zeros((1, env.dim)), theta)[0]
            self.offsets = off
            self.wall_lo = self.wall_hi = None
            if "lo" in obj:
                self.wall_lo = (obj["lo"][None, :, :] - off[:, None, :]).reshape(-1, 2)
                self.wall_hi = (obj["hi"][None, :, :] - off[:, None, :]).reshape(-1, 2)
            self.object_balls = {"c": obj["c"], "r": obj["r"]} if "c" in obj else None
            self.table_lo = self.table_hi = None
            if env._boxes.get("obj_lo") is not None:
                # every disc on the table <=> the hand inside the intersection of shifted tables
                self.table_lo = (env._boxes["obj_lo"] - off).max(axis=0)
                self.table_hi = (env._boxes["obj_hi"] - off).min(axis=0)

    def __call__(self, qs: np.ndarray) -> np.ndarray:
        qs = np.asarray(qs, dtype=float)
        if qs.ndim == 1:
            qs = qs[None, :]
        pp = qs[:, None, :]
        inside = ((pp >= self.box_lo) & (pp <= self.box_hi)).all(axis=2)
        robot = ~inside[:, 0] | inside[:, 1:].any(axis=1)
        if self.robot_balls is not None:
            robot |= _hits(self.robot_balls, qs, 0.0)
        if self.affine is not None:
            off = np.abs(qs @ self.affine - self.theta).max(axis=1) > self.tol
        else:
            off = self.cons.residual(qs, self.theta_cp) > self.tol
        tags = off.astype(np.int8) * np.int8(ValidityTag.CONSTRAINT_INVALID)
        if self.offsets is not None:
            hand = qs[:, :2]
            obj = np.zeros(qs.shape[0], dtype=bool)
            if self.wall_lo is not None:
                h = hand[:, None, :]
                gap = np.maximum(self.wall_lo - h, h - self.wall_hi)
                np.maximum(gap, 0.0, out=gap)
                obj |= (np.einsum("nbk,nbk->nb", gap, gap) <= self.r2).any(axis=1)
            if self.object_balls is not None:
                n, d = qs.shape[0], self.offsets.shape[0]
                pts = (hand[:, None, :] + self.offsets).reshape(n * d, 2)
                obj |= _hits(self.object_balls, pts, self.env.object_radius).reshape(n, d).any(axis=1)
            if self.table_lo is not None:
                obj |= ~((hand >= self.table_lo) & (hand <= self.table_hi)).all(axis=1)
            tags[obj] = ValidityTag.OBJECT_INVALID
        tags[robot] = ValidityTag.ROBOT_INVALID
        return tags


def check_validity(q, leaf: LeafId | None, env: Environment,
                   foliations: Sequence[Foliation] = ()) -> ValidityTag:
    return ValidityTag(int(check_validity_batch(q, leaf, env, foliations)[0]))
