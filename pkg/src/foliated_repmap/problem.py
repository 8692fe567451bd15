"""Problem definitions and the JSON problem file format (schema version 1)."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .environment import Box, Environment, ValidityTag, check_validity, shape_from_dict
from .foliation import (
    CarriedObject,
    CoParameter,
    ConstraintFamily,
    ContractError,
    Foliation,
    IntersectionWitness,
    LeafId,
    as_config,
    evaluate_constraint,
)

PROBLEM_SCHEMA = "foliated-problem/1"
CATEGORIES = ("simple", "sequential", "crossing")


class ProblemFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


@dataclass(frozen=True)
class Problem:
    name: str
    env: Environment
    foliations: tuple[Foliation, ...]
    witnesses: tuple[IntersectionWitness, ...]
    start: np.ndarray
    start_leaf: LeafId
    goal: np.ndarray
    goal_leaf: LeafId
    category: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "foliations", tuple(self.foliations))
        object.__setattr__(self, "witnesses", tuple(self.witnesses))
        object.__setattr__(self, "start_leaf", LeafId(*self.start_leaf))
        object.__setattr__(self, "goal_leaf", LeafId(*self.goal_leaf))
        object.__setattr__(self, "start", as_config(self.start, self.dim))
        object.__setattr__(self, "goal", as_config(self.goal, self.dim))
        for idx, f in enumerate(self.foliations):
            if f.id != idx:
                raise ContractError(f"foliation at position {idx} has id {f.id}")
            if f.constraint.dim != self.dim:
                raise ContractError(f"foliation {idx} constraint dimension mismatch")

    @property
    def dim(self) -> int:
        return self.env.dim

    def leaves(self) -> list[LeafId]:
        return [LeafId(f.id, k) for f in self.foliations for k in range(len(f))]

    def leaf_label(self, leaf) -> str:
        fol = self.foliations[leaf[0]]
        cp = fol.co_params[leaf[1]]
        return f"{fol.name or fol.id}:{cp.label or leaf[1]}"

    def residual(self, q, leaf) -> float:
        return evaluate_constraint(q, leaf, self.foliations)

    def tag(self, q, leaf) -> ValidityTag:
        return check_validity(q, leaf, self.env, self.foliations)

    def validate(self):
        """Check witnesses and start/goal against the declared leaves."""
        declared = set(self.leaves())
        for n, w in enumerate(self.witnesses):
            for leaf in (w.leaf_a, w.leaf_b):
                if leaf not in declared:
                    raise ContractError(f"witness {n} references undeclared leaf {tuple(leaf)}")
                res = self.residual(w.config, leaf)
                tol = self.foliations[leaf.foliation].constraint.tolerance
                if res > tol:
                    raise ContractError(
                        f"witness {n} is off leaf {tuple(leaf)} (residual {res:.3g})")
            if not self.env.in_bounds(w.config[None, :])[0]:
                raise ContractError(f"witness {n} lies outside the bounds")
        for name, q, leaf in (("start", self.start, self.start_leaf),
                              ("goal", self.goal, self.goal_leaf)):
            if leaf not in declared:
                raise ContractError(f"{name} references undeclared leaf {tuple(leaf)}")
        return self


# -- serialisation -----------------------------------------------------------

def _constraint_to_dict(c: ConstraintFamily) -> dict:
    if c.kind == "affine":
        return {"kind": "affine", "matrix": [list(r) for r in c.matrix], "tolerance": c.tolerance}
    return {"kind": "norm", "center": list(c.center), "axes": list(c.axes),
            "tolerance": c.tolerance}


def problem_to_dict(p: Problem) -> dict:
    env = p.env
    return {
        "schema": PROBLEM_SCHEMA,
        "name": p.name,
        "category": p.category,
        "dimension": p.dim,
        "bounds": {"lower": list(env.bounds.lower), "upper": list(env.bounds.upper)},
        "environment": {
            "robot_obstacles": [s.to_dict() for s in env.robot_obstacles],
            "object_obstacles": [s.to_dict() for s in env.object_obstacles],
            "object_radius": env.object_radius,
            "object_bounds": None if env.object_bounds is None else {
                "lower": list(env.object_bounds.lower), "upper": list(env.object_bounds.upper)},
        },
        "foliations": [
            {
                "name": f.name,
                "constraint": _constraint_to_dict(f.constraint),
                "carried_object": None if f.carried is None else {
                    "offset": f.carried.offset, "phase": f.carried.phase,
                    "discs": f.carried.discs, "angle_scale": f.carried.angle_scale},
                "similarity_bandwidth": f.similarity_bandwidth,
                "co_parameters": [{"label": cp.label, "value": list(cp.value)}
                                  for cp in f.co_params],
            }
            for f in p.foliations
        ],
        "intersections": [
            {"leaf_a": list(w.leaf_a), "leaf_b": list(w.leaf_b), "config": w.config.tolist()}
            for w in p.witnesses
        ],
        "start": {"leaf": list(p.start_leaf), "config": p.start.tolist()},
        "goal": {"leaf": list(p.goal_leaf), "config": p.goal.tolist()},
    }


def problem_from_dict(d: dict) -> Problem:
    if d.get("schema") != PROBLEM_SCHEMA:
        raise ContractError(f"unsupported schema {d.get('schema')!r}, expected {PROBLEM_SCHEMA!r}")
    dim = int(d["dimension"])
    bounds = Box(tuple(d["bounds"]["lower"]), tuple(d["bounds"]["upper"]))
    e = d.get("environment", {})
    ob = e.get("object_bounds")
    env = Environment(
        bounds=bounds,
        robot_obstacles=tuple(shape_from_dict(s) for s in e.get("robot_obstacles", [])),
        object_obstacles=tuple(shape_from_dict(s) for s in e.get("object_obstacles", [])),
        object_radius=float(e.get("object_radius", 0.1)),
        object_bounds=None if ob is None else Box(tuple(ob["lower"]), tuple(ob["upper"])),
    )
    foliations = []
    for idx, fd in enumerate(d["foliations"]):
        cd = fd["constraint"]
        tol = float(cd.get("tolerance", 1e-6))
        if cd["kind"] == "affine":
            cons = ConstraintFamily("affine", dim, matrix=tuple(map(tuple, cd["matrix"])),
                                    tolerance=tol)
        elif cd["kind"] == "norm":
            cons = ConstraintFamily.sphere(cd["center"], dim, cd.get("axes"), tolerance=tol)
        else:
            raise ContractError(f"unknown constraint kind {cd['kind']!r}")
        co = fd.get("carried_object")
        foliations.append(Foliation(
            id=idx,
            constraint=cons,
            co_params=tuple(CoParameter(tuple(c["value"]), c.get("label", ""))
                            for c in fd["co_parameters"]),
            name=fd.get("name", ""),
            carried=None if co is None else CarriedObject(float(co["offset"]),
                                                          float(co.get("phase", 0.0)),
                                                          int(co.get("discs", 1)),
                                                          float(co.get("angle_scale", 1.0))),
            similarity_bandwidth=fd.get("similarity_bandwidth"),
        ))
    witnesses = tuple(
        IntersectionWitness(LeafId(*w["leaf_a"]), LeafId(*w["leaf_b"]), np.asarray(w["config"]))
        for w in d.get("intersections", [])
    )
    return Problem(
        name=d.get("name", ""),
        env=env,
        foliations=tuple(foliations),
        witnesses=witnesses,
        start=np.asarray(d["start"]["config"], float),
        start_leaf=LeafId(*d["start"]["leaf"]),
        goal=np.asarray(d["goal"]["config"], float),
        goal_leaf=LeafId(*d["goal"]["leaf"]),
        category=d.get("category", "custom"),
    ).validate()


def dumps_problem(p: Problem) -> str:
    return json.dumps(problem_to_dict(p), indent=1)


def save_problem(p: Problem, path) -> None:
    Path(path).write_text(dumps_problem(p) + "\n")


def _guess_line(text: str, message: str) -> int | None:
    # best effort: point at the first mention of a quoted key from the message
    for key in re.findall(r"'([A-Za-z_]+)'", message):
        m = re.search(rf'"{re.escape(key)}"', text)
        if m:
            return text.count("\n", 0, m.start()) + 1
    return None


def loads_problem(text: str, source: str | None = None) -> Problem:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(exc.msg, exc.lineno, source) from exc
    try:
        return problem_from_dict(d)
    except KeyError as exc:
        msg = f"missing field {exc.args[0]!r}"
        raise ProblemFormatError(msg, _guess_line(text, msg), source) from exc
    except (ContractError, TypeError, ValueError) as exc:
        msg = str(exc)
        raise ProblemFormatError(msg, _guess_line(text, msg), source) from exc


def load_problem(path) -> Problem:
    path = Path(path)
    return loads_problem(path.read_text(), source=str(path))


def leaf_graph(p: Problem) -> dict[LeafId, set[LeafId]]:
    """Leaf adjacency induced by the intersection witnesses."""
    g: dict[LeafId, set[LeafId]] = {leaf: set() for leaf in p.leaves()}
    for w in p.witnesses:
        g[w.leaf_a].add(w.leaf_b)
        g[w.leaf_b].add(w.leaf_a)
    return g


def witnesses_between(p: Problem, a, b) -> Sequence[IntersectionWitness]:
    return [w for w in p.witnesses if {w.leaf_a, w.leaf_b} == {LeafId(*a), LeafId(*b)}]
