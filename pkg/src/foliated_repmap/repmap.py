"""The foliated repetition roadmap: one copy of the base roadmap per leaf.

Nodes are ``(foliation, coparam, component)`` triples. Experience counts are
kept per foliation as ``(n_coparams, n_components)`` arrays; robot-invalid
counts are one vector over components shared by every leaf.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .atlas import BaseRoadmap, ComponentIndex, roadmap_from_dict, roadmap_to_dict
from .environment import ValidityTag
from .foliation import ContractError, IntersectionWitness, LeafId, project_to_manifold
from .problem import Problem, problem_from_dict, problem_to_dict
from .tasks import PlannerFeedback, Task

MAP_SCHEMA = "foliated-repmap/1"


class QueryRejected(ValueError):
    """Start or goal configuration does not satisfy its leaf constraint."""


class NodeId(NamedTuple):
    foliation: int
    coparam: int
    dist: int

    @property
    def leaf(self) -> LeafId:
        return LeafId(self.foliation, self.coparam)


class EdgeKind(Enum):
    INTRA_LEAF = "intra"
    INTERSECTION = "intersection"


@dataclass(frozen=True)
class RepMapEdge:
    u: NodeId
    v: NodeId
    kind: EdgeKind
    witness: int | None = None

    def other(self, n: NodeId) -> NodeId:
        return self.v if n == self.u else self.u


class FoliatedRepMap:
    def __init__(self, base: BaseRoadmap, problem: Problem):
        self.base = base
        self.problem = problem
        self.foliations = problem.foliations
        self.index = ComponentIndex(base.components)
        self.n_dist = len(base.components)
        if [c.id for c in base.components] != list(range(self.n_dist)):
            raise ContractError("base roadmap component ids must be 0..K-1")
        self.valid = [np.zeros((len(f), self.n_dist)) for f in self.foliations]
        self.object_invalid = [np.zeros((len(f), self.n_dist)) for f in self.foliations]
        self.const_invalid = [np.zeros((len(f), self.n_dist)) for f in self.foliations]
        self.robot_invalid = np.zeros(self.n_dist)
        # pseudo-counts from init_weights; kept apart so observed mass stays exact
        self.robot_invalid_prior = np.zeros(self.n_dist)
        self.samples_ingested = 0
        self.nodes: list[NodeId] = []
        self.edges: list[RepMapEdge] = []
        self.adjacency: dict[NodeId, list[RepMapEdge]] = {}
        # structure is fixed once instantiated; these caches are filled lazily
        self._index: dict[NodeId, int] | None = None
        self._pairs: tuple[np.ndarray, np.ndarray] | None = None

    # -- construction --------------------------------------------------------

    @classmethod
    def instantiate(cls, base: BaseRoadmap, problem: Problem) -> "FoliatedRepMap":
        m = cls(base, problem)
        leaves = problem.leaves()
        for leaf in leaves:
            for j in range(m.n_dist):
                n = NodeId(leaf.foliation, leaf.coparam, j)
                m.nodes.append(n)
                m.adjacency[n] = []
        for leaf in leaves:
            for a, b in sorted(base.edges):
                m._add_edge(RepMapEdge(NodeId(*leaf, a), NodeId(*leaf, b), EdgeKind.INTRA_LEAF))
        declared = set(leaves)
        for w_idx, w in enumerate(problem.witnesses):
            if w.leaf_a not in declared or w.leaf_b not in declared:
                raise ContractError(f"witness {w_idx} references an undeclared leaf")
            if not problem.env.in_bounds(w.config[None, :])[0]:
                raise ContractError(f"witness {w_idx} lies outside the bounds")
            j = int(m.index.assign(w.config)[0])
            m._add_edge(RepMapEdge(NodeId(*w.leaf_a, j), NodeId(*w.leaf_b, j),
                                   EdgeKind.INTERSECTION, w_idx))
        return m

    def _add_edge(self, e: RepMapEdge):
        self.edges.append(e)
        self.adjacency[e.u].append(e)
        self.adjacency[e.v].append(e)

    def __contains__(self, n) -> bool:
        return NodeId(*n) in self.adjacency

    def node_index(self) -> dict[NodeId, int]:
        if self._index is None or len(self._index) != len(self.nodes):
            self._index = {n: i for i, n in enumerate(self.nodes)}
        return self._index

    def action_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Directed neighbour pairs ``(src, dst)`` over node indices, parallel edges collapsed."""
        if self._pairs is None:
            idx = self.node_index()
            src, dst = [], []
            for n in self.nodes:
                for v in sorted({idx[e.other(n)] for e in self.adjacency[n]}):
                    src.append(idx[n])
                    dst.append(v)
            self._pairs = (np.array(src, dtype=int), np.array(dst, dtype=int))
        return self._pairs

    def gather(self, tables: list[np.ndarray]) -> np.ndarray:
        """Per-node values from per-foliation ``(n_coparams, n_dist)`` tables."""
        return np.array([tables[n.foliation][n.coparam, n.dist] for n in self.nodes], dtype=float)

    def witness(self, e: RepMapEdge) -> IntersectionWitness:
        return self.problem.witnesses[e.witness]

    def edges_between(self, a: NodeId, b: NodeId) -> list[RepMapEdge]:
        return [e for e in self.adjacency.get(a, []) if e.other(a) == b]

    # -- queries -------------------------------------------------------------

    def attach_start_goal(self, q_start, leaf_start, q_goal, leaf_goal) -> tuple[NodeId, NodeId]:
        out = []
        for name, q, leaf in (("start", q_start, leaf_start), ("goal", q_goal, leaf_goal)):
            leaf = LeafId(*leaf)
            q = np.asarray(q, float)
            res = self.problem.residual(q, leaf)
            tol = self.foliations[leaf.foliation].constraint.tolerance
            if res > tol:
                raise QueryRejected(f"{name} configuration is off its leaf (residual {res:.3g})")
            out.append(NodeId(*leaf, int(self.index.assign(q)[0])))
        return out[0], out[1]

    def split_into_tasks(self, sequence, q_start, q_goal) -> list[Task]:
        """Cut a node path at its intersection edges; one task per single-leaf section."""
        seq = [NodeId(*n) for n in sequence]
        if not seq:
            raise ContractError("empty node sequence")
        for n in seq:
            if n not in self.adjacency:
                raise ContractError(f"node {tuple(n)} is not in the map")
        sections: list[list[NodeId]] = [[seq[0]]]
        cuts: list[RepMapEdge] = []
        for a, b in zip(seq, seq[1:]):
            between = self.edges_between(a, b)
            if not between:
                raise ContractError(f"no edge between {tuple(a)} and {tuple(b)}")
            inter = [e for e in between if e.kind is EdgeKind.INTERSECTION]
            if a.leaf != b.leaf:
                # parallel witnesses are equivalent for planning; take the first declared
                cuts.append(min(inter, key=lambda e: e.witness))
                sections.append([b])
            else:
                sections[-1].append(b)
        tasks = []
        for k, nodes in enumerate(sections):
            leaf = nodes[0].leaf
            start = np.asarray(q_start, float) if k == 0 else self._on_leaf(cuts[k - 1], leaf)
            goal = (np.asarray(q_goal, float) if k == len(sections) - 1
                    else self._on_leaf(cuts[k], leaf))
            dists = [self.base.components[n.dist] for n in nodes]
            tasks.append(Task(leaf, start, goal, dists, nodes=list(nodes)))
        return tasks

    def _on_leaf(self, e: RepMapEdge, leaf: LeafId) -> np.ndarray:
        q = self.witness(e).config
        fol = self.foliations[leaf.foliation]
        if self.problem.residual(q, leaf) <= fol.constraint.tolerance:
            return q.copy()
        p = project_to_manifold(q, leaf, self.foliations)
        if p is None:
            raise ContractError(f"witness {e.witness} cannot be projected onto leaf {tuple(leaf)}")
        return p

    # -- feedback ------------------------------------------------------------

    def ingest_feedback(self, task: Task, fb: PlannerFeedback) -> None:
        leaf = LeafId(*task.leaf)
        if leaf.foliation >= len(self.foliations) or leaf.coparam >= len(self.foliations[leaf.foliation]):
            raise ContractError(f"leaf {tuple(leaf)} is not declared in the map")
        if len(fb.tags) == 0:
            return
        js = self.index.assign(fb.samples)
        tags = np.asarray(fb.tags)
        i, k = leaf
        k_dist = self.n_dist
        self.valid[i][k] += np.bincount(js[tags == ValidityTag.VALID], minlength=k_dist)
        self.object_invalid[i][k] += np.bincount(js[tags == ValidityTag.OBJECT_INVALID],
                                                 minlength=k_dist)
        self.const_invalid[i][k] += np.bincount(js[tags == ValidityTag.CONSTRAINT_INVALID],
                                                minlength=k_dist)
        self.robot_invalid += np.bincount(js[tags == ValidityTag.ROBOT_INVALID], minlength=k_dist)
        self.samples_ingested += len(tags)

    def counts(self, n) -> dict[str, float]:
        n = NodeId(*n)
        return {
            "valid": float(self.valid[n.foliation][n.coparam, n.dist]),
            "robot_invalid": float(self.robot_invalid[n.dist] + self.robot_invalid_prior[n.dist]),
            "object_invalid": float(self.object_invalid[n.foliation][n.coparam, n.dist]),
            "const_invalid": float(self.const_invalid[n.foliation][n.coparam, n.dist]),
        }

    def effective_robot_invalid(self) -> np.ndarray:
        return self.robot_invalid + self.robot_invalid_prior

    def total_count_mass(self) -> float:
        mass = float(self.robot_invalid.sum())
        for i in range(len(self.foliations)):
            mass += float(self.valid[i].sum() + self.object_invalid[i].sum()
                          + self.const_invalid[i].sum())
        return mass

    def is_virgin(self) -> bool:
        return self.total_count_mass() == 0 and not np.any(self.robot_invalid_prior)

    def reset_counts(self):
        for arrs in (self.valid, self.object_invalid, self.const_invalid):
            for a in arrs:
                a[:] = 0
        self.robot_invalid[:] = 0
        self.robot_invalid_prior[:] = 0
        self.samples_ingested = 0

    # -- serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema": MAP_SCHEMA,
            "roadmap": roadmap_to_dict(self.base),
            "problem": problem_to_dict(self.problem),
            "counts": {
                "valid": [a.tolist() for a in self.valid],
                "object_invalid": [a.tolist() for a in self.object_invalid],
                "const_invalid": [a.tolist() for a in self.const_invalid],
                "robot_invalid": self.robot_invalid.tolist(),
                "robot_invalid_prior": self.robot_invalid_prior.tolist(),
                "samples_ingested": self.samples_ingested,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FoliatedRepMap":
        if d.get("schema") != MAP_SCHEMA:
            raise ContractError(f"unsupported map schema {d.get('schema')!r}")
        m = cls.instantiate(roadmap_from_dict(d["roadmap"]), problem_from_dict(d["problem"]))
        c = d["counts"]
        m.valid = [np.array(a, float).reshape(len(f), m.n_dist)
                   for a, f in zip(c["valid"], m.foliations)]
        m.object_invalid = [np.array(a, float).reshape(len(f), m.n_dist)
                            for a, f in zip(c["object_invalid"], m.foliations)]
        m.const_invalid = [np.array(a, float).reshape(len(f), m.n_dist)
                           for a, f in zip(c["const_invalid"], m.foliations)]
        m.robot_invalid = np.array(c["robot_invalid"], float)
        m.robot_invalid_prior = np.array(c.get("robot_invalid_prior", [0.0] * m.n_dist), float)
        m.samples_ingested = int(c.get("samples_ingested", 0))
        return m

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "FoliatedRepMap":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def stats(self) -> dict:
        kinds = {k: sum(1 for e in self.edges if e.kind is k) for k in EdgeKind}
        return {
            "leaves": len(self.problem.leaves()),
            "distributions": self.n_dist,
            "nodes": len(self.nodes),
            "intra_leaf_edges": kinds[EdgeKind.INTRA_LEAF],
            "intersection_edges": kinds[EdgeKind.INTERSECTION],
            "samples_ingested": self.samples_ingested,
        }


def instantiate(base: BaseRoadmap, problem: Problem) -> FoliatedRepMap:
    return FoliatedRepMap.instantiate(base, problem)
