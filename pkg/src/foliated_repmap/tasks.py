"""Task and feedback records exchanged between the task and motion planners."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .atlas import GaussianComponent
from .environment import ValidityTag
from .foliation import LeafId


@dataclass
class Task:
    leaf: LeafId
    start_config: np.ndarray
    goal_config: np.ndarray
    distribution_list: list[GaussianComponent]
    nodes: list = field(default_factory=list)


@dataclass
class PlannerFeedback:
    success: bool
    samples: np.ndarray
    tags: np.ndarray
    path: list[np.ndarray] | None = None
    path_length: float = 0.0
    iterations: int = 0

    @classmethod
    def empty(cls, dim: int, success: bool = False):
        return cls(success, np.empty((0, dim)), np.empty(0, dtype=np.int8))

    def __len__(self):
        return len(self.tags)

    def tag_counts(self) -> dict[str, int]:
        return {t.name: int(np.sum(self.tags == t)) for t in ValidityTag}

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "samples": self.samples.tolist(),
            "tags": [ValidityTag(int(t)).name for t in self.tags],
            "path": None if self.path is None else [p.tolist() for p in self.path],
            "path_length": self.path_length,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlannerFeedback":
        samples = np.array(d["samples"], float)
        return cls(
            success=bool(d["success"]),
            samples=samples.reshape(len(d["tags"]), -1) if len(d["tags"]) else np.empty((0, 0)),
            tags=np.array([ValidityTag[t] for t in d["tags"]], dtype=np.int8),
            path=None if d.get("path") is None else [np.array(p) for p in d["path"]],
            path_length=float(d.get("path_length", 0.0)),
        )
