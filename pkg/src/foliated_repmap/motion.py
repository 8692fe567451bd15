"""Constrained bidirectional RRT for one task, with distribution-biased sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import LeafTagger, ValidityTag
from .foliation import ContractError, DEFAULT_PROJECTION_ITERS, LeafProjector
from .problem import Problem
from .rrt import SegmentChecker, bidirectional_rrt, path_length, shortcut
from .tasks import PlannerFeedback, Task


@dataclass
class MotionPlannerConfig:
    rho: float = 0.5
    step_size: float = 0.5
    # seconds; the iteration cap normally binds first so runs stay reproducible
    time_budget: float = 2.0
    max_iterations: int = 100
    goal_bias: float = 0.05
    projection_iters: int = DEFAULT_PROJECTION_ITERS
    smoothing_attempts: int = 50

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ContractError("rho must be in [0, 1]")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ContractError("goal_bias must be in [0, 1]")
        if self.step_size <= 0 or self.time_budget <= 0 or self.max_iterations < 1:
            raise ContractError("step_size, time_budget and max_iterations must be positive")


class _GaussianSampler:
    def __init__(self, components):
        self.means = [c.mean for c in components]
        self.chols = [np.linalg.cholesky(c.covariance) for c in components]

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        k = int(rng.integers(len(self.means)))
        return self.means[k] + self.chols[k] @ rng.standard_normal(self.means[k].shape[0])


def sample_biased(task: Task, cfg: MotionPlannerConfig, rng: np.random.Generator,
                  lower, upper, _cache: dict | None = None) -> np.ndarray:
    """Raw draw: a listed Gaussian with probability ``rho``, else uniform over the bounds.

    With an empty distribution list every draw is uniform.
    """
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    if task.distribution_list and rng.random() < cfg.rho:
        sampler = None if _cache is None else _cache.get("sampler")
        if sampler is None:
            sampler = _GaussianSampler(task.distribution_list)
            if _cache is not None:
                _cache["sampler"] = sampler
        return sampler.draw(rng)
    return rng.uniform(lower, upper)


def plan_task(task: Task, problem: Problem, cfg: MotionPlannerConfig,
              rng: np.random.Generator) -> PlannerFeedback:
    """Plan inside ``task.leaf`` and report every evaluated configuration with its tag."""
    env, fols, leaf = problem.env, problem.foliations, task.leaf
    cons = fols[leaf.foliation].constraint
    dim = problem.dim

    tagger = LeafTagger(env, leaf, fols)
    project = LeafProjector(leaf, fols, cfg.projection_iters)

    start = np.asarray(task.start_config, float)
    goal = np.asarray(task.goal_config, float)
    ends = np.array([start, goal])
    end_tags = tagger(ends)
    if np.any(end_tags != ValidityTag.VALID):
        bad = end_tags != ValidityTag.VALID
        return PlannerFeedback(False, ends[bad], end_tags[bad])
    if np.max(np.abs(goal - start)) <= cons.tolerance:
        return PlannerFeedback(True, np.empty((0, dim)), np.empty(0, dtype=np.int8),
                               path=[start.copy()], path_length=0.0)

    cache: dict = {}
    lo, hi = env.lower, env.upper
    res = bidirectional_rrt(
        start, goal,
        lambda: sample_biased(task, cfg, rng, lo, hi, cache),
        tagger, rng,
        project=project,
        step_size=cfg.step_size,
        max_iterations=cfg.max_iterations,
        time_budget=cfg.time_budget,
        goal_bias=cfg.goal_bias,
        interpolate_projected=cons.kind != "affine",
    )
    samples = np.array(res.samples).reshape(len(res.samples), dim)
    tags = np.array(res.tags, dtype=np.int8)
    if not res.success:
        return PlannerFeedback(False, samples, tags, iterations=res.iterations)
    checker = SegmentChecker(tagger, cfg.step_size / 4.0,
                             project if cons.kind != "affine" else None)
    # smoothing uses its own stream so its draws never shift the planner's
    smooth_rng = np.random.default_rng(rng.integers(2**63))
    path = shortcut(res.path, checker, smooth_rng, cfg.smoothing_attempts, cfg.step_size)
    return PlannerFeedback(True, samples, tags, path=path, path_length=path_length(path),
                           iterations=res.iterations)
