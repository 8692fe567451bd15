"""Foliated repetition roadmaps for task and motion planning on constrained manifolds.

Prior trajectories are summarised by a Gaussian mixture and a roadmap over its
components. For each query the roadmap is copied into every leaf of every
foliation, joined at intersection witnesses, and updated with the tagged
samples that the motion planner reports.
"""

from .atlas import BaseRoadmap, ClusteringConfig, GaussianComponent, build_atlas, fit_gmm
from .environment import Ball, Box, Environment, ValidityTag, check_validity
from .foliation import (CarriedObject, CoParameter, ConstraintFamily, ContractError, Foliation,
                        IntersectionWitness, LeafId, project_to_manifold)
from .harness import Budgets, run_battery, run_query
from .mdp import MdpParams, edge_probability, plan_sequence_mdp
from .motion import MotionPlannerConfig, plan_task
from .mtg import MtgParams, compute_node_score, plan_sequence_mtg
from .problem import Problem, load_problem, save_problem
from .repmap import FoliatedRepMap, NodeId, QueryRejected
from .tasks import PlannerFeedback, Task

__version__ = "0.1.0"

__all__ = [
    "Ball", "BaseRoadmap", "Box", "Budgets", "CarriedObject", "ClusteringConfig", "CoParameter",
    "ConstraintFamily", "ContractError", "Environment", "FoliatedRepMap", "Foliation",
    "GaussianComponent", "IntersectionWitness", "LeafId", "MdpParams", "MotionPlannerConfig",
    "MtgParams", "NodeId", "PlannerFeedback", "Problem", "QueryRejected", "Task", "ValidityTag",
    "build_atlas", "check_validity", "compute_node_score", "edge_probability", "fit_gmm",
    "load_problem", "plan_sequence_mdp", "plan_sequence_mtg", "plan_task", "project_to_manifold",
    "run_battery", "run_query", "save_problem",
]
