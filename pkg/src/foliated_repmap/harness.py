"""The plan / split / execute / learn loop, benchmark batteries and their CSV output."""

from __future__ import annotations

import csv
import gc
import io
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .atlas import BaseRoadmap, build_atlas
from .benchmarks import make_benchmark
from .foliation import ContractError
from .mdp import MdpParams, plan_sequence_mdp
from .motion import MotionPlannerConfig, plan_task
from .mtg import MtgParams, plan_sequence_mtg
from .problem import Problem
from .repmap import FoliatedRepMap, QueryRejected

CSV_SCHEMA = "runs/1"
TIMING_SCHEMA = "timings/1"
MAX_LOOPS = 100

PLANNERS = ("mtg", "mdp")
VARIANTS = ("mtg+frm", "mtg", "mdp+frm", "mdp")


def parse_variant(name: str) -> tuple[str, bool]:
    """``'mdp+frm'`` -> ``('mdp', True)``; a bare planner name is the baseline."""
    planner, _, suffix = name.lower().partition("+")
    if planner not in PLANNERS or suffix not in ("", "frm"):
        raise ContractError(f"unknown planner variant {name!r}")
    return planner, suffix == "frm"


@dataclass
class Budgets:
    motion: MotionPlannerConfig = field(default_factory=MotionPlannerConfig)
    mtg: MtgParams = field(default_factory=MtgParams)
    mdp: MdpParams = field(default_factory=MdpParams)
    max_loops: int = MAX_LOOPS

    def __post_init__(self):
        if not 1 <= self.max_loops <= MAX_LOOPS:
            raise ContractError(f"max_loops must be in 1..{MAX_LOOPS}")


@dataclass
class LoopLog:
    sequence: list[tuple]
    tasks: list[dict]
    success: bool


@dataclass
class RunRecord:
    problem: str
    seed: int
    variant: str
    success: bool
    loops_used: int
    wall_time: float
    total_path_length: float
    failure_reason: str = ""
    samples_ingested: int = 0
    # observed count mass of the map when the run ended (zero for baselines)
    count_mass: float = 0.0
    task_plan_time: float = 0.0
    motion_time: float = 0.0
    loops: list[LoopLog] = field(default_factory=list)

    def csv_row(self) -> dict:
        return {
            "schema": CSV_SCHEMA,
            "problem": self.problem,
            "seed": self.seed,
            "variant": self.variant,
            "success": int(self.success),
            "failure_reason": self.failure_reason,
            "loops_used": self.loops_used,
            "total_path_length": f"{self.total_path_length:.9f}",
            "samples_ingested": self.samples_ingested,
        }

    def timing_row(self) -> dict:
        return {
            "schema": TIMING_SCHEMA,
            "problem": self.problem,
            "seed": self.seed,
            "variant": self.variant,
            "wall_time": f"{self.wall_time:.6f}",
            "task_plan_time": f"{self.task_plan_time:.6f}",
            "motion_time": f"{self.motion_time:.6f}",
        }

    def successful_paths(self):
        """``(leaf, path)`` for every task path the motion planner returned."""
        for log in self.loops:
            for t in log.tasks:
                if t["success"]:
                    yield t["leaf"], t["path"]


RUN_FIELDS = list(RunRecord("", 0, "", False, 0, 0.0, 0.0).csv_row())
TIMING_FIELDS = list(RunRecord("", 0, "", False, 0, 0.0, 0.0).timing_row())


# -- experience seeding ------------------------------------------------------

def init_weights(m: FoliatedRepMap, scores: dict[int, float], kappa: float = 10.0) -> None:
    """Seed robot-invalid pseudo-counts ``(1 - score) * kappa`` per scored distribution."""
    if kappa < 0:
        raise ContractError("kappa must be non-negative")
    for j, s in scores.items():
        if not 0 <= int(j) < m.n_dist:
            raise ContractError(f"distribution {j} is not in the map")
        if not 0.0 <= float(s) <= 1.0:
            raise ContractError(f"score for distribution {j} must lie in [0, 1], got {s}")
    for j, s in scores.items():
        m.robot_invalid_prior[int(j)] += (1.0 - float(s)) * kappa


# -- single query ------------------------------------------------------------

def run_query(problem: Problem, variant: str, seed: int, base: BaseRoadmap,
              budgets: Budgets | None = None, repmap: FoliatedRepMap | None = None) -> RunRecord:
    """Run the full loop for one problem; at most ``max_loops`` task sequences are tried.

    Pass ``repmap`` to reuse (and keep) a map across queries; otherwise a
    fresh one is instantiated. Baseline variants never read or write counts.
    """
    budgets = budgets or Budgets()
    planner, with_frm = parse_variant(variant)
    m = repmap if repmap is not None else FoliatedRepMap.instantiate(base, problem)
    rng = np.random.default_rng(seed)
    rec = RunRecord(problem.name, seed, variant, False, 0, 0.0, 0.0)
    try:
        s_node, g_node = m.attach_start_goal(problem.start, problem.start_leaf,
                                             problem.goal, problem.goal_leaf)
    except QueryRejected:
        rec.failure_reason = "no-path"
        return rec

    def plan_sequence():
        if planner == "mtg":
            return plan_sequence_mtg(m, s_node, g_node, budgets.mtg, uniform=not with_frm)
        return plan_sequence_mdp(m, s_node, g_node, budgets.mdp, uniform=not with_frm)

    ingested_before = m.samples_ingested
    for loop in range(1, budgets.max_loops + 1):
        rec.loops_used = loop
        t0 = time.perf_counter()
        seq = plan_sequence()
        rec.task_plan_time += time.perf_counter() - t0
        if seq is None:
            rec.failure_reason = "no-path"
            break
        tasks = m.split_into_tasks(seq, problem.start, problem.goal)
        log = LoopLog([tuple(n) for n in seq], [], False)
        rec.loops.append(log)
        done = []
        for task in tasks:
            if not with_frm:
                task.distribution_list = []
            t0 = time.perf_counter()
            fb = plan_task(task, problem, budgets.motion, rng)
            rec.motion_time += time.perf_counter() - t0
            done.append((task, fb))
            log.tasks.append({
                "leaf": tuple(task.leaf),
                "success": fb.success,
                "samples": len(fb),
                "tags": fb.tag_counts(),
                "path": [np.asarray(q).copy() for q in fb.path] if fb.success else [],
                "path_length": fb.path_length if fb.success else 0.0,
            })
            if not fb.success:
                break
        if with_frm:
            for task, fb in done:
                m.ingest_feedback(task, fb)
        if len(done) == len(tasks) and done[-1][1].success:
            log.success = True
            rec.success = True
            rec.total_path_length = float(sum(t["path_length"] for t in log.tasks))
            break
    else:
        rec.failure_reason = "timeout-loops"
    rec.wall_time = rec.task_plan_time + rec.motion_time
    rec.samples_ingested = m.samples_ingested - ingested_before
    rec.count_mass = m.total_count_mass()
    return rec


# -- batteries ---------------------------------------------------------------

_ATLAS_CACHE: dict[tuple, BaseRoadmap] = {}


def default_atlas(n_pairs: int = 150, seed: int = 0, tau_edge: int = 2) -> BaseRoadmap:
    """Atlas for the benchmark workspace, built once per process."""
    key = (n_pairs, seed, tau_edge)
    if key not in _ATLAS_CACHE:
        env = make_benchmark("simple", 0).env
        _ATLAS_CACHE[key] = build_atlas(env, n_pairs=n_pairs, seed=seed, tau_edge=tau_edge)
    return _ATLAS_CACHE[key]


@dataclass
class BatteryResult:
    records: list[RunRecord]
    runs_csv: str
    timings_csv: str
    summary: dict[str, dict]
    problems: dict[int, Problem] = field(default_factory=dict)


def _to_csv(rows, fields) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def summarize(runs_csv: str, timings_csv: str | None = None) -> dict[str, dict]:
    """Per-variant summary computed from the CSV text alone."""
    runs = list(csv.DictReader(io.StringIO(runs_csv)))
    times: dict[tuple, float] = {}
    if timings_csv:
        for r in csv.DictReader(io.StringIO(timings_csv)):
            times[(r["problem"], r["seed"], r["variant"])] = float(r["wall_time"])
    out: dict[str, dict] = {}
    for v in dict.fromkeys(r["variant"] for r in runs):
        rows = [r for r in runs if r["variant"] == v]
        wins = [r for r in rows if r["success"] == "1"]
        wt = [times[(r["problem"], r["seed"], v)] for r in rows if (r["problem"], r["seed"], v) in times]
        out[v] = {
            "runs": len(rows),
            "successes": len(wins),
            "success_rate": len(wins) / len(rows),
            "mean_loops": statistics.fmean(int(r["loops_used"]) for r in rows),
            "mean_path_length": (statistics.fmean(float(r["total_path_length"]) for r in wins)
                                 if wins else float("nan")),
            "median_time": statistics.median(wt) if wt else float("nan"),
            "mean_time": statistics.fmean(wt) if wt else float("nan"),
        }
    return out


def format_summary(summary: dict[str, dict]) -> str:
    head = f"{'variant':<10} {'runs':>5} {'success':>8} {'loops':>7} {'med_t[s]':>9} {'mean_t[s]':>10} {'dist':>8}"
    lines = [head]
    for v, s in summary.items():
        lines.append(f"{v:<10} {s['runs']:>5} {s['success_rate']:>8.2f} {s['mean_loops']:>7.2f} "
                     f"{s['median_time']:>9.4f} {s['mean_time']:>10.4f} {s['mean_path_length']:>8.3f}")
    return "\n".join(lines)


def run_battery(category: str, variants=VARIANTS, n_runs: int = 50, seed0: int = 0,
                base: BaseRoadmap | None = None, budgets: Budgets | None = None,
                obstacles: float = 0.0, out_dir=None, plot: bool = False,
                progress=None) -> BatteryResult:
    """Run every variant on problems ``seed0 .. seed0 + n_runs - 1``.

    Problem ``k`` is generated from and motion-planned with seed ``seed0 + k``,
    so variants face identical problems and sampler streams. Rows are ordered
    by (seed, variant).
    """
    if n_runs < 1:
        raise ContractError("n_runs must be positive")
    variants = list(variants)
    for v in variants:
        parse_variant(v)
    base = base or default_atlas()
    records, problems = [], {}
    for k, seed in enumerate(range(seed0, seed0 + n_runs)):
        problem = make_benchmark(category, seed, obstacles)
        problems[seed] = problem
        # rotate execution order so no variant always runs cold; rows keep the listed order
        shift = k % len(variants)
        done = {}
        for v in variants[shift:] + variants[:shift]:
            gc.collect()
            done[v] = run_query(problem, v, seed, base, budgets)
            if progress:
                progress(done[v])
        records.extend(done[v] for v in variants)
    runs_csv = _to_csv([r.csv_row() for r in records], RUN_FIELDS)
    timings_csv = _to_csv([r.timing_row() for r in records], TIMING_FIELDS)
    result = BatteryResult(records, runs_csv, timings_csv, summarize(runs_csv, timings_csv), problems)
    if out_dir is not None:
        write_battery(result, Path(out_dir), category, plot)
    return result


def write_battery(result: BatteryResult, out_dir: Path, category: str, plot: bool = False) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / f"{category}_runs.csv", out_dir / f"{category}_timings.csv",
             out_dir / f"{category}_summary.txt"]
    paths[0].write_text(result.runs_csv)
    paths[1].write_text(result.timings_csv)
    paths[2].write_text(format_summary(result.summary) + "\n")
    if plot:
        paths.append(plot_battery(result, out_dir / f"{category}_times.png"))
    return paths


def plot_battery(result: BatteryResult, path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    variants = list(result.summary)
    fig, (ax_t, ax_s) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_t.boxplot([[r.wall_time for r in result.records if r.variant == v] for v in variants])
    ax_t.set_xticks(range(1, len(variants) + 1), variants)
    ax_t.set_ylabel("planning time [s]")
    ax_s.bar(variants, [result.summary[v]["success_rate"] for v in variants])
    ax_s.set_ylim(0, 1)
    ax_s.set_ylabel("success rate")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
