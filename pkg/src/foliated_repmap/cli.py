"""Command line entry point: build-atlas, plan, battery, inspect, export-problem."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .atlas import ClusteringConfig, build_atlas, load_roadmap, save_roadmap
from .benchmarks import make_benchmark
from .foliation import ContractError
from .harness import MAX_LOOPS, VARIANTS, Budgets, default_atlas, format_summary, run_battery, run_query
from .mdp import MdpParams
from .motion import MotionPlannerConfig
from .mtg import MtgParams
from .problem import CATEGORIES, ProblemFormatError, load_problem, save_problem
from .repmap import FoliatedRepMap

OUTPUT_ENV = "FRM_OUTPUT_DIR"


def output_dir(arg: str | None) -> Path:
    """The environment variable wins over the flag, which wins over ``./frm_out``."""
    return Path(os.environ.get(OUTPUT_ENV) or arg or "frm_out")


def _add_planner_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("planner settings")
    mp = MotionPlannerConfig
    g.add_argument("--rho", type=float, default=mp.rho, help="share of samples drawn from the distribution list")
    g.add_argument("--step-size", type=float, default=mp.step_size)
    g.add_argument("--motion-iters", type=int, default=mp.max_iterations, help="RRT iteration cap per task")
    g.add_argument("--motion-time", type=float, default=mp.time_budget, help="RRT time budget per task [s]")
    g.add_argument("--v-minus", type=float, default=MtgParams.v_minus, help="MTG weight of a valid sample")
    g.add_argument("--v-plus", type=float, default=MtgParams.v_plus, help="MTG weight of an invalid sample")
    g.add_argument("--goal-reward", type=float, default=MdpParams.goal_reward)
    g.add_argument("--deadend-penalty", type=float, default=MdpParams.deadend_penalty)
    g.add_argument("--discount", type=float, default=MdpParams.discount)
    g.add_argument("--vi-tolerance", type=float, default=MdpParams.vi_tolerance)
    g.add_argument("--vi-max-iters", type=int, default=MdpParams.vi_max_iters)
    g.add_argument("--max-loops", type=int, default=MAX_LOOPS)


def _add_atlas_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--atlas", type=Path, help="roadmap file from build-atlas (default: build in memory)")
    p.add_argument("--tau-edge", type=int, default=2, help="votes needed for a roadmap edge")
    p.add_argument("--atlas-pairs", type=int, default=150)
    p.add_argument("--atlas-seed", type=int, default=0)


def budgets_from_args(a) -> Budgets:
    return Budgets(
        motion=MotionPlannerConfig(rho=a.rho, step_size=a.step_size, time_budget=a.motion_time,
                                   max_iterations=a.motion_iters),
        mtg=MtgParams(a.v_minus, a.v_plus),
        mdp=MdpParams(a.goal_reward, a.deadend_penalty, a.discount, a.vi_tolerance, a.vi_max_iters),
        max_loops=a.max_loops,
    )


def _atlas(a):
    if a.atlas is not None:
        return load_roadmap(a.atlas)
    return default_atlas(a.atlas_pairs, a.atlas_seed, a.tau_edge)


def cmd_build_atlas(a) -> int:
    env = make_benchmark("simple", 0).env
    rm = build_atlas(env, n_pairs=a.atlas_pairs, seed=a.atlas_seed, tau_edge=a.tau_edge,
                     clustering=ClusteringConfig(k_min=a.k_min, k_max=a.k_max, seed=a.atlas_seed))
    path = a.out or output_dir(a.output_dir) / "roadmap.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_roadmap(rm, path, {"pairs": a.atlas_pairs, "seed": a.atlas_seed, "tau_edge": a.tau_edge})
    print(f"{len(rm.components)} distributions, {len(rm.edges)} edges -> {path}")
    return 0


def cmd_plan(a) -> int:
    problem = load_problem(a.problem) if a.problem else make_benchmark(a.category, a.seed)
    base = _atlas(a)
    m = FoliatedRepMap.instantiate(base, problem)
    rec = run_query(problem, a.variant, a.seed, base, budgets_from_args(a), repmap=m)
    print(f"{problem.name} {a.variant}: success={rec.success} loops={rec.loops_used} "
          f"time={rec.wall_time:.3f}s" + (f" reason={rec.failure_reason}" if rec.failure_reason else ""))
    for i, log in enumerate(rec.loops, 1):
        leaves = " ".join(f"{t['leaf']}:{'ok' if t['success'] else 'fail'}" for t in log.tasks)
        print(f"  loop {i}: {leaves}")
    if a.save_map:
        m.save(a.save_map)
    if a.save_path and rec.success:
        # the final loop is the one that reached the goal
        waypoints = [{"leaf": list(t["leaf"]), "path": [list(map(float, q)) for q in t["path"]]}
                     for t in rec.loops[-1].tasks]
        Path(a.save_path).write_text(json.dumps(waypoints) + "\n")
    return 0 if rec.success else 1


def cmd_battery(a) -> int:
    base = _atlas(a)
    budgets = budgets_from_args(a)
    out = output_dir(a.output_dir)
    for cat in a.categories:
        res = run_battery(cat, a.variants, a.runs, a.seed, base, budgets, a.obstacles, out, a.plot)
        print(f"[{cat}]")
        print(format_summary(res.summary))
    print(f"results in {out}")
    return 0


def cmd_inspect(a) -> int:
    if a.map:
        print(json.dumps(FoliatedRepMap.load(a.map).stats(), indent=1))
        return 0
    base = _atlas(a)
    nb = base.neighbors()
    print(f"distributions: {len(base.components)}  edges: {len(base.edges)}")
    for c in base.components:
        mean = " ".join(f"{x:.2f}" for x in c.mean)
        print(f"  {c.id:>3}  w={c.weight:.3f}  mean=[{mean}]  neighbors={nb[c.id]}")
    if a.problem or a.category:
        problem = load_problem(a.problem) if a.problem else make_benchmark(a.category, a.seed)
        print(json.dumps(FoliatedRepMap.instantiate(base, problem).stats(), indent=1))
    return 0


def cmd_export_problem(a) -> int:
    problem = make_benchmark(a.category, a.seed, a.obstacles)
    path = a.out or output_dir(a.output_dir) / f"{problem.name}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_problem(problem, path)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frm", description=__doc__)
    parser.add_argument("--output-dir", help=f"output directory (overridden by ${OUTPUT_ENV})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-atlas", help="dataset, mixture fit and roadmap to a file")
    _add_atlas_flags(p)
    p.add_argument("--k-min", type=int, default=6)
    p.add_argument("--k-max", type=int, default=14)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_build_atlas)

    p = sub.add_parser("plan", help="run one query")
    p.add_argument("--problem", type=Path, help="problem JSON (default: a generated benchmark)")
    p.add_argument("--category", choices=CATEGORIES, default="crossing")
    p.add_argument("--variant", choices=VARIANTS, default="mtg+frm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--save-map", type=Path)
    p.add_argument("--save-path", type=Path, help="write the waypoints of a successful plan")
    _add_atlas_flags(p)
    _add_planner_flags(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("battery", help="run every variant over seeded benchmarks")
    p.add_argument("--categories", nargs="+", choices=CATEGORIES, default=list(CATEGORIES))
    p.add_argument("--variants", nargs="+", choices=VARIANTS, default=list(VARIANTS))
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0, help="first problem seed")
    p.add_argument("--obstacles", type=float, default=0.0, help="extra clutter for the simple benchmark")
    p.add_argument("--plot", action="store_true")
    _add_atlas_flags(p)
    _add_planner_flags(p)
    p.set_defaults(func=cmd_battery)

    p = sub.add_parser("inspect", help="print roadmap or map statistics")
    p.add_argument("--map", type=Path, help="saved FoliatedRepMap")
    p.add_argument("--problem", type=Path)
    p.add_argument("--category", choices=CATEGORIES)
    p.add_argument("--seed", type=int, default=0)
    _add_atlas_flags(p)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("export-problem", help="write a generated benchmark problem as JSON")
    p.add_argument("--category", choices=CATEGORIES, default="crossing")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--obstacles", type=float, default=0.0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_export_problem)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ContractError, ProblemFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
