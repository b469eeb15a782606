"""Command-line front end.

Commands: solve, simulate, diversity, metrics, bench.  Each command writes
machine-readable JSON to --out when given (otherwise to stdout) and prints
a short human-readable summary.  Exit codes: 0 success, 1 validation
failure, 2 non-convergence, 3 I/O failure.  The environment variable
STRATA_SEED is used when a seed flag is not supplied.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .diversity import coverspecies, eigenspecies
from .dynamics import propagate, simulate_agents, trait_distribution
from .errors import StrataError
from .model import binarize_noncumulative
from .optimizer import GoalFunction, solve
from .scenario import (
    load_json_document,
    load_scenario,
    plan_file_from_dict,
    report_to_dict,
    write_json_document,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NOT_CONVERGED = 2
EXIT_IO = 3


def _env_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("STRATA_SEED")
    return int(env) if env else 0


def _emit(payload: dict, out_path: str | None) -> None:
    if out_path is None:
        json.dump(payload, sys.stdout, indent=2, allow_nan=False)
        sys.stdout.write("\n")
    else:
        write_json_document(payload, out_path)


def _write_text(text: str, path: Path) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _format_matrix(matrix: np.ndarray, width: int = 10) -> str:
    rows = []
    for row in np.atleast_2d(matrix):
        rows.append(" ".join(f"{value:>{width}.4g}" for value in row))
    return "\n".join(rows)


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------


def _cmd_solve(args) -> int:
    scenario = load_scenario(args.scenario)
    goal = GoalFunction.parse(args.goal) if args.goal else scenario.goal
    report = solve(scenario, goal=goal)
    payload = report_to_dict(report, scenario)
    payload["goal"] = goal.value
    _emit(payload, args.out)
    if args.out is not None:
        status = "converged" if report.converged else "NOT converged"
        print(f"solve: {status} at settle_time {report.plan.settle_time:.6g}")
        for name, value in sorted(report.residuals.items()):
            print(f"  {name:>16s} = {value:.6g}")
        print(f"  wrote {args.out}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _cmd_simulate(args) -> int:
    plan, scenario = plan_file_from_dict(load_json_document(args.plan))
    if scenario is None:
        print("plan file does not embed a scenario; cannot simulate", file=sys.stderr)
        return EXIT_VALIDATION
    plan.validate_against(scenario.graph)
    t = float(args.time)
    if args.agent_level:
        state = simulate_agents(scenario.initial_state, plan, t, _env_seed(args.seed))
    else:
        state = propagate(scenario.initial_state, plan, t)
    model = binarize_noncumulative(scenario.model)
    traits = trait_distribution(state, model)
    payload = {
        "schema_version": 1,
        "time": t,
        "agent_level": bool(args.agent_level),
        "counts": state.counts.tolist(),
        "trait_mean": traits.mean.tolist(),
        "trait_variance": traits.variance.tolist(),
    }
    _emit(payload, args.out)
    if args.out is not None:
        print(f"state at t={t:g} ({'agents' if args.agent_level else 'mean field'}):")
        print(_format_matrix(state.counts))
        print(f"  wrote {args.out}")
    return EXIT_OK


def _result_payload(result, names) -> dict:
    return {
        "cardinality": result.cardinality,
        "member_species": list(result.member_species),
        "member_names": [names[s] for s in result.member_species],
        "combination_matrix": result.combination_matrix.tolist(),
        "reduced_traits": result.reduced_traits.tolist(),
    }


def _cmd_diversity(args) -> int:
    scenario = load_scenario(args.scenario)
    eig = eigenspecies(scenario.model, alpha_max=args.alpha_max)
    cover = coverspecies(scenario.model, alpha_max=args.alpha_max)
    names = scenario.model.species_names
    payload = {
        "schema_version": 1,
        "eigenspecies": _result_payload(eig, names),
        "coverspecies": _result_payload(cover, names),
    }
    _emit(payload, args.out)
    if args.out is not None:
        print(f"eigenspecies: {eig.cardinality} {[names[s] for s in eig.member_species]}")
        print(f"coverspecies: {cover.cardinality} {[names[s] for s in cover.member_species]}")
        print(f"  wrote {args.out}")
    return EXIT_OK


def _cmd_metrics(args) -> int:
    plan, _ = plan_file_from_dict(load_json_document(args.plan))
    scenario = load_scenario(args.scenario)
    plan.validate_against(scenario.graph)
    times = np.linspace(0.0, experiments.GRID_STRETCH * plan.settle_time, args.points)
    series = experiments.mismatch_metrics(
        plan, scenario, times, q_samples=args.q_samples, seed=_env_seed(args.seed)
    )
    payload = {"schema_version": 1, "series": experiments.series_to_dict(series)}
    _emit(payload, args.out)
    if args.out is not None:
        last = len(series.times) - 1
        print(f"mismatch at t={series.times[last]:g}: "
              f"full {series.delta_g1_mean[last]:.3f}%  "
              f"deficit {series.delta_g2_mean[last]:.3f}%")
        print(f"  wrote {args.out}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    params = experiments.BenchParams(
        num_tasks=args.tasks,
        num_traits=args.traits,
        num_species=args.species,
        agents_per_species=args.agents,
        runs=args.runs,
        rate_ceiling=args.rate_ceiling,
        eps_fraction=args.eps_fraction,
        q_samples=args.q_samples,
        seed=_env_seed(args.seed),
        meta_iterations=args.meta_iterations,
    )
    strategies = tuple(args.strategy) if args.strategy else ("strata", "baseline", "random")
    report = experiments.run_benchmark(params, strategies=strategies)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json_document(experiments.bench_report_to_dict(report), out_dir / "report.json")
    _write_text(experiments.curves_to_csv(report), out_dir / "curves.csv")
    for goal in (GoalFunction.EXACT, GoalFunction.MINIMUM):
        experiments.plot_curves_svg(report, goal, out_dir / f"plots_{goal.value}.svg")

    print(f"benchmark: {params.runs} runs, strategies {', '.join(strategies)}")
    for key in sorted(report.converged_counts):
        print(f"  {key:>20s}: {report.converged_counts[key]} converged")
    for goal_name, stats in sorted(report.z_tests.items()):
        print(f"  z-test ({goal_name}): z={stats['z']:.3f}, p={stats['p_value']:.4g}")
    print(f"  wrote {out_dir / 'report.json'}, {out_dir / 'curves.csv'}, SVG plots")
    total_converged = sum(report.converged_counts.values())
    return EXIT_OK if total_converged > 0 else EXIT_NOT_CONVERGED


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strata",
        description="Trait-based task assignment for heterogeneous agent teams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="optimize switching rates for a scenario")
    p_solve.add_argument("scenario", help="scenario JSON file")
    p_solve.add_argument("--goal", choices=["exact", "minimum", "min"], default=None,
                         help="override the scenario's goal")
    p_solve.add_argument("--out", default=None, help="write the plan JSON here")
    p_solve.set_defaults(func=_cmd_solve)

    p_sim = sub.add_parser("simulate", help="propagate a plan's scenario to a time")
    p_sim.add_argument("plan", help="plan JSON produced by solve")
    p_sim.add_argument("--time", type=float, required=True, help="time to simulate to")
    p_sim.add_argument("--agent-level", action="store_true",
                       help="simulate individual agents instead of the mean field")
    p_sim.add_argument("--seed", type=int, default=None, help="agent-level RNG seed")
    p_sim.add_argument("--out", default=None)
    p_sim.set_defaults(func=_cmd_simulate)

    p_div = sub.add_parser("diversity", help="compute team diversity measures")
    p_div.add_argument("scenario")
    p_div.add_argument("--alpha-max", type=int, default=None,
                       help="cap on combination coefficients")
    p_div.add_argument("--out", default=None)
    p_div.set_defaults(func=_cmd_diversity)

    p_met = sub.add_parser("metrics", help="mismatch metrics of a plan against a scenario")
    p_met.add_argument("plan")
    p_met.add_argument("scenario")
    p_met.add_argument("--points", type=int, default=experiments.GRID_POINTS)
    p_met.add_argument("--q-samples", type=int, default=10)
    p_met.add_argument("--seed", type=int, default=None)
    p_met.add_argument("--out", default=None)
    p_met.set_defaults(func=_cmd_metrics)

    p_bench = sub.add_parser("bench", help="run the randomized strategy comparison")
    p_bench.add_argument("--runs", type=int, default=100)
    p_bench.add_argument("--tasks", type=int, default=8)
    p_bench.add_argument("--traits", type=int, default=5)
    p_bench.add_argument("--species", type=int, default=5)
    p_bench.add_argument("--agents", type=int, default=200)
    p_bench.add_argument("--rate-ceiling", type=float, default=0.02)
    p_bench.add_argument("--eps-fraction", type=float, default=0.05)
    p_bench.add_argument("--q-samples", type=int, default=10)
    p_bench.add_argument("--meta-iterations", type=int, default=20)
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.add_argument("--strategy", action="append",
                         choices=["strata", "baseline", "random"],
                         help="repeatable; default runs all three")
    p_bench.add_argument("--out-dir", default="bench_output",
                         help="directory for report.json, curves.csv, and SVG plots")
    p_bench.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StrataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
