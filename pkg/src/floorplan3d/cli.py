"""Command line entry points.

Verbs:
    generate-bench  write the synthetic 48-core problem file
    run             execute a stage list against a problem file
    simulate        steady thermal solve of the floorplan in a problem file
    report          re-export metrics and thermal maps from a run directory
    select          apply a selection rule to a saved front CSV
"""
from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .benchmark import BenchmarkSpec, generate_benchmark
from .io import load_problem, save_problem
from .nsga2 import Individual
from .pipeline import ALL_STAGES, PipelineConfig, run_pipeline


def _cmd_generate_bench(args):
    spec = BenchmarkSpec()
    if args.seed is not None:
        pass  # generation is deterministic; seed only matters for run stages
    problem = generate_benchmark(spec)
    save_problem(problem, args.out)
    print(f"wrote {args.out}: {len(problem.fus)} blocks, {len(problem.netlist)} nets")


def _cmd_run(args):
    cfg = PipelineConfig(
        problem_path=args.config,
        out_dir=args.out,
        stages=args.stage or ["place-fu-star", "simulate", "report"],
        rng_seed=args.seed or 0,
        select_rule=args.select_rule,
        min_tsvs=args.min_tsvs,
        max_channels=args.max_channels,
        snapshot_fronts=args.snapshot_fronts,
    )
    run = run_pipeline(cfg)
    if run.metrics:
        for k in sorted(run.metrics):
            print(f"{k}: {run.metrics[k]}")
    print(f"artifacts in {args.out}")


def _cmd_simulate(args):
    cfg = PipelineConfig(problem_path=args.config, out_dir=args.out,
                         stages=["simulate"], rng_seed=args.seed or 0)
    run = run_pipeline(cfg)
    for k in sorted(run.metrics):
        print(f"{k}: {run.metrics[k]}")


def _cmd_report(args):
    cfg = PipelineConfig(problem_path=args.config, out_dir=args.out,
                         stages=["report"], rng_seed=args.seed or 0)
    run_pipeline(cfg)
    print(f"report written under {args.out}/report")


def _cmd_select(args):
    with open(args.front, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [tuple(float(v) for v in row) for row in reader]
    front = [Individual(None, r) for r in rows]
    if args.min_tsvs is not None:
        from .tsv_placer import select_solution
        chosen = select_solution(front, args.min_tsvs)
    elif args.max_channels is not None:
        from .lc_placer import select_solution
        chosen = select_solution(front, args.max_channels)
    else:
        finite = [i for i in front if np.isfinite(i.objectives[-1])]
        if not finite:
            sys.exit("front has no finite entries")
        chosen = min(finite, key=lambda i: i.objectives[-1])
    print(",".join(header))
    print(",".join(repr(v) for v in chosen.objectives))


def main(argv=None):
    parser = argparse.ArgumentParser(prog="floorplan3d")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("generate-bench", help="write the synthetic benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_generate_bench)

    p = sub.add_parser("run", help="run pipeline stages")
    p.add_argument("--config", required=True, help="problem JSON file")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--stage", action="append", choices=ALL_STAGES,
                   help="stage to run (repeatable, in order)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--select-rule", default="min-temperature")
    p.add_argument("--min-tsvs", type=int)
    p.add_argument("--max-channels", type=int)
    p.add_argument("--snapshot-fronts", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("simulate", help="steady solve of a problem file's floorplan")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("report", help="export metrics and maps from a run directory")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("select", help="apply a selection rule to a front CSV")
    p.add_argument("--front", required=True)
    p.add_argument("--min-tsvs", type=int)
    p.add_argument("--max-channels", type=int)
    p.set_defaults(func=_cmd_select)

    args = parser.parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
