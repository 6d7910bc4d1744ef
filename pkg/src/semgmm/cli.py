"""Command-line entry point.

Subcommands: gen, init, normalize, fit-em, fit-sem, compare, bounds, speed.
Exit codes: 0 success, 1 usage error, 2 data error, 3 unrecoverable
degeneracy.  All randomness derives from --seed.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import (
    ExperimentPlan,
    prepare_data,
    run_bound_experiment,
    run_diff_experiment,
    run_likelihood_experiment,
    run_speed_experiment,
)
from .em import em_fit
from .ingest import load_csv, load_model, normalize, save_csv, save_model
from .model import DataError, DataSet, DegeneracyError, InvalidModelError
from .rng import substream
from .sem import SemConfig, sem_fit
from .synth import GenSpec, generate_mixture, initialize, sample_dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DEGENERACY = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    p = _Parser(prog="semgmm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, default=Path("."))
    common.add_argument("--rounds", type=int, default=50)
    common.add_argument("--k", type=int, default=3)
    common.add_argument("--delta", type=float, default=None)

    g = sub.add_parser("gen", parents=[common], help="generate a synthetic mixture and data set")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--weight-mode", choices=("balanced", "unbalanced"), default="balanced")
    g.add_argument("--overlap", type=float, default=1.5)

    i = sub.add_parser("init", parents=[common], help="draw an initial model from a data set")
    i.add_argument("--data", type=Path, required=True)

    nrm = sub.add_parser("normalize", parents=[common], help="min-max normalize a data set to [0, 1]")
    nrm.add_argument("--data", type=Path, required=True)

    for name in ("fit-em", "fit-sem"):
        f = sub.add_parser(name, parents=[common], help=f"run {name.split('-')[1]} for a fixed round count")
        f.add_argument("--data", type=Path, required=True)
        f.add_argument("--model", type=Path, required=True)

    for name, hlp in (
        ("compare", "paired likelihood and difference traces"),
        ("bounds", "bound-vs-actual mean distance trace"),
        ("speed", "multiplication-count and wall-clock trace"),
    ):
        c = sub.add_parser(name, parents=[common], help=hlp)
        c.add_argument("--data", type=Path, default=None)
        c.add_argument("--gen", metavar="D,K,N", default=None,
                       help="synthesize data instead of loading --data")
        c.add_argument("--inits", type=int, default=3)
        c.add_argument("--runs", type=int, default=10)
        c.add_argument("--jobs", type=int, default=1)
        c.add_argument("--profile", choices=("ci", "full"), default=None)
    return p


def _experiment_plan(args) -> ExperimentPlan:
    if (args.data is None) == (args.gen is None):
        raise SystemExit(EXIT_USAGE)
    if args.gen is not None:
        try:
            d, k, n = (int(v) for v in args.gen.split(","))
        except ValueError:
            print("--gen expects D,K,N", file=sys.stderr)
            raise SystemExit(EXIT_USAGE) from None
        dataset: str | GenSpec = GenSpec(d=d, k=k, n=n, rng_seed=args.seed)
        args.k = k
    else:
        dataset = str(args.data)
    plan = ExperimentPlan(
        dataset=dataset,
        k=args.k,
        rounds=args.rounds,
        n_inits=args.inits,
        runs_per_init=args.runs,
        master_seed=args.seed,
        delta=args.delta,
        out_dir=str(args.out),
        n_jobs=args.jobs,
    )
    if args.profile == "ci":
        plan = plan.ci_scale()
    elif args.profile == "full":
        plan = plan.full_scale()
    return plan


def _cmd_gen(args) -> int:
    spec = GenSpec(d=args.d, k=args.k, n=args.n,
                   weight_mode=args.weight_mode, overlap=args.overlap,
                   rng_seed=args.seed)
    truth = generate_mixture(spec, substream(args.seed, 0, 0))
    data, labels = sample_dataset(truth, args.n, substream(args.seed, 0, 1))
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    save_model(truth, out / "truth_model.txt")
    save_csv(data, out / "data.csv")
    with open(out / "labels.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{v}\n" for v in labels)
    return EXIT_OK


def _cmd_init(args) -> int:
    data = load_csv(args.data)
    model = initialize(data, args.k, substream(args.seed, 1, 0))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, args.out if args.out.suffix else args.out / "init_model.txt")
    return EXIT_OK


def _cmd_normalize(args) -> int:
    data = load_csv(args.data)
    normalized, record = normalize(data)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    save_csv(normalized, out / "normalized.csv")
    record.save(out / "normalization.csv")
    return EXIT_OK


def _cmd_fit(args, stochastic: bool) -> int:
    data = load_csv(args.data)
    model0 = load_model(args.model)
    if stochastic:
        traj = sem_fit(model0, data, args.rounds, SemConfig(rng_seed=args.seed))
    else:
        traj = em_fit(model0, data, args.rounds, SemConfig(rng_seed=args.seed))
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    save_model(traj[-1] if traj else model0, out / "final_model.txt")
    return EXIT_OK


def _cmd_compare(args) -> int:
    plan = _experiment_plan(args)
    data = prepare_data(plan)
    run_likelihood_experiment(plan, data)
    run_diff_experiment(plan, data)
    return EXIT_OK


def _cmd_bounds(args) -> int:
    plan = _experiment_plan(args)
    run_bound_experiment(plan)
    return EXIT_OK


def _cmd_speed(args) -> int:
    plan = _experiment_plan(args)
    run_speed_experiment(plan)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "init":
            return _cmd_init(args)
        if args.command == "normalize":
            return _cmd_normalize(args)
        if args.command == "fit-em":
            return _cmd_fit(args, stochastic=False)
        if args.command == "fit-sem":
            return _cmd_fit(args, stochastic=True)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "bounds":
            return _cmd_bounds(args)
        if args.command == "speed":
            return _cmd_speed(args)
        return EXIT_USAGE
    except (DataError, InvalidModelError, FileNotFoundError) as exc:
        print(f"semgmm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DegeneracyError as exc:
        print(f"semgmm: unrecoverable degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERACY


if __name__ == "__main__":
    raise SystemExit(main())
