"""Command-line pipeline: sample -> train -> solve -> validate, plus auction.

Every subcommand is deterministic given its flags and ``--seed``; stage seeds
are derived from that one master seed.  Each run writes a JSON manifest next
to its primary output recording the resolved flags, seeds, output paths,
wall time and tool version.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import dispatch, sampler, surrogate
from .auction import AuctionResult, CapacityOffer, DemandSegment, clear_auction
from .equilibrium import (
    EquilibriumResult,
    ExactProfitEvaluator,
    HybridProfitEvaluator,
    diagonalize,
)
from .optimizer import DeConfig, derived_seed
from .sampler import DatasetError
from .scenario import Scenario, ScenarioError, load_scenario
from .surrogate import GbtRegressor, ModelFormatError, evaluate, load_model, save_model

_STAGE_SAMPLE, _STAGE_SPLIT, _STAGE_TRAIN, _STAGE_SOLVE = 101, 102, 103, 104


def _default_workers() -> int:
    return int(os.environ.get("CAPEXEQ_WORKERS", "1"))


def _write_manifest(primary_output: Path, subcommand: str, args: argparse.Namespace,
                    seeds: dict, outputs: list[str], started: float) -> None:
    manifest = {
        "tool": "capexeq",
        "version": __version__,
        "subcommand": subcommand,
        "args": {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"},
        "seeds": seeds,
        "outputs": outputs,
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    path = Path(str(primary_output) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --- sample -----------------------------------------------------------------

def cmd_sample(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    scenario = load_scenario(args.scenario)
    sample_seed = derived_seed(args.seed, _STAGE_SAMPLE)
    buildouts = sampler.sample_buildouts(args.n, scenario.sampling_bounds, sample_seed, scenario.pairs)
    ds = sampler.generate_dataset(scenario, buildouts, workers=args.workers)
    sampler.write_dataset(ds, args.output)
    outputs = [str(args.output)]
    print(f"wrote {len(ds)} rows to {args.output}")

    if args.payout_sweep:
        totals = np.arange(args.sweep_min, args.sweep_max + args.sweep_step / 2, args.sweep_step)
        rows = dispatch.payout_sweep(scenario, totals.tolist())
        with open(args.payout_sweep, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["total_mw", "revenue", "operational_profit"])
            for total, revenue, profit in rows:
                writer.writerow([repr(float(total)), repr(float(revenue)), repr(float(profit))])
        outputs.append(str(args.payout_sweep))
        print(f"wrote payout sweep ({len(rows)} points) to {args.payout_sweep}")

    _write_manifest(Path(args.output), "sample", args, {"sample": sample_seed}, outputs, started)
    return 0


# --- train ------------------------------------------------------------------

def _train_one(ds: sampler.Dataset, target: str, args) -> tuple[GbtRegressor, float, float]:
    split_seed = derived_seed(args.seed, _STAGE_SPLIT)
    train, test = sampler.split_dataset(ds, test_fraction=args.test_fraction, seed=split_seed)
    if args.total_feature:
        X_train, names = surrogate.with_total_feature(train.inputs, train.feature_names)
        X_test = surrogate.with_total_feature(test.inputs)
    else:
        X_train, names = train.inputs, train.feature_names
        X_test = test.inputs
    model = GbtRegressor(
        n_rounds=args.rounds,
        max_depth=args.depth,
        learning_rate=args.learning_rate,
        l2_leaf_reg=args.l2,
        min_split_gain=args.min_split_gain,
        early_stopping_rounds=args.early_stopping,
        seed=derived_seed(args.seed, _STAGE_TRAIN),
    )
    model.fit(
        X_train,
        train.target_column(target),
        eval_set=(X_test, test.target_column(target)),
        feature_names=names,
    )
    err_train = evaluate(model, X_train, train.target_column(target))
    err_test = evaluate(model, X_test, test.target_column(target))
    return model, err_train, err_test


def cmd_train(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    ds = sampler.read_dataset(args.dataset)
    targets = list(ds.target_names) if args.target == "all" else [args.target]
    outputs = []
    for target in targets:
        if target not in ds.target_names:
            raise DatasetError(f"dataset has no target column '{target}'")
        model, err_train, err_test = _train_one(ds, target, args)
        if args.target == "all":
            out_dir = Path(args.output)
            out_dir.mkdir(parents=True, exist_ok=True)
            out_path = out_dir / f"{target}.json"
        else:
            out_path = Path(args.output)
        save_model(model, out_path)
        outputs.append(str(out_path))
        print(
            f"{target}: {len(model.trees_)} trees, "
            f"train error {err_train:.4%}, test error {err_test:.4%} -> {out_path}"
        )
    _write_manifest(Path(outputs[0]), "train", args,
                    {"split": derived_seed(args.seed, _STAGE_SPLIT),
                     "train": derived_seed(args.seed, _STAGE_TRAIN)},
                    outputs, started)
    return 0


# --- solve / validate ---------------------------------------------------------

def _load_models(scenario: Scenario, models_dir: Path) -> dict:
    models = {}
    for (region, tech), name in zip(scenario.pairs, scenario.target_names):
        path = models_dir / f"{name}.json"
        if not path.exists():
            raise ModelFormatError(f"missing surrogate model file {path}")
        models[(region, tech)] = load_model(path)
    return models


def _write_solution(path: Path, scenario: Scenario, result: EquilibriumResult, evaluator) -> None:
    pairs = scenario.pairs
    X = result.invest_matrix(pairs)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["genco"] + list(scenario.feature_names) + ["objective"])
        for j in range(scenario.genco_count):
            profit = evaluator.bind(j, X)(X[j])
            writer.writerow([j + 1] + [repr(float(v)) for v in X[j]] + [repr(float(profit))])


def _write_trace(path: Path, scenario: Scenario, result: EquilibriumResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["sweep", "total_mw"] + [f"objective_{j + 1}" for j in range(scenario.genco_count)]
        writer.writerow(header)
        for point in result.trace:
            writer.writerow(
                [point.sweep, repr(float(point.total_mw))]
                + [repr(float(v)) for v in point.objectives]
            )


def _read_solution(path: Path, scenario: Scenario) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DatasetError(f"{path}: empty solution file")
        want = ["genco"] + list(scenario.feature_names)
        if header[: len(want)] != want:
            raise DatasetError(
                f"{path}: solution header {header} does not match scenario columns {want}"
            )
        rows = {int(row[0]): [float(v) for v in row[1 : len(want)]] for row in reader}
    if sorted(rows) != list(range(1, scenario.genco_count + 1)):
        raise DatasetError(f"{path}: expected one row per genco 1..{scenario.genco_count}")
    return np.array([rows[j + 1] for j in range(scenario.genco_count)])


def _de_config(scenario: Scenario, args) -> DeConfig:
    return DeConfig(
        bounds=scenario.invest_bounds(),
        population=args.de_population,
        max_generations=args.de_generations,
    )


def _run_equilibrium(args, scenario: Scenario, evaluator, initial) -> EquilibriumResult:
    result = diagonalize(
        scenario,
        evaluator,
        initial=initial,
        epsilon=args.epsilon,
        max_sweeps=args.max_sweeps,
        de_config=_de_config(scenario, args),
        n_starts=args.n_starts,
        seed=derived_seed(args.seed, _STAGE_SOLVE),
    )
    total = result.total_invested_mw() + float(np.array(scenario.existing).sum())
    status = "converged" if result.converged else f"NOT converged after {result.sweeps} sweeps"
    print(f"{evaluator.kind} equilibrium: {status}, total installed {total:.2f} MW")
    for j, s in enumerate(result.strategies, start=1):
        print(f"  genco {j}: " + ", ".join(f"{r}/{g}={mw:.1f}" for (r, g), mw in s.invest.items()))
    return result


def cmd_solve(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    scenario = load_scenario(args.scenario)
    if args.evaluator == "hybrid":
        if not args.models:
            raise ModelFormatError("--models DIR is required for the hybrid evaluator")
        evaluator = HybridProfitEvaluator(scenario, _load_models(scenario, Path(args.models)))
    else:
        evaluator = ExactProfitEvaluator(scenario)
    result = _run_equilibrium(args, scenario, evaluator, initial=None)
    out = Path(args.output)
    _write_solution(out, scenario, result, evaluator)
    trace_path = Path(args.trace) if args.trace else out.with_name(out.stem + "_trace.csv")
    _write_trace(trace_path, scenario, result)
    _write_manifest(out, "solve", args, {"solve": derived_seed(args.seed, _STAGE_SOLVE)},
                    [str(out), str(trace_path)], started)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    scenario = load_scenario(args.scenario)
    initial = _read_solution(Path(args.solution), scenario)
    evaluator = ExactProfitEvaluator(scenario)
    result = _run_equilibrium(args, scenario, evaluator, initial=initial)
    out = Path(args.output)
    _write_solution(out, scenario, result, evaluator)
    trace_path = Path(args.trace) if args.trace else out.with_name(out.stem + "_trace.csv")
    _write_trace(trace_path, scenario, result)
    _write_manifest(out, "validate", args, {"solve": derived_seed(args.seed, _STAGE_SOLVE)},
                    [str(out), str(trace_path)], started)
    return 0


# --- auction ------------------------------------------------------------------

def _read_segments(path: Path) -> list[DemandSegment]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"price_intercept", "slope", "max_quantity"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise DatasetError(f"{path}: segment CSV needs columns {sorted(need)}")
        return [
            DemandSegment(float(r["price_intercept"]), float(r["slope"]), float(r["max_quantity"]))
            for r in reader
        ]


def _read_offers(path: Path) -> list[CapacityOffer]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"bid", "pmax", "derate"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise DatasetError(f"{path}: offer CSV needs columns {sorted(need)}")
        return [CapacityOffer(float(r["bid"]), float(r["pmax"]), float(r["derate"])) for r in reader]


def _auction_csv(result: AuctionResult) -> str:
    header = ["clearing_price", "cleared_mw", "welfare"]
    values = [repr(result.clearing_price), repr(result.cleared_mw), repr(result.welfare)]
    for c, d in enumerate(result.cleared_demand):
        header.append(f"cleared_demand_{c}")
        values.append(repr(d))
    for u, m in enumerate(result.cleared_fraction):
        header.append(f"cleared_fraction_{u}")
        values.append(repr(m))
    return ",".join(header) + "\n" + ",".join(values) + "\n"


def cmd_auction(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    segments = _read_segments(Path(args.segments))
    offers = _read_offers(Path(args.offers))
    result = clear_auction(segments, offers)
    text = _auction_csv(result)
    sys.stdout.write(text)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        _write_manifest(Path(args.output), "auction", args, {}, [str(args.output)], started)
    return 0


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capexeq",
        description="Capacity-expansion equilibrium toolkit: simulate, learn, and solve.",
    )
    parser.add_argument("--version", action="version", version=f"capexeq {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("sample", help="draw random buildouts and simulate dispatch")
    p.add_argument("--scenario", required=True, help="scenario YAML file")
    p.add_argument("--n", type=int, default=5000, help="number of buildouts (default 5000)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="dataset CSV to write")
    p.add_argument("--workers", type=int, default=_default_workers())
    p.add_argument("--payout-sweep", default=None, help="also write a payout-vs-capacity CSV here")
    p.add_argument("--sweep-min", type=float, default=1000.0)
    p.add_argument("--sweep-max", type=float, default=1700.0)
    p.add_argument("--sweep-step", type=float, default=1.0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("train", help="fit profit surrogates on a sampled dataset")
    p.add_argument("--dataset", required=True, help="dataset CSV from 'sample'")
    p.add_argument("--target", required=True, help="target column name, or 'all'")
    p.add_argument("--output", required=True, help="model file ('all': directory)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rounds", type=int, default=300)
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--min-split-gain", type=float, default=0.0)
    p.add_argument("--early-stopping", type=int, default=25)
    p.add_argument("--test-fraction", type=float, default=0.25)
    p.add_argument(
        "--no-total-feature",
        dest="total_feature",
        action="store_false",
        help="do not add the derived system-total column to the tree features",
    )
    p.set_defaults(func=cmd_train, total_feature=True)

    for name, help_text in (
        ("solve", "find the investment equilibrium by diagonalization"),
        ("validate", "re-run benchmark diagonalization from a saved solution"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--scenario", required=True)
        if name == "solve":
            p.add_argument("--evaluator", choices=("hybrid", "benchmark"), required=True)
            p.add_argument("--models", default=None, help="directory of surrogate models (hybrid)")
        else:
            p.add_argument("--solution", required=True, help="solution CSV from 'solve'")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--epsilon", type=float, default=0.5, help="convergence tolerance, MW")
        p.add_argument("--max-sweeps", type=int, default=20)
        p.add_argument("--n-starts", type=int, default=3)
        p.add_argument("--de-generations", type=int, default=1000)
        p.add_argument("--de-population", type=int, default=None)
        p.add_argument("--output", required=True, help="solution CSV to write")
        p.add_argument("--trace", default=None, help="trace CSV (default: <output>_trace.csv)")
        p.set_defaults(func=cmd_solve if name == "solve" else cmd_validate)

    p = sub.add_parser("auction", help="clear a standalone forward capacity auction")
    p.add_argument("--segments", required=True, help="demand segment CSV")
    p.add_argument("--offers", required=True, help="capacity offer CSV")
    p.add_argument("--output", default=None, help="also write the result CSV here")
    p.set_defaults(func=cmd_auction)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, DatasetError, ModelFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
