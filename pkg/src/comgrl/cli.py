"""Command-line experiment runner.

Subcommands:
    train    train on a dataset over one or more seeds, write JSON reports
    ablate   run the full model plus its component-removal variants
    noise    train after injecting label and/or edge noise
    gen      sample a synthetic block-model dataset directory

Configuration is a flat JSON file of ``TrainConfig`` keys; unknown keys are
rejected. Command-line flags override file values. One report is written per
seed plus an aggregate with mean and sample standard deviation.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .datasets import SBMSpec, generate_sbm, inject_graph_noise, inject_label_noise, load_dataset, write_dataset
from .graphs import Graph
from .training import (
    TrainConfig,
    TrainingDiverged,
    VARIANTS,
    aggregate_reports,
    train,
    validate_report,
    variant_config,
)


def _parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")
    if not seeds:
        raise argparse.ArgumentTypeError("at least one seed is required")
    return seeds


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat JSON file of training config keys")
    parser.add_argument("--dataset", help="dataset directory")
    parser.add_argument("--sbm", help="JSON file with a synthetic block-model spec")
    parser.add_argument("--seeds", type=_parse_seeds, default=[0], help="comma-separated seeds")
    parser.add_argument("--out", required=True, help="output directory for reports")
    parser.add_argument("--jobs", type=int, default=1, help="parallel seed workers")
    parser.add_argument("--refresh-interval", type=int, default=None)
    parser.add_argument("--threshold", type=float, default=None,
                        help="pseudo-label confidence threshold")
    parser.add_argument("--log-contrastive", action=argparse.BooleanOptionalAction,
                        default=None, help="use the log form of the contrastive loss")
    parser.add_argument("--dump-plans", action="store_true",
                        help="write per-refresh mixup plan JSON files")
    for flag in ("lgcl", "gmsa", "pma"):
        parser.add_argument(f"--disable-{flag}", action=argparse.BooleanOptionalAction,
                            default=None)


def build_config(args) -> TrainConfig:
    values = {}
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        values.update(loaded)
    overrides = {
        "refresh_interval": args.refresh_interval,
        "confidence_threshold": args.threshold,
        "contrastive_log_variant": args.log_contrastive,
        "disable_lgcl": args.disable_lgcl,
        "disable_gmsa": args.disable_gmsa,
        "disable_pma": args.disable_pma,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig.from_dict(values)


def load_graph(args) -> Graph:
    if (args.dataset is None) == (args.sbm is None):
        raise ValueError("provide exactly one of --dataset or --sbm")
    if args.dataset:
        return load_dataset(args.dataset)
    with open(args.sbm) as fh:
        return generate_sbm(SBMSpec.from_dict(json.load(fh)))


def _run_seed(graph: Graph, config: TrainConfig, seed: int,
              lnr: float = 0.0, gnr: float = 0.0, noise_mode: str = "add",
              plan_dump_dir: str | None = None) -> dict:
    cfg = replace(config, seed=seed)
    run_graph = graph
    if lnr > 0:
        run_graph = inject_label_noise(run_graph, lnr, seed)
    if gnr > 0:
        run_graph = inject_graph_noise(run_graph, gnr, seed, mode=noise_mode)
    report = train(run_graph, cfg, noise={"lnr": lnr, "gnr": gnr},
                   plan_dump_dir=plan_dump_dir)
    return report.to_dict()


def _run_seeds(graph, config, seeds, jobs, out_dir, tag="",
               lnr=0.0, gnr=0.0, noise_mode="add", dump_plans=False):
    """Run each seed (optionally in parallel), write per-seed reports, return aggregate."""
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = f"report_{tag}_" if tag else "report_"
    results: dict[int, dict] = {}
    failures: dict[int, str] = {}

    def dump_dir(seed):
        return str(out_dir / f"plans_{tag or 'run'}_seed{seed}") if dump_plans else None

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                seed: pool.submit(_run_seed, graph, config, seed, lnr, gnr,
                                  noise_mode, dump_dir(seed))
                for seed in seeds
            }
            for seed, fut in futures.items():
                try:
                    results[seed] = fut.result()
                except TrainingDiverged as exc:
                    failures[seed] = str(exc)
    else:
        for seed in seeds:
            try:
                results[seed] = _run_seed(graph, config, seed, lnr, gnr,
                                          noise_mode, dump_dir(seed))
            except TrainingDiverged as exc:
                failures[seed] = str(exc)

    for seed, report in results.items():
        validate_report(report)
        with open(out_dir / f"{prefix}seed{seed}.json", "w") as fh:
            json.dump(report, fh, indent=2)
    aggregate = aggregate_reports(list(results.values()), sorted(failures))
    aggregate["failures"] = {str(s): msg for s, msg in sorted(failures.items())}
    agg_name = f"aggregate_{tag}.json" if tag else "aggregate.json"
    with open(out_dir / agg_name, "w") as fh:
        json.dump(aggregate, fh, indent=2)
    mean = aggregate["mean_test_accuracy"]
    label = tag or "train"
    if mean is None:
        print(f"{label}: no surviving seeds ({len(failures)} failed)")
    else:
        print(f"{label}: test accuracy {mean:.2f} +- {aggregate['std_test_accuracy']:.2f} "
              f"over {len(results)} seed(s)")
    return aggregate


def cmd_train(args) -> int:
    graph = load_graph(args)
    config = build_config(args)
    aggregate = _run_seeds(graph, config, args.seeds, args.jobs, Path(args.out),
                           dump_plans=args.dump_plans)
    return 0 if aggregate["test_accuracies"] else 1


def cmd_ablate(args) -> int:
    graph = load_graph(args)
    config = build_config(args)
    variants = list(VARIANTS[:4]) + (["mlp"] if args.include_mlp else [])
    any_ok = False
    for variant in variants:
        aggregate = _run_seeds(graph, variant_config(config, variant), args.seeds,
                               args.jobs, Path(args.out), tag=variant,
                               dump_plans=args.dump_plans)
        any_ok = any_ok or bool(aggregate["test_accuracies"])
    return 0 if any_ok else 1


def cmd_noise(args) -> int:
    graph = load_graph(args)
    config = build_config(args)
    aggregate = _run_seeds(graph, config, args.seeds, args.jobs, Path(args.out),
                           tag=f"lnr{args.lnr}_gnr{args.gnr}",
                           lnr=args.lnr, gnr=args.gnr, noise_mode=args.noise_mode,
                           dump_plans=args.dump_plans)
    return 0 if aggregate["test_accuracies"] else 1


def cmd_gen(args) -> int:
    with open(args.sbm) as fh:
        spec = SBMSpec.from_dict(json.load(fh))
    if args.seed is not None:
        spec.seed = args.seed
    graph = generate_sbm(spec)
    write_dataset(graph, args.out)
    print(f"wrote {graph.n_nodes} nodes, {graph.n_edges} edges, "
          f"{graph.n_classes} classes to {args.out}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="comgrl",
                                     description="Graph node-classification experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train over seeds and write reports")
    _add_common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_ablate = sub.add_parser("ablate", help="full model plus component-removal variants")
    _add_common(p_ablate)
    p_ablate.add_argument("--include-mlp", action="store_true",
                          help="also run the plain-MLP baseline")
    p_ablate.set_defaults(func=cmd_ablate)

    p_noise = sub.add_parser("noise", help="train with injected label/edge noise")
    _add_common(p_noise)
    p_noise.add_argument("--lnr", type=float, default=0.0, help="label noise ratio")
    p_noise.add_argument("--gnr", type=float, default=0.0, help="graph noise ratio")
    p_noise.add_argument("--noise-mode", choices=("add", "rewire"), default="add")
    p_noise.set_defaults(func=cmd_noise)

    p_gen = sub.add_parser("gen", help="write a synthetic dataset directory")
    p_gen.add_argument("--sbm", required=True, help="JSON file with the block-model spec")
    p_gen.add_argument("--out", required=True, help="dataset directory to create")
    p_gen.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p_gen.set_defaults(func=cmd_gen)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
