"""Headless driver: batch analysis, synthetic benchmarks, sweeps, serving.

Exit codes: 0 success, 2 bad flags (argparse), 3 data errors, 4 training
divergence.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import __version__
from .benchmarks import (
    BenchmarkSpec,
    SweepSpec,
    THREE_VAR_MIN,
    TWO_VAR_XOR,
    generate,
    pattern_recovery,
    run_sweep,
    summarize_sweep,
    sweep_rows_to_csv,
)
from .dataset import Dataset, infer_specs, load_csv, normalize
from .decompose import NoPositiveNodes, build_cards, decompose
from .errors import NodelensError
from .model import NonFiniteLoss, TrainConfig, train
from .serialize import cards_to_json, dataset_summary

EXIT_BAD_FLAGS = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

BENCHMARK_KINDS = {"three-var": THREE_VAR_MIN, "xor2": TWO_VAR_XOR}
DEFAULT_SAMPLES = {THREE_VAR_MIN: 27_000, TWO_VAR_XOR: 10_000}


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        dt = datetime.datetime.fromtimestamp(int(epoch), datetime.timezone.utc)
    else:
        dt = datetime.datetime.now(datetime.timezone.utc)
    return dt.replace(microsecond=0).isoformat()


def resolve_threshold(token: str, target: np.ndarray) -> float:
    if token == "mid":
        return 0.5
    if token == "median":
        tau = float(np.median(target))
    else:
        try:
            tau = float(token)
        except ValueError:
            raise NodelensError(
                f"--threshold must be a number, 'mid' or 'median', got {token!r}")
    return float(min(max(tau, 1e-9), 1 - 1e-9))


def load_dataset_from_csv(path: str, target: str, threshold_token: str) -> Dataset:
    with open(path, "rb") as f:
        table = load_csv(f.read())
    specs = infer_specs(table)
    names = [s.name for s in specs]
    if target not in names:
        raise NodelensError(f"target {target!r} not among columns {names}")
    for s in specs:
        s.is_target = s.name == target
    ds = normalize(table, specs)
    return ds.with_threshold(resolve_threshold(threshold_token, ds.target))


def train_config_from_args(args, threshold: float) -> TrainConfig:
    return TrainConfig(
        hidden_nodes=args.nodes,
        iterations=args.iterations,
        beta=args.beta,
        learning_rate=args.lr,
        batch_size=args.batch,
        seed=args.seed,
        threshold=threshold,
    )


def build_report(dataset: Dataset, result, cards_json, recovery=None) -> dict:
    report = {
        "toolVersion": __version__,
        "generatedAt": _timestamp(),
        "datasetSummary": dataset_summary(dataset),
        "trainConfig": result.config.to_json_obj(),
        "lossCurve": result.loss_curve,
        "finalMse": result.final_mse,
        "network": result.network.to_json_obj(),
        "nodeCards": cards_json,
    }
    if recovery is not None:
        report["recovery"] = recovery
    return report


def report_text(report: dict, top: int = 5) -> str:
    lines = [
        f"nodelens {report['toolVersion']}  ({report['generatedAt']})",
        f"items={report['datasetSummary']['items']} "
        f"inputs={report['datasetSummary']['inputs']} "
        f"target={report['datasetSummary']['target']} "
        f"threshold={report['datasetSummary']['threshold']:.4f} "
        f"high={report['datasetSummary']['highCount']}",
        f"final mse: {report['finalMse']:.6f}",
        "",
    ]
    if not report["nodeCards"]:
        lines.append("no active positive nodes")
    for card in report["nodeCards"]:
        lines.append(
            f"node {card['node']}  score={card['score']:.2f} "
            f"weight={card['weight']:.3f} A={card['meanActivation']:.3f} "
            f"C={card['meanContribution']:.3f} "
            f"coverage high={card['highCoverage']:.2f} low={card['lowCoverage']:.2f}")
        for var in card["ranking"]["variables"][:top]:
            lines.append(f"    {var['name']:<24s} rank={var['rank']:.4f} "
                         f"weight={var['weight']:+.3f}")
    if "recovery" in report:
        r = report["recovery"]
        lines.append("")
        lines.append(f"recovery: coverage={r['coverage']:.3f} "
                     f"distinctness={r['distinctness']} passed={r['passed']}")
    return "\n".join(lines) + "\n"


def _emit(args, payload: str):
    if args.out:
        with open(args.out, "w") as f:
            f.write(payload)
    else:
        sys.stdout.write(payload)


def cmd_analyze(args) -> int:
    if args.benchmark:
        kind = BENCHMARK_KINDS[args.benchmark]
        samples = args.samples or DEFAULT_SAMPLES[kind]
        dataset = generate(BenchmarkSpec(kind=kind, samples=samples,
                                         seed=args.seed))
    else:
        if not args.input or not args.target:
            print("analyze needs --input and --target (or --benchmark)",
                  file=sys.stderr)
            return EXIT_BAD_FLAGS
        dataset = load_dataset_from_csv(args.input, args.target, args.threshold)

    cfg = train_config_from_args(args, dataset.threshold)
    try:
        result = train(dataset, cfg)
    except NonFiniteLoss as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED

    try:
        decomp = decompose(result.network, dataset)
        cards = build_cards(decomp, dataset,
                            input_bins=args.input_bins,
                            target_bins=args.target_bins)
        cards_json = cards_to_json(cards, dataset, result.network)
    except NoPositiveNodes:
        decomp, cards_json = None, []

    recovery = None
    if args.benchmark and decomp is not None:
        rep = pattern_recovery(BENCHMARK_KINDS[args.benchmark], dataset, decomp)
        recovery = {
            "coverage": rep.coverage,
            "distinctness": rep.distinctness,
            "nodePurity": {str(k): v for k, v in rep.node_purity.items()},
            "maximaNodes": rep.maxima_nodes,
            "passed": rep.passed,
        }

    report = build_report(dataset, result, cards_json, recovery)
    if args.format == "json":
        _emit(args, json.dumps(report, indent=2, sort_keys=True) + "\n")
    else:
        _emit(args, report_text(report))
    return 0


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip() != ""]


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip() != ""]


def cmd_sweep(args) -> int:
    kind = BENCHMARK_KINDS[args.benchmark or "three-var"]
    samples = args.samples or DEFAULT_SAMPLES[kind]
    spec = SweepSpec(
        betas=_parse_float_list(args.betas),
        hidden_counts=_parse_int_list(args.hidden),
        seeds_per_cell=args.seeds,
        benchmark=BenchmarkSpec(kind=kind, samples=samples, seed=args.seed),
        iterations=args.iterations,
        learning_rate=args.lr,
        batch_size=args.batch,
    )
    rows = run_sweep(spec, jobs=args.jobs)
    csv_text = sweep_rows_to_csv(rows)
    _emit(args, csv_text)
    summary = summarize_sweep(rows)
    print(json.dumps(summary, indent=2), file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    port = args.port or int(os.environ.get("VND_PORT", "8080"))
    uvicorn.run(create_app(), host=args.host, port=port, log_level="info")
    return 0


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--nodes", type=int, default=20,
                   help="hidden nodes (default 20)")
    p.add_argument("--iterations", type=int, default=10_000)
    p.add_argument("--beta", type=float, default=0.1,
                   help="homogeneity penalty strength")
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nodelens",
        description="Train a one-hidden-layer net on a table and decompose "
                    "its nodes into readable high-target condition clusters.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="run the full pipeline on a CSV "
                                        "or a built-in benchmark")
    pa.add_argument("--input", help="CSV path")
    pa.add_argument("--target", help="target variable name")
    pa.add_argument("--threshold", default="mid",
                    help="number in (0,1), 'mid' or 'median' (default mid)")
    pa.add_argument("--benchmark", choices=sorted(BENCHMARK_KINDS))
    pa.add_argument("--samples", type=int, default=None,
                    help="benchmark sample count")
    _add_train_flags(pa)
    pa.add_argument("--input-bins", type=int, default=10)
    pa.add_argument("--target-bins", type=int, default=2)
    pa.add_argument("--out", help="write the report here instead of stdout")
    pa.add_argument("--format", choices=["json", "text"], default="json")
    pa.set_defaults(func=cmd_analyze)

    ps = sub.add_parser("sweep", help="train over a (beta, hidden) grid "
                                      "and emit a CSV of recovery metrics")
    ps.add_argument("--betas", required=True, help="comma list, e.g. 0,0.1,0.5")
    ps.add_argument("--hidden", required=True, help="comma list, e.g. 8,20")
    ps.add_argument("--seeds", type=int, default=10, help="seeds per cell")
    ps.add_argument("--benchmark", choices=sorted(BENCHMARK_KINDS))
    ps.add_argument("--samples", type=int, default=None)
    ps.add_argument("--iterations", type=int, default=10_000)
    ps.add_argument("--lr", type=float, default=0.01)
    ps.add_argument("--batch", type=int, default=32)
    ps.add_argument("--seed", type=int, default=0, help="benchmark seed")
    ps.add_argument("--jobs", type=int, default=1)
    ps.add_argument("--out", help="CSV output path (default stdout)")
    ps.set_defaults(func=cmd_sweep)

    pv = sub.add_parser("serve", help="start the HTTP service")
    pv.add_argument("--host", default="127.0.0.1")
    pv.add_argument("--port", type=int, default=None)
    pv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NonFiniteLoss as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (NodelensError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
