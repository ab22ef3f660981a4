"""Command-line interface.

    revel explain --config cfg.yaml --instance x.rt1 --method lime [--sigma S]
    revel run     --config cfg.yaml --out results/
    revel report  --records results/records.csv [--out aggregates.csv]

Exit codes: 0 success, 2 configuration error, 3 black-box failure.
REVEL_SEED overrides the config seed; REVEL_WORKERS bounds the worker pool.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .blackbox import ExternalProcessModel
from .config import RunConfig, load_config
from .errors import BlackBoxError, ConfigError
from .explain import MethodSpec, RngStream
from .featurize import VectorFeaturizer, read_raw_tensor
from .harness import (
    aggregate,
    build_blackbox,
    build_featurizer,
    read_records_csv,
    run_experiment,
    score_cell,
    write_aggregates_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLACKBOX = 3


def _apply_env(cfg: RunConfig) -> RunConfig:
    seed = os.environ.get("REVEL_SEED")
    if seed is not None:
        cfg.seed = int(seed)
    workers = os.environ.get("REVEL_WORKERS")
    if workers is not None:
        cfg.workers = max(1, min(cfg.workers, int(workers)))
    return cfg


def _load_instance(path, featurizer):
    tensor = read_raw_tensor(path)
    if isinstance(featurizer, VectorFeaturizer):
        if tensor.size != featurizer.feature_count:
            raise ConfigError(f"instance {path} has {tensor.size} values, expected {featurizer.feature_count}")
        return tensor.ravel()
    return tensor


def _pick_method(cfg: RunConfig, name: str, sigma) -> tuple[MethodSpec, int]:
    for idx, method in enumerate(cfg.methods):
        if method.kind == name and (sigma is None or method.sigma == sigma):
            return method, idx
    try:
        return MethodSpec(kind=name, sigma=sigma, alpha=cfg.alpha), len(cfg.methods)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_explain(args) -> int:
    cfg = _apply_env(load_config(args.config))
    featurizer = build_featurizer(cfg.featurizer)
    method, m_idx = _pick_method(cfg, args.method, args.sigma)
    budget = args.budget if args.budget is not None else cfg.budgets[0]
    handle = build_blackbox(cfg.blackbox)
    try:
        x = _load_instance(args.instance, featurizer)
        explanations, report, evaluations = score_cell(
            handle, featurizer, x, method, budget,
            explanation_count=1, norm=cfg.norm, fidelity_mode=cfg.fidelity_mode,
            stream=RngStream(cfg.seed).child(0, m_idx, 0),
        )
    finally:
        if isinstance(handle.model, ExternalProcessModel):
            handle.model.close()

    payload = {
        "instance": str(args.instance),
        "seed": cfg.seed,
        "budget": budget,
        "evaluations": evaluations,
        "explanation": explanations[0].to_dict(),
        "metrics": {
            "local_concordance": report.local_concordance,
            "local_fidelity": report.local_fidelity,
            "prescriptivity": report.prescriptivity,
            "no_flip": report.no_flip_count > 0,
            "conciseness": report.conciseness,
            "flip_steps": report.flip_steps,
            "norm": report.norm,
        },
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _apply_env(load_config(args.config))
    report = run_experiment(cfg, out_dir=args.out)
    print(f"wrote {len(report.records)} records and {len(report.aggregates)} aggregate rows to {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        records = read_records_csv(args.records)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read records {args.records}: {exc}") from exc
    rows = aggregate(records)
    if args.out:
        write_aggregates_csv(rows, args.out)
    else:
        write_aggregates_csv(rows, sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="revel", description="Local linear explanation engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_explain = sub.add_parser("explain", help="explain a single instance and print JSON")
    p_explain.add_argument("--config", required=True)
    p_explain.add_argument("--instance", required=True, help="raw tensor (RT1) instance file")
    p_explain.add_argument("--method", required=True, help="lime | shap-global | shap-local | shap-exact")
    p_explain.add_argument("--sigma", type=float, default=None)
    p_explain.add_argument("--budget", type=int, default=None)
    p_explain.add_argument("--out", default=None)
    p_explain.set_defaults(func=cmd_explain)

    p_run = sub.add_parser("run", help="run a full experiment from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.set_defaults(func=cmd_run)

    p_report = sub.add_parser("report", help="recompute aggregates from a records file")
    p_report.add_argument("--records", required=True)
    p_report.add_argument("--out", default=None)
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlackBoxError as exc:
        print(f"black-box failure: {exc}", file=sys.stderr)
        return EXIT_BLACKBOX


if __name__ == "__main__":
    sys.exit(main())
