"""Experiment orchestration: runs instance x method x budget cells, scores the
five metrics per cell, and writes deterministic CSV/JSON reports.

Record order in the output file is canonical (sorted by instance, method,
budget) regardless of worker scheduling, and every random draw is pinned to the
cell's position in the run, so identical (config, seed) produce byte-identical
records files. Wall-clock timings go to a separate, non-canonical file.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .blackbox import BlackBoxHandle, EvalBudget, ExternalProcessModel, make_synthetic_suite
from .config import BlackBoxConfig, FeaturizerConfig, RunConfig
from .errors import BlackBoxError, ConfigError
from .explain import Explanation, MethodSpec, RngStream, fit_explanation
from .featurize import (
    ImageFeaturizer,
    VectorFeaturizer,
    full_mask,
    grid_partition,
    read_raw_tensor,
)
from .metrics import (
    MetricReport,
    conciseness,
    local_concordance,
    local_fidelity,
    prescriptivity,
    robustness,
)
from .sampling import build_neighborhood

ROLE_FIT = 0
ROLE_FIDELITY = 1
INSTANCE_NAMESPACE = 7  # rng stream namespace for instance synthesis

METRIC_NAMES = (
    "local_concordance",
    "local_fidelity",
    "prescriptivity",
    "conciseness",
    "robustness_cosine",
    "robustness_magnitude",
)

MANIFEST_NOTES = [
    "shap-local truncates the exclusion-count law to at most ceil(F/2) excluded "
    "features and renormalizes; the local/global split is an inference from the "
    "methods' described behavior, not a formal definition.",
    "conciseness clips row L1 norms of the absolute importance matrix to 1 and "
    "clamps the final score into [0, 1]; the unclipped formula can exceed 1 for "
    "degenerate all-zero matrices.",
]


@dataclass
class Record:
    """One (instance, method, budget) cell of a run."""

    instance: str
    method: str
    budget: int
    features: int
    classes: int
    explanations: int
    seed: int
    stream: str
    local_concordance: float | None
    local_fidelity: float | None
    prescriptivity: float | None
    no_flip_count: int | None
    conciseness: float | None
    robustness_cosine: float | None
    robustness_magnitude: float | None
    flip_steps: float | None
    evaluations: int | None
    error: str = ""

    def sort_key(self):
        return (self.instance, self.method, self.budget)


RECORD_COLUMNS = [f.name for f in fields(Record)]


@dataclass
class AggregateRow:
    method: str
    budget: int
    features: int
    metric: str
    mean: float
    std: float
    count: int
    no_flip_total: int | None = None


AGGREGATE_COLUMNS = [f.name for f in fields(AggregateRow)]


@dataclass
class RunReport:
    records: list
    aggregates: list
    manifest: dict
    timings: list


def build_featurizer(cfg: FeaturizerConfig):
    if cfg.kind == "vector":
        baseline = None if cfg.baseline is None else np.full(cfg.features, cfg.baseline, dtype=float) \
            if np.ndim(cfg.baseline) == 0 else np.asarray(cfg.baseline, dtype=float)
        return VectorFeaturizer(cfg.features, baseline)
    grid = grid_partition(cfg.height, cfg.width, cfg.channels, cfg.side)
    baseline = 0.5 if cfg.baseline is None else cfg.baseline
    return ImageFeaturizer(grid, baseline)


def build_blackbox(cfg: BlackBoxConfig) -> BlackBoxHandle:
    if cfg.kind == "synthetic-linear":
        return make_synthetic_suite(cfg.seed, cfg.features, cfg.classes)[0]
    if cfg.kind == "synthetic-nonlinear":
        return make_synthetic_suite(
            cfg.seed, cfg.features, cfg.classes, interaction_strength=cfg.interaction_strength
        )[1]
    return BlackBoxHandle(ExternalProcessModel(cfg.command, timeout=cfg.timeout))


def load_instances(cfg: RunConfig, featurizer) -> list[tuple[str, np.ndarray]]:
    if cfg.instances.kind == "files":
        out = []
        for i, path in enumerate(cfg.instances.paths):
            tensor = read_raw_tensor(path)
            if isinstance(featurizer, VectorFeaturizer):
                if tensor.size != featurizer.feature_count:
                    raise ConfigError(
                        f"instance {path} has {tensor.size} values, expected {featurizer.feature_count}"
                    )
                tensor = tensor.ravel()
            out.append((f"{i:03d}-{Path(path).stem}", tensor))
        return out

    out = []
    for i in range(cfg.instances.count):
        gen = RngStream(cfg.seed).child(INSTANCE_NAMESPACE, i).generator()
        if isinstance(featurizer, VectorFeaturizer):
            x = gen.uniform(0.75, 1.25, featurizer.feature_count)
        else:
            grid = featurizer.grid
            x = gen.uniform(0.0, 1.0, (grid.height, grid.width, grid.channels))
        out.append((f"synthetic-{i:03d}", x))
    return out


def _cell_budget_cap(method: MethodSpec, budget: int, feature_count: int, fidelity_mode: str) -> int:
    # fit set + origin, one flip evaluation, plus a held-out fidelity set
    if method.kind == "shap-exact":
        return 2 ** feature_count + 1
    cap = (budget + 1) + 1
    if fidelity_mode == "held-out":
        cap += budget + 1
    return cap


def score_cell(base_handle, featurizer, x, method: MethodSpec, budget: int, *,
               explanation_count: int, norm: str, fidelity_mode: str,
               stream: RngStream) -> tuple[list[Explanation], MetricReport, int]:
    """Fit `explanation_count` explanations of one instance and score all metrics.

    Every explanation runs against a scoped handle (private cache, counter and
    budget cap), so evaluation accounting is exact and independent of sibling
    cells. Returns (explanations, report, evaluations used).
    """
    feature_count = featurizer.feature_count
    cap = _cell_budget_cap(method, budget, feature_count, fidelity_mode)
    origin = full_mask(feature_count)

    explanations = []
    concordances = []
    fidelities = []
    fidelity_sizes = []
    prescriptivities = []
    flip_steps = []
    no_flips = 0
    conciseness_scores = []
    evaluations = 0

    for e_idx in range(explanation_count):
        scoped = base_handle.scoped(budget=EvalBudget(cap))
        expl = fit_explanation(
            scoped, x, featurizer, method, budget, stream.child(e_idx, ROLE_FIT)
        )
        explanations.append(expl)

        f_at_x = expl.neighborhood.origin_output()
        concordances.append(local_concordance(f_at_x, expl.predict_probs(origin), norm))

        if fidelity_mode == "reuse":
            fidelity_set = expl.neighborhood
        else:
            fidelity_set = build_neighborhood(
                method, budget, scoped, featurizer, x, stream.child(e_idx, ROLE_FIDELITY)
            )
        fidelities.append(
            local_fidelity(fidelity_set.outputs, expl.predict_probs(fidelity_set.masks), norm)
        )
        fidelity_sizes.append(len(fidelity_set))

        score, flip = prescriptivity(scoped, featurizer, x, expl, norm)
        if score is None:
            no_flips += 1
        else:
            prescriptivities.append(score)
            flip_steps.append(flip.steps)

        conciseness_scores.append(conciseness(expl.matrices))
        evaluations += scoped.eval_counter

    report = MetricReport(
        local_concordance=float(np.mean(concordances)),
        local_fidelity=float(np.mean(fidelities)),
        prescriptivity=float(np.mean(prescriptivities)) if prescriptivities else None,
        no_flip_count=no_flips,
        conciseness=float(np.mean(conciseness_scores)),
        robustness_cosine=robustness(explanations, "cosine") if explanation_count >= 2 else None,
        robustness_magnitude=robustness(explanations, "magnitude") if explanation_count >= 2 else None,
        norm=norm,
        fidelity_size=int(np.mean(fidelity_sizes)),
        flip_steps=float(np.mean(flip_steps)) if flip_steps else None,
    )
    return explanations, report, evaluations


def _run_cell(cfg: RunConfig, base_handle, featurizer, instance_id, x,
              inst_idx, m_idx, n_idx) -> tuple[Record, float]:
    method = cfg.methods[m_idx]
    budget = cfg.budgets[n_idx]
    stream = RngStream(cfg.seed).child(inst_idx, m_idx, n_idx)
    started = time.perf_counter()
    base = dict(
        instance=instance_id,
        method=method.label,
        budget=budget,
        features=featurizer.feature_count,
        classes=base_handle.class_count,
        explanations=cfg.explanations_per_instance,
        seed=cfg.seed,
        stream=stream.label(),
    )
    try:
        _, report, evaluations = score_cell(
            base_handle, featurizer, x, method, budget,
            explanation_count=cfg.explanations_per_instance,
            norm=cfg.norm,
            fidelity_mode=cfg.fidelity_mode,
            stream=stream,
        )
    except BlackBoxError as exc:
        record = Record(
            **base,
            local_concordance=None, local_fidelity=None, prescriptivity=None,
            no_flip_count=None, conciseness=None, robustness_cosine=None,
            robustness_magnitude=None, flip_steps=None, evaluations=None,
            error=str(exc),
        )
        return record, time.perf_counter() - started

    record = Record(
        **base,
        local_concordance=report.local_concordance,
        local_fidelity=report.local_fidelity,
        prescriptivity=report.prescriptivity,
        no_flip_count=report.no_flip_count,
        conciseness=report.conciseness,
        robustness_cosine=report.robustness_cosine,
        robustness_magnitude=report.robustness_magnitude,
        flip_steps=report.flip_steps,
        evaluations=evaluations,
        error="",
    )
    return record, time.perf_counter() - started


def run_experiment(cfg: RunConfig, out_dir=None) -> RunReport:
    """Run every instance x method x budget cell and aggregate the results."""
    cfg.validate()
    featurizer = build_featurizer(cfg.featurizer)
    base_handle = build_blackbox(cfg.blackbox)
    try:
        instances = load_instances(cfg, featurizer)
        cells = [
            (inst_idx, m_idx, n_idx)
            for inst_idx in range(len(instances))
            for m_idx in range(len(cfg.methods))
            for n_idx in range(len(cfg.budgets))
        ]
        results: dict[tuple, tuple[Record, float]] = {}
        if cfg.workers == 1:
            for cell in cells:
                inst_idx, m_idx, n_idx = cell
                instance_id, x = instances[inst_idx]
                results[cell] = _run_cell(cfg, base_handle, featurizer, instance_id, x, *cell)
        else:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                futures = {
                    cell: pool.submit(
                        _run_cell, cfg, base_handle, featurizer,
                        instances[cell[0]][0], instances[cell[0]][1], *cell
                    )
                    for cell in cells
                }
                for cell, future in futures.items():
                    results[cell] = future.result()
    finally:
        model = base_handle.model
        if isinstance(model, ExternalProcessModel):
            model.close()

    records = sorted((rec for rec, _ in results.values()), key=Record.sort_key)
    timings = sorted(
        ((rec.instance, rec.method, rec.budget, seconds) for rec, seconds in results.values())
    )
    aggregates = aggregate(records)
    manifest = {
        "engine": "revel",
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "notes": MANIFEST_NOTES,
        "record_count": len(records),
        "records_with_errors": sum(1 for r in records if r.error),
        "record_columns": RECORD_COLUMNS,
    }
    report = RunReport(records=records, aggregates=aggregates, manifest=manifest, timings=timings)
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def aggregate(records) -> list[AggregateRow]:
    """Group records by (method, budget, features) and compute mean/sample-std per
    metric. No-flip counts ride along with the prescriptivity rows; records that
    failed with an error are excluded."""
    records = list(records)
    if not records:
        raise ValueError("no records to aggregate")
    groups: dict[tuple, list[Record]] = {}
    for rec in records:
        if rec.error:
            continue
        groups.setdefault((rec.method, rec.budget, rec.features), []).append(rec)

    rows = []
    for (method, budget, features), group in sorted(groups.items()):
        for metric in METRIC_NAMES:
            values = [getattr(r, metric) for r in group if getattr(r, metric) is not None]
            if not values:
                continue
            mean = float(np.mean(values))
            std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
            no_flip = None
            if metric == "prescriptivity":
                no_flip = int(sum(r.no_flip_count or 0 for r in group))
            rows.append(AggregateRow(
                method=method, budget=budget, features=features, metric=metric,
                mean=mean, std=std, count=len(values), no_flip_total=no_flip,
            ))
    return rows


def _format_field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for rec in records:
            writer.writerow([_format_field(getattr(rec, col)) for col in RECORD_COLUMNS])


def _opt(text: str, convert):
    return None if text == "" else convert(text)


def read_records_csv(path) -> list[Record]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != RECORD_COLUMNS:
            raise ValueError(f"unexpected records header {header}")
        records = []
        for row in reader:
            data = dict(zip(RECORD_COLUMNS, row))
            records.append(Record(
                instance=data["instance"],
                method=data["method"],
                budget=int(data["budget"]),
                features=int(data["features"]),
                classes=int(data["classes"]),
                explanations=int(data["explanations"]),
                seed=int(data["seed"]),
                stream=data["stream"],
                local_concordance=_opt(data["local_concordance"], float),
                local_fidelity=_opt(data["local_fidelity"], float),
                prescriptivity=_opt(data["prescriptivity"], float),
                no_flip_count=_opt(data["no_flip_count"], int),
                conciseness=_opt(data["conciseness"], float),
                robustness_cosine=_opt(data["robustness_cosine"], float),
                robustness_magnitude=_opt(data["robustness_magnitude"], float),
                flip_steps=_opt(data["flip_steps"], float),
                evaluations=_opt(data["evaluations"], int),
                error=data["error"],
            ))
    return records


def write_aggregates_csv(rows, path_or_handle) -> None:
    own = isinstance(path_or_handle, (str, Path))
    fh = open(path_or_handle, "w", newline="", encoding="utf-8") if own else path_or_handle
    try:
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_COLUMNS)
        for row in rows:
            writer.writerow([_format_field(getattr(row, col)) for col in AGGREGATE_COLUMNS])
    finally:
        if own:
            fh.close()


def write_report(report: RunReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_records_csv(report.records, out / "records.csv")
    write_aggregates_csv(report.aggregates, out / "aggregates.csv")
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(report.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "timings.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance", "method", "budget", "wall_seconds"])
        for instance, method, budget, seconds in report.timings:
            writer.writerow([instance, method, budget, f"{seconds:.6f}"])
