"""Experiment execution and artifact emission.

Every run writes deterministic CSV artifacts plus a manifest embedding
the exact config and seeds; the emit step reshapes finished artifacts
into tidy plot tables.
"""

from __future__ import annotations

import csv
import datetime
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .batch import StrategyCurves, evaluate_strategies
from .cluster import (
    choose_k,
    cluster_report,
    encode_explanations,
    explain_pool,
    label_all,
    track_clusters,
    vocabulary_for,
)
from .config import (
    ExperimentConfig,
    build_dataset,
    build_explainer,
    build_model_fitter,
    config_to_json,
    validate,
)
from .explain import explanation_to_json
from .learn import (
    ExperimentResult,
    initial_state,
    is_undefined,
    pool_persistence_study,
    regions_from_group,
    RegionSpec,
    run_experiment,
)

QUERY_LOG = "query_log.csv"
BIAS_HISTORY = "bias_history.csv"
PERSISTENCE = "persistence.csv"
PERSISTENCE_SUMMARY = "persistence_summary.csv"
BATCH_CURVES = "batch_curves.csv"
CLUSTER_REPORT = "cluster_report.json"
CLUSTER_HISTORY = "cluster_history.csv"
MANIFEST = "manifest.json"


class HarnessError(RuntimeError):
    pass


def _fmt_float(x: float) -> str:
    """Empty cell for the undefined sentinel, repr otherwise."""
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return repr(float(x))


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _region_spec_for(cfg: ExperimentConfig, dataset) -> RegionSpec:
    if cfg.regions == "group" and dataset.group is not None:
        return regions_from_group(dataset)
    return RegionSpec("constraint_sets", ())


# ---------------------------------------------------------------------------
# Mode runners

def _run_experiment_mode(cfg: ExperimentConfig, out: str) -> list[str]:
    dataset = build_dataset(cfg.dataset)
    spec = _region_spec_for(cfg, dataset)
    fitter = build_model_fitter(cfg.model)
    explainer = build_explainer(cfg.explainer, cfg.seed)
    groups = list(cfg.loop.initial_groups) or None

    def one_run(i: int) -> tuple[int, ExperimentResult]:
        return i, run_experiment(
            dataset, spec, fitter, explainer,
            initial_pool_size=cfg.loop.initial_pool_size,
            steps=cfg.loop.steps,
            seed=cfg.seed + i,
            initial_groups=groups,
        )

    results: list[tuple[int, ExperimentResult]] = []
    if cfg.workers > 1 and cfg.loop.n_runs > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(one_run, range(cfg.loop.n_runs)))
    else:
        results = [one_run(i) for i in range(cfg.loop.n_runs)]
    results.sort(key=lambda pair: pair[0])

    log_rows = []
    bias_rows = []
    for i, res in results:
        for rec in res.query_log:
            log_rows.append([
                i, rec.round, rec.query_index, repr(rec.certainty),
                explanation_to_json(rec.explanation) if rec.explanation else "",
                rec.region or "", rec.outcome,
                "" if rec.label is None else rec.label,
            ])
        for rnd, region, bias, count in res.history.rows():
            bias_rows.append([i, rnd, region, _fmt_float(bias), count])
    _write_csv(os.path.join(out, QUERY_LOG),
               ["run", "round", "query_index", "certainty", "explanation",
                "region", "outcome", "label"], log_rows)
    _write_csv(os.path.join(out, BIAS_HISTORY),
               ["run", "round", "region", "bias", "count"], bias_rows)
    return [QUERY_LOG, BIAS_HISTORY]


def _run_persistence_mode(cfg: ExperimentConfig, out: str) -> list[str]:
    dataset = build_dataset(cfg.dataset)
    spec = _region_spec_for(cfg, dataset)
    if not spec.names:
        raise HarnessError("persistence mode needs a dataset group attribute")
    fitter = build_model_fitter(cfg.model)
    explainer = build_explainer(cfg.explainer, cfg.seed)

    study = pool_persistence_study(
        dataset, spec, fitter, explainer,
        n_pools=cfg.study.n_pools, steps=cfg.study.steps,
        initial_pool_size=cfg.study.initial_pool_size,
        base_seed=cfg.seed, workers=cfg.workers,
    )
    pair_rows = []
    for name in spec.names:
        for p, (first, last) in enumerate(study.pairs[name]):
            pair_rows.append([p, name, _fmt_float(first), _fmt_float(last)])
    _write_csv(os.path.join(out, PERSISTENCE),
               ["pool_seed", "region", "initial_bias", "final_bias"], pair_rows)
    summary_rows = [
        [name, _fmt_float(study.slope[name]), _fmt_float(study.intercept[name]),
         _fmt_float(study.r2[name]), len(study.pairs[name]), study.n_excluded[name]]
        for name in spec.names
    ]
    _write_csv(os.path.join(out, PERSISTENCE_SUMMARY),
               ["region", "slope", "intercept", "r2", "n_pairs", "n_excluded"],
               summary_rows)
    return [PERSISTENCE, PERSISTENCE_SUMMARY]


def _run_batch_mode(cfg: ExperimentConfig, out: str) -> list[str]:
    dataset = build_dataset(cfg.dataset)
    fitter = build_model_fitter(cfg.model)
    explainer = build_explainer(cfg.explainer, cfg.seed)
    b = cfg.batch

    def one_seed(s: int) -> tuple[int, StrategyCurves]:
        return s, evaluate_strategies(
            dataset, fitter, explainer,
            strategies=b.strategies, batch_size=b.batch_size, rounds=b.rounds,
            initial_pool_size=b.initial_pool_size, test_fraction=b.test_fraction,
            seed=cfg.seed + s,
        )

    if cfg.workers > 1 and b.n_seeds > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            curves = list(pool.map(one_seed, range(b.n_seeds)))
    else:
        curves = [one_seed(s) for s in range(b.n_seeds)]
    curves.sort(key=lambda pair: pair[0])

    rows = []
    for s, c in curves:
        for strategy, rnd, labeled, mcc in c.rows():
            rows.append([s, strategy, rnd, labeled, _fmt_float(mcc)])
    _write_csv(os.path.join(out, BATCH_CURVES),
               ["seed", "strategy", "round", "labeled_count", "mcc"], rows)
    return [BATCH_CURVES]


def _run_cluster_mode(cfg: ExperimentConfig, out: str) -> list[str]:
    dataset = build_dataset(cfg.dataset)
    spec = _region_spec_for(cfg, dataset)
    fitter = build_model_fitter(cfg.model)
    explainer = build_explainer(cfg.explainer, cfg.seed)
    c = cfg.cluster

    state = initial_state(
        dataset, spec, fitter, explainer,
        initial_pool_size=c.initial_pool_size, seed=cfg.seed,
    )
    indices = list(range(0, dataset.n_rows, c.encode_stride))
    explanations = explain_pool(
        state.model, dataset, explainer,
        discretizer=state.discretizer, stats=state.stats, indices=indices,
    )
    vocab = vocabulary_for(state.discretizer)
    encoding = encode_explanations(explanations, vocab)
    chosen = choose_k(encoding, range(c.k_min, c.k_max + 1),
                      improvement_threshold=c.improvement_threshold, seed=cfg.seed)
    model = label_all(chosen.model, mode=c.label_mode, m=c.label_m,
                      cutoff=c.label_cutoff)
    report = cluster_report(model)
    report["agreement_by_k"] = {str(k): v for k, v in chosen.agreement.items()}
    report["overlap_by_k"] = {str(k): v for k, v in chosen.overlap.items()}
    with open(os.path.join(out, CLUSTER_REPORT), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)

    tracked = track_clusters(state, model, steps=c.track_steps)
    rows = [
        [rnd, region, _fmt_float(bias), count]
        for rnd, region, bias, count in tracked.history.rows()
    ]
    _write_csv(os.path.join(out, CLUSTER_HISTORY),
               ["round", "region", "bias", "count"], rows)
    return [CLUSTER_REPORT, CLUSTER_HISTORY]


_MODE_RUNNERS = {
    "experiment": _run_experiment_mode,
    "persistence": _run_persistence_mode,
    "batch": _run_batch_mode,
    "cluster": _run_cluster_mode,
}


def run_config(cfg: ExperimentConfig, out_dir: str | None = None) -> list[str]:
    """Execute a validated config; returns the artifact paths written."""
    validate(cfg)
    out = out_dir or os.path.join(cfg.out_dir, cfg.name)
    os.makedirs(out, exist_ok=True)
    artifacts = _MODE_RUNNERS[cfg.mode](cfg, out)
    manifest = {
        "config": json.loads(config_to_json(cfg)),
        "artifacts": artifacts,
        "backend": BACKEND,
        "version": __version__,
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(os.path.join(out, MANIFEST), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return [os.path.join(out, a) for a in artifacts + [MANIFEST]]


# ---------------------------------------------------------------------------
# Plot-data emission

PLOT_HISTORY = "plot_history.csv"
PLOT_CURVES = "plot_curves.csv"
PLOT_SCATTER = "plot_scatter.csv"
PLOT_KINDS = ("history", "curves", "scatter")


def _read_csv(path: str) -> list[dict]:
    if not os.path.exists(path):
        raise HarnessError(f"missing input artifact: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def emit_history(out: str) -> str:
    """Average the per-run bias history into (round, region, bias, count);
    undefined biases are skipped pairwise and counts averaged."""
    source = os.path.join(out, BIAS_HISTORY)
    alt = os.path.join(out, CLUSTER_HISTORY)
    if not os.path.exists(source) and os.path.exists(alt):
        source = alt
    records = _read_csv(source)
    cells: dict[tuple[int, str], list[float]] = {}
    counts: dict[tuple[int, str], list[int]] = {}
    for rec in records:
        key = (int(rec["round"]), rec["region"])
        if rec["bias"] != "":
            cells.setdefault(key, []).append(float(rec["bias"]))
        counts.setdefault(key, []).append(int(rec["count"]))
    rows = []
    for (rnd, region), cnt in sorted(counts.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        values = cells.get((rnd, region), [])
        rows.append([
            rnd, region,
            _fmt_float(float(np.mean(values)) if values else float("nan")),
            repr(float(np.mean(cnt))),
        ])
    path = os.path.join(out, PLOT_HISTORY)
    _write_csv(path, ["round", "region", "bias", "count"], rows)
    return path


def emit_curves(out: str) -> str:
    """Mean MCC per (strategy, round) across seeds."""
    records = _read_csv(os.path.join(out, BATCH_CURVES))
    cells: dict[tuple[str, int], list[float]] = {}
    labeled: dict[tuple[str, int], int] = {}
    for rec in records:
        key = (rec["strategy"], int(rec["round"]))
        if rec["mcc"] != "":
            cells.setdefault(key, []).append(float(rec["mcc"]))
        labeled[key] = int(rec["labeled_count"])
    rows = [
        [strategy, rnd, labeled[(strategy, rnd)],
         _fmt_float(float(np.mean(v)) if (v := cells.get((strategy, rnd), [])) else float("nan"))]
        for strategy, rnd in sorted(labeled)
    ]
    path = os.path.join(out, PLOT_CURVES)
    _write_csv(path, ["strategy", "round", "labeled_count", "mcc"], rows)
    return path


def emit_scatter(out: str) -> str:
    """Per-pool (initial, final) bias pairs joined with the per-region
    fit statistics."""
    pairs = _read_csv(os.path.join(out, PERSISTENCE))
    summary = {rec["region"]: rec for rec in _read_csv(os.path.join(out, PERSISTENCE_SUMMARY))}
    rows = [
        [rec["pool_seed"], rec["region"], rec["initial_bias"], rec["final_bias"],
         summary[rec["region"]]["slope"], summary[rec["region"]]["r2"]]
        for rec in pairs
    ]
    path = os.path.join(out, PLOT_SCATTER)
    _write_csv(path, ["pool_seed", "region", "initial_bias", "final_bias",
                      "slope", "r2"], rows)
    return path


def emit_plot_data(out: str, kinds: list[str] | None = None) -> list[str]:
    """Emit every plot table the run's artifacts support (or the named
    kinds: history | curves | scatter)."""
    available = {
        "history": (lambda: os.path.exists(os.path.join(out, BIAS_HISTORY))
                    or os.path.exists(os.path.join(out, CLUSTER_HISTORY)), emit_history),
        "curves": (lambda: os.path.exists(os.path.join(out, BATCH_CURVES)), emit_curves),
        "scatter": (lambda: os.path.exists(os.path.join(out, PERSISTENCE)), emit_scatter),
    }
    if kinds:
        for kind in kinds:
            if kind not in available:
                raise HarnessError(f"unknown plot kind {kind!r}")
        selected = kinds
    else:
        selected = [k for k, (present, _) in available.items() if present()]
        if not selected:
            raise HarnessError(
                f"no emittable artifacts in {out}; expected one of "
                f"{BIAS_HISTORY}, {CLUSTER_HISTORY}, {BATCH_CURVES}, {PERSISTENCE}"
            )
    return [available[k][1](out) for k in selected]
