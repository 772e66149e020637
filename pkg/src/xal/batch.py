"""Interpretable query batches drawn from uncertainty regions.

A batch is assembled from one or more regions so each sub-batch shares
a single explanation. Four in-region selection strategies are provided
and compared with Matthews-correlation learning curves.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .cluster import kmeans_points
from .dataset import CATEGORICAL, TabularDataset
from .explain import Explanation, UncertaintyRegion, explain_uncertainty
from .learn import (
    BiasSeries,
    LearnerState,
    LearnError,
    RegionSpec,
    SimulatedOracle,
    certainty_labels,
    _bias_snapshot,
    _labeled_view,
    initial_state,
)
from .dataset import fit_discretizer
from .models import certainty

STRATEGIES = ("random", "q_best", "kmeans_center", "kmeans_uncertain")


class BatchError(ValueError):
    pass


@dataclass(frozen=True)
class BatchRequest:
    batch_size: int
    strategy: str = "q_best"
    interpretable_features: tuple[str, ...] = ()

    def __post_init__(self):
        if self.batch_size < 1:
            raise BatchError("batch_size must be >= 1")
        if self.strategy not in STRATEGIES:
            raise BatchError(f"unknown strategy {self.strategy!r}")


@dataclass(frozen=True)
class SubBatch:
    region: UncertaintyRegion
    explanation: Explanation
    members: tuple[int, ...]


@dataclass(frozen=True)
class InterpretableBatch:
    members: tuple[int, ...]
    sub_batches: tuple[SubBatch, ...]
    short: bool = False  # pool ran out before batch_size was reached


def select_batch_in_region(
    region_members: Sequence[int],
    certainties: np.ndarray,
    request: BatchRequest,
    seed: int,
    rows: np.ndarray | None = None,
) -> list[int]:
    """Pick request.batch_size members from one region.

    ``certainties`` is indexed by pool row id. ``rows`` (the full row
    matrix) is required by the k-means strategies, which cluster the
    member feature vectors with k = batch size and then take the member
    nearest each centroid (kmeans_center) or the least certain member
    per cluster (kmeans_uncertain). Any duplicate or missing picks are
    refilled from the remaining members in rising-certainty order.
    """
    members = np.asarray(sorted(set(int(i) for i in region_members)), dtype=np.int64)
    if members.size == 0:
        raise BatchError("region has no members")
    b = request.batch_size
    if b > members.size:
        raise BatchError("batch_size exceeds the region size; compose instead")
    certainties = np.asarray(certainties, dtype=np.float64)
    if b == members.size:
        return members.tolist()

    if request.strategy == "random":
        rng = np.random.default_rng(seed)
        return np.sort(rng.choice(members, size=b, replace=False)).tolist()

    order = np.lexsort((members, certainties[members]))  # certainty asc, index asc
    if request.strategy == "q_best":
        return members[order[:b]].tolist()

    if rows is None:
        raise BatchError(f"strategy {request.strategy!r} needs the pool rows")
    X = np.ascontiguousarray(rows[members])
    model = kmeans_points(X, b, seed)
    picks: list[int] = []
    for cid in range(b):
        in_cluster = np.nonzero(model.assignment == cid)[0]
        if in_cluster.size == 0:
            continue
        if request.strategy == "kmeans_center":
            d = np.sum((X[in_cluster] - model.centroids[cid]) ** 2, axis=1)
            local = in_cluster[int(np.argmin(d))]
        else:  # kmeans_uncertain
            sub = members[in_cluster]
            local = in_cluster[int(np.argmin(certainties[sub]))]
        picks.append(int(members[local]))
    unique = list(dict.fromkeys(picks))
    if len(unique) < b:
        backfill = [int(members[i]) for i in order if int(members[i]) not in unique]
        unique.extend(backfill[: b - len(unique)])
    return unique


def compose_batch(state: LearnerState, request: BatchRequest) -> InterpretableBatch:
    """Greedy multi-region batch assembly.

    Seed with the most uncertain pool point, explain it, and fill from
    its region's unlabeled members; while the batch is short, reseed on
    the most uncertain pool point outside every region used so far.
    """
    if not state.pool:
        raise LearnError("pool is exhausted")
    pool_idx = np.asarray(sorted(state.pool), dtype=np.int64)
    certainties = np.full(state.dataset.n_rows, np.inf)
    certainties[pool_idx] = certainty(state.model, state.dataset.rows[pool_idx])

    picked: list[int] = []
    sub_batches: list[SubBatch] = []
    excluded = np.zeros(state.dataset.n_rows, dtype=bool)  # members of used regions
    seed = state.seed + 1_000_003 * state.round
    while len(picked) < request.batch_size:
        eligible = pool_idx[~excluded[pool_idx]]
        eligible = eligible[~np.isin(eligible, picked)]
        if eligible.size == 0:
            break
        q = int(eligible[int(np.argmin(certainties[eligible]))])
        explanation = explain_uncertainty(
            state.model, q, state.dataset, state.explainer,
            discretizer=state.discretizer, stats=state.stats,
        )
        region = explanation.region
        in_region = region.contains(state.dataset.rows)
        excluded |= in_region
        members = pool_idx[in_region[pool_idx]]
        members = members[~np.isin(members, picked)]
        remaining = request.batch_size - len(picked)
        if members.size > remaining:
            sub = select_batch_in_region(
                members, certainties, replace(request, batch_size=remaining),
                seed + len(sub_batches), rows=state.dataset.rows,
            )
        else:
            sub = members.tolist()
        if not np.all(region.contains(state.dataset.rows[sub])):
            raise AssertionError("batch member violates its region constraints")
        picked.extend(sub)
        sub_batches.append(SubBatch(region, explanation, tuple(sub)))
    return InterpretableBatch(
        members=tuple(picked),
        sub_batches=tuple(sub_batches),
        short=len(picked) < request.batch_size,
    )


def render_batch_explanation(
    batch: InterpretableBatch,
    pool: TabularDataset,
    interpretable_features: Sequence[str] = (),
) -> str:
    """Shared constraints per region plus, for each named feature, the
    spread of raw values across that sub-batch: distinct category codes
    for categoricals, a min-to-max range for continuous features."""
    if not batch.members:
        raise BatchError("cannot render an empty batch")
    lines = [f"batch of {len(batch.members)} in {len(batch.sub_batches)} region(s)"]
    for r, sub in enumerate(batch.sub_batches, start=1):
        lines.append(f"region {r} ({len(sub.members)} member(s)): {sub.region.text}")
        for c, w in sub.explanation.constraints:
            lines.append(f"  {c.text}, weight {w:.4g}")
        for name in interpretable_features:
            j = pool.feature_index(name)
            values = pool.rows[list(sub.members), j]
            f = pool.schema[j]
            if f.kind == CATEGORICAL:
                cats = sorted({f.categories[int(round(v))] for v in values})
                lines.append(f"  {f.display} in {{{', '.join(cats)}}}")
            else:
                lo, hi = float(values.min()), float(values.max())
                if lo == hi:
                    lines.append(f"  {f.display} = {lo:g}")
                else:
                    lines.append(f"  {f.display} ranges {lo:g} to {hi:g}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Strategy evaluation

def confusion_counts(y_true: np.ndarray, y_pred: np.ndarray) -> tuple[int, int, int, int]:
    """(TP, FP, FN, TN) with class 1 positive."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    return tp, fp, fn, tn


def matthews_corrcoef(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """MCC from the confusion matrix; nan when any marginal is empty."""
    tp, fp, fn, tn = confusion_counts(y_true, y_pred)
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return float("nan")
    return (tp * tn - fp * fn) / float(np.sqrt(denom))


def label_batch(state: LearnerState, batch: InterpretableBatch, oracle) -> LearnerState:
    """Label every batch member, then refit once (atomic batch round)."""
    if not batch.members:
        raise BatchError("empty batch")
    labels = {i: oracle.label(i, None) for i in batch.members}
    if any(lab == "SKIP" for lab in labels.values()):
        raise BatchError("batch labeling does not support skips")
    labeled = state.labeled | set(batch.members)
    pool = state.pool - set(batch.members)
    model = state.model_fit(state.dataset, sorted(labeled))
    discretizer = fit_discretizer(
        _labeled_view(state.dataset, labeled),
        state.dataset.labels[sorted(labeled)].astype(np.float64),
    )
    history = state.history.copy()
    U = certainty_labels(model, state.dataset)
    counts = state.counts_map
    for i in batch.members:
        region = state.region_spec.region_of(i)
        if region is not None:
            counts[region] += 1
    history.append(_bias_snapshot(state, U), counts)
    return replace(
        state,
        labeled=labeled,
        pool=pool,
        model=model,
        round=state.round + 1,
        history=history,
        discretizer=discretizer,
        skipped=frozenset(),
        query_counts=tuple(counts.items()),
    )


@dataclass(frozen=True)
class StrategyCurves:
    """Per-strategy learning curves: one MCC and labeled count per
    batch round (round 0 = the shared initial fit)."""

    strategies: tuple[str, ...]
    mcc: dict[str, list[float]]
    labeled_count: dict[str, list[int]]

    def rows(self):
        for s in self.strategies:
            for r, (m, n) in enumerate(zip(self.mcc[s], self.labeled_count[s])):
                yield s, r, n, m


def evaluate_strategies(
    dataset: TabularDataset,
    model_fit,
    explainer,
    strategies: Sequence[str] = STRATEGIES,
    batch_size: int = 50,
    rounds: int = 10,
    initial_pool_size: int = 100,
    test_fraction: float = 0.25,
    seed: int = 0,
) -> StrategyCurves:
    """Compare batch strategies on held-out MCC.

    The dataset is split once (seeded) into a working pool and a test
    set; every strategy starts from the identical initial labeled pool
    and proceeds with compose-label-refit rounds.
    """
    for s in strategies:
        if s not in STRATEGIES:
            raise BatchError(f"unknown strategy {s!r}")
    if not 0.0 < test_fraction < 1.0:
        raise BatchError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    n_test = max(1, int(round(dataset.n_rows * test_fraction)))
    order = rng.permutation(dataset.n_rows)
    test_idx, pool_idx = order[:n_test], np.sort(order[n_test:])
    test_rows = dataset.rows[test_idx]
    test_labels = dataset.labels[test_idx]
    working = TabularDataset(
        dataset.rows[pool_idx], dataset.schema, dataset.labels[pool_idx],
        dataset.group[pool_idx] if dataset.group is not None else None,
    )

    def test_mcc(model) -> float:
        pred = (np.asarray(certainty_proba(model, test_rows)) > 0.5).astype(np.int64)
        return matthews_corrcoef(test_labels, pred)

    mcc: dict[str, list[float]] = {}
    labeled_count: dict[str, list[int]] = {}
    empty_regions = RegionSpec("constraint_sets", ())
    for strategy in strategies:
        state = initial_state(
            working, empty_regions, model_fit, explainer,
            initial_pool_size=initial_pool_size, seed=seed,
        )
        oracle = SimulatedOracle(working)
        curve = [test_mcc(state.model)]
        counts = [len(state.labeled)]
        request = BatchRequest(batch_size=batch_size, strategy=strategy)
        for _ in range(rounds):
            if not state.pool:
                break
            batch = compose_batch(state, request)
            state = label_batch(state, batch, oracle)
            curve.append(test_mcc(state.model))
            counts.append(len(state.labeled))
        mcc[strategy] = curve
        labeled_count[strategy] = counts
    return StrategyCurves(tuple(strategies), mcc, labeled_count)


def certainty_proba(model, rows: np.ndarray) -> np.ndarray:
    return model.proba(np.atleast_2d(np.asarray(rows, dtype=np.float64)))
