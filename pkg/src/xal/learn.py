"""Pool-based active learning with uncertainty sampling and per-region
uncertainty-bias tracking.

Each round queries the pool point the model is least certain about,
explains that choice, asks the oracle for a label (live oracles may
skip), refits, and appends per-region bias and query counts to the
history. Bias follows the disparate-impact form: 1 minus the ratio of
the certain-point rate inside a region to the rate outside it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .dataset import TabularDataset
from .explain import (
    Explanation,
    ExplainerConfig,
    PoolStats,
    UncertaintyRegion,
    explain_uncertainty,
    pool_stats,
)
from .models import certainty
from .dataset import Discretizer, fit_discretizer

SKIP = "SKIP"
UNDEFINED = float("nan")


class LearnError(ValueError):
    pass


class OracleAbort(RuntimeError):
    """The oracle timed out or refused; the learner state is unchanged."""


def is_undefined(value: float) -> bool:
    return bool(np.isnan(value))


# ---------------------------------------------------------------------------
# Regions

@dataclass(frozen=True)
class RegionSpec:
    """Named, pairwise-disjoint index sets to track bias over; their
    union (the universe) may cover only part of the dataset."""

    kind: str  # group_attribute | constraint_sets | cluster_assignment
    regions: tuple[tuple[str, np.ndarray], ...]

    def __post_init__(self):
        seen: set[int] = set()
        cleaned = []
        for name, idx in self.regions:
            idx = np.unique(np.asarray(idx, dtype=np.int64))
            overlap = seen.intersection(idx.tolist())
            if overlap:
                raise LearnError(f"region {name!r} overlaps another region")
            seen.update(idx.tolist())
            cleaned.append((name, idx))
        object.__setattr__(self, "regions", tuple(cleaned))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.regions)

    @property
    def universe(self) -> np.ndarray:
        if not self.regions:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate([idx for _, idx in self.regions]))

    def members(self, name: str) -> np.ndarray:
        for n, idx in self.regions:
            if n == name:
                return idx
        raise LearnError(f"no region named {name!r}")

    def region_of(self, index: int) -> str | None:
        for name, idx in self.regions:
            if index in idx:
                return name
        return None


def regions_from_group(dataset: TabularDataset) -> RegionSpec:
    """One region per distinct group value, in first-appearance order."""
    if dataset.group is None:
        raise LearnError("dataset has no group attribute")
    pairs = [
        (str(value), np.nonzero(dataset.group == value)[0])
        for value in dataset.group_values()
    ]
    return RegionSpec("group_attribute", tuple(pairs))


def regions_from_constraints(
    named: Mapping[str, UncertaintyRegion], pool: TabularDataset
) -> RegionSpec:
    pairs = [(name, np.nonzero(region.contains(pool.rows))[0]) for name, region in named.items()]
    return RegionSpec("constraint_sets", tuple(pairs))


def regions_from_assignment(assignment: np.ndarray, prefix: str = "cluster_") -> RegionSpec:
    assignment = np.asarray(assignment, dtype=np.int64)
    pairs = [
        (f"{prefix}{cid}", np.nonzero(assignment == cid)[0])
        for cid in np.unique(assignment)
    ]
    return RegionSpec("cluster_assignment", tuple(pairs))


# ---------------------------------------------------------------------------
# Bias

def certainty_labels(model, dataset: TabularDataset) -> np.ndarray:
    """Boolean U over the full pool: True where certainty >= the median
    certainty (even counts use the mean of the middle two)."""
    c = certainty(model, dataset.rows)
    return c >= np.median(c)


def uncertainty_bias(U: np.ndarray, members: np.ndarray, universe: np.ndarray) -> float:
    """1 - (certain rate inside members) / (certain rate in the rest of
    the universe); nan when either side is empty or the outside rate is
    zero. 0 means parity, positive means disproportionately uncertain."""
    U = np.asarray(U, dtype=bool)
    members = np.asarray(members, dtype=np.int64)
    universe = np.asarray(universe, dtype=np.int64)
    if members.size and not np.all(np.isin(members, universe)):
        raise LearnError("members must be a subset of the universe")
    if members.size == 0 or members.size == universe.size:
        return UNDEFINED
    outside = np.setdiff1d(universe, members, assume_unique=False)
    rate_in = float(np.mean(U[members]))
    rate_out = float(np.mean(U[outside]))
    if rate_out == 0.0:
        return UNDEFINED
    return 1.0 - rate_in / rate_out


@dataclass
class BiasSeries:
    """Per-region bias values and cumulative query counts, one entry
    per recorded round."""

    names: tuple[str, ...]
    bias: dict[str, list[float]] = field(default_factory=dict)
    counts: dict[str, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        for name in self.names:
            self.bias.setdefault(name, [])
            self.counts.setdefault(name, [])

    def append(self, bias: Mapping[str, float], counts: Mapping[str, int]) -> None:
        for name in self.names:
            self.bias[name].append(bias[name])
            count = counts[name]
            if self.counts[name] and count < self.counts[name][-1]:
                raise LearnError("cumulative counts cannot decrease")
            self.counts[name].append(count)

    def __len__(self) -> int:
        return len(self.bias[self.names[0]]) if self.names else 0

    def copy(self) -> "BiasSeries":
        return BiasSeries(
            self.names,
            {k: list(v) for k, v in self.bias.items()},
            {k: list(v) for k, v in self.counts.items()},
        )

    def rows(self):
        """Long-form (round, region, bias, count) tuples."""
        for name in self.names:
            for r, (b, c) in enumerate(zip(self.bias[name], self.counts[name])):
                yield r, name, b, c


# ---------------------------------------------------------------------------
# Oracles

class SimulatedOracle:
    """Reads the held-out ground-truth label; never skips."""

    def __init__(self, dataset: TabularDataset):
        self._labels = dataset.labels

    def label(self, index: int, explanation: Explanation | None):
        return int(self._labels[index])


class ScriptedOracle:
    """Replays a fixed decision sequence; for tests and session replay."""

    def __init__(self, dataset: TabularDataset, decisions: Sequence):
        self._labels = dataset.labels
        self._decisions = list(decisions)
        self._pos = 0

    def label(self, index: int, explanation: Explanation | None):
        if self._pos >= len(self._decisions):
            raise OracleAbort("scripted oracle exhausted")
        decision = self._decisions[self._pos]
        self._pos += 1
        if decision == SKIP:
            return SKIP
        if decision == "truth":
            return int(self._labels[index])
        return int(decision)


# ---------------------------------------------------------------------------
# Learner state and the round loop

ModelFitter = Callable[[TabularDataset, Sequence[int]], object]


@dataclass(frozen=True)
class LearnerState:
    dataset: TabularDataset
    labeled: frozenset
    pool: frozenset
    model: object
    round: int
    history: BiasSeries
    seed: int
    region_spec: RegionSpec
    model_fit: ModelFitter
    explainer: ExplainerConfig
    discretizer: Discretizer
    stats: PoolStats
    skipped: frozenset = frozenset()
    query_counts: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if self.labeled & self.pool:
            raise LearnError("labeled and pool sets must be disjoint")
        if self.labeled | self.pool != frozenset(range(self.dataset.n_rows)):
            raise LearnError("labeled and pool must partition the dataset")

    @property
    def counts_map(self) -> dict[str, int]:
        return dict(self.query_counts)


@dataclass(frozen=True)
class QueryRecord:
    round: int
    query_index: int
    certainty: float
    explanation: Explanation | None
    region: str | None
    outcome: str  # "labeled" or "skipped"
    label: int | None
    bias: dict[str, float]


def select_query(model, state: LearnerState) -> int:
    """Least-certain eligible pool index; ties go to the lowest index."""
    eligible = sorted(state.pool - state.skipped)
    if not eligible:
        raise LearnError("no eligible pool points")
    idx = np.asarray(eligible, dtype=np.int64)
    c = certainty(model, state.dataset.rows[idx])
    return int(idx[int(np.argmin(c))])


def _bias_snapshot(state_or_spec, U: np.ndarray) -> dict[str, float]:
    spec = state_or_spec if isinstance(state_or_spec, RegionSpec) else state_or_spec.region_spec
    universe = spec.universe
    return {
        name: uncertainty_bias(U, spec.members(name), universe)
        for name in spec.names
    }


def initial_state(
    dataset: TabularDataset,
    region_spec: RegionSpec,
    model_fit: ModelFitter,
    explainer: ExplainerConfig,
    initial_pool_size: int,
    seed: int,
    initial_groups: Sequence | None = None,
) -> LearnerState:
    """Sample the initial labeled pool (uniform without replacement,
    optionally restricted to given group values), fit, and record the
    round-0 bias snapshot with zero query counts."""
    if initial_pool_size < 1:
        raise LearnError("initial_pool_size must be >= 1")
    rng = np.random.default_rng(seed)
    if initial_groups is not None:
        if dataset.group is None:
            raise LearnError("initial_groups requires a dataset group attribute")
        mask = np.isin(dataset.group, np.asarray(list(initial_groups), dtype=dataset.group.dtype))
        candidates = np.nonzero(mask)[0]
    else:
        candidates = np.arange(dataset.n_rows)
    if initial_pool_size > candidates.size:
        raise LearnError("initial_pool_size exceeds the candidate set")
    labeled = rng.choice(candidates, size=initial_pool_size, replace=False)
    labeled_set = frozenset(int(i) for i in labeled)
    model = model_fit(dataset, sorted(labeled_set))
    discretizer = fit_discretizer(_labeled_view(dataset, labeled_set), dataset.labels[sorted(labeled_set)].astype(np.float64))
    history = BiasSeries(region_spec.names)
    U = certainty_labels(model, dataset)
    history.append(_bias_snapshot(region_spec, U), {name: 0 for name in region_spec.names})
    return LearnerState(
        dataset=dataset,
        labeled=labeled_set,
        pool=frozenset(range(dataset.n_rows)) - labeled_set,
        model=model,
        round=0,
        history=history,
        seed=seed,
        region_spec=region_spec,
        model_fit=model_fit,
        explainer=explainer,
        discretizer=discretizer,
        stats=pool_stats(dataset),
        query_counts=tuple((name, 0) for name in region_spec.names),
    )


def _labeled_view(dataset: TabularDataset, labeled: frozenset) -> TabularDataset:
    idx = sorted(labeled)
    return TabularDataset(
        dataset.rows[idx], dataset.schema, dataset.labels[idx],
        dataset.group[idx] if dataset.group is not None else None,
    )


def step(state: LearnerState, oracle, explain: bool = True) -> tuple[LearnerState, QueryRecord]:
    """One active-learning round.

    Query selection, explanation, then the oracle's decision: a label
    moves the point to the labeled set, refits everything, and appends
    to the history; a skip only suppresses the point until the next
    refit. The input state is never mutated.
    """
    if not state.pool:
        raise LearnError("pool is exhausted")
    q = select_query(state.model, state)
    q_certainty = float(certainty(state.model, state.dataset.rows[q]))
    explanation = None
    if explain:
        explanation = explain_uncertainty(
            state.model, q, state.dataset, state.explainer,
            discretizer=state.discretizer, stats=state.stats,
        )
    region = state.region_spec.region_of(q)
    decision = oracle.label(q, explanation)

    if decision == SKIP:
        record = QueryRecord(state.round, q, q_certainty, explanation, region,
                             "skipped", None, {})
        return replace(state, skipped=state.skipped | {q}), record

    label = int(decision)
    if label != int(state.dataset.labels[q]):
        # live oracles may disagree with stored labels; the stored pool
        # is ground truth for simulations, so flag silently via record
        pass
    labeled = state.labeled | {q}
    pool = state.pool - {q}
    model = state.model_fit(state.dataset, sorted(labeled))
    discretizer = fit_discretizer(
        _labeled_view(state.dataset, labeled),
        state.dataset.labels[sorted(labeled)].astype(np.float64),
    )
    U = certainty_labels(model, state.dataset)
    bias = _bias_snapshot(state, U)
    counts = state.counts_map
    if region is not None:
        counts[region] += 1
    history = state.history.copy()
    history.append(bias, counts)
    new_state = replace(
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
    record = QueryRecord(new_state.round, q, q_certainty, explanation, region,
                         "labeled", label, bias)
    return new_state, record


@dataclass(frozen=True)
class ExperimentResult:
    history: BiasSeries
    query_log: tuple[QueryRecord, ...]
    final_state: LearnerState


def run_experiment(
    dataset: TabularDataset,
    region_spec: RegionSpec,
    model_fit: ModelFitter,
    explainer: ExplainerConfig,
    initial_pool_size: int,
    steps: int,
    seed: int,
    initial_groups: Sequence | None = None,
    oracle=None,
    explain: bool = True,
) -> ExperimentResult:
    """Initial sampling + fit, then `steps` rounds against the oracle
    (simulated by default). Deterministic under (config, seed)."""
    if steps < 0:
        raise LearnError("steps must be >= 0")
    state = initial_state(
        dataset, region_spec, model_fit, explainer,
        initial_pool_size, seed, initial_groups,
    )
    oracle = oracle if oracle is not None else SimulatedOracle(dataset)
    log: list[QueryRecord] = []
    for _ in range(steps):
        if not state.pool:
            break
        state, record = step(state, oracle, explain=explain)
        log.append(record)
    return ExperimentResult(state.history, tuple(log), state)


# ---------------------------------------------------------------------------
# Initial-pool persistence study

@dataclass(frozen=True)
class PersistenceResult:
    """Per-region (initial, final) bias pairs across pools, with the
    least-squares fit of final on initial."""

    pairs: dict[str, list[tuple[float, float]]]
    slope: dict[str, float]
    intercept: dict[str, float]
    r2: dict[str, float]
    n_excluded: dict[str, int]


def least_squares_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Slope, intercept, and r-squared of the simple regression of y on
    x; nan when fewer than 2 points or x is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 2 or np.all(x == x[0]):
        return UNDEFINED, UNDEFINED, UNDEFINED
    sxx = float(np.sum((x - x.mean()) ** 2))
    sxy = float(np.sum((x - x.mean()) * (y - y.mean())))
    slope = sxy / sxx
    intercept = float(y.mean()) - slope * float(x.mean())
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        return slope, intercept, UNDEFINED
    sse = float(np.sum((y - slope * x - intercept) ** 2))
    return slope, intercept, 1.0 - sse / sst


def pool_persistence_study(
    dataset: TabularDataset,
    region_spec: RegionSpec,
    model_fit: ModelFitter,
    explainer: ExplainerConfig,
    n_pools: int,
    steps: int,
    initial_pool_size: int,
    base_seed: int,
    explain: bool = True,
    workers: int = 1,
) -> PersistenceResult:
    """Run one experiment per starting pool and regress final bias on
    initial bias per region. Pools with an undefined initial or final
    bias are excluded pairwise and counted. Pools fan out over worker
    threads and merge in seed order, so results are worker-independent."""
    pairs: dict[str, list[tuple[float, float]]] = {n: [] for n in region_spec.names}
    excluded: dict[str, int] = {n: 0 for n in region_spec.names}

    def one_pool(p: int) -> ExperimentResult:
        return run_experiment(
            dataset, region_spec, model_fit, explainer,
            initial_pool_size, steps, seed=base_seed + p, explain=explain,
        )

    if workers > 1 and n_pools > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as tp:
            results = list(tp.map(one_pool, range(n_pools)))
    else:
        results = [one_pool(p) for p in range(n_pools)]
    for result in results:
        for name in region_spec.names:
            first = result.history.bias[name][0]
            last = result.history.bias[name][-1]
            if is_undefined(first) or is_undefined(last):
                excluded[name] += 1
            else:
                pairs[name].append((first, last))
    slope: dict[str, float] = {}
    intercept: dict[str, float] = {}
    r2: dict[str, float] = {}
    for name, pp in pairs.items():
        if pp:
            x = np.asarray([a for a, _ in pp])
            y = np.asarray([b for _, b in pp])
            slope[name], intercept[name], r2[name] = least_squares_line(x, y)
        else:
            slope[name] = intercept[name] = r2[name] = UNDEFINED
    return PersistenceResult(pairs, slope, intercept, r2, excluded)
