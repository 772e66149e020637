"""Interpretable uncertainty clusters.

Every pool point's explanation becomes a sparse weighted vector over
the constraint vocabulary (one dimension per feature bin). K-means over
those vectors groups points by their sources of uncertainty; k is grown
until centroid agreement stops improving, and each cluster is labeled
by its dominant constraints (or "many sources" when nothing stands
out).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ._kernels import lloyd
from .dataset import BinConstraint, Discretizer, constraint_for
from .explain import Explanation

MANY_SOURCES = "many sources"


class ClusterError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Constraint vocabulary and encoding

@dataclass(frozen=True)
class ConstraintVocabulary:
    """Every realizable (feature, bin) constraint under one discretizer
    epoch, in feature-major bin-minor order."""

    constraints: tuple[BinConstraint, ...]

    def __post_init__(self):
        index = {(c.feature, c.bin): i for i, c in enumerate(self.constraints)}
        if len(index) != len(self.constraints):
            raise ClusterError("vocabulary dimensions must be unique")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.constraints)

    def dim_of(self, constraint: BinConstraint) -> int:
        key = (constraint.feature, constraint.bin)
        if key not in self._index:
            raise ClusterError(
                f"constraint {constraint.text!r} not in vocabulary; "
                "explanations and vocabulary must share a discretizer"
            )
        return self._index[key]

    def text(self, dim: int) -> str:
        return self.constraints[dim].text


def vocabulary_for(disc: Discretizer) -> ConstraintVocabulary:
    constraints = []
    for j in range(len(disc.schema)):
        for b in range(disc.n_bins(j)):
            constraints.append(constraint_for(disc, j, b))
    return ConstraintVocabulary(tuple(constraints))


@dataclass(frozen=True)
class ExplanationEncoding:
    """Dense matrix view of the sparse explanation vectors: row i holds
    point point_ids[i]'s constraint weights."""

    matrix: np.ndarray
    point_ids: tuple[int, ...]
    vocabulary: ConstraintVocabulary

    @property
    def n_points(self) -> int:
        return self.matrix.shape[0]


def encode_explanations(
    explanations: Sequence[Explanation], vocabulary: ConstraintVocabulary
) -> ExplanationEncoding:
    """Signed explanation weights scattered into constraint space."""
    matrix = np.zeros((len(explanations), len(vocabulary)))
    ids = []
    for i, exp in enumerate(explanations):
        ids.append(exp.query_index)
        for constraint, weight in exp.constraints:
            matrix[i, vocabulary.dim_of(constraint)] = weight
    return ExplanationEncoding(matrix, tuple(ids), vocabulary)


# ---------------------------------------------------------------------------
# K-means

@dataclass(frozen=True)
class PointClusters:
    centroids: np.ndarray
    assignment: np.ndarray
    cost_history: np.ndarray

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _kmeanspp_seeds(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[int(rng.integers(n))]
    d2 = np.sum((X - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            # every remaining point coincides with a centroid; spread
            # over arbitrary distinct rows deterministically
            centroids[c] = X[c % n]
            continue
        pick = int(rng.choice(n, p=d2 / total))
        centroids[c] = X[pick]
        d2 = np.minimum(d2, np.sum((X - centroids[c]) ** 2, axis=1))
    return centroids


def kmeans_points(
    X: np.ndarray, k: int, seed: int, max_iter: int = 100, tol: float = 1e-6,
    n_init: int = 1,
) -> PointClusters:
    """Lloyd's algorithm with k-means++ seeding.

    The within-cluster squared-deviation objective is asserted
    non-increasing across iterations on every run, and the returned
    assignment maps each point to its nearest returned centroid.

    With n_init > 1 the algorithm restarts from that many seedings and
    the run with the lowest final objective wins (earliest on ties).
    Restart 0 reuses `seed` itself, so n_init=1 is the plain single run.
    """
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ClusterError(f"k must be in [1, {n}]")
    if n_init < 1:
        raise ClusterError("n_init must be at least 1")
    best: PointClusters | None = None
    for r in range(n_init):
        rng = np.random.default_rng((seed + r * 0x9E3779B1) % (2**32))
        seeds = _kmeanspp_seeds(X, k, rng)
        centroids, assignment, costs, n_iter = lloyd(X, seeds, max_iter, tol)
        for prev, cur in zip(costs, costs[1:]):
            if cur > prev + 1e-9 * max(prev, 1.0):
                raise AssertionError("k-means objective increased")
        run = PointClusters(centroids, assignment, costs)
        if best is None or run.cost_history[-1] < best.cost_history[-1]:
            best = run
    return best


@dataclass(frozen=True)
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignment: np.ndarray
    point_ids: tuple[int, ...]
    vocabulary: ConstraintVocabulary
    labels: tuple[tuple[str, ...], ...] = ()
    agreement: float = float("nan")

    def members(self, cluster_id: int) -> np.ndarray:
        """Point ids assigned to one cluster."""
        ids = np.asarray(self.point_ids, dtype=np.int64)
        return ids[self.assignment == cluster_id]


def kmeans(
    encoding: ExplanationEncoding, k: int, seed: int, n_init: int = 10
) -> ClusterModel:
    """Cluster the explanation vectors; k must not exceed the number of
    distinct encodings.

    Explanation vectors are sparse and Lloyd's algorithm stalls in local
    optima on them more often than on dense point clouds, so the default
    takes the best of ten seedings by final objective."""
    distinct = np.unique(encoding.matrix, axis=0).shape[0]
    if k > distinct:
        raise ClusterError(f"k={k} exceeds the {distinct} distinct encodings")
    pc = kmeans_points(encoding.matrix, k, seed, n_init=n_init)
    model = ClusterModel(
        k=k, centroids=pc.centroids, assignment=pc.assignment,
        point_ids=encoding.point_ids, vocabulary=encoding.vocabulary,
    )
    return replace(model, agreement=centroid_agreement(model, encoding))


# ---------------------------------------------------------------------------
# Choosing k

def _dominant_dims(matrix: np.ndarray) -> np.ndarray:
    """Per row: the dimension with the largest |value| (first on ties;
    an all-zero row yields dimension 0)."""
    return np.argmax(np.abs(matrix), axis=1)


def centroid_agreement(model: ClusterModel, encoding: ExplanationEncoding) -> float:
    """Fraction of points whose dominant constraint equals their
    centroid's dominant dimension."""
    point_top = _dominant_dims(encoding.matrix)
    centroid_top = _dominant_dims(model.centroids)
    return float(np.mean(point_top == centroid_top[model.assignment]))


def overlap_fraction(model: ClusterModel, encoding: ExplanationEncoding) -> float:
    """Fraction of points sharing at least one constraint with their
    centroid's top dimensions (top count = the point's own nonzero
    count; zero-weight points compare dominant dims instead)."""
    hits = 0
    centroid_order = np.argsort(-np.abs(model.centroids), axis=1, kind="stable")
    for i in range(encoding.n_points):
        dims = np.nonzero(encoding.matrix[i])[0]
        cid = model.assignment[i]
        if dims.size == 0:
            hits += _dominant_dims(encoding.matrix[i:i + 1])[0] == \
                _dominant_dims(model.centroids[cid:cid + 1])[0]
            continue
        top = centroid_order[cid, : dims.size]
        if np.intersect1d(dims, top).size > 0:
            hits += 1
    return hits / encoding.n_points


@dataclass(frozen=True)
class ChooseKResult:
    k: int
    model: ClusterModel
    agreement: dict[int, float]
    overlap: dict[int, float]


def choose_k(
    encoding: ExplanationEncoding,
    k_range: Sequence[int],
    improvement_threshold: float = 0.005,
    seed: int = 0,
) -> ChooseKResult:
    """Smallest k in the ascending range where moving to the next k
    improves centroid agreement by less than the threshold; the last k
    if agreement keeps improving throughout."""
    ks = list(k_range)
    if not ks or any(a >= b for a, b in zip(ks, ks[1:])):
        raise ClusterError("k_range must be nonempty and ascending")
    if improvement_threshold <= 0:
        raise ClusterError("improvement_threshold must be positive")
    distinct = np.unique(encoding.matrix, axis=0).shape[0]
    ks = [k for k in ks if k <= distinct]
    if not ks:
        raise ClusterError("no k in range is feasible for these encodings")
    agreement: dict[int, float] = {}
    overlap: dict[int, float] = {}
    models: dict[int, ClusterModel] = {}
    chosen = ks[-1]
    for i, k in enumerate(ks):
        model = kmeans(encoding, k, seed=_seed_for(seed, k))
        models[k] = model
        agreement[k] = model.agreement
        overlap[k] = overlap_fraction(model, encoding)
        if i > 0 and agreement[k] - agreement[ks[i - 1]] < improvement_threshold:
            chosen = ks[i - 1]
            break
    return ChooseKResult(chosen, models[chosen], agreement, overlap)


def _seed_for(base: int, k: int) -> int:
    return (base * 1_000_003 + k) % (2**32)


# ---------------------------------------------------------------------------
# Cluster labeling

def label_cluster(
    centroid: np.ndarray,
    vocabulary: ConstraintVocabulary,
    mode: str = "top_m",
    m: int = 2,
    cutoff: float = 0.02,
) -> tuple[str, ...]:
    """Constraint strings naming a cluster.

    top_m: the m largest-|value| nonzero dimensions. contribution_cutoff:
    dimensions deviating from the mean nonzero value by at least the
    cutoff. Either way, nothing qualifying yields the "many sources"
    label.
    """
    centroid = np.asarray(centroid, dtype=np.float64)
    nonzero = np.nonzero(centroid)[0]
    if nonzero.size == 0:
        return (MANY_SOURCES,)
    if mode == "top_m":
        if m < 1:
            raise ClusterError("m must be >= 1")
        order = nonzero[np.argsort(-np.abs(centroid[nonzero]), kind="stable")]
        return tuple(vocabulary.text(d) for d in order[:m])
    if mode == "contribution_cutoff":
        mean = float(np.mean(centroid[nonzero]))
        keep = nonzero[np.abs(centroid[nonzero] - mean) >= cutoff]
        if keep.size == 0:
            return (MANY_SOURCES,)
        return tuple(vocabulary.text(d) for d in keep)
    raise ClusterError(f"unknown labeling mode {mode!r}")


def label_all(
    model: ClusterModel, mode: str = "top_m", m: int = 2, cutoff: float = 0.02
) -> ClusterModel:
    labels = tuple(
        label_cluster(model.centroids[c], model.vocabulary, mode, m, cutoff)
        for c in range(model.k)
    )
    return replace(model, labels=labels)


def cluster_report(model: ClusterModel) -> dict:
    """JSON-ready summary: sizes, labels, and top constraints."""
    labeled = model if model.labels else label_all(model)
    clusters = []
    for c in range(model.k):
        members = model.members(c)
        top = label_cluster(model.centroids[c], model.vocabulary, "top_m", m=3)
        clusters.append({
            "id": c,
            "size": int(members.size),
            "label": list(labeled.labels[c]),
            "top_constraints": [] if top == (MANY_SOURCES,) else list(top),
        })
    return {"k": model.k, "agreement": model.agreement, "clusters": clusters}


# ---------------------------------------------------------------------------
# Tracking clusters as learning regions

def explain_pool(
    model, pool, config, discretizer=None, stats=None, indices: Sequence[int] | None = None
) -> list[Explanation]:
    """Explanations for every pool row (or the given subset)."""
    from .explain import explain_uncertainty, pool_stats
    from .dataset import fit_discretizer

    if discretizer is None:
        discretizer = fit_discretizer(pool, pool.labels.astype(np.float64))
    if stats is None:
        stats = pool_stats(pool)
    rows = range(pool.n_rows) if indices is None else indices
    return [
        explain_uncertainty(model, int(i), pool, config,
                            discretizer=discretizer, stats=stats)
        for i in rows
    ]


def track_clusters(state, cluster_model: ClusterModel, steps: int, oracle=None):
    """Continue active learning with the frozen cluster assignment as
    the tracked regions, recording per-cluster bias and query counts."""
    from .learn import (
        BiasSeries, SimulatedOracle, _bias_snapshot, certainty_labels,
        regions_from_assignment, step as learn_step,
    )
    from dataclasses import replace as dc_replace

    ids = np.asarray(cluster_model.point_ids, dtype=np.int64)
    full = np.full(state.dataset.n_rows, -1, dtype=np.int64)
    full[ids] = cluster_model.assignment
    if np.all(full >= 0):
        spec = regions_from_assignment(full)
    else:
        # partial coverage: regions over the encoded subset only
        from .learn import RegionSpec
        pairs = tuple(
            (f"cluster_{cid}", ids[cluster_model.assignment == cid])
            for cid in range(cluster_model.k)
        )
        spec = RegionSpec("cluster_assignment", pairs)
    history = BiasSeries(spec.names)
    U = certainty_labels(state.model, state.dataset)
    history.append(_bias_snapshot(spec, U), {name: 0 for name in spec.names})
    tracked = dc_replace(state, region_spec=spec, history=history,
                         query_counts=tuple((n, 0) for n in spec.names))
    oracle = oracle if oracle is not None else SimulatedOracle(state.dataset)
    log = []
    for _ in range(steps):
        if not tracked.pool:
            break
        tracked, record = learn_step(tracked, oracle)
        log.append(record)
    from .learn import ExperimentResult
    return ExperimentResult(tracked.history, tuple(log), tracked)
