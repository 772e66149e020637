"""Local explanations of model certainty at a query point.

The pipeline perturbs the query with pool-scaled Gaussian noise,
evaluates the model's certainty on each sample, weights samples by an
exponential similarity kernel, binarizes each sample as "same bin as
the query" per feature, greedily selects K indicator columns, and fits
a weighted ridge whose coefficients become the constraint weights. The
selected constraints conjoin into the query's uncertainty region.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import (
    CATEGORICAL,
    CONTINUOUS,
    BinConstraint,
    Discretizer,
    TabularDataset,
    constraint_for,
    discretize,
    fit_discretizer,
)
from .models import certainty, fit_ridge_weighted


class ExplainError(ValueError):
    pass


@dataclass(frozen=True)
class ExplainerConfig:
    n_samples: int = 1000
    kernel_width: float | None = None  # None: 0.75 * sqrt(d)
    n_constraints: int = 2             # K, the explanation length
    lam: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_constraints < 1:
            raise ExplainError("n_constraints must be >= 1")
        if self.n_samples < self.n_constraints + 1:
            raise ExplainError("n_samples must be >= n_constraints + 1")
        if self.kernel_width is not None and self.kernel_width <= 0:
            raise ExplainError("kernel_width must be positive")

    def width_for(self, n_features: int) -> float:
        if self.kernel_width is not None:
            return self.kernel_width
        return 0.75 * np.sqrt(n_features)


@dataclass(frozen=True)
class PoolStats:
    """Full-pool per-feature statistics driving perturbation and the
    kernel distance: std for continuous features, category frequencies
    for categorical ones."""

    schema: tuple
    means: np.ndarray
    stds: np.ndarray
    frequencies: tuple[np.ndarray | None, ...]


def pool_stats(pool: TabularDataset) -> PoolStats:
    means = pool.rows.mean(axis=0)
    stds = pool.rows.std(axis=0)
    freqs: list[np.ndarray | None] = []
    for j, f in enumerate(pool.schema):
        if f.kind == CATEGORICAL:
            counts = np.bincount(
                np.round(pool.rows[:, j]).astype(np.int64), minlength=len(f.categories)
            ).astype(np.float64)
            freqs.append(counts / counts.sum())
        else:
            freqs.append(None)
    return PoolStats(pool.schema, means, stds, tuple(freqs))


@dataclass(frozen=True)
class UncertaintyRegion:
    """Conjunction of bin constraints; the set of points sharing the
    query's sources of uncertainty."""

    constraints: tuple[BinConstraint, ...]

    def contains(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        mask = np.ones(rows.shape[0], dtype=bool)
        for c in self.constraints:
            mask &= c.contains(rows[:, c.feature])
        return mask

    @property
    def text(self) -> str:
        return " AND ".join(c.text for c in self.constraints)


@dataclass(frozen=True)
class Explanation:
    query_index: int
    constraints: tuple[tuple[BinConstraint, float], ...]
    intercept: float
    explained_certainty: float
    local_r2: float
    short: bool = False        # fewer than K usable indicator columns
    degenerate: bool = False   # constant certainty over the samples

    @property
    def region(self) -> UncertaintyRegion:
        return UncertaintyRegion(tuple(c for c, _ in self.constraints))

    @property
    def weights(self) -> np.ndarray:
        return np.asarray([w for _, w in self.constraints])

    def top_constraint(self) -> tuple[BinConstraint, float]:
        if not self.constraints:
            raise ExplainError("empty explanation has no top constraint")
        k = int(np.argmax(np.abs(self.weights)))
        return self.constraints[k]

    def render(self) -> str:
        """Constraints in descending |weight| order, one per line."""
        order = np.argsort(-np.abs(self.weights), kind="stable")
        return "\n".join(
            f"{self.constraints[i][0].text}, weight {_fmt_weight(self.constraints[i][1])}"
            for i in order
        )


def _fmt_weight(w: float) -> str:
    return f"{w:.4g}"


def explanation_to_json(exp: Explanation) -> str:
    return json.dumps({
        "query_index": exp.query_index,
        "certainty": exp.explained_certainty,
        "constraints": [
            {"text": c.text, "feature": c.feature, "weight": w}
            for c, w in exp.constraints
        ],
        "r2": exp.local_r2,
    }, sort_keys=True)


# ---------------------------------------------------------------------------
# Pipeline stages

def perturb(
    query: np.ndarray, stats: PoolStats, config: ExplainerConfig, rng: np.random.Generator
) -> np.ndarray:
    """N perturbed copies of the query; sample 0 is the query itself.

    Continuous features get Gaussian noise scaled by the pool std (a
    zero-variance feature is copied unchanged); categorical features are
    resampled from the pool's category frequencies.
    """
    query = np.asarray(query, dtype=np.float64)
    n = config.n_samples
    out = np.empty((n, query.size))
    for j, f in enumerate(stats.schema):
        if f.kind == CONTINUOUS:
            out[:, j] = query[j] + rng.standard_normal(n) * stats.stds[j]
        else:
            out[:, j] = rng.choice(len(f.categories), size=n, p=stats.frequencies[j])
    out[0] = query
    return out


def kernel_weights(
    query: np.ndarray, samples: np.ndarray, width: float, stats: PoolStats
) -> np.ndarray:
    """w_i = exp(-dist^2 / width^2), with squared distance summed over
    standardized continuous differences plus a unit indicator per
    differing categorical value."""
    if samples.shape[0] == 0:
        raise ExplainError("samples must be nonempty")
    query = np.asarray(query, dtype=np.float64)
    d2 = np.zeros(samples.shape[0])
    for j, f in enumerate(stats.schema):
        if f.kind == CONTINUOUS:
            scale = stats.stds[j] if stats.stds[j] > 0 else 1.0
            d2 += ((samples[:, j] - query[j]) / scale) ** 2
        else:
            d2 += (np.round(samples[:, j]) != np.round(query[j])).astype(np.float64)
    return np.exp(-d2 / width**2)


def binarize(sample_bins: np.ndarray, query_bins: np.ndarray) -> np.ndarray:
    """Indicator matrix: Z[i, j] = 1 iff sample i falls in the query's
    bin on feature j."""
    return (sample_bins == query_bins[None, :]).astype(np.float64)


def select_features_greedy(
    Z: np.ndarray, y: np.ndarray, w: np.ndarray, k: int, lam: float
) -> tuple[list[int], bool, list[float]]:
    """Forward selection of indicator columns by weighted ridge error.

    Starts empty; each step adds the column minimizing the ridge
    objective (weighted squared residuals plus the coefficient penalty,
    intercept unpenalized), ties to the lowest column index. The raw
    residual alone can rise when a column trades fit for penalty, so the
    objective is the selection criterion; it is provably non-increasing
    and asserted so. Constant columns are never candidates. Returns
    (selected order, short flag, objective path).
    """
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, d = Z.shape
    if k > d:
        raise ExplainError("k exceeds the number of candidate columns")
    usable = [j for j in range(d) if not np.all(Z[:, j] == Z[0, j])]

    # Gram precomputation over [Z, 1]: every subset fit reduces to a
    # small solve against these blocks.
    A = np.hstack([Z, np.ones((n, 1))])
    G = (A * w[:, None]).T @ A
    c = (A * w[:, None]).T @ y
    yty = float(w @ (y * y))

    def objective(subset: list[int]) -> float:
        # at the ridge optimum (Gs + P) beta = c_S, the objective
        # collapses to yty - beta.c
        cols = subset + [d]  # intercept column last
        Gs = G[np.ix_(cols, cols)].copy()
        for t in range(len(subset)):
            Gs[t, t] += lam
        beta = np.linalg.solve(Gs, c[cols])
        return max(yty - float(beta @ c[cols]), 0.0)

    selected: list[int] = []
    path: list[float] = [objective([])]
    while len(selected) < k and len(selected) < len(usable):
        best_j, best_val = -1, np.inf
        for j in usable:
            if j in selected:
                continue
            val = objective(selected + [j])
            if val < best_val:
                best_val, best_j = val, j
        selected.append(best_j)
        path.append(best_val)
    for prev, cur in zip(path, path[1:]):
        if cur > prev + 1e-7 * max(1.0, prev):
            raise AssertionError("greedy selection objective increased")
    return selected, len(selected) < k, path


def explain_uncertainty(
    model,
    query_index: int,
    pool: TabularDataset,
    config: ExplainerConfig,
    discretizer: Discretizer | None = None,
    stats: PoolStats | None = None,
) -> Explanation:
    """Explanation of certainty(model, query) as K weighted constraints.

    The discretizer is normally fit once per model refit on the labeled
    set and passed in; absent that, it is fit here against the pool's
    ground-truth labels. Each call owns an RNG stream derived from the
    config seed and the query index.
    """
    if not 0 <= query_index < pool.n_rows:
        raise ExplainError(f"query index {query_index} outside pool")
    if discretizer is None:
        discretizer = fit_discretizer(pool, pool.labels.astype(np.float64))
    if stats is None:
        stats = pool_stats(pool)
    query = pool.rows[query_index]
    rng = np.random.default_rng(config.seed ^ query_index)
    samples = perturb(query, stats, config, rng)
    y = certainty(model, samples)
    w = kernel_weights(query, samples, config.width_for(pool.n_features), stats)
    query_bins = discretize(discretizer, query)
    Z = binarize(discretizer.transform(samples), query_bins)

    k = min(config.n_constraints, pool.n_features)
    selected, short, _ = select_features_greedy(Z, y, w, k, config.lam)
    degenerate = bool(np.all(y == y[0]))
    if selected:
        fit = fit_ridge_weighted(Z[:, selected], y, w, config.lam)
        coef, intercept = fit.coef, fit.intercept
        pred = Z[:, selected] @ coef + intercept
    else:
        intercept = float(w @ y / np.sum(w))
        coef, pred = np.empty(0), np.full(y.shape, intercept)
    sst = float(w @ (y - float(w @ y / np.sum(w))) ** 2)
    sse = float(w @ (y - pred) ** 2)
    r2 = 1.0 - sse / sst if sst > 0 else 0.0

    constraints = tuple(
        (constraint_for(discretizer, j, int(query_bins[j])), float(coef[t]))
        for t, j in enumerate(selected)
    )
    return Explanation(
        query_index=query_index,
        constraints=constraints,
        intercept=float(intercept),
        explained_certainty=float(certainty(model, query)),
        local_r2=r2,
        short=short,
        degenerate=degenerate,
    )


def region_members(region: UncertaintyRegion, pool: TabularDataset) -> np.ndarray:
    """Indices of all pool rows satisfying every region constraint."""
    return np.nonzero(region.contains(pool.rows))[0]
