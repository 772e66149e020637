"""Binary probabilistic learners and the weighted ridge local model.

Two base learners are provided: from-scratch gradient-descent logistic
regression and discrete AdaBoost over depth-1 threshold stumps with
per-leaf class fractions. Both consume raw dataset rows and expand
categoricals to one-hot columns internally. The weighted ridge solver
serves as the explainer's local model.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ._kernels import best_stump, logistic_gd
from .dataset import CATEGORICAL, FeatureSchema, TabularDataset, categorical, continuous

SERIALIZATION_FORMAT = 1


class ModelError(ValueError):
    pass


class DegenerateKernelError(ModelError):
    """All sample weights zero: the local neighborhood carries no mass."""


def schema_fingerprint(schema) -> str:
    payload = [(f.name, f.kind, list(f.categories)) for f in schema]
    return hashlib.sha256(json.dumps(payload).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Feature encoding

@dataclass(frozen=True)
class FeatureEncoder:
    """Maps raw dataset rows to the model's numeric design matrix.

    Continuous features pass through (optionally standardized with
    training-set statistics); each categorical expands to one indicator
    column per category, named like ``sex_Male``.
    """

    schema: tuple[FeatureSchema, ...]
    columns: tuple[str, ...]
    standardize: bool
    means: np.ndarray
    scales: np.ndarray

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    def transform(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        out = np.empty((rows.shape[0], self.n_columns))
        c = 0
        for j, f in enumerate(self.schema):
            if f.kind == CATEGORICAL:
                codes = np.round(rows[:, j]).astype(np.int64)
                for m in range(len(f.categories)):
                    out[:, c] = codes == m
                    c += 1
            else:
                out[:, c] = rows[:, j]
                c += 1
        if self.standardize:
            out = (out - self.means) / self.scales
        return out


def fit_encoder(schema, rows: np.ndarray, standardize: bool) -> FeatureEncoder:
    columns: list[str] = []
    for f in schema:
        if f.kind == CATEGORICAL:
            columns.extend(f"{f.name}_{c}" for c in f.categories)
        else:
            columns.append(f.name)
    base = FeatureEncoder(tuple(schema), tuple(columns), False,
                          np.zeros(len(columns)), np.ones(len(columns)))
    if not standardize:
        return base
    X = base.transform(rows)
    means = X.mean(axis=0)
    scales = X.std(axis=0)
    scales[scales == 0.0] = 1.0  # constant column: leave it centered only
    return FeatureEncoder(tuple(schema), tuple(columns), True, means, scales)


# ---------------------------------------------------------------------------
# Logistic regression

@dataclass(frozen=True)
class LogisticConfig:
    learning_rate: float | None = None  # None: derived from the data curvature
    tol: float = 1e-6
    max_epochs: int = 10_000
    l2: float = 1e-2


@dataclass(frozen=True)
class LogisticModel:
    kind = "logistic_regression"
    encoder: FeatureEncoder
    weights: np.ndarray
    bias: float
    losses: np.ndarray
    n_epochs: int
    config: LogisticConfig
    degenerate: bool = False
    constant_p: float = 0.5

    def proba(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        if self.degenerate:
            return np.full(rows.shape[0], self.constant_p)
        z = self.encoder.transform(rows) @ self.weights + self.bias
        return _sigmoid_stable(z)


def _sigmoid_stable(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _lipschitz_step(X: np.ndarray, l2: float) -> float:
    # largest eigenvalue of X'X/n by power iteration; the logistic loss
    # gradient is Lipschitz with constant 0.25 * lmax + l2
    n, d = X.shape
    v = np.ones(d) / np.sqrt(d)
    lmax = 0.0
    for _ in range(200):
        u = X.T @ (X @ v) / n
        norm = float(np.linalg.norm(u))
        if norm < 1e-300:
            break
        v_new = u / norm
        if abs(norm - lmax) <= 1e-10 * max(norm, 1.0):
            lmax = norm
            break
        lmax = norm
        v = v_new
    return 1.0 / ((0.25 * lmax + l2) * 1.1)


def fit_logistic(
    data: TabularDataset,
    indices=None,
    config: LogisticConfig = LogisticConfig(),
) -> LogisticModel:
    """Deterministic full-batch GD on L2-regularized logistic loss.

    A single-class training set yields a flagged constant-probability
    model rather than an error; active learning can start degenerate.
    """
    idx = np.arange(data.n_rows) if indices is None else np.asarray(sorted(indices), dtype=np.int64)
    if idx.size == 0:
        raise ModelError("cannot fit on an empty index set")
    rows = data.rows[idx]
    y = data.labels[idx].astype(np.float64)
    encoder = fit_encoder(data.schema, rows, standardize=True)
    classes = np.unique(y)
    if classes.size < 2:
        return LogisticModel(encoder, np.zeros(encoder.n_columns), 0.0,
                             np.empty(0), 0, config,
                             degenerate=True, constant_p=float(classes[0]))
    X = encoder.transform(rows)
    step = config.learning_rate if config.learning_rate is not None else _lipschitz_step(X, config.l2)
    w, b, losses, n_epochs = logistic_gd(
        np.ascontiguousarray(X), np.ascontiguousarray(y),
        config.l2, step, config.tol, config.max_epochs,
    )
    return LogisticModel(encoder, w, float(b), losses, int(n_epochs), config)


def logistic_gradient(model: LogisticModel, data: TabularDataset, indices=None) -> np.ndarray:
    """Penalized-loss gradient at the fitted parameters, bias last.

    Exposed so tests can compare against finite differences.
    """
    idx = np.arange(data.n_rows) if indices is None else np.asarray(sorted(indices), dtype=np.int64)
    X = model.encoder.transform(data.rows[idx])
    y = data.labels[idx].astype(np.float64)
    p = _sigmoid_stable(X @ model.weights + model.bias)
    gw = X.T @ (p - y) / X.shape[0] + model.config.l2 * model.weights
    gb = float(np.mean(p - y))
    return np.append(gw, gb)


def logistic_loss(weights: np.ndarray, bias: float, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    z = X @ weights + bias
    softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return float(np.mean(softplus - y * z) + 0.5 * l2 * (weights @ weights))


# ---------------------------------------------------------------------------
# AdaBoost over decision stumps

_ALPHA_CAP = 0.5 * np.log((1.0 - 1e-10) / 1e-10)  # stage weight for a perfect stump


@dataclass(frozen=True)
class Stump:
    feature: int          # encoded column index
    threshold: float
    frac_left: float      # class-1 fraction of training rows with x <= threshold
    frac_right: float

    def leaf_fractions(self, X: np.ndarray) -> np.ndarray:
        return np.where(X[:, self.feature] <= self.threshold, self.frac_left, self.frac_right)

    def predict_sign(self, X: np.ndarray) -> np.ndarray:
        frac = self.leaf_fractions(X)
        return np.where(frac >= 0.5, 1.0, -1.0)


@dataclass(frozen=True)
class AdaBoostModel:
    kind = "adaboost_stumps"
    encoder: FeatureEncoder
    stumps: tuple[Stump, ...]
    alphas: np.ndarray
    config_n_stumps: int
    degenerate: bool = False
    constant_p: float = 0.5

    def proba(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        if self.degenerate or not self.stumps:
            return np.full(rows.shape[0], self.constant_p)
        X = self.encoder.transform(rows)
        acc = np.zeros(X.shape[0])
        for stump, alpha in zip(self.stumps, self.alphas):
            acc += alpha * stump.leaf_fractions(X)
        return acc / float(np.sum(self.alphas))


def fit_adaboost_stumps(
    data: TabularDataset, indices=None, n_stumps: int = 200
) -> AdaBoostModel:
    """Discrete AdaBoost; every stump keeps its unweighted per-leaf
    class-1 training fractions for probability output.

    A stump with zero weighted error ends boosting early with a capped
    stage weight; a best stump at error >= 0.5 also stops (nothing
    better than chance is accepted).
    """
    if n_stumps < 1:
        raise ModelError("n_stumps must be >= 1")
    idx = np.arange(data.n_rows) if indices is None else np.asarray(sorted(indices), dtype=np.int64)
    if idx.size == 0:
        raise ModelError("cannot fit on an empty index set")
    rows = data.rows[idx]
    labels = data.labels[idx]
    encoder = fit_encoder(data.schema, rows, standardize=False)
    if np.unique(labels).size < 2:
        return AdaBoostModel(encoder, (), np.empty(0), n_stumps,
                             degenerate=True, constant_p=float(labels[0]))
    X = np.ascontiguousarray(encoder.transform(rows))
    y = np.where(labels == 1, 1.0, -1.0)
    n = X.shape[0]
    sort_idx = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    w = np.full(n, 1.0 / n)
    stumps: list[Stump] = []
    alphas: list[float] = []
    for _ in range(n_stumps):
        j, thr, left_sign, err = best_stump(X, sort_idx, np.ascontiguousarray(w), y)
        if j < 0 or err >= 0.5 - 1e-12:
            break
        left = X[:, j] <= thr
        n_left = int(np.sum(left))
        frac_left = float(np.mean(labels[left])) if n_left else 0.0
        frac_right = float(np.mean(labels[~left])) if n_left < n else 0.0
        stumps.append(Stump(int(j), float(thr), frac_left, frac_right))
        if err <= 1e-12:
            alphas.append(_ALPHA_CAP)
            break
        alpha = 0.5 * np.log((1.0 - err) / err)
        alphas.append(alpha)
        h = np.where(left, left_sign, -left_sign)
        w = w * np.exp(-alpha * y * h)
        w = w / np.sum(w)
    return AdaBoostModel(encoder, tuple(stumps), np.asarray(alphas), n_stumps)


# ---------------------------------------------------------------------------
# Shared prediction API

def predict_proba(model, rows: np.ndarray):
    """Probability of class 1; float for a single row, array for a matrix."""
    rows = np.asarray(rows, dtype=np.float64)
    p = model.proba(rows)
    return float(p[0]) if rows.ndim == 1 else p


def certainty(model, rows: np.ndarray):
    """c = max(p, 1 - p), in [0.5, 1]."""
    rows = np.asarray(rows, dtype=np.float64)
    p = model.proba(rows)
    c = np.maximum(p, 1.0 - p)
    return float(c[0]) if rows.ndim == 1 else c


# ---------------------------------------------------------------------------
# Weighted ridge (the explainer's local model)

@dataclass(frozen=True)
class RidgeModel:
    coef: np.ndarray
    intercept: float
    lam: float


def fit_ridge_weighted(
    X: np.ndarray, y: np.ndarray, sample_weights: np.ndarray, lam: float
) -> RidgeModel:
    """Exact weighted ridge with an unpenalized intercept.

    Solves the weighted normal equations directly after weighted
    centering, so large lam drives the coefficients to 0 while the
    intercept tends to the weighted mean of y.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(sample_weights, dtype=np.float64)
    if lam <= 0:
        raise ModelError("lam must be > 0")
    if np.any(w < 0):
        raise ModelError("sample weights must be nonnegative")
    total = float(np.sum(w))
    if total <= 0.0:
        raise DegenerateKernelError("all sample weights are zero")
    x_mean = (w @ X) / total
    y_mean = float(w @ y) / total
    Xc = X - x_mean
    yc = y - y_mean
    d = X.shape[1]
    A = (Xc * w[:, None]).T @ Xc + lam * np.eye(d)
    rhs = (Xc * w[:, None]).T @ yc
    coef = np.linalg.solve(A, rhs)
    return RidgeModel(coef, y_mean - float(x_mean @ coef), lam)


def ridge_predict(model: RidgeModel, X: np.ndarray) -> np.ndarray:
    return np.atleast_2d(np.asarray(X, dtype=np.float64)) @ model.coef + model.intercept


def ridge_normal_residual(model: RidgeModel, X, y, sample_weights) -> float:
    """Max-abs residual of the stationarity system the fit solves.

    The system is over [X, 1] with the penalty applied to every
    coefficient except the intercept; 0 means an exact solve.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    w = np.asarray(sample_weights, dtype=np.float64)
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    beta = np.append(model.coef, model.intercept)
    penalty = np.append(np.full(X.shape[1], model.lam), 0.0)
    lhs = (A * w[:, None]).T @ (A @ beta) + penalty * beta
    rhs = (A * w[:, None]).T @ np.asarray(y, dtype=np.float64)
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# Serialization

def model_to_json(model) -> str:
    enc = model.encoder
    doc = {
        "format": SERIALIZATION_FORMAT,
        "kind": model.kind,
        "schema_fingerprint": schema_fingerprint(enc.schema),
        "schema": [
            {"name": f.name, "kind": f.kind, "categories": list(f.categories),
             "display_hint": f.display_hint}
            for f in enc.schema
        ],
        "encoder": {
            "standardize": enc.standardize,
            "means": enc.means.tolist(),
            "scales": enc.scales.tolist(),
        },
        "degenerate": model.degenerate,
        "constant_p": model.constant_p,
    }
    if isinstance(model, LogisticModel):
        doc["parameters"] = {
            "weights": model.weights.tolist(),
            "bias": model.bias,
            "l2": model.config.l2,
            "n_epochs": model.n_epochs,
        }
    elif isinstance(model, AdaBoostModel):
        doc["parameters"] = {
            "stumps": [
                {"feature": s.feature, "threshold": s.threshold,
                 "frac_left": s.frac_left, "frac_right": s.frac_right}
                for s in model.stumps
            ],
            "alphas": model.alphas.tolist(),
            "n_stumps": model.config_n_stumps,
        }
    else:
        raise ModelError(f"cannot serialize {type(model).__name__}")
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str):
    doc = json.loads(text)
    if doc.get("format") != SERIALIZATION_FORMAT:
        raise ModelError(f"unsupported serialization format {doc.get('format')!r}")
    schema = tuple(
        categorical(f["name"], f["categories"], f.get("display_hint"))
        if f["kind"] == CATEGORICAL
        else continuous(f["name"], f.get("display_hint"))
        for f in doc["schema"]
    )
    if schema_fingerprint(schema) != doc["schema_fingerprint"]:
        raise ModelError("schema fingerprint mismatch")
    e = doc["encoder"]
    columns: list[str] = []
    for f in schema:
        if f.kind == CATEGORICAL:
            columns.extend(f"{f.name}_{c}" for c in f.categories)
        else:
            columns.append(f.name)
    encoder = FeatureEncoder(schema, tuple(columns), e["standardize"],
                             np.asarray(e["means"]), np.asarray(e["scales"]))
    params = doc["parameters"]
    if doc["kind"] == "logistic_regression":
        return LogisticModel(
            encoder, np.asarray(params["weights"]), params["bias"],
            np.empty(0), params["n_epochs"], LogisticConfig(l2=params["l2"]),
            degenerate=doc["degenerate"], constant_p=doc["constant_p"],
        )
    if doc["kind"] == "adaboost_stumps":
        return AdaBoostModel(
            encoder,
            tuple(Stump(s["feature"], s["threshold"], s["frac_left"], s["frac_right"])
                  for s in params["stumps"]),
            np.asarray(params["alphas"]), params["n_stumps"],
            degenerate=doc["degenerate"], constant_p=doc["constant_p"],
        )
    raise ModelError(f"unknown model kind {doc['kind']!r}")
