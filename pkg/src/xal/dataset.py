"""Tabular datasets for the learning engine.

Covers schema handling, the bundled synthetic generators, CSV ingestion
with declarative row cleaning, and the entropy-driven discretizer that
the explainer builds its bin constraints from.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from ._kernels import best_cut

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"

MAX_BINS = 8


class DatasetError(ValueError):
    """Raised for malformed schemas, rows, or ingestion problems."""


@dataclass(frozen=True)
class FeatureSchema:
    """One column: a continuous value or an indexed category code."""

    name: str
    kind: str
    categories: tuple[str, ...] = ()
    display_hint: str | None = None

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise DatasetError(f"unknown feature kind {self.kind!r}")
        if self.kind == CATEGORICAL and not self.categories:
            raise DatasetError(f"categorical feature {self.name!r} needs categories")
        if self.kind == CONTINUOUS and self.categories:
            raise DatasetError(f"continuous feature {self.name!r} cannot have categories")

    @property
    def display(self) -> str:
        return self.display_hint or self.name


def continuous(name: str, display_hint: str | None = None) -> FeatureSchema:
    return FeatureSchema(name, CONTINUOUS, (), display_hint)


def categorical(name: str, categories: Sequence[str], display_hint: str | None = None) -> FeatureSchema:
    return FeatureSchema(name, CATEGORICAL, tuple(categories), display_hint)


@dataclass(frozen=True)
class TabularDataset:
    """The pool: an N x d matrix, per-column schema, binary labels, and
    an optional per-row group attribute used for bias regions.

    Categorical cells hold the index of the code in the schema's
    category list. Instances are immutable and safe to share.
    """

    rows: np.ndarray
    schema: tuple[FeatureSchema, ...]
    labels: np.ndarray
    group: np.ndarray | None = None

    def __post_init__(self):
        rows = np.ascontiguousarray(np.asarray(self.rows, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "schema", tuple(self.schema))
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise DatasetError("rows must be a nonempty N x d matrix")
        if len(self.schema) != rows.shape[1]:
            raise DatasetError("schema length must match the number of columns")
        names = [f.name for f in self.schema]
        if len(set(names)) != len(names):
            raise DatasetError("feature names must be unique")
        if labels.shape != (rows.shape[0],):
            raise DatasetError("labels length must match the number of rows")
        if not np.all((labels == 0) | (labels == 1)):
            raise DatasetError("labels must be binary 0/1")
        if self.group is not None:
            group = np.asarray(self.group)
            object.__setattr__(self, "group", group)
            if group.shape != (rows.shape[0],):
                raise DatasetError("group length must match the number of rows")
        for j, f in enumerate(self.schema):
            if f.kind == CATEGORICAL:
                col = rows[:, j]
                if not np.all((col == np.round(col)) & (col >= 0) & (col < len(f.categories))):
                    raise DatasetError(f"column {f.name!r} has invalid category indices")
        rows.setflags(write=False)
        labels.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.schema)

    def feature_index(self, name: str) -> int:
        for j, f in enumerate(self.schema):
            if f.name == name:
                return j
        raise DatasetError(f"no feature named {name!r}")

    def group_values(self) -> list:
        """Distinct group values in first-appearance order."""
        if self.group is None:
            return []
        seen: dict = {}
        for v in self.group.tolist():
            seen.setdefault(v, None)
        return list(seen)

    def category_code(self, feature: int, value: float) -> str:
        return self.schema[feature].categories[int(round(value))]


# ---------------------------------------------------------------------------
# Generators


def generate_toy(seed: int, n_per_gaussian: int) -> TabularDataset:
    """Four unit-variance Gaussian blobs, one per quadrant.

    Centers (-3,-3) and (3,-3) carry label 0, (3,3) and (-3,3) label 1.
    The group attribute is the quadrant index of the generating center
    (Q1 = (+,+), Q2 = (-,+), Q3 = (-,-), Q4 = (+,-)).
    """
    if n_per_gaussian < 1:
        raise DatasetError("n_per_gaussian must be >= 1")
    centers = np.array([[-3.0, -3.0], [3.0, -3.0], [3.0, 3.0], [-3.0, 3.0]])
    labels_per_center = (0, 0, 1, 1)
    quadrant_per_center = (3, 4, 1, 2)
    rng = np.random.default_rng(seed)
    blocks = []
    for c in centers:
        blocks.append(c + rng.standard_normal((n_per_gaussian, 2)))
    rows = np.vstack(blocks)
    labels = np.repeat(labels_per_center, n_per_gaussian)
    group = np.repeat(quadrant_per_center, n_per_gaussian)
    schema = (continuous("x"), continuous("y"))
    return TabularDataset(rows, schema, labels, group)


def generate_surrogate_highdim(
    seed: int, n_rows: int, n_features: int, n_informative: int
) -> TabularDataset:
    """High-dimensional surrogate pool with a sparse logistic ground truth.

    Labels depend only on ``n_informative`` randomly chosen features; the
    rest are pure noise columns.
    """
    if n_informative > n_features:
        raise DatasetError("n_informative must be <= n_features")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_rows, n_features))
    informative = np.sort(rng.choice(n_features, size=n_informative, replace=False))
    if n_informative:
        coef = rng.normal(0.0, 2.0 / np.sqrt(n_informative), size=n_informative)
        logits = X[:, informative] @ coef
    else:
        logits = np.zeros(n_rows)
    p = 1.0 / (1.0 + np.exp(-logits))
    labels = (rng.random(n_rows) < p).astype(np.int64)
    width = len(str(max(n_features - 1, 1)))
    schema = tuple(continuous(f"f{j:0{width}d}") for j in range(n_features))
    return TabularDataset(X, schema, labels)


RECIDIVISM_RACES = ("African-American", "Caucasian", "Hispanic", "Other")
_RECIDIVISM_RACE_COUNTS = (3175, 2103, 509, 385)


def generate_recidivism_like(seed: int, n_rows: int = 6172) -> TabularDataset:
    """Synthetic stand-in for a recidivism-style arrest dataset.

    Mirrors the column vocabulary (sex, age, race, juvenile counts,
    priors, charge degree) and the subgroup size ordering of the public
    data it replaces, with a label process whose difficulty differs by
    subgroup so that uncertainty-bias dynamics are nontrivial.
    """
    rng = np.random.default_rng(seed)
    total = sum(_RECIDIVISM_RACE_COUNTS)
    race_counts = [int(round(c * n_rows / total)) for c in _RECIDIVISM_RACE_COUNTS]
    race_counts[0] += n_rows - sum(race_counts)
    race = np.repeat(np.arange(4), race_counts)

    sex = (rng.random(n_rows) < 0.81).astype(float)  # 1 = Male
    age = np.clip(np.round(18.0 + rng.gamma(2.2, 6.5, size=n_rows)), 18, 80)

    # priors distributions differ per subgroup: heavier tails raise the
    # share of easy (high-certainty) cases there
    priors_rate = np.array([4.2, 2.6, 2.2, 2.0])[race]
    priors = np.round(rng.gamma(0.9, priors_rate)).astype(float)
    juv_fel = np.round(rng.gamma(0.35, np.where(race == 0, 1.1, 0.7)))
    juv_misd = np.round(rng.gamma(0.4, np.where(race == 0, 1.2, 0.8)))
    charge = (rng.random(n_rows) < np.array([0.68, 0.62, 0.64, 0.6])[race]).astype(float)

    # label process: smooth core signal plus subgroup-dependent noise so
    # the learner stays less certain about the smaller subgroups
    z = (
        0.16 * priors
        - 0.045 * (age - 33.0)
        + 0.5 * juv_fel
        + 0.3 * juv_misd
        + 0.25 * charge
        + 0.15 * sex
        - 0.55
        + np.array([0.25, -0.15, 0.05, 0.0])[race]
    )
    noise = np.array([0.9, 1.1, 1.6, 1.8])[race]
    p = 1.0 / (1.0 + np.exp(-(z / noise)))
    labels = (rng.random(n_rows) < p).astype(np.int64)

    order = rng.permutation(n_rows)
    rows = np.column_stack([sex, age, race.astype(float), juv_fel, juv_misd, priors, charge])[order]
    labels = labels[order]
    race_names = np.array(RECIDIVISM_RACES, dtype=object)[race[order]]

    schema = (
        categorical("sex", ("Female", "Male")),
        continuous("age"),
        categorical("race", RECIDIVISM_RACES),
        continuous("juv_fel_count", "juvenile felony count"),
        continuous("juv_misd_count", "juvenile misdemeanor count"),
        continuous("priors_count", "prior convictions"),
        categorical("charge_degree", ("M", "F")),
    )
    return TabularDataset(rows, schema, labels, race_names)


# ---------------------------------------------------------------------------
# CSV ingestion

_NULL_TOKENS = {"", "na", "n/a", "null", "none", "nan"}


@dataclass(frozen=True)
class Filter:
    """One declarative row filter applied to raw CSV cells."""

    column: str
    op: str
    value: object = None

    _OPS = ("==", "!=", ">", ">=", "<", "<=", "in", "not_in", "not_null")

    def __post_init__(self):
        if self.op not in self._OPS:
            raise DatasetError(f"unknown filter op {self.op!r}")

    def keep(self, raw: str | None) -> bool:
        if self.op == "not_null":
            return raw is not None and raw.strip().lower() not in _NULL_TOKENS
        if raw is None:
            return False
        if self.op in ("in", "not_in"):
            inside = raw in set(map(str, self.value))
            return inside if self.op == "in" else not inside
        if self.op in ("==", "!="):
            same = raw == str(self.value)
            return same if self.op == "==" else not same
        try:
            num = float(raw)
        except ValueError:
            return False
        ref = float(self.value)
        return {
            ">": num > ref,
            ">=": num >= ref,
            "<": num < ref,
            "<=": num <= ref,
        }[self.op]


@dataclass(frozen=True)
class CleaningSpec:
    filters: tuple[Filter, ...] = ()
    strict_categories: bool = False


# Default cleaning for the recidivism CSV layout: plausible
# screening-to-arrest offsets, a usable recidivism flag, and ordinary
# felony/misdemeanor charges only.
PROPUBLICA_CLEANING = CleaningSpec(
    filters=(
        Filter("days_b_screening_arrest", ">=", -30),
        Filter("days_b_screening_arrest", "<=", 30),
        Filter("is_recid", "!=", -1),
        Filter("c_charge_degree", "in", ("F", "M")),
    )
)


@dataclass(frozen=True)
class LoadResult:
    dataset: TabularDataset
    n_read: int
    n_filtered: int
    n_dropped: int
    appended_categories: dict[str, tuple[str, ...]]


def load_csv(
    path: str | os.PathLike,
    schema: Sequence[FeatureSchema],
    label_column: str,
    group_column: str | None = None,
    cleaning: CleaningSpec = CleaningSpec(),
) -> LoadResult:
    """Load a delimited file with a header row into a TabularDataset.

    Rows failing any cleaning filter are skipped; rows with missing or
    unparseable required cells are dropped and counted. Unknown category
    codes are appended to the schema unless ``strict_categories`` is set.
    """
    path = _resolve_data_path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DatasetError(f"{path}: empty file, expected a header row")
        header = set(reader.fieldnames)
        if label_column not in header:
            raise DatasetError(f"{path}: missing label column {label_column!r}")
        if group_column is not None and group_column not in header:
            raise DatasetError(f"{path}: missing group column {group_column!r}")
        for f in schema:
            if f.name not in header:
                raise DatasetError(f"{path}: missing feature column {f.name!r}")

        categories: dict[str, list[str]] = {
            f.name: list(f.categories) for f in schema if f.kind == CATEGORICAL
        }
        appended: dict[str, list[str]] = {}
        rows: list[list[float]] = []
        labels: list[int] = []
        groups: list[str] = []
        n_read = n_filtered = n_dropped = 0

        for record in reader:
            n_read += 1
            if not all(f.keep(record.get(f.column)) for f in cleaning.filters):
                n_filtered += 1
                continue
            parsed = _parse_row(record, schema, label_column, group_column,
                                categories, appended, cleaning.strict_categories)
            if parsed is None:
                n_dropped += 1
                continue
            row, label, group = parsed
            rows.append(row)
            labels.append(label)
            if group_column is not None:
                groups.append(group)

    if not rows:
        raise DatasetError(f"{path}: no rows survived cleaning")
    final_schema = tuple(
        replace(f, categories=tuple(categories[f.name])) if f.kind == CATEGORICAL else f
        for f in schema
    )
    dataset = TabularDataset(
        np.asarray(rows, dtype=np.float64),
        final_schema,
        np.asarray(labels, dtype=np.int64),
        np.asarray(groups, dtype=object) if group_column is not None else None,
    )
    return LoadResult(
        dataset=dataset,
        n_read=n_read,
        n_filtered=n_filtered,
        n_dropped=n_dropped,
        appended_categories={k: tuple(v) for k, v in appended.items()},
    )


def _parse_row(record, schema, label_column, group_column, categories, appended, strict):
    raw_label = (record.get(label_column) or "").strip()
    if raw_label not in ("0", "1"):
        try:
            num = float(raw_label)
        except ValueError:
            return None
        if num not in (0.0, 1.0):
            return None
        raw_label = str(int(num))
    row: list[float] = []
    for f in schema:
        raw = (record.get(f.name) or "").strip()
        if raw.lower() in _NULL_TOKENS:
            return None
        if f.kind == CONTINUOUS:
            try:
                row.append(float(raw))
            except ValueError:
                return None
        else:
            codes = categories[f.name]
            if raw not in codes:
                if strict:
                    raise DatasetError(f"unknown category {raw!r} for feature {f.name!r}")
                codes.append(raw)
                appended.setdefault(f.name, []).append(raw)
            row.append(float(codes.index(raw)))
    group = None
    if group_column is not None:
        group = (record.get(group_column) or "").strip()
        if group.lower() in _NULL_TOKENS:
            return None
    return row, int(raw_label), group


def _resolve_data_path(path):
    path = os.fspath(path)
    if not os.path.isabs(path) and not os.path.exists(path):
        root = os.environ.get("XAL_DATA_DIR")
        if root:
            candidate = os.path.join(root, path)
            if os.path.exists(candidate):
                return candidate
    return path


# ---------------------------------------------------------------------------
# Discretization


@dataclass(frozen=True)
class Discretizer:
    """Per-feature binning: ascending cuts for continuous features,
    identity over category indices for categorical ones.

    Bins are left-open, right-closed: bin k covers (c_{k-1}, c_k], with
    bin 0 reaching down to -inf and the last bin up to +inf.
    """

    schema: tuple[FeatureSchema, ...]
    cuts: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "cuts", tuple(tuple(c) for c in self.cuts))
        if len(self.cuts) != len(self.schema):
            raise DatasetError("one cut list per feature required")
        for f, c in zip(self.schema, self.cuts):
            if f.kind == CATEGORICAL and c:
                raise DatasetError(f"categorical feature {f.name!r} cannot have cuts")
            if any(a >= b for a, b in zip(c, c[1:])):
                raise DatasetError(f"cuts for {f.name!r} must be strictly increasing")
            if f.kind == CONTINUOUS and len(c) + 1 > MAX_BINS:
                raise DatasetError(f"feature {f.name!r} exceeds {MAX_BINS} bins")

    def n_bins(self, feature: int) -> int:
        f = self.schema[feature]
        if f.kind == CATEGORICAL:
            return len(f.categories)
        return len(self.cuts[feature]) + 1

    def bin_of(self, feature: int, value: float) -> int:
        f = self.schema[feature]
        if f.kind == CATEGORICAL:
            return int(round(value))
        return int(np.searchsorted(self.cuts[feature], value, side="left"))

    def transform(self, rows: np.ndarray) -> np.ndarray:
        """Map rows (n x d or d) to integer bin indices."""
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        out = np.empty(rows.shape, dtype=np.int64)
        for j, f in enumerate(self.schema):
            if f.kind == CATEGORICAL:
                out[:, j] = np.round(rows[:, j]).astype(np.int64)
            else:
                out[:, j] = np.searchsorted(self.cuts[j], rows[:, j], side="left")
        return out


def discretize(disc: Discretizer, row: np.ndarray) -> np.ndarray:
    """Bin-index vector for one row."""
    return disc.transform(row)[0]


def fit_discretizer(
    data: TabularDataset, targets: np.ndarray, max_bins: int = MAX_BINS
) -> Discretizer:
    """Greedy supervised binning of the continuous features.

    Repeatedly inserts the single cut that most increases the
    information gain of ``targets`` with respect to the induced binning,
    stopping at ``max_bins`` bins per feature or when no candidate cut
    has positive gain. Candidates are midpoints between consecutive
    distinct values.
    """
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (data.n_rows,):
        raise DatasetError("targets length must match the dataset")
    if max_bins < 2:
        raise DatasetError("max_bins must be >= 2")
    max_bins = min(max_bins, MAX_BINS)
    cuts: list[tuple[float, ...]] = []
    for j, f in enumerate(data.schema):
        if f.kind == CATEGORICAL:
            cuts.append(())
            continue
        order = np.argsort(data.rows[:, j], kind="stable")
        values = np.ascontiguousarray(data.rows[order, j])
        tgt = np.ascontiguousarray(targets[order])
        cuts.append(tuple(_greedy_cuts(values, tgt, max_bins)))
    return Discretizer(data.schema, cuts)


def _greedy_cuts(values: np.ndarray, targets: np.ndarray, max_bins: int) -> list[float]:
    # values ascending with matching targets; grow the cut set one
    # highest-gain split at a time
    chosen: list[float] = []
    bounds = [0, len(values)]  # positions delimiting current bins
    while len(chosen) + 1 < max_bins:
        best = (-1.0, 0.0, -1)  # (gain, cut, bin index)
        for b in range(len(bounds) - 1):
            lo, hi = bounds[b], bounds[b + 1]
            gain, cut = best_cut(values[lo:hi], targets[lo:hi])
            if gain > best[0] + 1e-12:
                best = (gain, cut, b)
        gain, cut, b = best
        if gain <= 1e-12:
            break
        chosen.append(cut)
        lo, hi = bounds[b], bounds[b + 1]
        split_pos = lo + int(np.searchsorted(values[lo:hi], cut, side="left"))
        bounds.insert(b + 1, split_pos)
    return sorted(chosen)


# ---------------------------------------------------------------------------
# Bin constraints

_LE = "le"
_GT = "gt"
_INTERVAL = "interval"
_EQ = "eq"
_ALL = "all"


@dataclass(frozen=True)
class BinConstraint:
    """One rendered clause of an explanation: the condition a row must
    satisfy to fall in a particular bin of a particular feature."""

    feature: int
    bin: int
    name: str
    form: str
    low: float = 0.0
    high: float = 0.0
    category: str = ""

    @property
    def text(self) -> str:
        if self.form == _LE:
            return f"{self.name} <= {_fmt(self.high)}"
        if self.form == _GT:
            return f"{self.name} > {_fmt(self.low)}"
        if self.form == _INTERVAL:
            return f"{_fmt(self.low)} < {self.name} <= {_fmt(self.high)}"
        if self.form == _EQ:
            return f"{self.name} = {self.category}"
        return f"{self.name} = any"

    def contains(self, values: np.ndarray) -> np.ndarray:
        """Vectorized membership over a column of raw feature values."""
        values = np.asarray(values, dtype=np.float64)
        if self.form == _LE:
            return values <= self.high
        if self.form == _GT:
            return values > self.low
        if self.form == _INTERVAL:
            return (values > self.low) & (values <= self.high)
        if self.form == _EQ:
            return np.round(values).astype(np.int64) == self.bin
        return np.ones(values.shape, dtype=bool)

    def __str__(self) -> str:
        return self.text


def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(round(v, 10))


def constraint_for(disc: Discretizer, feature: int, bin: int) -> BinConstraint:
    """The canonical constraint for one bin of one feature."""
    f = disc.schema[feature]
    if f.kind == CATEGORICAL:
        if not 0 <= bin < len(f.categories):
            raise DatasetError(f"bin {bin} out of range for {f.name!r}")
        return BinConstraint(feature, bin, f.name, _EQ, category=f.categories[bin])
    cuts = disc.cuts[feature]
    if not 0 <= bin <= len(cuts):
        raise DatasetError(f"bin {bin} out of range for {f.name!r}")
    if not cuts:
        return BinConstraint(feature, 0, f.name, _ALL)
    if bin == 0:
        return BinConstraint(feature, 0, f.name, _LE, high=cuts[0])
    if bin == len(cuts):
        return BinConstraint(feature, bin, f.name, _GT, low=cuts[-1])
    return BinConstraint(feature, bin, f.name, _INTERVAL, low=cuts[bin - 1], high=cuts[bin])
