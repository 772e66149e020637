"""Experiment configuration: JSON-round-trippable dataclasses, full
validation with path-level diagnostics, and the named presets."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

from .dataset import (
    CleaningSpec,
    Filter,
    PROPUBLICA_CLEANING,
    TabularDataset,
    categorical,
    continuous,
    generate_recidivism_like,
    generate_surrogate_highdim,
    generate_toy,
    load_csv,
)
from .explain import ExplainerConfig
from .models import LogisticConfig, fit_adaboost_stumps, fit_logistic

MODES = ("experiment", "persistence", "batch", "cluster")
DATASET_KINDS = ("toy", "recidivism_like", "surrogate", "csv")
MODEL_KINDS = ("logistic", "adaboost_stumps")


class ConfigError(ValueError):
    """Carries (path, message) diagnostics for every detected problem."""

    def __init__(self, diagnostics: Sequence[tuple[str, str]]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.diagnostics))


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "toy"
    seed: int = 0
    n_per_gaussian: int = 400
    n_rows: int = 6114
    n_features: int = 274
    n_informative: int = 12
    path: str = ""
    label_column: str = ""
    group_column: str | None = None
    schema: tuple[tuple[str, str, tuple[str, ...]], ...] = ()  # (name, kind, categories)
    filters: tuple[tuple[str, str, object], ...] = ()          # (column, op, value)


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "logistic"
    l2: float = 1e-2
    tol: float = 1e-6
    max_epochs: int = 10_000
    n_stumps: int = 200


@dataclass(frozen=True)
class ExplainerSpec:
    n_samples: int = 1000
    kernel_width: float | None = None
    n_constraints: int = 2
    lam: float = 1.0


@dataclass(frozen=True)
class LoopSpec:
    initial_pool_size: int = 50
    steps: int = 100
    n_runs: int = 1
    initial_groups: tuple = ()


@dataclass(frozen=True)
class StudySpec:
    n_pools: int = 30
    steps: int = 500
    initial_pool_size: int = 400


@dataclass(frozen=True)
class BatchSpec:
    strategies: tuple[str, ...] = ("random", "q_best", "kmeans_center", "kmeans_uncertain")
    batch_size: int = 50
    rounds: int = 10
    initial_pool_size: int = 100
    test_fraction: float = 0.25
    n_seeds: int = 1


@dataclass(frozen=True)
class ClusterSpec:
    k_min: int = 2
    k_max: int = 60
    improvement_threshold: float = 0.005
    label_mode: str = "top_m"
    label_m: int = 2
    label_cutoff: float = 0.02
    encode_stride: int = 1      # explain every stride-th pool point
    track_steps: int = 100
    initial_pool_size: int = 50


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "custom"
    mode: str = "experiment"
    seed: int = 0
    regions: str = "group"      # group | none
    dataset: DatasetSpec = DatasetSpec()
    model: ModelSpec = ModelSpec()
    explainer: ExplainerSpec = ExplainerSpec()
    loop: LoopSpec = LoopSpec()
    study: StudySpec = StudySpec()
    batch: BatchSpec = BatchSpec()
    cluster: ClusterSpec = ClusterSpec()
    workers: int = 1
    out_dir: str = "runs"


# ---------------------------------------------------------------------------
# Validation

def _check(diag, cond, path, message):
    if not cond:
        diag.append((path, message))


def validate(cfg: ExperimentConfig) -> None:
    """Raise ConfigError listing every violated field."""
    d: list[tuple[str, str]] = []
    _check(d, cfg.mode in MODES, "mode", f"must be one of {MODES}")
    _check(d, cfg.regions in ("group", "none"), "regions", "must be 'group' or 'none'")
    _check(d, cfg.workers >= 1, "workers", "must be >= 1")
    ds = cfg.dataset
    _check(d, ds.kind in DATASET_KINDS, "dataset.kind", f"must be one of {DATASET_KINDS}")
    if ds.kind == "toy":
        _check(d, ds.n_per_gaussian >= 1, "dataset.n_per_gaussian", "must be >= 1")
    if ds.kind == "surrogate":
        _check(d, ds.n_rows >= 1, "dataset.n_rows", "must be >= 1")
        _check(d, 0 <= ds.n_informative <= ds.n_features,
               "dataset.n_informative", "must be in [0, n_features]")
    if ds.kind == "csv":
        _check(d, bool(ds.path), "dataset.path", "required for csv datasets")
        _check(d, bool(ds.label_column), "dataset.label_column", "required for csv datasets")
        _check(d, bool(ds.schema), "dataset.schema", "required for csv datasets")
        for i, entry in enumerate(ds.schema):
            _check(d, len(entry) == 3 and entry[1] in ("continuous", "categorical"),
                   f"dataset.schema[{i}]", "must be (name, continuous|categorical, categories)")
    m = cfg.model
    _check(d, m.kind in MODEL_KINDS, "model.kind", f"must be one of {MODEL_KINDS}")
    _check(d, m.l2 > 0, "model.l2", "must be > 0")
    _check(d, m.tol > 0, "model.tol", "must be > 0")
    _check(d, m.max_epochs >= 1, "model.max_epochs", "must be >= 1")
    _check(d, m.n_stumps >= 1, "model.n_stumps", "must be >= 1")
    e = cfg.explainer
    _check(d, e.n_constraints >= 1, "explainer.n_constraints", "must be >= 1")
    _check(d, e.n_samples >= e.n_constraints + 1,
           "explainer.n_samples", "must be >= n_constraints + 1")
    _check(d, e.kernel_width is None or e.kernel_width > 0,
           "explainer.kernel_width", "must be positive when set")
    _check(d, e.lam > 0, "explainer.lam", "must be > 0")
    if cfg.mode == "experiment":
        _check(d, cfg.loop.initial_pool_size >= 1, "loop.initial_pool_size", "must be >= 1")
        _check(d, cfg.loop.steps >= 0, "loop.steps", "must be >= 0")
        _check(d, cfg.loop.n_runs >= 1, "loop.n_runs", "must be >= 1")
    if cfg.mode == "persistence":
        _check(d, cfg.study.n_pools >= 1, "study.n_pools", "must be >= 1")
        _check(d, cfg.study.steps >= 1, "study.steps", "must be >= 1")
        _check(d, cfg.regions == "group", "regions", "persistence mode tracks group regions")
    if cfg.mode == "batch":
        b = cfg.batch
        _check(d, all(s in BatchSpec().strategies for s in b.strategies),
               "batch.strategies", "unknown strategy name")
        _check(d, len(b.strategies) >= 1, "batch.strategies", "need at least one strategy")
        _check(d, b.batch_size >= 1, "batch.batch_size", "must be >= 1")
        _check(d, b.rounds >= 1, "batch.rounds", "must be >= 1")
        _check(d, 0.0 < b.test_fraction < 1.0, "batch.test_fraction", "must be in (0, 1)")
        _check(d, b.n_seeds >= 1, "batch.n_seeds", "must be >= 1")
    if cfg.mode == "cluster":
        c = cfg.cluster
        _check(d, 1 <= c.k_min <= c.k_max, "cluster.k_min", "need 1 <= k_min <= k_max")
        _check(d, c.improvement_threshold > 0, "cluster.improvement_threshold", "must be > 0")
        _check(d, c.label_mode in ("top_m", "contribution_cutoff"),
               "cluster.label_mode", "must be top_m or contribution_cutoff")
        _check(d, c.label_m >= 1, "cluster.label_m", "must be >= 1")
        _check(d, c.encode_stride >= 1, "cluster.encode_stride", "must be >= 1")
        _check(d, c.track_steps >= 0, "cluster.track_steps", "must be >= 0")
    if d:
        raise ConfigError(d)


# ---------------------------------------------------------------------------
# JSON round trip

def config_to_json(cfg: ExperimentConfig) -> str:
    return json.dumps(asdict(cfg), indent=2, sort_keys=True)


_SECTION_TYPES = {
    "dataset": DatasetSpec,
    "model": ModelSpec,
    "explainer": ExplainerSpec,
    "loop": LoopSpec,
    "study": StudySpec,
    "batch": BatchSpec,
    "cluster": ClusterSpec,
}


def _build_section(cls, payload: dict, path: str, diag: list):
    fields = {f for f in cls.__dataclass_fields__}
    kwargs = {}
    for key, value in payload.items():
        if key not in fields:
            diag.append((f"{path}.{key}", "unknown field"))
            continue
        if isinstance(value, list):
            value = _tupled(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        diag.append((path, str(exc)))
        return cls()


def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError([("", "config document must be a JSON object")])
    diag: list[tuple[str, str]] = []
    kwargs = {}
    for key, value in doc.items():
        if key in _SECTION_TYPES:
            if not isinstance(value, dict):
                diag.append((key, "must be an object"))
                continue
            kwargs[key] = _build_section(_SECTION_TYPES[key], value, key, diag)
        elif key in ExperimentConfig.__dataclass_fields__:
            kwargs[key] = _tupled(value) if isinstance(value, list) else value
        else:
            diag.append((key, "unknown field"))
    if diag:
        raise ConfigError(diag)
    cfg = ExperimentConfig(**kwargs)
    validate(cfg)
    return cfg


def config_from_json(text: str) -> ExperimentConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([(f"line {exc.lineno}", exc.msg)])
    return config_from_dict(doc)


# ---------------------------------------------------------------------------
# Builders

def build_dataset(spec: DatasetSpec) -> TabularDataset:
    if spec.kind == "toy":
        return generate_toy(spec.seed, spec.n_per_gaussian)
    if spec.kind == "recidivism_like":
        return generate_recidivism_like(spec.seed, spec.n_rows if spec.n_rows else 6172)
    if spec.kind == "surrogate":
        return generate_surrogate_highdim(
            spec.seed, spec.n_rows, spec.n_features, spec.n_informative
        )
    if spec.kind == "csv":
        schema = tuple(
            categorical(name, cats) if kind == "categorical" else continuous(name)
            for name, kind, cats in spec.schema
        )
        cleaning = CleaningSpec(tuple(Filter(c, op, v) for c, op, v in spec.filters))
        return load_csv(
            spec.path, schema, spec.label_column, spec.group_column, cleaning
        ).dataset
    raise ConfigError([("dataset.kind", f"unknown kind {spec.kind!r}")])


def build_model_fitter(spec: ModelSpec):
    if spec.kind == "logistic":
        lc = LogisticConfig(tol=spec.tol, max_epochs=spec.max_epochs, l2=spec.l2)

        def fit(dataset, indices):
            return fit_logistic(dataset, indices, lc)
        return fit
    if spec.kind == "adaboost_stumps":
        def fit(dataset, indices):
            return fit_adaboost_stumps(dataset, indices, spec.n_stumps)
        return fit
    raise ConfigError([("model.kind", f"unknown kind {spec.kind!r}")])


def build_explainer(spec: ExplainerSpec, seed: int) -> ExplainerConfig:
    return ExplainerConfig(
        n_samples=spec.n_samples,
        kernel_width=spec.kernel_width,
        n_constraints=spec.n_constraints,
        lam=spec.lam,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Presets

def _recidivism_spec() -> DatasetSpec:
    return DatasetSpec(kind="recidivism_like", seed=2016, n_rows=6172)


PRESETS: dict[str, ExperimentConfig] = {
    # Toy quadrant tracking: 50 runs, 50 initial points drawn from the
    # two label-pure centers, 200 queries each.
    "toy-fig2": ExperimentConfig(
        name="toy-fig2", mode="experiment", seed=20,
        dataset=DatasetSpec(kind="toy", seed=20, n_per_gaussian=400),
        model=ModelSpec(kind="logistic"),
        explainer=ExplainerSpec(n_samples=500, n_constraints=2),
        loop=LoopSpec(initial_pool_size=50, steps=200, n_runs=50,
                      initial_groups=(1, 3)),
        workers=4,
    ),
    # Per-race bias tracking on the recidivism-like pool.
    "propublica-fig3": ExperimentConfig(
        name="propublica-fig3", mode="experiment", seed=31,
        dataset=_recidivism_spec(),
        model=ModelSpec(kind="logistic"),
        explainer=ExplainerSpec(n_samples=1000, n_constraints=2),
        loop=LoopSpec(initial_pool_size=400, steps=1500, n_runs=1),
    ),
    "propublica-fig3-desk": ExperimentConfig(
        name="propublica-fig3-desk", mode="experiment", seed=31,
        dataset=_recidivism_spec(),
        model=ModelSpec(kind="logistic"),
        explainer=ExplainerSpec(n_samples=400, n_constraints=2),
        loop=LoopSpec(initial_pool_size=400, steps=200, n_runs=1),
    ),
    # Initial-pool bias persistence.
    "propublica-fig4": ExperimentConfig(
        name="propublica-fig4", mode="persistence", seed=42,
        dataset=_recidivism_spec(),
        model=ModelSpec(kind="logistic"),
        explainer=ExplainerSpec(n_samples=400, n_constraints=2),
        study=StudySpec(n_pools=150, steps=1500, initial_pool_size=400),
        workers=4,
    ),
    "propublica-fig4-desk": ExperimentConfig(
        name="propublica-fig4-desk", mode="persistence", seed=42,
        dataset=_recidivism_spec(),
        model=ModelSpec(kind="logistic"),
        explainer=ExplainerSpec(n_samples=400, n_constraints=2),
        study=StudySpec(n_pools=30, steps=500, initial_pool_size=400),
        workers=4,
    ),
    # Batch strategy comparison on the high-dimensional surrogate.
    "batch-fig5": ExperimentConfig(
        name="batch-fig5", mode="batch", seed=50, regions="none",
        dataset=DatasetSpec(kind="surrogate", seed=50, n_rows=6114,
                            n_features=274, n_informative=12),
        model=ModelSpec(kind="adaboost_stumps", n_stumps=200),
        explainer=ExplainerSpec(n_samples=1000, n_constraints=10),
        batch=BatchSpec(batch_size=50, rounds=15, initial_pool_size=100,
                        test_fraction=0.25, n_seeds=5),
        workers=4,
    ),
    "batch-fig5-desk": ExperimentConfig(
        name="batch-fig5-desk", mode="batch", seed=50, regions="none",
        dataset=DatasetSpec(kind="surrogate", seed=50, n_rows=2000,
                            n_features=60, n_informative=8),
        model=ModelSpec(kind="adaboost_stumps", n_stumps=60),
        explainer=ExplainerSpec(n_samples=400, n_constraints=10),
        batch=BatchSpec(batch_size=20, rounds=15, initial_pool_size=60,
                        test_fraction=0.25, n_seeds=10),
        workers=4,
    ),
    # Explanation-space clusters as tracked regions.
    "clusters-fig7": ExperimentConfig(
        name="clusters-fig7", mode="cluster", seed=70,
        dataset=_recidivism_spec(),
        model=ModelSpec(kind="logistic"),
        explainer=ExplainerSpec(n_samples=600, n_constraints=2),
        cluster=ClusterSpec(k_min=2, k_max=60, track_steps=500,
                            initial_pool_size=400),
    ),
    "clusters-fig7-desk": ExperimentConfig(
        name="clusters-fig7-desk", mode="cluster", seed=70,
        dataset=_recidivism_spec(),
        model=ModelSpec(kind="logistic"),
        explainer=ExplainerSpec(n_samples=300, n_constraints=2),
        cluster=ClusterSpec(k_min=2, k_max=48, encode_stride=2,
                            track_steps=120, initial_pool_size=400),
    ),
    "clusters-fig8": ExperimentConfig(
        name="clusters-fig8", mode="cluster", seed=80, regions="none",
        dataset=DatasetSpec(kind="surrogate", seed=80, n_rows=6114,
                            n_features=274, n_informative=12),
        model=ModelSpec(kind="logistic"),
        explainer=ExplainerSpec(n_samples=600, n_constraints=10),
        cluster=ClusterSpec(k_min=2, k_max=60, label_mode="contribution_cutoff",
                            label_cutoff=0.02, encode_stride=4,
                            track_steps=200, initial_pool_size=200),
    ),
    # Small all-purpose preset for the live console and quick smoke runs.
    "toy-live": ExperimentConfig(
        name="toy-live", mode="experiment", seed=7,
        dataset=DatasetSpec(kind="toy", seed=7, n_per_gaussian=50),
        model=ModelSpec(kind="logistic"),
        explainer=ExplainerSpec(n_samples=300, n_constraints=2),
        loop=LoopSpec(initial_pool_size=20, steps=50, n_runs=1,
                      initial_groups=(1, 3)),
    ),
}


def get_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError([("preset", f"unknown preset {name!r}; "
                            f"available: {', '.join(sorted(PRESETS))}")])
    return PRESETS[name]


def apply_overrides(cfg: ExperimentConfig, seed: int | None = None,
                    steps: int | None = None, out: str | None = None) -> ExperimentConfig:
    if seed is not None:
        cfg = replace(cfg, seed=seed,
                      dataset=replace(cfg.dataset, seed=seed))
    if steps is not None:
        cfg = replace(
            cfg,
            loop=replace(cfg.loop, steps=steps),
            study=replace(cfg.study, steps=steps),
            batch=replace(cfg.batch, rounds=max(1, steps)) if cfg.mode == "batch" else cfg.batch,
            cluster=replace(cfg.cluster, track_steps=steps) if cfg.mode == "cluster" else cfg.cluster,
        )
    if out is not None:
        cfg = replace(cfg, out_dir=out)
    validate(cfg)
    return cfg
