"""Config validation, JSON round trips, presets, and overrides."""

from __future__ import annotations

import dataclasses
import json

import numpy as np
import pytest

from xal.config import (
    BatchSpec,
    ClusterSpec,
    ConfigError,
    DatasetSpec,
    ExperimentConfig,
    ExplainerSpec,
    LoopSpec,
    ModelSpec,
    PRESETS,
    StudySpec,
    apply_overrides,
    build_dataset,
    build_explainer,
    build_model_fitter,
    config_from_json,
    config_to_json,
    get_preset,
    validate,
)


def diag_paths(exc: ConfigError) -> set[str]:
    return {path for path, _ in exc.diagnostics}


class TestValidation:
    def test_defaults_valid(self):
        validate(ExperimentConfig())

    def test_every_mode_has_valid_defaults(self):
        for mode in ("experiment", "persistence", "batch", "cluster"):
            validate(ExperimentConfig(mode=mode))

    def test_all_violations_reported_together(self):
        cfg = ExperimentConfig(
            mode="bogus",
            model=ModelSpec(l2=-1.0),
            explainer=ExplainerSpec(lam=0.0),
            workers=0,
        )
        with pytest.raises(ConfigError) as err:
            validate(cfg)
        assert {"mode", "model.l2", "explainer.lam", "workers"} <= diag_paths(err.value)

    def test_csv_dataset_requirements(self):
        cfg = ExperimentConfig(dataset=DatasetSpec(kind="csv"))
        with pytest.raises(ConfigError) as err:
            validate(cfg)
        assert {"dataset.path", "dataset.label_column",
                "dataset.schema"} <= diag_paths(err.value)

    def test_malformed_schema_entry(self):
        cfg = ExperimentConfig(dataset=DatasetSpec(
            kind="csv", path="x.csv", label_column="y",
            schema=(("age", "numeric", ()),),
        ))
        with pytest.raises(ConfigError) as err:
            validate(cfg)
        assert "dataset.schema[0]" in diag_paths(err.value)

    def test_explainer_sample_floor(self):
        cfg = ExperimentConfig(explainer=ExplainerSpec(n_samples=2, n_constraints=5))
        with pytest.raises(ConfigError) as err:
            validate(cfg)
        assert "explainer.n_samples" in diag_paths(err.value)

    def test_persistence_requires_group_regions(self):
        cfg = ExperimentConfig(mode="persistence", regions="none")
        with pytest.raises(ConfigError) as err:
            validate(cfg)
        assert "regions" in diag_paths(err.value)

    def test_batch_bounds(self):
        cfg = ExperimentConfig(mode="batch", batch=BatchSpec(
            strategies=("q_best", "softmax"), test_fraction=1.5, rounds=0))
        with pytest.raises(ConfigError) as err:
            validate(cfg)
        assert {"batch.strategies", "batch.test_fraction",
                "batch.rounds"} <= diag_paths(err.value)

    def test_cluster_bounds(self):
        cfg = ExperimentConfig(mode="cluster", cluster=ClusterSpec(
            k_min=5, k_max=2, label_mode="median", improvement_threshold=0.0))
        with pytest.raises(ConfigError) as err:
            validate(cfg)
        assert {"cluster.k_min", "cluster.label_mode",
                "cluster.improvement_threshold"} <= diag_paths(err.value)


class TestJsonRoundTrip:
    def test_default_round_trip(self):
        cfg = ExperimentConfig()
        assert config_from_json(config_to_json(cfg)) == cfg

    def test_every_preset_round_trips(self):
        for name, cfg in PRESETS.items():
            again = config_from_json(config_to_json(cfg))
            assert again == cfg, name

    def test_nested_tuples_survive(self):
        cfg = ExperimentConfig(
            dataset=DatasetSpec(kind="csv", path="p.csv", label_column="y",
                                schema=(("age", "continuous", ()),
                                        ("sex", "categorical", ("F", "M"))),
                                filters=(("age", ">", 18),)),
            loop=LoopSpec(initial_groups=(1, 3)),
        )
        again = config_from_json(config_to_json(cfg))
        assert again.dataset.schema == cfg.dataset.schema
        assert again.dataset.filters == cfg.dataset.filters
        assert again.loop.initial_groups == (1, 3)

    def test_unknown_top_level_field(self):
        with pytest.raises(ConfigError) as err:
            config_from_json('{"velocity": 2}')
        assert "velocity" in diag_paths(err.value)

    def test_unknown_section_field(self):
        with pytest.raises(ConfigError) as err:
            config_from_json('{"model": {"kind": "logistic", "dropout": 0.5}}')
        assert "model.dropout" in diag_paths(err.value)

    def test_section_must_be_object(self):
        with pytest.raises(ConfigError) as err:
            config_from_json('{"model": "logistic"}')
        assert "model" in diag_paths(err.value)

    def test_invalid_json_line_reported(self):
        with pytest.raises(ConfigError) as err:
            config_from_json('{\n  "mode": experiment\n}')
        assert any(path.startswith("line ") for path in diag_paths(err.value))

    def test_document_must_be_object(self):
        with pytest.raises(ConfigError):
            config_from_json("[1, 2]")

    def test_validation_applied_after_parse(self):
        with pytest.raises(ConfigError) as err:
            config_from_json('{"mode": "warp"}')
        assert "mode" in diag_paths(err.value)


class TestBuilders:
    def test_toy_dataset(self):
        data = build_dataset(DatasetSpec(kind="toy", seed=3, n_per_gaussian=5))
        assert data.n_rows == 20
        assert data.group is not None

    def test_surrogate_dataset(self):
        data = build_dataset(DatasetSpec(kind="surrogate", seed=3, n_rows=40,
                                         n_features=7, n_informative=2))
        assert data.rows.shape == (40, 7)

    def test_recidivism_dataset(self):
        data = build_dataset(DatasetSpec(kind="recidivism_like", seed=1, n_rows=500))
        assert data.n_rows == 500
        assert "race" in data.feature_names

    def test_csv_dataset(self, tmp_path):
        path = tmp_path / "people.csv"
        path.write_text("age,sex,y\n30,F,1\n40,M,0\n17,F,1\n", encoding="utf-8")
        spec = DatasetSpec(kind="csv", path=str(path), label_column="y",
                           schema=(("age", "continuous", ()),
                                   ("sex", "categorical", ("F", "M"))),
                           filters=(("age", ">=", 18),))
        data = build_dataset(spec)
        assert data.n_rows == 2
        assert data.rows[:, 0].tolist() == [30.0, 40.0]

    def test_model_fitters(self):
        data = build_dataset(DatasetSpec(kind="toy", seed=5, n_per_gaussian=10))
        for kind in ("logistic", "adaboost_stumps"):
            fit = build_model_fitter(ModelSpec(kind=kind, n_stumps=5))
            model = fit(data, list(range(20)))
            p = model.proba(data.rows[:4])
            assert np.all((0.0 <= p) & (p <= 1.0))

    def test_explainer_carries_seed(self):
        spec = ExplainerSpec(n_samples=123, n_constraints=3, lam=0.5)
        built = build_explainer(spec, seed=99)
        assert built.n_samples == 123
        assert built.n_constraints == 3
        assert built.lam == 0.5
        assert built.seed == 99


class TestPresets:
    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            get_preset("toy-fig9")

    def test_names_match_keys(self):
        for name, cfg in PRESETS.items():
            assert cfg.name == name

    def test_all_presets_validate(self):
        for cfg in PRESETS.values():
            validate(cfg)

    def test_get_preset_returns_registered_config(self):
        assert get_preset("toy-live") == PRESETS["toy-live"]


class TestOverrides:
    def test_seed_override_reaches_dataset(self):
        cfg = apply_overrides(get_preset("toy-live"), seed=123)
        assert cfg.seed == 123
        assert cfg.dataset.seed == 123

    def test_steps_override_by_mode(self):
        exp = apply_overrides(get_preset("toy-live"), steps=7)
        assert exp.loop.steps == 7
        batch = apply_overrides(get_preset("batch-fig5-desk"), steps=3)
        assert batch.batch.rounds == 3
        clus = apply_overrides(get_preset("clusters-fig7-desk"), steps=9)
        assert clus.cluster.track_steps == 9
        pers = apply_overrides(get_preset("propublica-fig4-desk"), steps=4)
        assert pers.study.steps == 4

    def test_out_override(self):
        cfg = apply_overrides(get_preset("toy-live"), out="elsewhere")
        assert cfg.out_dir == "elsewhere"

    def test_no_override_is_identity(self):
        cfg = get_preset("toy-live")
        assert apply_overrides(cfg) == cfg

    def test_override_result_is_validated(self):
        with pytest.raises(ConfigError):
            apply_overrides(get_preset("toy-live"), steps=-1)

    def test_original_untouched(self):
        cfg = get_preset("toy-live")
        apply_overrides(cfg, seed=555, out="tmp")
        assert cfg.seed == PRESETS["toy-live"].seed
        assert dataclasses.asdict(cfg) == dataclasses.asdict(PRESETS["toy-live"])
