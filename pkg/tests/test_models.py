"""Model layer tests.

The boosting trace in TestAdaBoostHandTrace was executed by hand on
paper before the assertions were written; the weight/alpha arithmetic
is reproduced in the comments so the expected values can be re-derived
without running any code.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xal.dataset import TabularDataset, categorical, continuous, generate_toy, generate_surrogate_highdim
from xal.models import (
    AdaBoostModel,
    DegenerateKernelError,
    LogisticConfig,
    LogisticModel,
    ModelError,
    RidgeModel,
    Stump,
    certainty,
    fit_adaboost_stumps,
    fit_encoder,
    fit_logistic,
    fit_ridge_weighted,
    logistic_gradient,
    model_from_json,
    model_to_json,
    predict_proba,
    ridge_normal_residual,
    ridge_predict,
    schema_fingerprint,
)


# ---------------------------------------------------------------------------
# oracles


def oracle_penalized_logistic_loss(X, y, w, b, l2):
    """Independent rewrite of the training objective."""
    total = 0.0
    for i in range(X.shape[0]):
        z = float(X[i] @ w + b)
        total += max(z, 0.0) + math.log1p(math.exp(-abs(z))) - y[i] * z
    return total / X.shape[0] + 0.5 * l2 * float(w @ w)


def oracle_two_point_line(x1, y1, x2, y2):
    slope = (y2 - y1) / (x2 - x1)
    return slope, y1 - slope * x1


# ---------------------------------------------------------------------------
# logistic regression


class TestFitLogistic:
    def test_separable_data_classified_perfectly(self):
        rows = np.array([[-2.0], [-1.5], [-1.0], [1.0], [1.5], [2.0]])
        data = TabularDataset(rows, (continuous("x"),), np.array([0, 0, 0, 1, 1, 1]))
        model = fit_logistic(data)
        pred = (model.proba(rows) > 0.5).astype(int)
        assert pred.tolist() == data.labels.tolist()

    def test_gradient_vanishes_by_finite_differences(self):
        # central differences of an independently written loss at the
        # returned parameters; every component under 1e-5
        data = generate_toy(seed=21, n_per_gaussian=40)
        model = fit_logistic(data)
        X = model.encoder.transform(data.rows)
        y = data.labels.astype(np.float64)
        l2 = model.config.l2
        h = 1e-6
        for j in range(model.weights.size + 1):
            def loss_at(delta, j=j):
                w = model.weights.copy()
                b = model.bias
                if j < w.size:
                    w[j] += delta
                else:
                    b += delta
                return oracle_penalized_logistic_loss(X, y, w, b, l2)

            fd = (loss_at(h) - loss_at(-h)) / (2 * h)
            assert abs(fd) < 1e-5

    def test_analytic_gradient_matches_finite_differences(self):
        data = generate_toy(seed=22, n_per_gaussian=15)
        model = fit_logistic(data, config=LogisticConfig(max_epochs=40))
        grad = logistic_gradient(model, data)
        X = model.encoder.transform(data.rows)
        y = data.labels.astype(np.float64)
        h = 1e-6
        fd = np.empty_like(grad)
        for j in range(model.weights.size):
            w_p, w_m = model.weights.copy(), model.weights.copy()
            w_p[j] += h
            w_m[j] -= h
            fd[j] = (oracle_penalized_logistic_loss(X, y, w_p, model.bias, model.config.l2)
                     - oracle_penalized_logistic_loss(X, y, w_m, model.bias, model.config.l2)) / (2 * h)
        fd[-1] = (oracle_penalized_logistic_loss(X, y, model.weights, model.bias + h, model.config.l2)
                  - oracle_penalized_logistic_loss(X, y, model.weights, model.bias - h, model.config.l2)) / (2 * h)
        np.testing.assert_allclose(grad, fd, atol=1e-5)

    def test_single_class_degenerate(self):
        rows = np.array([[0.0], [1.0], [2.0]])
        data = TabularDataset(rows, (continuous("x"),), np.array([0, 0, 0]))
        model = fit_logistic(data)
        assert model.degenerate
        assert model.proba(rows).tolist() == [0.0, 0.0, 0.0]

    def test_loss_history_non_increasing(self):
        data = generate_toy(seed=23, n_per_gaussian=30)
        model = fit_logistic(data)
        assert np.all(np.diff(model.losses) <= 1e-12)

    def test_deterministic(self):
        data = generate_toy(seed=24, n_per_gaussian=30)
        a = fit_logistic(data)
        b = fit_logistic(data)
        assert np.array_equal(a.weights, b.weights)
        assert a.bias == b.bias

    def test_index_subset_fit(self):
        data = generate_toy(seed=25, n_per_gaussian=30)
        subset = fit_logistic(data, indices=range(0, 120, 2))
        full = fit_logistic(data)
        assert not np.array_equal(subset.weights, full.weights)

    def test_empty_indices_rejected(self):
        data = generate_toy(seed=26, n_per_gaussian=5)
        with pytest.raises(ModelError):
            fit_logistic(data, indices=[])


class TestPredictAPI:
    def _zero_model(self):
        data = generate_toy(seed=1, n_per_gaussian=3)
        enc = fit_encoder(data.schema, data.rows, standardize=True)
        return LogisticModel(enc, np.zeros(enc.n_columns), 0.0, np.empty(0), 0,
                             LogisticConfig())

    def test_zero_weights_give_half(self):
        model = self._zero_model()
        assert predict_proba(model, np.array([5.0, -7.0])) == 0.5
        assert certainty(model, np.array([5.0, -7.0])) == 0.5

    def test_single_row_returns_float(self):
        data = generate_toy(seed=2, n_per_gaussian=10)
        model = fit_logistic(data)
        p = predict_proba(model, data.rows[0])
        assert isinstance(p, float)
        c = certainty(model, data.rows[0])
        assert isinstance(c, float)

    def test_matrix_returns_array(self):
        data = generate_toy(seed=2, n_per_gaussian=10)
        model = fit_logistic(data)
        p = predict_proba(model, data.rows)
        assert p.shape == (40,)

    def test_certainty_is_max_class_probability(self):
        data = generate_toy(seed=3, n_per_gaussian=25)
        model = fit_logistic(data)
        p = predict_proba(model, data.rows)
        c = certainty(model, data.rows)
        np.testing.assert_allclose(c, np.maximum(p, 1 - p), atol=0)

    def test_certainty_fixed_points(self):
        # p = 0.5 -> 0.5; p = 0.12 -> 0.88
        assert max(0.5, 1 - 0.5) == 0.5
        data = generate_toy(seed=3, n_per_gaussian=25)
        model = fit_logistic(data)
        p = predict_proba(model, data.rows)
        c = certainty(model, data.rows)
        assert np.all(c >= 0.5) and np.all(c <= 1.0)
        near = np.abs(p - 0.12) < 0.05
        if np.any(near):
            np.testing.assert_allclose(c[near], 1 - p[near])

    def test_certainty_invariant_under_label_swap(self):
        data = generate_toy(seed=4, n_per_gaussian=25)
        flipped = TabularDataset(data.rows, data.schema, 1 - data.labels, data.group)
        a = certainty(fit_logistic(data), data.rows)
        b = certainty(fit_logistic(flipped), data.rows)
        np.testing.assert_allclose(a, b, atol=1e-9)

    @given(st.floats(-8, 8), st.floats(-8, 8))
    @settings(max_examples=100, deadline=None)
    def test_probability_and_certainty_ranges(self, x, y):
        data = generate_toy(seed=5, n_per_gaussian=20)
        model = fit_logistic(data)
        row = np.array([x, y])
        p = predict_proba(model, row)
        c = certainty(model, row)
        assert 0.0 <= p <= 1.0
        assert 0.5 <= c <= 1.0
        assert c == max(p, 1 - p)


# ---------------------------------------------------------------------------
# AdaBoost


class TestAdaBoostHandTrace:
    """Six points on a line, n_stumps=2, traced by hand.

    X = [0,1,2,3,4,5], y = [1,1,0,1,0,0] (as +/-: [+,+,-,+,-,-]).

    Round 1, uniform weights 1/6. Candidate errors (left leaf +1):
      thr 0.5 -> 2/6; thr 1.5 -> 1/6; thr 2.5 -> 2/6; thr 3.5 -> 1/6;
      thr 4.5 -> 2/6. First minimum wins: thr = 1.5, err = 1/6,
      alpha_1 = 0.5 ln 5. Leaf class-1 fractions: left {0,1} -> 1.0,
      right {2,3,4,5} -> 1/4.
    Weight update: the one mistake (x=3) takes weight 1/2, the rest 1/10
    each (standard AdaBoost re-normalization).

    Round 2, w = [.1,.1,.1,.5,.1,.1]. Candidate errors (left +1):
      thr 0.5 -> .6; thr 1.5 -> .5; thr 2.5 -> .6; thr 3.5 -> .1;
      thr 4.5 -> .2. Winner thr = 3.5, err = 0.1, alpha_2 = 0.5 ln 9.
      Leaf fractions: left {0,1,2,3} -> 3/4, right {4,5} -> 0.

    predict_proba = (alpha_1 f_1 + alpha_2 f_2) / (alpha_1 + alpha_2).
    """

    def _fit(self):
        rows = np.arange(6.0)[:, None]
        data = TabularDataset(rows, (continuous("x"),),
                              np.array([1, 1, 0, 1, 0, 0]))
        return data, fit_adaboost_stumps(data, n_stumps=2)

    def test_stump_sequence(self):
        _, model = self._fit()
        assert len(model.stumps) == 2
        s1, s2 = model.stumps
        assert (s1.feature, s1.threshold) == (0, 1.5)
        assert (s1.frac_left, s1.frac_right) == (1.0, 0.25)
        assert (s2.feature, s2.threshold) == (0, 3.5)
        assert (s2.frac_left, s2.frac_right) == (0.75, 0.0)

    def test_stage_weights(self):
        _, model = self._fit()
        assert model.alphas[0] == pytest.approx(0.5 * math.log(5), abs=1e-12)
        assert model.alphas[1] == pytest.approx(0.5 * math.log(9), abs=1e-12)

    def test_probabilities_match_hand_computation(self):
        data, model = self._fit()
        a1, a2 = 0.5 * math.log(5), 0.5 * math.log(9)
        f1 = [1.0, 1.0, 0.25, 0.25, 0.25, 0.25]   # thr 1.5 leaf per point
        f2 = [0.75, 0.75, 0.75, 0.75, 0.0, 0.0]   # thr 3.5 leaf per point
        expected = [(a1 * u + a2 * v) / (a1 + a2) for u, v in zip(f1, f2)]
        got = predict_proba(model, data.rows)
        np.testing.assert_allclose(got, expected, atol=1e-12)


class TestAdaBoostGeneral:
    def test_single_stump_at_separating_cut(self):
        rows = np.array([[0.0], [1.0], [2.0], [3.0]])
        data = TabularDataset(rows, (continuous("x"),), np.array([0, 0, 1, 1]))
        model = fit_adaboost_stumps(data, n_stumps=1)
        assert len(model.stumps) == 1
        assert model.stumps[0].threshold == 1.5
        np.testing.assert_allclose(predict_proba(model, rows), [0, 0, 1, 1], atol=0)

    def test_zero_error_stump_stops_early_with_capped_weight(self):
        rows = np.array([[0.0], [1.0], [2.0], [3.0]])
        data = TabularDataset(rows, (continuous("x"),), np.array([0, 0, 1, 1]))
        model = fit_adaboost_stumps(data, n_stumps=50)
        assert len(model.stumps) == 1  # perfect stump ends boosting
        assert model.alphas[0] > 10  # capped, far above any real stage weight

    def test_requested_stump_count_reached_on_hard_data(self):
        data = generate_surrogate_highdim(seed=6, n_rows=300, n_features=10,
                                          n_informative=4)
        model = fit_adaboost_stumps(data, n_stumps=200)
        assert len(model.stumps) == 200

    def test_leaf_fraction_output_by_leaf(self):
        enc = fit_encoder((continuous("x"),), np.array([[0.0], [1.0]]),
                          standardize=False)
        model = AdaBoostModel(enc, (Stump(0, 0.5, 0.25, 0.75),),
                              np.array([1.0]), 1)
        p = predict_proba(model, np.array([[0.0], [1.0]]))
        assert p.tolist() == [0.25, 0.75]

    def test_single_class_degenerate(self):
        rows = np.array([[0.0], [1.0]])
        data = TabularDataset(rows, (continuous("x"),), np.array([1, 1]))
        model = fit_adaboost_stumps(data)
        assert model.degenerate
        assert predict_proba(model, rows).tolist() == [1.0, 1.0]

    def test_accepted_stumps_beat_chance(self):
        # re-run the boosting weight recursion externally and verify each
        # accepted stump's weighted error under the weights it was chosen at
        data = generate_surrogate_highdim(seed=7, n_rows=200, n_features=5,
                                          n_informative=3)
        model = fit_adaboost_stumps(data, n_stumps=30)
        X = model.encoder.transform(data.rows)
        y = np.where(data.labels == 1, 1.0, -1.0)
        w = np.full(len(y), 1.0 / len(y))
        for stump, alpha in zip(model.stumps, model.alphas):
            h = np.where(X[:, stump.feature] <= stump.threshold, 1.0, -1.0)
            err_plus = float(np.sum(w[h != y]))
            err = min(err_plus, 1.0 - err_plus)
            assert err < 0.5
            sign = 1.0 if err_plus <= 1.0 - err_plus else -1.0
            assert alpha == pytest.approx(0.5 * math.log((1 - err) / err), abs=1e-9)
            w = w * np.exp(-alpha * y * (h * sign))
            w = w / np.sum(w)


# ---------------------------------------------------------------------------
# weighted ridge


class TestRidge:
    def test_exact_linear_target(self):
        rng = np.random.default_rng(31)
        x = rng.normal(size=50)
        y = 3.0 * x + 1.0
        model = fit_ridge_weighted(x[:, None], y, np.ones(50), lam=1e-6)
        assert model.coef[0] == pytest.approx(3.0, abs=1e-3)
        assert model.intercept == pytest.approx(1.0, abs=1e-3)

    def test_weights_concentrating_on_two_points(self):
        # as the off-weights vanish the fit approaches the line through
        # the two surviving points
        x = np.array([0.0, 1.0, 2.0, 3.0])
        y = np.array([5.0, -2.0, 4.0, 1.0])
        slope, intercept = oracle_two_point_line(1.0, -2.0, 3.0, 1.0)
        w = np.array([1e-12, 1.0, 1e-12, 1.0])
        model = fit_ridge_weighted(x[:, None], y, w, lam=1e-9)
        assert model.coef[0] == pytest.approx(slope, abs=1e-4)
        assert model.intercept == pytest.approx(intercept, abs=1e-4)

    def test_large_lambda_limit(self):
        rng = np.random.default_rng(33)
        X = rng.normal(size=(40, 3))
        y = rng.normal(size=40)
        w = rng.random(40)
        model = fit_ridge_weighted(X, y, w, lam=1e12)
        np.testing.assert_allclose(model.coef, 0.0, atol=1e-9)
        assert model.intercept == pytest.approx(float(w @ y) / float(np.sum(w)), abs=1e-9)

    def test_normal_equation_residual(self):
        rng = np.random.default_rng(34)
        X = rng.normal(size=(30, 4))
        y = rng.normal(size=30)
        w = rng.random(30)
        model = fit_ridge_weighted(X, y, w, lam=0.7)
        assert ridge_normal_residual(model, X, y, w) < 1e-8

    def test_all_zero_weights_rejected(self):
        with pytest.raises(DegenerateKernelError):
            fit_ridge_weighted(np.ones((3, 1)), np.ones(3), np.zeros(3), lam=1.0)

    def test_nonpositive_lambda_rejected(self):
        with pytest.raises(ModelError):
            fit_ridge_weighted(np.ones((3, 1)), np.ones(3), np.ones(3), lam=0.0)

    def test_predict_shape(self):
        model = RidgeModel(np.array([2.0]), 1.0, 1.0)
        out = ridge_predict(model, np.array([[0.0], [1.0], [2.0]]))
        assert out.tolist() == [1.0, 3.0, 5.0]

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_residual_property(self, seed):
        rng = np.random.default_rng(seed)
        n, d = int(rng.integers(3, 20)), int(rng.integers(1, 4))
        X = rng.normal(size=(n, d))
        y = rng.normal(size=n)
        w = rng.random(n) + 1e-3
        lam = float(rng.uniform(0.01, 10.0))
        model = fit_ridge_weighted(X, y, w, lam)
        assert ridge_normal_residual(model, X, y, w) < 1e-8


# ---------------------------------------------------------------------------
# encoding and serialization


class TestEncoder:
    def test_one_hot_column_names(self):
        schema = (continuous("age"), categorical("sex", ("Female", "Male")))
        rows = np.array([[30.0, 0.0], [40.0, 1.0]])
        enc = fit_encoder(schema, rows, standardize=False)
        assert enc.columns == ("age", "sex_Female", "sex_Male")

    def test_one_hot_values(self):
        schema = (categorical("sex", ("Female", "Male")),)
        rows = np.array([[0.0], [1.0], [0.0]])
        enc = fit_encoder(schema, rows, standardize=False)
        out = enc.transform(rows)
        assert out.tolist() == [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]

    def test_standardization(self):
        schema = (continuous("x"),)
        rows = np.array([[0.0], [2.0], [4.0]])
        enc = fit_encoder(schema, rows, standardize=True)
        out = enc.transform(rows)
        assert out.mean() == pytest.approx(0.0, abs=1e-12)
        assert out.std() == pytest.approx(1.0, abs=1e-12)

    def test_constant_column_scale_one(self):
        schema = (continuous("x"),)
        rows = np.ones((4, 1))
        enc = fit_encoder(schema, rows, standardize=True)
        out = enc.transform(rows)
        assert np.all(out == 0.0)


class TestSerialization:
    def test_logistic_round_trip(self):
        data = generate_toy(seed=41, n_per_gaussian=20)
        model = fit_logistic(data)
        clone = model_from_json(model_to_json(model))
        np.testing.assert_allclose(predict_proba(clone, data.rows),
                                   predict_proba(model, data.rows), atol=0)

    def test_adaboost_round_trip(self):
        data = generate_surrogate_highdim(seed=42, n_rows=120, n_features=6,
                                          n_informative=3)
        model = fit_adaboost_stumps(data, n_stumps=10)
        clone = model_from_json(model_to_json(model))
        np.testing.assert_allclose(predict_proba(clone, data.rows),
                                   predict_proba(model, data.rows), atol=0)

    def test_fingerprint_depends_on_schema(self):
        a = schema_fingerprint((continuous("x"),))
        b = schema_fingerprint((continuous("y"),))
        c = schema_fingerprint((categorical("x", ("u", "v")),))
        assert len({a, b, c}) == 3

    def test_unsupported_format_rejected(self):
        data = generate_toy(seed=43, n_per_gaussian=5)
        doc = model_to_json(fit_logistic(data)).replace('"format": 1', '"format": 99')
        with pytest.raises(ModelError):
            model_from_json(doc)
