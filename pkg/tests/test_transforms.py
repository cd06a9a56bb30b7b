import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from embreduce import LabeledDataset, cross_validate
from embreduce.classifier import logreg_fit, logreg_predict
from embreduce.covariance import sample_covariance, shrink
from embreduce.errors import EmptySet, InsufficientClassData, InvalidParameter, NotPositiveDefinite, ShapeError
from embreduce.transforms import (
    DegenerateVarianceWarning,
    check_params,
    explained_variance_curve,
    lda_fit,
    lda_objective,
    lda_transform,
    load_model,
    mean_norm_ratio,
    model_from_dict,
    model_to_dict,
    pca_fit,
    pca_transform,
    plda_fit,
    plda_transform,
    ppa_fit,
    ppa_transform,
    save_model,
    valid_block_counts,
)
from oracles import majority_rate


def gaussian_classes(rng, n_per, means, scale=1.0):
    X = np.vstack([rng.standard_normal((n_per, len(m))) * scale + m for m in means])
    y = np.repeat(np.arange(len(means)), n_per)
    return X, y


class TestPpa:
    def test_zero_removal_is_centering(self):
        X = np.random.default_rng(0).standard_normal((20, 4)) + 3
        model = ppa_fit(X, 0)
        np.testing.assert_allclose(ppa_transform(model, X), X - X.mean(axis=0), atol=1e-14)
        assert model.d_removed == 0 and model.output_dim == 4

    def test_zero_mean_identity(self):
        X = np.random.default_rng(1).standard_normal((20, 3))
        X -= X.mean(axis=0)
        np.testing.assert_allclose(ppa_transform(ppa_fit(X, 0), X), X, atol=1e-14)

    def test_dominant_direction(self):
        rng = np.random.default_rng(2)
        t = rng.standard_normal(200) * 5
        s = rng.standard_normal(200) * 0.1
        X = np.outer(t, [1, 1]) / np.sqrt(2) + np.outer(s, [1, -1]) / np.sqrt(2)
        u = ppa_fit(X, 1).removed_directions[0]
        assert abs(abs(u @ np.array([1, 1]) / np.sqrt(2)) - 1) < 1e-6

    def test_removed_projections_vanish(self):
        X = np.random.default_rng(100).standard_normal((100, 10)) @ np.diag(np.arange(1, 11.0))
        model = ppa_fit(X, 3)
        out = ppa_transform(model, X)
        assert np.max(np.abs(out @ model.removed_directions.T)) <= 1e-9
        np.testing.assert_allclose(model.removed_directions @ model.removed_directions.T, np.eye(3), atol=1e-8)

    @pytest.mark.parametrize("d", [-1, 5, 6])
    def test_out_of_range(self, d):
        with pytest.raises(InvalidParameter):
            ppa_fit(np.random.default_rng(0).standard_normal((20, 5)), d)

    def test_dimension_mismatch(self):
        model = ppa_fit(np.random.default_rng(0).standard_normal((20, 5)), 1)
        with pytest.raises(ShapeError):
            ppa_transform(model, np.zeros((3, 4)))

    def test_zero_rows_excluded_from_fit(self):
        X = np.random.default_rng(3).standard_normal((40, 6)) + 2
        padded = np.vstack([X, np.zeros((10, 6))])
        a, b = ppa_fit(X, 2), ppa_fit(padded, 2)
        np.testing.assert_array_equal(a.mean, b.mean)
        np.testing.assert_array_equal(a.removed_directions, b.removed_directions)
        # zero rows still transform, to minus the mean with removed parts projected out
        assert ppa_transform(b, padded).shape == (50, 6)


class TestPca:
    def test_collinear(self):
        t = np.array([-2.0, -1.0, 1.0, 2.0])
        X = np.column_stack([t, t])
        model = pca_fit(X, 1)
        u = model.components[0]
        np.testing.assert_allclose(np.abs(u), [1 / np.sqrt(2)] * 2, atol=1e-12)
        out = pca_transform(model, X)[:, 0]
        np.testing.assert_allclose(np.abs(out), np.abs(t) * np.sqrt(2), atol=1e-12)
        assert np.all(np.sign(out) == np.sign(t) * np.sign(u[0]))

    def test_full_rank_is_rotation(self):
        X = np.random.default_rng(4).standard_normal((30, 5))
        out = pca_transform(pca_fit(X, 5), X)
        d_in = np.linalg.norm(X[:, None] - X[None], axis=2)
        d_out = np.linalg.norm(out[:, None] - out[None], axis=2)
        np.testing.assert_allclose(d_out, d_in, atol=1e-9)

    def test_trace_identity(self):
        X = np.random.default_rng(80).standard_normal((80, 6)) * np.arange(1, 7.0)
        model = pca_fit(X, 6)
        np.testing.assert_allclose(model.explained_variance.sum(), np.trace(sample_covariance(X).matrix), rtol=1e-9)

    def test_variance_ordering(self):
        X = np.random.default_rng(5).standard_normal((200, 8)) @ np.random.default_rng(6).standard_normal((8, 8))
        model = pca_fit(X, 5)
        out = pca_transform(model, X)
        var = out.var(axis=0)
        np.testing.assert_allclose(var, model.explained_variance, rtol=1e-8)
        assert np.all(np.diff(var) <= 1e-12 * var[0])
        assert np.all(model.explained_variance >= -1e-10)

    @pytest.mark.parametrize("d", [0, 7])
    def test_out_of_range(self, d):
        with pytest.raises(InvalidParameter):
            pca_fit(np.random.default_rng(0).standard_normal((20, 6)), d)

    def test_bounded_by_rows(self):
        with pytest.raises(InvalidParameter):
            pca_fit(np.random.default_rng(0).standard_normal((4, 6)), 4)


class TestLda:
    def test_isotropic_direction(self):
        rng = np.random.default_rng(7)
        X, y = gaussian_classes(rng, 300, [np.array([3.0, 0, 0]), np.array([-3.0, 0, 0])])
        w = lda_fit(X, y, 0.0).weights[:, 0]
        assert abs(w[0]) / np.linalg.norm(w) >= 0.99

    def test_beats_random_projections(self):
        rng = np.random.default_rng(8)
        p, K = 12, 3
        X, y = gaussian_classes(rng, 60, rng.standard_normal((K, p)))
        model = lda_fit(X, y, 0.2)
        within = shrink(model.scatter.within, 0.2)
        best = lda_objective(model.weights, model.scatter.between, within)
        trials = [lda_objective(rng.standard_normal((p, K - 1)), model.scatter.between, within) for _ in range(1000)]
        assert best >= max(trials)

    def test_weights_metric_orthonormal(self):
        rng = np.random.default_rng(9)
        X, y = gaussian_classes(rng, 40, rng.standard_normal((4, 10)))
        model = lda_fit(X, y, 0.3)
        S = shrink(model.scatter.within, 0.3)
        np.testing.assert_allclose(model.weights.T @ S @ model.weights, np.eye(3), atol=1e-6)

    @pytest.mark.parametrize("p", [5, 20, 40])
    def test_dimension_law(self, p):
        rng = np.random.default_rng(p)
        X, y = gaussian_classes(rng, 30, rng.standard_normal((4, p)))
        out = lda_transform(lda_fit(X, y, 0.5), X)
        assert out.shape == (120, 3)

    def test_transform_has_no_centering(self):
        rng = np.random.default_rng(10)
        X, y = gaussian_classes(rng, 20, rng.standard_normal((3, 6)))
        model = lda_fit(X, y, 0.1)
        np.testing.assert_array_equal(lda_transform(model, X), X @ model.weights)

    def test_singular_scatter_fails_loudly(self):
        rng = np.random.default_rng(11)
        X, y = gaussian_classes(rng, 5, rng.standard_normal((3, 40)))
        with pytest.raises(NotPositiveDefinite, match="increase shrinkage"):
            lda_fit(X, y, 0.0)
        assert lda_fit(X, y, 0.5).output_dim == 2

    def test_class_deficit(self):
        X = np.random.default_rng(0).standard_normal((7, 5))
        with pytest.raises(InsufficientClassData):
            lda_fit(X, [0, 0, 0, 1, 1, 1, 2], 0.5)

    def test_needs_more_dimensions_than_classes(self):
        X = np.random.default_rng(0).standard_normal((30, 3))
        with pytest.raises(InvalidParameter):
            lda_fit(X, np.arange(30) % 3, 0.5)

    def test_null_signal(self):
        rng = np.random.default_rng(12)
        X = rng.standard_normal((1500, 10))
        y = rng.permutation(np.arange(1500) % 3)
        ds = LabeledDataset(embedding=X, labels=y, label_names=("a", "b", "c"))
        report = cross_validate(ds, "lda", {"delta": 0.5})
        assert abs(report.mean_accuracy - majority_rate(y)) <= 0.05

    @pytest.mark.parametrize("c", [0.1, 10.0])
    def test_scale_equivariance(self, c):
        rng = np.random.default_rng(13)
        X, y = gaussian_classes(rng, 80, rng.standard_normal((3, 8)) * 1.5)
        Xt, yt = X[::2], y[::2]
        Xv = X[1::2]

        def predict(scale):
            model = lda_fit(Xt * scale, yt, 0.3)
            probe = logreg_fit(lda_transform(model, Xt * scale), yt)
            return logreg_predict(probe, lda_transform(model, Xv * scale))

        np.testing.assert_array_equal(predict(c), predict(1.0))


class TestPartitionedLda:
    def test_single_block_matches_lda(self):
        rng = np.random.default_rng(14)
        X, y = gaussian_classes(rng, 30, rng.standard_normal((3, 12)))
        a = plda_transform(plda_fit(X, y, 1, 0.4), X)
        b = lda_transform(lda_fit(X, y, 0.4), X)
        assert np.array_equal(a, b)

    def test_two_blocks_compose(self):
        rng = np.random.default_rng(15)
        X, y = gaussian_classes(rng, 30, rng.standard_normal((3, 8)))
        out = plda_transform(plda_fit(X, y, 2, 0.2), X)
        left = lda_transform(lda_fit(X[:, :4], y, 0.2), X[:, :4])
        right = lda_transform(lda_fit(X[:, 4:], y, 0.2), X[:, 4:])
        np.testing.assert_allclose(out, np.hstack([left, right]), rtol=0, atol=1e-10)

    def test_indivisible_lists_valid_counts(self):
        X = np.random.default_rng(0).standard_normal((30, 300))
        with pytest.raises(InvalidParameter) as info:
            plda_fit(X, np.arange(30) % 3, 7, 0.5)
        for nb in (1, 2, 12, 75):
            assert str(nb) in str(info.value)

    def test_block_too_small(self):
        X = np.random.default_rng(0).standard_normal((30, 12))
        with pytest.raises(InvalidParameter):
            plda_fit(X, np.arange(30) % 3, 4, 0.5)

    def test_valid_block_counts(self):
        assert valid_block_counts(300, 3) == [1, 2, 3, 4, 5, 6, 10, 12, 15, 20, 25, 30, 50, 60, 75]
        assert valid_block_counts(8, 3) == [1, 2]

    @settings(max_examples=25, deadline=None)
    @given(st.sampled_from([(24, 1), (24, 2), (24, 3), (24, 4), (30, 5), (30, 6)]), st.integers(0, 2**31))
    def test_dimension_law(self, shape, seed):
        p, nb = shape
        rng = np.random.default_rng(seed)
        X, y = gaussian_classes(rng, 20, rng.standard_normal((3, p)))
        model = plda_fit(X, y, nb, 0.5)
        assert model.block_size == p // nb
        assert plda_transform(model, X).shape == (60, 2 * nb)


class TestDiagnostics:
    def test_identical_rows(self):
        assert mean_norm_ratio(np.tile([1.0, 2.0, 3.0], (5, 1))) == 1.0

    def test_opposite_rows(self):
        assert mean_norm_ratio([[1.0, 0.0], [-1.0, 0.0]]) == 0.0

    def test_orthogonal_rows(self):
        assert abs(mean_norm_ratio([[1.0, 0.0], [0.0, 1.0]]) - np.sqrt(0.5)) < 1e-12

    def test_zero_rows_dropped(self):
        X = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        assert abs(mean_norm_ratio(X) - np.sqrt(0.5)) < 1e-12
        # zero rows shrink the mean norm and the average norm alike
        assert abs(mean_norm_ratio(X, drop_zero_rows=False) - np.sqrt(0.5)) < 1e-12
        assert mean_norm_ratio(np.zeros((3, 2)), drop_zero_rows=False) == 0.0

    def test_all_zero(self):
        with pytest.raises(EmptySet):
            mean_norm_ratio(np.zeros((4, 3)))

    def test_isotropic_curve(self):
        X = np.random.default_rng(10000).standard_normal((10000, 5))
        curve = explained_variance_curve(X)
        assert np.all((curve >= 0.1) & (curve <= 0.3))
        assert abs(curve.sum() - 1) <= 1e-9

    def test_rank_one(self):
        X = np.outer(np.random.default_rng(0).standard_normal(30), [1.0, 2.0, -1.0, 0.5])
        np.testing.assert_allclose(explained_variance_curve(X), [1, 0, 0, 0], atol=1e-12)

    def test_curve_length(self):
        assert explained_variance_curve(np.random.default_rng(0).standard_normal((4, 10))).shape == (3,)

    def test_degenerate_warns(self):
        with pytest.warns(DegenerateVarianceWarning):
            curve = explained_variance_curve(np.tile([1.0, 2.0], (6, 1)))
        np.testing.assert_array_equal(curve, [0.0, 0.0])

    def test_spike_spectrum(self, default_dataset):
        assert explained_variance_curve(default_dataset.embedding)[:10].sum() >= 0.8

    def test_check_params_normalises(self):
        assert check_params("plda", {"nb": "12", "delta": "0.5"}, 300, 3) == {"nb": 12, "delta": 0.5}
        with pytest.raises(InvalidParameter):
            check_params("lda", {}, 300, 3)
        with pytest.raises(InvalidParameter):
            check_params("svd", {}, 300, 3)


class TestSerialization:
    @pytest.fixture(scope="class")
    @staticmethod
    def fitted():
        rng = np.random.default_rng(16)
        X, y = gaussian_classes(rng, 30, rng.standard_normal((3, 12)) + 1)
        return X, [ppa_fit(X, 2), pca_fit(X, 4), lda_fit(X, y, 0.3), plda_fit(X, y, 3, 0.3)]

    def test_round_trip_bit_exact(self, fitted, tmp_path):
        X, models = fitted
        for i, model in enumerate(models):
            path = tmp_path / f"m{i}.json"
            save_model(model, path)
            again = load_model(path)
            assert type(again) is type(model)
            assert np.array_equal(again.transform(X), model.transform(X))

    def test_document_fields(self, fitted):
        _, models = fitted
        doc = json.loads(json.dumps(model_to_dict(models[3])))
        assert doc["method"] == "plda" and doc["p"] == 12
        assert doc["params"] == {"nb": 3, "delta": 0.3}
        assert {"method", "p", "params", "mean", "matrices", "version"} <= set(doc)
        assert np.array_equal(model_from_dict(doc).transform(X := fitted[0]), models[3].transform(X))

    def test_rejects_unknown_format(self):
        with pytest.raises(Exception):
            model_from_dict({"format": "other", "version": 1})

    def test_deterministic_fit(self, fitted):
        X, models = fitted
        assert np.array_equal(ppa_transform(ppa_fit(X, 2), X), ppa_transform(models[0], X))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert np.array_equal(pca_transform(pca_fit(X, 4), X), pca_transform(models[1], X))
