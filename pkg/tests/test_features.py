"""Tests for feature statistics and representation assembly."""

import numpy as np
import pytest

from scasrec.core.errors import CheckpointError, ConfigError, ContractError
from scasrec.diffengine import Graph
from scasrec.features import (
    FeatureStats,
    NormStats,
    assemble,
    embed_discrete,
    fit_columns,
    fit_feature_stats,
    fit_zscore,
    history_attention,
)
from scasrec.features.normalization import STD_FLOOR


class TestNormalization:
    def test_fit_columns(self):
        stats = fit_columns(np.array([[1.0, 5.0], [3.0, 5.0]]))
        assert np.array_equal(stats.mean, [2.0, 5.0])
        assert stats.std[0] == 1.0
        assert stats.std[1] == STD_FLOOR

    def test_apply_standardizes(self):
        stats = fit_columns(np.array([[1.0, 5.0], [3.0, 5.0]]))
        assert np.allclose(stats.apply(np.array([[3.0, 5.0]])), [[1.0, 0.0]])

    def test_apply_rejects_wrong_width(self):
        with pytest.raises(ConfigError):
            NormStats.identity(3).apply(np.zeros((2, 4)))

    def test_stats_are_frozen(self):
        stats = fit_columns(np.array([[1.0], [2.0]]))
        with pytest.raises(ValueError):
            stats.mean[0] = 9.0

    def test_needs_two_rows(self):
        with pytest.raises(ContractError):
            fit_columns(np.array([[1.0, 2.0]]))

    def test_needs_two_samples(self, toy_samples):
        with pytest.raises(ContractError):
            fit_zscore(toy_samples[:1])

    def test_route_stats_cover_every_candidate(self, toy_samples):
        stats = fit_zscore(toy_samples)
        rows = np.vstack([s.route_matrix() for s in toy_samples])
        assert np.allclose(stats.mean, rows.mean(axis=0))

    def test_tensor_round_trip(self, toy_stats):
        restored = FeatureStats.from_tensors(toy_stats.to_tensors())
        for field in ("route", "scene", "history"):
            assert np.array_equal(getattr(restored, field).mean, getattr(toy_stats, field).mean)
            assert np.array_equal(getattr(restored, field).std, getattr(toy_stats, field).std)

    def test_missing_tensors(self, toy_stats):
        tensors = toy_stats.to_tensors()
        del tensors["norm/scene/std"]
        with pytest.raises(CheckpointError):
            FeatureStats.from_tensors(tensors)

    def test_history_falls_back_to_identity(self, toy_samples):
        bare = [s.model_copy(update={"history": []}) for s in toy_samples]
        stats = fit_feature_stats(bare)
        assert stats.history.width == 0


class TestEncoding:
    def test_representation_shapes(self, small_model, toy_samples, toy_stats):
        g = Graph(small_model.store)
        rep = assemble(g, toy_samples[0], toy_stats, small_model.dims)
        assert rep.x_en.shape == (5, small_model.dims.width)
        assert rep.scene.shape == (1, small_model.dims.scene_dim)
        assert rep.n == 5

    def test_unknown_category_uses_row_zero(self, small_model):
        g = Graph(small_model.store)
        table = small_model.store.value("feat/emb/time")
        rows = small_model.dims.table_rows("time")
        for value in (0.0, 99.0, 2.5, -1.0):
            assert np.array_equal(embed_discrete(g, value, "time", rows).data[0], table[0])
        assert np.array_equal(embed_discrete(g, 3.0, "time", rows).data[0], table[3])

    def test_empty_history_gives_zero_summary(self, small_model):
        g = Graph(small_model.store)
        dims = small_model.dims
        routes = g.constant(np.ones((4, dims.route_width)))
        scene = g.constant(np.ones((1, dims.scene_dim)))
        summary = history_attention(g, routes, scene, np.zeros((0, dims.history_width)), dims)
        assert summary.shape == (4, dims.half)
        assert not summary.data.any()

    def test_softmax_mode_differs_from_sigmoid(self, small_model, toy_samples, toy_stats):
        g = Graph(small_model.store)
        dims = small_model.dims
        routes = g.constant(toy_stats.route.apply(toy_samples[0].route_matrix()))
        scene = g.constant(np.ones((1, dims.scene_dim)))
        history = toy_stats.history.apply(toy_samples[0].history_matrix(dims.history_width))
        gated = history_attention(g, routes, scene, history, dims, mode="sigmoid")
        normalized = history_attention(g, routes, scene, history, dims, mode="softmax")
        assert gated.shape == normalized.shape == (5, dims.half)
        assert not np.allclose(gated.data, normalized.data)

    def test_route_width_mismatch(self, small_model, toy_stats, make_sample):
        sample = make_sample([[1, 2], [2, 3]], [1, 2], route_width=12)
        with pytest.raises(ConfigError):
            assemble(Graph(small_model.store), sample, toy_stats, small_model.dims)

    def test_deterministic_given_stats(self, small_model, toy_samples, toy_stats):
        runs = [
            assemble(Graph(small_model.store, record=False), toy_samples[1], toy_stats, dims)
            for dims in (small_model.dims, small_model.dims)
        ]
        a, b = runs
        assert np.array_equal(a.x_en.data, b.x_en.data)
