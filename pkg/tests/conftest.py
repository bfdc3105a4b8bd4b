"""Shared fixtures: a tiny road world, a tiny dataset and a small model."""

from typing import List

import numpy as np
import pytest

from scasrec.cli.checks import HISTORY_WIDTH, ROUTE_WIDTH, SCENE_WIDTH, toy_sample
from scasrec.core.config import ModelConfig, RunConfig, TrainConfig, WorldConfig
from scasrec.core.schema import Route, Sample
from scasrec.features.normalization import FeatureStats, fit_feature_stats
from scasrec.model.network import ScasrecModel
from scasrec.routeworld.behavior import label_candidates
from scasrec.routeworld.generator import generate_dataset


@pytest.fixture(scope="session")
def tiny_world_config() -> WorldConfig:
    return WorldConfig(
        grid_width=5,
        grid_height=5,
        samples=24,
        test_samples=8,
        candidates=5,
        history_length=3,
        users=6,
        route_width=16,
        scene_width=10,
        history_width=14,
        seed=0,
    )


@pytest.fixture(scope="session")
def tiny_dataset(tiny_world_config) -> List[Sample]:
    return generate_dataset(tiny_world_config, seed=0)


@pytest.fixture
def small_model_config() -> ModelConfig:
    return ModelConfig(width=8, scene_dim=4, embed_dim=2, hidden=8)


@pytest.fixture
def small_run_config(tiny_world_config, small_model_config) -> RunConfig:
    return RunConfig(
        world=tiny_world_config,
        model=small_model_config,
        train=TrainConfig(batch_size=8, epochs=1, seed=0, eval_every=2),
    )


@pytest.fixture
def toy_samples() -> List[Sample]:
    """Random samples with N=5 candidates, built without a road graph."""
    rng = np.random.default_rng(42)
    return [toy_sample(rng, 5, sample_id=i) for i in range(6)]


@pytest.fixture
def toy_stats(toy_samples) -> FeatureStats:
    return fit_feature_stats(toy_samples)


@pytest.fixture
def small_model(small_model_config) -> ScasrecModel:
    return ScasrecModel.create(small_model_config, ROUTE_WIDTH, SCENE_WIDTH, HISTORY_WIDTH, seed=0)


def _make_sample(
    edge_sets: List[List[int]],
    trajectory: List[int],
    sample_id: int = 0,
    route_width: int = ROUTE_WIDTH,
) -> Sample:
    """Hand-built sample whose labels follow from the given edge sets."""
    rng = np.random.default_rng(sample_id)
    routes = [
        Route(edge_ids=list(edges), features=list(rng.normal(size=route_width)))
        for edges in edge_sets
    ]
    cr, gt = label_candidates(routes, trajectory)
    return Sample(
        sample_id=sample_id,
        n_candidates=len(routes),
        candidates=routes,
        scene=[1.0, 1.0, 1.0] + [0.0] * (SCENE_WIDTH - 3),
        history=[list(rng.normal(size=HISTORY_WIDTH)) for _ in range(2)],
        trajectory_edge_ids=trajectory,
        cr=cr,
        gt_index=gt,
    )


@pytest.fixture
def make_sample():
    """Factory for hand-built samples: ``make_sample(edge_sets, trajectory, sample_id=0)``."""
    return _make_sample
