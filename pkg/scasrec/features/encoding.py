"""
Feature processing on the autodiff graph.

Turns a sample into the per-route representation ``X_en`` (N x F) and the
processed scene vector ``E`` (1 x scene_dim):

* discrete scene columns go through embedding tables whose row 0 is the
  reserved unknown id; continuous columns are z-scored,
* each candidate attends over the user's history records (target attention),
* the normalized route features and the history summary are projected to
  F/2 columns each and concatenated.
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from scasrec.core.errors import ConfigError
from scasrec.core.schema import DISCRETE_SCENE_COLUMNS, Sample
from scasrec.diffengine.params import ParamStore
from scasrec.diffengine.tensor import Graph, Tensor
from scasrec.features.normalization import FeatureStats

logger = logging.getLogger(__name__)

_TABLES = ("time", "origin_fam", "dest_fam")


@dataclass(frozen=True)
class FeatureDims:
    route_width: int
    scene_width: int
    history_width: int
    width: int
    scene_dim: int
    embed_dim: int
    hidden: int
    time_buckets: int
    familiarity_levels: int

    @property
    def half(self) -> int:
        return self.width // 2

    @property
    def continuous_scene(self) -> int:
        return self.scene_width - len(DISCRETE_SCENE_COLUMNS)

    def table_rows(self, table: str) -> int:
        # +1 for the unknown row.
        return (self.time_buckets if table == "time" else self.familiarity_levels) + 1


@dataclass
class Representation:
    """Encoder inputs of one sample."""

    x_en: Tensor
    scene: Tensor

    @property
    def n(self) -> int:
        return self.x_en.shape[0]


def init_feature_params(
    store: ParamStore, dims: FeatureDims, rng: np.random.Generator, scale: float = 1.0
) -> None:
    """Register all feature-processing parameters under ``feat/``."""
    if dims.width % 2:
        raise ConfigError(f"model width must be even, got {dims.width}")
    half = dims.half
    for table in _TABLES:
        store.add(
            f"feat/emb/{table}",
            rng.normal(0.0, 0.1 * scale, size=(dims.table_rows(table), dims.embed_dim)),
        )
    scene_in = len(_TABLES) * dims.embed_dim + dims.continuous_scene
    store.add_random(rng, "feat/scene/W", (scene_in, dims.scene_dim), scale)
    store.add_zeros("feat/scene/b", (1, dims.scene_dim))
    store.add_random(rng, "feat/target/W", (dims.route_width + dims.scene_dim, half), scale)
    store.add_zeros("feat/target/b", (1, half))
    store.add_random(rng, "feat/hist/W", (dims.history_width, half), scale)
    store.add_zeros("feat/hist/b", (1, half))
    store.add_random(rng, "feat/din/W1", (4 * half, dims.hidden), scale)
    store.add_zeros("feat/din/b1", (1, dims.hidden))
    store.add_random(rng, "feat/din/w2", (dims.hidden, 1), scale)
    store.add_zeros("feat/din/b2", (1, 1))
    store.add_random(rng, "feat/route/W", (dims.route_width, half), scale)
    store.add_zeros("feat/route/b", (1, half))
    store.add_random(rng, "feat/hproj/W", (half, half), scale)
    store.add_zeros("feat/hproj/b", (1, half))


def embed_discrete(g: Graph, value: float, table: str, rows: int) -> Tensor:
    """
    Embedding row for a category id; ids outside ``[1, rows)`` map to row 0.

    Returns:
        1 x embed_dim tensor
    """
    index = int(value) if float(value).is_integer() else 0
    if index < 1 or index >= rows:
        index = 0
    return g.gather_rows(g.param(f"feat/emb/{table}"), [index])


def scene_vector(g: Graph, scene: np.ndarray, stats: FeatureStats, dims: FeatureDims) -> Tensor:
    """Processed scene vector E (1 x scene_dim)."""
    if scene.shape[0] != dims.scene_width:
        raise ConfigError(f"scene width {scene.shape[0]} does not match model ({dims.scene_width})")
    parts: List[Tensor] = [
        embed_discrete(g, scene[col], table, dims.table_rows(table))
        for col, table in zip(DISCRETE_SCENE_COLUMNS, _TABLES)
    ]
    start = len(DISCRETE_SCENE_COLUMNS)
    continuous = (scene[start:] - stats.scene.mean[start:]) / stats.scene.std[start:]
    parts.append(g.constant(continuous.reshape(1, -1)))
    return g.tanh(g.affine(g.concat(parts, axis=1), "feat/scene/W", "feat/scene/b"))


def history_attention(
    g: Graph,
    routes: Tensor,
    scene: Tensor,
    history: np.ndarray,
    dims: FeatureDims,
    mode: str = "sigmoid",
) -> Tensor:
    """
    Target attention of every candidate over the history records.

    Args:
        routes: N x route_width normalized route features
        scene: 1 x scene_dim processed scene vector
        history: M x history_width normalized history records (M may be 0)
        mode: "sigmoid" (unnormalized gates) or "softmax"

    Returns:
        N x F/2 tensor; all zeros when M = 0
    """
    n = routes.shape[0]
    m = history.shape[0]
    if m == 0:
        return g.constant(np.zeros((n, dims.half)))

    scene_rows = g.gather_rows(scene, [0] * n)
    target_in = g.concat([routes, scene_rows], axis=1)
    target = g.tanh(g.affine(target_in, "feat/target/W", "feat/target/b"))
    records = g.tanh(g.affine(g.constant(history), "feat/hist/W", "feat/hist/b"))

    # Row i * m + j pairs candidate i with record j.
    t = g.gather_rows(target, [i for i in range(n) for _ in range(m)])
    h = g.gather_rows(records, [j for _ in range(n) for j in range(m)])
    pair = g.concat([t, h, g.sub(t, h), g.mul(t, h)], axis=1)
    hidden = g.tanh(g.affine(pair, "feat/din/W1", "feat/din/b1"))
    scores = g.reshape(g.affine(hidden, "feat/din/w2", "feat/din/b2"), (n, m))
    weights = g.softmax(scores) if mode == "softmax" else g.sigmoid(scores)
    return g.matmul(weights, records)


def assemble(
    g: Graph,
    sample: Sample,
    stats: FeatureStats,
    dims: FeatureDims,
    mode: str = "sigmoid",
) -> Representation:
    """Build ``X_en`` and ``E`` for one sample with frozen statistics."""
    raw_routes = sample.route_matrix()
    if raw_routes.shape[1] != dims.route_width:
        raise ConfigError(
            f"route width {raw_routes.shape[1]} does not match model ({dims.route_width})"
        )
    routes = g.constant(stats.route.apply(raw_routes))
    scene = scene_vector(g, sample.scene_array(), stats, dims)

    history = sample.history_matrix(dims.history_width)
    if history.shape[0]:
        if history.shape[1] != dims.history_width:
            raise ConfigError(
                f"history width {history.shape[1]} does not match model ({dims.history_width})"
            )
        history = stats.history.apply(history)
    summary = history_attention(g, routes, scene, history, dims, mode)

    left = g.affine(routes, "feat/route/W", "feat/route/b")
    right = g.affine(summary, "feat/hproj/W", "feat/hproj/b")
    return Representation(x_en=g.concat([left, right], axis=1), scene=scene)

