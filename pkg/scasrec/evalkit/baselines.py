"""
Comparison rankers: pointwise scorer, MMR re-ranking and DPP greedy MAP.

The pointwise scorer shares the feature pipeline with the list model and puts
a two-layer head on every route representation independently.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np

from scasrec.core.config import ModelConfig, TrainConfig
from scasrec.core.errors import ContractError, NumericError
from scasrec.core.schema import Sample
from scasrec.diffengine.params import ParamStore, adam_step
from scasrec.diffengine.tensor import Graph, Tensor
from scasrec.features.encoding import FeatureDims, assemble, init_feature_params
from scasrec.features.normalization import FeatureStats
from scasrec.routeworld.behavior import coverage_rate

logger = logging.getLogger(__name__)

DIAGONAL_LOADING = 1e-6


class PointwiseModel:
    """Per-route scorer trained with binary cross-entropy (positive = ground truth)."""

    def __init__(self, dims: FeatureDims, store: ParamStore, history_mode: str = "sigmoid"):
        self.dims = dims
        self.store = store
        self.history_mode = history_mode

    @classmethod
    def create(
        cls,
        config: ModelConfig,
        route_width: int,
        scene_width: int,
        history_width: int,
        seed: int = 0,
    ) -> "PointwiseModel":
        dims = FeatureDims(
            route_width=route_width,
            scene_width=scene_width,
            history_width=history_width,
            width=config.width,
            scene_dim=config.scene_dim,
            embed_dim=config.embed_dim,
            hidden=config.hidden,
            time_buckets=config.time_buckets,
            familiarity_levels=config.familiarity_levels,
        )
        rng = np.random.default_rng(seed)
        store = ParamStore()
        init_feature_params(store, dims, rng, config.init_scale)
        store.add_random(rng, "pw/W1", (dims.width, dims.hidden), config.init_scale)
        store.add_zeros("pw/b1", (1, dims.hidden))
        store.add_random(rng, "pw/w2", (dims.hidden, 1), config.init_scale)
        store.add_zeros("pw/b2", (1, 1))
        return cls(dims, store, config.history_mode)

    def scores(self, g: Graph, sample: Sample, stats: FeatureStats) -> Tensor:
        """N x 1 relevance logits."""
        rep = assemble(g, sample, stats, self.dims, self.history_mode)
        hidden = g.tanh(g.affine(rep.x_en, "pw/W1", "pw/b1"))
        return g.affine(hidden, "pw/w2", "pw/b2")

    def score_array(self, sample: Sample, stats: FeatureStats) -> np.ndarray:
        return self.scores(Graph(self.store, record=False), sample, stats).data[:, 0].copy()

    def bce_loss(self, g: Graph, batch: Sequence[Sample], stats: FeatureStats) -> Tensor:
        """Mean over samples of the per-candidate binary cross-entropy."""
        total: Optional[Tensor] = None
        for sample in batch:
            logits = self.scores(g, sample, stats)
            labels = np.zeros((sample.n_candidates, 1))
            labels[sample.gt_index, 0] = 1.0
            positive = g.mul(g.constant(labels), g.log_sigmoid(logits))
            negative = g.mul(g.constant(1.0 - labels), g.log_sigmoid(g.scale(logits, -1.0)))
            term = g.scale(g.sum(g.add(positive, negative)), -1.0 / sample.n_candidates)
            total = term if total is None else g.add(total, term)
        if total is None:
            raise ContractError("pointwise batch is empty")
        return g.scale(total, 1.0 / len(batch))


def train_pointwise(
    samples: Sequence[Sample],
    stats: FeatureStats,
    model_config: ModelConfig,
    train_config: TrainConfig,
    epochs: int,
    seed: int = 0,
) -> PointwiseModel:
    """Fit a pointwise scorer with Adam on shuffled mini-batches."""
    if not samples:
        raise ContractError("no training samples for the pointwise baseline")
    first = samples[0]
    model = PointwiseModel.create(
        model_config,
        route_width=len(first.candidates[0].features),
        scene_width=len(first.scene),
        history_width=len(first.history[0]) if first.history else stats.history.width,
        seed=seed,
    )
    size = train_config.batch_size
    for epoch in range(epochs):
        order = np.random.default_rng(np.random.SeedSequence([seed, epoch])).permutation(
            len(samples)
        )
        losses = []
        for start in range(0, len(samples), size):
            batch = [samples[i] for i in order[start : start + size]]
            g = Graph(model.store)
            loss = model.bce_loss(g, batch, stats)
            g.backward(loss)
            adam_step(
                model.store,
                learning_rate=train_config.learning_rate,
                beta1=train_config.adam_beta1,
                beta2=train_config.adam_beta2,
                eps=train_config.adam_eps,
            )
            losses.append(loss.item())
        logger.info("pointwise epoch %d: mean loss %.5f", epoch + 1, float(np.mean(losses)))
    return model


def mmr_rank(relevance: Sequence[float], similarity: np.ndarray, lam: float) -> List[int]:
    """
    Maximal marginal relevance ordering of all items.

    Each step takes the item maximizing
    ``lam * rel(i) - (1 - lam) * max_{j selected} sim(i, j)``; ties go to the
    lowest index.
    """
    if not 0.0 <= lam <= 1.0:
        raise ContractError(f"MMR lambda must lie in [0, 1], got {lam}")
    n = len(relevance)
    remaining = list(range(n))
    selected: List[int] = []
    while remaining:
        best, best_score = remaining[0], -np.inf
        for i in remaining:
            penalty = max((similarity[i][j] for j in selected), default=0.0)
            score = lam * relevance[i] - (1.0 - lam) * penalty
            if score > best_score:
                best, best_score = i, score
        selected.append(best)
        remaining.remove(best)
    return selected


def dpp_greedy(quality: Sequence[float], similarity: np.ndarray, k: int) -> List[int]:
    """
    Greedy MAP inference for a DPP with kernel ``diag(q) S diag(q)``.

    Each step adds the item with the largest log-determinant gain, tracked with
    incremental Cholesky updates. Stops early when no item adds volume.

    Raises:
        NumericError: If ``similarity`` is not symmetric positive semi-definite
    """
    q = np.asarray(quality, dtype=np.float64)
    sim = np.asarray(similarity, dtype=np.float64)
    n = q.shape[0]
    if sim.shape != (n, n) or not np.allclose(sim, sim.T, atol=1e-12):
        raise NumericError(f"similarity must be a symmetric {n}x{n} matrix")
    smallest = float(np.linalg.eigvalsh(sim).min()) if n else 0.0
    if smallest < -1e-9:
        raise NumericError(f"similarity kernel is not PSD (smallest eigenvalue {smallest:.3e})")
    if k < 1:
        raise ContractError(f"K must be >= 1, got {k}")

    kernel = q[:, None] * sim * q[None, :]
    k = min(k, n)
    cis = np.zeros((k, n))
    gains = np.diag(kernel).copy()
    selected: List[int] = []
    while len(selected) < k:
        masked = gains.copy()
        masked[selected] = -np.inf
        j = int(np.argmax(masked))
        if gains[j] <= 1e-12:
            break
        m = len(selected)
        selected.append(j)
        if len(selected) == k:
            break
        e = (kernel[j, :] - cis[:m, j] @ cis[:m, :]) / np.sqrt(gains[j])
        cis[m, :] = e
        gains = gains - e * e
    return selected


def route_similarity(sample: Sample, loading: float = 0.0) -> np.ndarray:
    """Pairwise Jaccard similarity of candidate edge sets, plus ``loading`` on the diagonal."""
    sets = sample.edge_sets()
    n = len(sets)
    sim = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            sim[i, j] = sim[j, i] = coverage_rate(sets[i], sets[j])
    return sim + loading * np.eye(n)
