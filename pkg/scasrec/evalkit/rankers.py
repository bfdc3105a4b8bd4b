"""Rankers turning one sample into an ordered list of candidate indices."""

from typing import List, Optional, Protocol, runtime_checkable

import numpy as np

from scasrec.core.config import TrainConfig
from scasrec.core.schema import Sample
from scasrec.evalkit.baselines import (
    DIAGONAL_LOADING,
    PointwiseModel,
    dpp_greedy,
    mmr_rank,
    route_similarity,
)
from scasrec.features.normalization import FeatureStats
from scasrec.model.decoding import greedy_decode
from scasrec.model.network import ScasrecModel


@runtime_checkable
class Ranker(Protocol):
    """Anything that produces a ranked list for a sample."""

    name: str

    def rank(self, sample: Sample) -> List[int]: ...


class ScasrecRanker:
    """Greedy list generation with the trained network; stops on EOR."""

    name = "scasrec"

    def __init__(
        self, model: ScasrecModel, stats: FeatureStats, train_config: Optional[TrainConfig] = None
    ):
        self.model = model
        self.stats = stats
        self.train_config = train_config or TrainConfig()

    def rank(self, sample: Sample) -> List[int]:
        t_max = self.train_config.resolve_t_max(sample.n_candidates)
        state = greedy_decode(self.model, sample, self.stats, t_max)
        return list(state.selected)


class PointwiseRanker:
    """All candidates by descending pointwise score (stable on ties)."""

    name = "dnn"

    def __init__(self, model: PointwiseModel, stats: FeatureStats):
        self.model = model
        self.stats = stats

    def rank(self, sample: Sample) -> List[int]:
        scores = self.model.score_array(sample, self.stats)
        return [int(i) for i in np.argsort(-scores, kind="stable")]


class MMRRanker:
    """Pointwise relevance re-ranked for diversity over route overlap."""

    name = "mmr"

    def __init__(self, model: PointwiseModel, stats: FeatureStats, lam: float = 0.5):
        self.model = model
        self.stats = stats
        self.lam = lam

    def rank(self, sample: Sample) -> List[int]:
        relevance = self.model.score_array(sample, self.stats)
        return mmr_rank(list(relevance), route_similarity(sample), self.lam)


class DPPRanker:
    """
    Greedy DPP MAP with quality ``sigmoid(score)`` and Jaccard similarity.

    Items the greedy stops short of are appended by descending quality so the
    list stays full-length unless ``k`` says otherwise.
    """

    name = "dpp"

    def __init__(self, model: PointwiseModel, stats: FeatureStats, k: Optional[int] = None):
        self.model = model
        self.stats = stats
        self.k = k

    def rank(self, sample: Sample) -> List[int]:
        scores = self.model.score_array(sample, self.stats)
        quality = 1.0 / (1.0 + np.exp(-scores))
        k = sample.n_candidates if self.k is None else min(self.k, sample.n_candidates)
        picked = dpp_greedy(quality, route_similarity(sample, DIAGONAL_LOADING), k)
        rest = [int(i) for i in np.argsort(-quality, kind="stable") if int(i) not in picked]
        return (picked + rest)[:k]


class OracleRanker:
    """Sorts by the true coverage rate; the ground truth always comes first."""

    name = "oracle"

    def rank(self, sample: Sample) -> List[int]:
        return [int(i) for i in np.argsort(-np.asarray(sample.cr), kind="stable")]


class RandomRanker:
    """Uniform random permutation, seeded per sample."""

    name = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def rank(self, sample: Sample) -> List[int]:
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, sample.sample_id]))
        return [int(i) for i in rng.permutation(sample.n_candidates)]
