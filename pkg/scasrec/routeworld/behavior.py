"""Simulated user behavior: route choice, driven trajectory, coverage labels, misclicks."""

import logging
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from scasrec.core.errors import ContractError
from scasrec.core.schema import Route, Sample
from scasrec.routeworld.graph import RoadGraph

logger = logging.getLogger(__name__)

# Per-feature preference scales: eta per minute, length per km, toll, lights, turns.
_PREFERENCE_SLOTS = ((0, 1.0 / 60.0), (1, 1.0 / 1000.0), (2, 1.0), (3, 0.5), (13, 0.3))


def sample_user_weights(rng: np.random.Generator, width: int) -> np.ndarray:
    """Linear route preference of one user (all terms are costs)."""
    weights = np.zeros(width)
    for index, unit in _PREFERENCE_SLOTS:
        weights[index] = -rng.uniform(0.2, 1.5) * unit
    return weights


def simulate_choice(
    candidates: Sequence[Route],
    user_weights: np.ndarray,
    noise_seed: int,
    noise_scale: float = 1.0,
) -> int:
    """
    Index of the route a user picks: argmax of ``w . features`` plus Gumbel noise.

    Ties go to the lowest index.
    """
    if not candidates:
        raise ContractError("simulate_choice needs at least one candidate")
    features = np.array([c.features for c in candidates], dtype=np.float64)
    if features.shape[1] != len(user_weights):
        raise ContractError(
            f"user weights have width {len(user_weights)}, routes have {features.shape[1]}"
        )
    utility = features @ user_weights
    if noise_scale > 0:
        rng = np.random.default_rng(noise_seed)
        utility = utility + noise_scale * rng.gumbel(size=len(candidates))
    return int(np.argmax(utility))


def derive_trajectory(
    chosen: Sequence[int],
    deviation_rate: float,
    seed: int,
    graph: RoadGraph,
) -> List[int]:
    """
    Edge set actually driven on the chosen route.

    ``round(deviation_rate * len)`` edges (at least one when the rate is
    positive) are replaced by distinct adjacent edges off the route.

    Returns:
        Sorted list of edge ids
    """
    if not 0.0 <= deviation_rate < 1.0:
        raise ContractError(f"deviation rate must lie in [0, 1), got {deviation_rate}")
    route = list(chosen)
    if not route:
        raise ContractError("chosen route has no edges")
    if deviation_rate == 0.0:
        return sorted(set(route))

    count = int(np.floor(deviation_rate * len(route) + 0.5))
    count = min(len(route), max(1, count))
    rng = np.random.default_rng(seed)
    replaced = sorted(rng.choice(len(route), size=count, replace=False).tolist())

    on_route = set(route)
    dropped = set(replaced)
    kept = [e for i, e in enumerate(route) if i not in dropped]
    detours: List[int] = []
    for index in replaced:
        options = [
            e for e in graph.adjacent_edges(route[index]) if e not in on_route and e not in detours
        ]
        if options:
            detours.append(int(options[rng.integers(len(options))]))
    trajectory = sorted(set(kept) | set(detours))
    if not trajectory:
        raise ContractError("trajectory ended up empty")
    return trajectory


def coverage_rate(p: Iterable[int], u: Iterable[int]) -> float:
    """Jaccard overlap ``|p & u| / |p | u|`` of two edge sets."""
    p_set, u_set = set(p), set(u)
    union = p_set | u_set
    if not union:
        raise ContractError("coverage rate of two empty edge sets is undefined")
    return len(p_set & u_set) / len(union)


def label_candidates(
    candidates: Sequence[Route], trajectory: Iterable[int]
) -> Tuple[List[float], int]:
    """Coverage of every candidate and the ground-truth index (first maximum)."""
    u = set(trajectory)
    cr = [coverage_rate(c.edge_ids, u) for c in candidates]
    return cr, int(np.argmax(cr))


def inject_noise(samples: Sequence[Sample], beta_true: float, seed: int) -> List[Sample]:
    """
    Corrupt a ``beta_true`` fraction of samples as if the user misclicked.

    A corrupted sample gets the edge set of a uniformly drawn non-ground-truth
    candidate as its trajectory; coverage and ground truth are recomputed and
    ``is_noisy`` is set. Single-candidate samples cannot be corrupted.
    """
    if not 0.0 <= beta_true <= 1.0:
        raise ContractError(f"noise ratio must lie in [0, 1], got {beta_true}")
    if beta_true == 0.0:
        return list(samples)

    rng = np.random.default_rng(seed)
    out: List[Sample] = []
    corrupted = 0
    for sample in samples:
        hit = rng.random() < beta_true
        if not hit or sample.n_candidates < 2:
            out.append(sample)
            continue
        others = [i for i in range(sample.n_candidates) if i != sample.gt_index]
        target = others[int(rng.integers(len(others)))]
        trajectory = sorted(set(sample.candidates[target].edge_ids))
        cr, gt = label_candidates(sample.candidates, trajectory)
        out.append(
            sample.model_copy(
                update={
                    "trajectory_edge_ids": trajectory,
                    "cr": cr,
                    "gt_index": gt,
                    "is_noisy": True,
                }
            )
        )
        corrupted += 1
    logger.info("injected noise into %d of %d samples", corrupted, len(out))
    return out
