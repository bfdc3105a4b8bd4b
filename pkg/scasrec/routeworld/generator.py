"""
Dataset generation for the synthetic route world.

A world is a road graph plus a pool of users with fixed preferences and a fixed
record of past choices. Each sample draws its randomness from
``SeedSequence([seed, sample_id])``, so the output does not depend on the
number of worker processes.
"""

import logging
from dataclasses import dataclass
from functools import partial
from typing import Callable, List, Optional, Tuple

import numpy as np

from scasrec.core.config import WorldConfig
from scasrec.core.errors import ConfigError
from scasrec.core.schema import FAMILIARITY_LEVELS, TIME_BUCKETS, Sample
from scasrec.routeworld.behavior import (
    derive_trajectory,
    inject_noise,
    label_candidates,
    sample_user_weights,
    simulate_choice,
)
from scasrec.routeworld.candidates import ETA, CandidateSet, generate_candidates
from scasrec.routeworld.graph import RoadGraph, build_grid_graph
from scasrec.utils.parallel import map_ordered

logger = logging.getLogger(__name__)

SCENE_FEATURE_NAMES = (
    "time_bucket",
    "origin_familiarity",
    "destination_familiarity",
    "od_distance",
    "traffic_factor",
    "weekday",
    "n_candidates",
    "fastest_eta",
    "shortest_length",
)
# Rush-hour buckets weigh travel time more heavily.
_RUSH_BUCKETS = (2, 6)
# Home distance up to which each familiarity level above 1 applies, nearest first.
_FAMILIARITY_RADII = (2, 5, 9)


@dataclass
class UserProfile:
    user_id: int
    weights: np.ndarray
    home: int
    history: List[List[float]]


@dataclass
class World:
    """Road graph, user pool and the settings used to draw samples."""

    config: WorldConfig
    seed: int
    graph: RoadGraph
    users: List[UserProfile]


def _familiarity(graph: RoadGraph, home: int, node: int) -> int:
    distance = graph.grid_distance(home, node)
    for level, radius in zip(range(FAMILIARITY_LEVELS, 1, -1), _FAMILIARITY_RADII):
        if distance <= radius:
            return level
    return 1


def _draw_query(graph: RoadGraph, rng: np.random.Generator) -> Tuple[int, int]:
    min_distance = min(2, graph.width + graph.height - 2)
    while True:
        origin, destination = (int(x) for x in rng.integers(graph.n_nodes, size=2))
        if graph.grid_distance(origin, destination) >= min_distance:
            return origin, destination


def _scene(
    config: WorldConfig,
    graph: RoadGraph,
    user: Optional[UserProfile],
    origin: int,
    destination: int,
    candidates: CandidateSet,
    rng: np.random.Generator,
) -> List[float]:
    time_bucket = int(rng.integers(1, TIME_BUCKETS + 1))
    traffic = 1.0 + (0.4 if time_bucket in _RUSH_BUCKETS else 0.0) + float(rng.uniform(0.0, 0.2))
    etas = [r.features[ETA] for r in candidates.routes]
    lengths = [r.features[1] for r in candidates.routes]
    home = user.home if user is not None else origin
    values = [
        float(time_bucket),
        float(_familiarity(graph, home, origin)),
        float(_familiarity(graph, home, destination)),
        graph.grid_distance(origin, destination) * graph.mean_length,
        traffic,
        float(rng.integers(0, 7)),
        float(len(candidates.routes)),
        float(min(etas)),
        float(min(lengths)),
    ]
    return values + [0.0] * (config.scene_width - len(values))


def _scene_weights(weights: np.ndarray, scene: List[float]) -> np.ndarray:
    adjusted = weights.copy()
    adjusted[ETA] *= scene[4]
    return adjusted


def _build_user(config: WorldConfig, graph: RoadGraph, seed: int, user_id: int) -> UserProfile:
    rng = np.random.default_rng(np.random.SeedSequence([seed, user_id], spawn_key=(1,)))
    weights = sample_user_weights(rng, config.route_width)
    home = int(rng.integers(graph.n_nodes))
    route_part = config.history_width - config.scene_width
    profile = UserProfile(user_id=user_id, weights=weights, home=home, history=[])
    for _ in range(config.history_length):
        origin, destination = _draw_query(graph, rng)
        candidates = generate_candidates(
            graph,
            origin,
            destination,
            config.candidates,
            int(rng.integers(2**31)),
            jitter=config.jitter,
            width=config.route_width,
        )
        scene = _scene(config, graph, profile, origin, destination, candidates, rng)
        chosen = simulate_choice(
            candidates.routes,
            _scene_weights(weights, scene),
            int(rng.integers(2**31)),
            config.choice_noise,
        )
        features = candidates.routes[chosen].features
        record = list(features[:route_part]) + [0.0] * max(0, route_part - len(features))
        profile.history.append(record + scene)
    return profile


def build_world(config: WorldConfig, seed: Optional[int] = None) -> World:
    """Build the road graph and user pool for ``config``."""
    if config.history_width - config.scene_width > config.route_width:
        raise ConfigError(
            "history_width - scene_width cannot exceed route_width "
            f"({config.history_width} - {config.scene_width} > {config.route_width})"
        )
    seed = config.seed if seed is None else seed
    graph = build_grid_graph(config.grid_width, config.grid_height, seed)
    users = [_build_user(config, graph, seed, uid) for uid in range(config.users)]
    logger.info(
        "world ready: %dx%d grid, %d users, %d history records each",
        config.grid_width,
        config.grid_height,
        len(users),
        config.history_length,
    )
    return World(config=config, seed=seed, graph=graph, users=users)


def generate_sample(world: World, sample_id: int) -> Sample:
    """Draw one labelled sample (before misclick noise)."""
    config = world.config
    rng = np.random.default_rng(np.random.SeedSequence([world.seed, sample_id]))
    user = world.users[int(rng.integers(len(world.users)))]
    origin, destination = _draw_query(world.graph, rng)
    low = max(1, (config.candidates + 1) // 2)
    requested = int(rng.integers(low, config.candidates + 1))
    candidates = generate_candidates(
        world.graph,
        origin,
        destination,
        requested,
        int(rng.integers(2**31)),
        jitter=config.jitter,
        width=config.route_width,
    )
    scene = _scene(config, world.graph, user, origin, destination, candidates, rng)
    chosen = simulate_choice(
        candidates.routes,
        _scene_weights(user.weights, scene),
        int(rng.integers(2**31)),
        config.choice_noise,
    )
    trajectory = derive_trajectory(
        candidates.routes[chosen].edge_ids,
        config.deviation,
        int(rng.integers(2**31)),
        world.graph,
    )
    cr, gt_index = label_candidates(candidates.routes, trajectory)
    return Sample(
        sample_id=sample_id,
        user_id=user.user_id,
        origin=origin,
        destination=destination,
        n_candidates=len(candidates.routes),
        candidates=candidates.routes,
        scene=scene,
        history=[list(h) for h in user.history],
        trajectory_edge_ids=trajectory,
        cr=cr,
        gt_index=gt_index,
    )


def generate_dataset(
    config: WorldConfig,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    count: Optional[int] = None,
    start_id: int = 0,
    world: Optional[World] = None,
    progress_callback: Optional[Callable[[int, int], None]] = None,
) -> List[Sample]:
    """
    Generate ``count`` samples with ids ``start_id, start_id + 1, ...``.

    Misclick noise (``config.noise``) is applied after labelling.

    Args:
        config: World settings
        seed: Seed (defaults to ``config.seed``)
        workers: Worker processes (defaults to ``config.workers``)
        count: Number of samples (defaults to ``config.samples``)
        start_id: First sample id
        world: Pre-built world to reuse across splits
        progress_callback: Optional callback(completed, total)
    """
    seed = config.seed if seed is None else seed
    workers = config.workers if workers is None else workers
    count = config.samples if count is None else count
    if world is None:
        world = build_world(config, seed)
    ids = list(range(start_id, start_id + count))
    samples = map_ordered(
        ids,
        partial(generate_sample, world),
        max_workers=workers,
        progress_callback=progress_callback,
    )
    shortfalls = sum(1 for s in samples if s.n_candidates < config.candidates)
    logger.debug("%d of %d samples have fewer than N_max candidates", shortfalls, len(samples))
    return inject_noise(samples, config.noise, seed + 1 + start_id)
