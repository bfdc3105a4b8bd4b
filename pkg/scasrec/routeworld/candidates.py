"""Candidate route recall and route feature extraction."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import networkx as nx
import numpy as np

from scasrec.core.errors import ContractError
from scasrec.core.schema import Route
from scasrec.routeworld.graph import RoadGraph

logger = logging.getLogger(__name__)

ROUTE_FEATURE_NAMES = (
    "eta",
    "length",
    "toll_cost",
    "light_count",
    "edge_count",
    "mean_edge_time",
    "max_edge_time",
    "std_edge_time",
    "mean_speed",
    "eta_ratio",
    "length_ratio",
    "toll_fraction",
    "lights_per_km",
    "turn_count",
    "detour_factor",
)
ETA = 0


@dataclass
class CandidateSet:
    """Recalled routes for one query."""

    routes: List[Route]
    node_paths: List[List[int]] = field(default_factory=list)
    shortfall: bool = False


def _turns(graph: RoadGraph, nodes: List[int]) -> int:
    turns = 0
    for a, b, c in zip(nodes, nodes[1:], nodes[2:]):
        ax, ay = graph.coords(a)
        bx, by = graph.coords(b)
        cx, cy = graph.coords(c)
        if (bx - ax, by - ay) != (cx - bx, cy - by):
            turns += 1
    return turns


def route_features(
    graph: RoadGraph,
    nodes: List[int],
    width: int,
    fastest_eta: float,
    shortest_length: float,
) -> List[float]:
    """
    Feature vector of a route, zero-padded to ``width``.

    Ratios are taken against the fastest ETA and shortest length of the
    candidate set the route belongs to.
    """
    if width < len(ROUTE_FEATURE_NAMES):
        raise ContractError(f"route width {width} < {len(ROUTE_FEATURE_NAMES)} derived features")
    edges = [graph.edge(e) for e in graph.path_edges(nodes)]
    times = np.array([e.travel_time for e in edges])
    eta = float(times.sum())
    length = float(sum(e.length for e in edges))
    toll_cost = float(sum(e.toll_cost for e in edges))
    lights = float(sum(e.light for e in edges))
    tolls = float(sum(e.toll for e in edges))
    straight = max(1, graph.grid_distance(nodes[0], nodes[-1])) * graph.mean_length
    values = [
        eta,
        length,
        toll_cost,
        lights,
        float(len(edges)),
        float(times.mean()),
        float(times.max()),
        float(times.std()),
        length / eta,
        eta / fastest_eta,
        length / shortest_length,
        tolls / len(edges),
        lights / (length / 1000.0),
        float(_turns(graph, nodes)),
        length / straight,
    ]
    return values + [0.0] * (width - len(values))


def _random_simple_path(
    graph: RoadGraph, origin: int, destination: int, rng: np.random.Generator
) -> List[int]:
    """Randomized depth-first walk biased towards the destination."""

    def ordered(node: int) -> List[int]:
        neighbors = sorted(graph.graph.neighbors(node))
        keys = [graph.grid_distance(nb, destination) + rng.uniform(0.0, 2.0) for nb in neighbors]
        return [nb for _, nb in sorted(zip(keys, neighbors))]

    visited = {origin}
    stack = [(origin, iter(ordered(origin)))]
    while stack:
        _, pending = stack[-1]
        nxt = next(pending, None)
        if nxt is None:
            stack.pop()
            continue
        if nxt in visited:
            continue
        visited.add(nxt)
        stack.append((nxt, iter(ordered(nxt))))
        if nxt == destination:
            return [node for node, _ in stack]
    raise ContractError(f"destination {destination} unreachable from {origin}")


def generate_candidates(
    graph: RoadGraph,
    origin: int,
    destination: int,
    n: int,
    seed: int,
    jitter: float = 0.3,
    width: int = 62,
    max_walks: Optional[int] = None,
) -> CandidateSet:
    """
    Recall up to ``n`` distinct simple routes from origin to destination.

    Draw 0 is the unjittered fastest path; draws 1..n-1 rescale each edge time
    by an independent log-normal factor. Duplicate edge sets are dropped and the
    set is topped up with randomized walks. Fewer than ``n`` routes are returned
    (with ``shortfall`` set) when no more distinct paths turn up.
    """
    if origin == destination:
        raise ContractError("origin and destination must differ")
    if n < 1:
        raise ContractError(f"n must be >= 1, got {n}")

    rng = np.random.default_rng(seed)
    seen = set()
    node_paths: List[List[int]] = []

    def offer(nodes: List[int]) -> None:
        key = frozenset(graph.path_edges(nodes))
        if key not in seen:
            seen.add(key)
            node_paths.append(nodes)

    for draw in range(n):
        if draw == 0:
            path = nx.shortest_path(graph.graph, origin, destination, weight="time")
        else:
            factors = rng.lognormal(0.0, jitter, size=graph.n_edges)

            def weight(u, v, data, factors=factors):
                return data["time"] * factors[data["edge_id"]]

            path = nx.shortest_path(graph.graph, origin, destination, weight=weight)
        offer(list(path))

    attempts = 0
    limit = max_walks if max_walks is not None else 20 * n
    while len(node_paths) < n and attempts < limit:
        offer(_random_simple_path(graph, origin, destination, rng))
        attempts += 1

    shortfall = len(node_paths) < n
    if shortfall:
        logger.debug("only %d of %d candidates for %d->%d", len(node_paths), n, origin, destination)

    etas = [sum(graph.edge(e).travel_time for e in graph.path_edges(p)) for p in node_paths]
    lengths = [sum(graph.edge(e).length for e in graph.path_edges(p)) for p in node_paths]
    fastest, shortest = min(etas), min(lengths)
    routes = [
        Route(
            edge_ids=graph.path_edges(p),
            features=route_features(graph, p, width, fastest, shortest),
        )
        for p in node_paths
    ]
    return CandidateSet(routes=routes, node_paths=node_paths, shortfall=shortfall)
