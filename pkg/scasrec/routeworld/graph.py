"""Seeded grid road network."""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import networkx as nx
import numpy as np

from scasrec.core.errors import ConfigError, ContractError

logger = logging.getLogger(__name__)

# Speeds in m/s, roughly 30 to 60 km/h.
SPEED_CLASSES = (8.3, 11.1, 13.9, 16.7)
TOLL_PROBABILITY = 0.1
LIGHT_PROBABILITY = 0.3
# Toll charge per kilometre of tolled road.
TOLL_RATE_PER_KM = 2.0


@dataclass(frozen=True)
class RoadEdge:
    """Attributes of one undirected road segment."""

    edge_id: int
    u: int
    v: int
    length: float
    travel_time: float
    toll: bool
    light: bool

    @property
    def toll_cost(self) -> float:
        return TOLL_RATE_PER_KM * self.length / 1000.0 if self.toll else 0.0


class RoadGraph:
    """
    Grid road network with stable integer node and edge ids.

    Node ``r * width + c`` sits at column ``c`` and row ``r``. Edge ids follow
    the sorted order of ``(min(u, v), max(u, v))`` pairs, so they depend only
    on the grid dimensions.
    """

    def __init__(self, width: int, height: int, seed: int, graph: nx.Graph, edges: List[RoadEdge]):
        self.width = width
        self.height = height
        self.seed = seed
        self.graph = graph
        self.edges = edges
        self._by_pair: Dict[Tuple[int, int], int] = {
            (e.u, e.v): e.edge_id for e in edges
        }
        self.mean_length = float(np.mean([e.length for e in edges]))

    @property
    def n_nodes(self) -> int:
        return self.width * self.height

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def coords(self, node: int) -> Tuple[int, int]:
        """(column, row) of a node."""
        return node % self.width, node // self.width

    def edge_id(self, u: int, v: int) -> int:
        key = (u, v) if u < v else (v, u)
        try:
            return self._by_pair[key]
        except KeyError:
            raise ContractError(f"nodes {u} and {v} are not adjacent") from None

    def edge(self, edge_id: int) -> RoadEdge:
        return self.edges[edge_id]

    def path_edges(self, nodes: Sequence[int]) -> List[int]:
        """Edge ids along a node path."""
        return [self.edge_id(a, b) for a, b in zip(nodes[:-1], nodes[1:])]

    def incident_edges(self, node: int) -> List[int]:
        return sorted(self.edge_id(node, nb) for nb in self.graph.neighbors(node))

    def adjacent_edges(self, edge_id: int) -> List[int]:
        """Edges sharing an endpoint with ``edge_id`` (excluding itself)."""
        e = self.edges[edge_id]
        found = set(self.incident_edges(e.u)) | set(self.incident_edges(e.v))
        found.discard(edge_id)
        return sorted(found)

    def grid_distance(self, a: int, b: int) -> int:
        """Manhattan distance in blocks."""
        ax, ay = self.coords(a)
        bx, by = self.coords(b)
        return abs(ax - bx) + abs(ay - by)


def build_grid_graph(width: int, height: int, seed: int) -> RoadGraph:
    """
    Build a deterministic grid road network.

    Args:
        width: Number of columns (>= 2)
        height: Number of rows (>= 2)
        seed: Seed for edge attributes

    Returns:
        Connected RoadGraph
    """
    if width < 2 or height < 2:
        raise ConfigError(f"grid dimensions must be at least 2x2, got {width}x{height}")

    grid = nx.grid_2d_graph(height, width)
    graph = nx.relabel_nodes(grid, {(r, c): r * width + c for r, c in grid.nodes})
    pairs = sorted((min(u, v), max(u, v)) for u, v in graph.edges)

    rng = np.random.default_rng(seed)
    edges: List[RoadEdge] = []
    for edge_id, (u, v) in enumerate(pairs):
        length = float(rng.uniform(200.0, 800.0))
        speed = float(SPEED_CLASSES[rng.integers(len(SPEED_CLASSES))])
        toll = bool(rng.random() < TOLL_PROBABILITY)
        light = bool(rng.random() < LIGHT_PROBABILITY)
        edge = RoadEdge(edge_id, u, v, length, length / speed, toll, light)
        edges.append(edge)
        graph.edges[u, v].update(edge_id=edge_id, length=length, time=edge.travel_time)

    logger.debug("built %dx%d grid with %d edges (seed %d)", width, height, len(edges), seed)
    return RoadGraph(width, height, seed, graph, edges)
