"""Synthetic route world: road graph, candidate recall, user behavior and datasets."""

from scasrec.routeworld.behavior import (
    coverage_rate,
    derive_trajectory,
    inject_noise,
    label_candidates,
    simulate_choice,
)
from scasrec.routeworld.candidates import CandidateSet, generate_candidates
from scasrec.routeworld.dataset import read_dataset, write_dataset
from scasrec.routeworld.generator import build_world, generate_dataset, generate_sample
from scasrec.routeworld.graph import RoadGraph, build_grid_graph

__all__ = [
    "CandidateSet",
    "RoadGraph",
    "build_grid_graph",
    "build_world",
    "coverage_rate",
    "derive_trajectory",
    "generate_candidates",
    "generate_dataset",
    "generate_sample",
    "inject_noise",
    "label_candidates",
    "read_dataset",
    "simulate_choice",
    "write_dataset",
]
