"""
Record schemas shared across SCASRec.

Samples are stored one per line as JSON objects. The models here validate the
per-sample invariants on load so downstream code can rely on them.
"""

import math
from enum import Enum
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMA_VERSION = 1

# Scene layout: columns 0..2 hold category ids (>= 1; 0 is reserved for unknown).
DISCRETE_SCENE_COLUMNS = (0, 1, 2)
TIME_BUCKETS = 7
FAMILIARITY_LEVELS = 4


class Regime(str, Enum):
    """Training regimes."""

    SUPERVISED = "supervised"
    RL = "rl"


class Route(BaseModel):
    """A candidate route: ordered edge ids plus its feature vector."""

    model_config = ConfigDict(extra="forbid")

    edge_ids: List[int]
    features: List[float]

    @field_validator("edge_ids")
    @classmethod
    def _simple_path(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("route has no edges")
        if len(set(value)) != len(value):
            raise ValueError("route repeats an edge")
        return value

    @field_validator("features")
    @classmethod
    def _finite(cls, value: List[float]) -> List[float]:
        if not all(math.isfinite(v) for v in value):
            raise ValueError("route features must be finite")
        return value

    def edge_set(self) -> frozenset:
        return frozenset(self.edge_ids)


class Sample(BaseModel):
    """One recommendation request with its candidates, context and label."""

    model_config = ConfigDict(extra="forbid")

    schema_version: int = SCHEMA_VERSION
    sample_id: int = Field(ge=0)
    user_id: int = Field(default=0, ge=0)
    origin: int = Field(default=0, ge=0)
    destination: int = Field(default=0, ge=0)
    n_candidates: int = Field(ge=1)
    candidates: List[Route]
    scene: List[float]
    history: List[List[float]] = Field(default_factory=list)
    trajectory_edge_ids: List[int]
    cr: List[float]
    gt_index: int = Field(ge=0)
    is_noisy: bool = False

    @model_validator(mode="after")
    def _consistent(self) -> "Sample":
        n = self.n_candidates
        if len(self.candidates) != n or len(self.cr) != n:
            raise ValueError(
                f"n_candidates={n} but {len(self.candidates)} candidates "
                f"and {len(self.cr)} cr values"
            )
        if len({len(c.features) for c in self.candidates}) != 1:
            raise ValueError("candidate feature vectors differ in width")
        if len({len(h) for h in self.history}) > 1:
            raise ValueError("history records differ in width")
        if not all(0.0 <= v <= 1.0 for v in self.cr):
            raise ValueError("cr values must lie in [0, 1]")
        if not all(math.isfinite(v) for v in self.scene):
            raise ValueError("scene must be finite")
        if not all(math.isfinite(v) for row in self.history for v in row):
            raise ValueError("history must be finite")
        if not self.trajectory_edge_ids:
            raise ValueError("trajectory is empty")
        best = max(self.cr)
        expected = self.cr.index(best)
        if self.gt_index != expected:
            raise ValueError(
                f"gt_index={self.gt_index} but the first maximal cr is at {expected}"
            )
        return self

    # Array views used by feature processing.

    def route_matrix(self) -> np.ndarray:
        """N x route_width feature matrix."""
        return np.array([c.features for c in self.candidates], dtype=np.float64)

    def scene_array(self) -> np.ndarray:
        return np.array(self.scene, dtype=np.float64)

    def history_matrix(self, width: int) -> np.ndarray:
        """M x width history matrix; shape (0, width) when there is no history."""
        if not self.history:
            return np.zeros((0, width))
        return np.array(self.history, dtype=np.float64)

    def edge_sets(self) -> List[frozenset]:
        return [c.edge_set() for c in self.candidates]

    def trajectory_set(self) -> frozenset:
        return frozenset(self.trajectory_edge_ids)
