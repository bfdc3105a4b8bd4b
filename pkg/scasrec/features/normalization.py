"""Z-score statistics fitted on the training split."""

import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Sequence

import numpy as np

from scasrec.core.errors import CheckpointError, ConfigError, ContractError
from scasrec.core.schema import Sample

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-6


@dataclass(frozen=True)
class NormStats:
    """Per-column mean and (floored) population standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        for array in (self.mean, self.std):
            array.setflags(write=False)

    @property
    def width(self) -> int:
        return int(self.mean.shape[0])

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.shape[-1] != self.width:
            raise ConfigError(
                f"feature width {values.shape[-1]} does not match fitted width {self.width}"
            )
        return (values - self.mean) / self.std

    @classmethod
    def identity(cls, width: int) -> "NormStats":
        return cls(np.zeros(width), np.ones(width))


def fit_columns(rows: np.ndarray) -> NormStats:
    """Column statistics of a 2-D array with at least two rows."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise ContractError(f"need at least 2 rows to fit z-score stats, got shape {rows.shape}")
    mean = rows.mean(axis=0)
    std = np.maximum(rows.std(axis=0), STD_FLOOR)
    return NormStats(mean.copy(), std.copy())


def fit_zscore(samples: Sequence[Sample]) -> NormStats:
    """Route-feature statistics over every candidate of the training samples."""
    if len(samples) < 2:
        raise ContractError(f"need at least 2 training samples, got {len(samples)}")
    return fit_columns(np.vstack([s.route_matrix() for s in samples]))


@dataclass(frozen=True)
class FeatureStats:
    """Statistics for route, scene and history features."""

    route: NormStats
    scene: NormStats
    history: NormStats

    def to_tensors(self) -> Dict[str, np.ndarray]:
        out: Dict[str, np.ndarray] = {}
        for field in ("route", "scene", "history"):
            stats: NormStats = getattr(self, field)
            out[f"norm/{field}/mean"] = np.array(stats.mean)
            out[f"norm/{field}/std"] = np.array(stats.std)
        return out

    @classmethod
    def from_tensors(cls, tensors: Mapping[str, np.ndarray]) -> "FeatureStats":
        parts = {}
        for field in ("route", "scene", "history"):
            try:
                mean = np.array(tensors[f"norm/{field}/mean"], dtype=np.float64)
                std = np.array(tensors[f"norm/{field}/std"], dtype=np.float64)
            except KeyError:
                raise CheckpointError(f"checkpoint lacks {field} feature statistics") from None
            parts[field] = NormStats(mean, std)
        return cls(**parts)


def fit_feature_stats(samples: Sequence[Sample]) -> FeatureStats:
    """
    Fit all feature statistics on training samples.

    History statistics fall back to identity when fewer than two history
    records exist.
    """
    route = fit_zscore(samples)
    scene = fit_columns(np.array([s.scene for s in samples], dtype=np.float64))
    records = [row for s in samples for row in s.history]
    widths = {len(r) for r in records}
    if len(widths) > 1:
        raise ContractError(f"history records differ in width across samples: {sorted(widths)}")
    if len(records) >= 2:
        history = fit_columns(np.array(records, dtype=np.float64))
    else:
        history = NormStats.identity(widths.pop() if widths else 0)
    logger.debug(
        "fitted feature stats: route %d, scene %d, history %d columns",
        route.width,
        scene.width,
        history.width,
    )
    return FeatureStats(route=route, scene=scene, history=history)
