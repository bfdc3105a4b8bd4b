"""Offline list metrics."""

import logging
from typing import Dict, List, Optional, Sequence

from pydantic import BaseModel, Field

from scasrec.core.errors import ContractError

logger = logging.getLogger(__name__)


def gt_rank(ranked: Sequence[int], gt_index: int) -> Optional[int]:
    """1-based position of the ground truth, None if it is not listed."""
    for position, index in enumerate(ranked, start=1):
        if index == gt_index:
            return position
    return None


def mrr(ranks: Sequence[Optional[int]]) -> float:
    """Mean reciprocal rank; absent ground truths contribute 0."""
    if not ranks:
        return 0.0
    total = 0.0
    for rank in ranks:
        if rank is None:
            continue
        if rank < 1:
            raise ContractError(f"ranks are 1-based, got {rank}")
        total += 1.0 / rank
    return total / len(ranks)


def hr_at_k(ranked: Sequence[int], gt_index: int, k: int) -> int:
    """1 iff the ground truth is among the first ``k`` items."""
    if k < 1:
        raise ContractError(f"K must be >= 1, got {k}")
    return int(gt_index in list(ranked)[:k])


def lcr_at_k(ranked: Sequence[int], cr: Sequence[float], k: Optional[int] = None) -> float:
    """Best coverage among the first ``k`` items (whole list when ``k`` is None)."""
    if k is not None and k < 1:
        raise ContractError(f"K must be >= 1, got {k}")
    head = list(ranked) if k is None else list(ranked)[:k]
    return max((cr[i] for i in head), default=0.0)


def redundant_count(ranked: Sequence[int], gt_index: int) -> int:
    """Items listed after the ground truth; 0 when it is absent."""
    rank = gt_rank(ranked, gt_index)
    return 0 if rank is None else len(ranked) - rank


class MetricsReport(BaseModel):
    """Aggregated metrics of one method over an evaluation set."""

    method: str
    ks: List[int]
    hr: Dict[int, float] = Field(default_factory=dict)
    lcr: Dict[int, float] = Field(default_factory=dict)
    mrr: float = 0.0
    mean_len: float = 0.0
    mean_z: float = 0.0
    mean_f: float = 0.0
    lcr_all: float = 0.0
    n_samples: int = 0

    @staticmethod
    def columns(ks: Sequence[int]) -> List[str]:
        return (
            ["method"]
            + [f"hr@{k}" for k in ks]
            + [f"lcr@{k}" for k in ks]
            + ["mrr", "mean_len", "mean_z", "mean_f"]
        )

    def to_row(self) -> Dict[str, object]:
        row: Dict[str, object] = {"method": self.method}
        for k in self.ks:
            row[f"hr@{k}"] = self.hr[k]
        for k in self.ks:
            row[f"lcr@{k}"] = self.lcr[k]
        row.update(
            mrr=self.mrr, mean_len=self.mean_len, mean_z=self.mean_z, mean_f=self.mean_f
        )
        return row

