"""Stepwise rewards and labels for list generation."""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

from scasrec.core.errors import ContractError

logger = logging.getLogger(__name__)


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ContractError(f"{name} must lie in [0, 1], got {value!r}")


def scr(gt_cr: float, list_cr: Iterable[float]) -> float:
    """
    Stepwise corrective reward: the coverage gap between the ground truth and
    the best route of the partial list (0 for an empty list).
    """
    _check_unit("ground-truth coverage", gt_cr)
    best = 0.0
    for value in list_cr:
        _check_unit("list coverage", value)
        best = max(best, value)
    return gt_cr - best


def eor_reward(t: int, t_hat: Optional[int], alpha: float) -> float:
    """``alpha`` at the step right after the ground truth was listed, else 0."""
    if t < 1:
        raise ContractError(f"step must be >= 1, got {t}")
    if t_hat is not None and t == t_hat + 1:
        return alpha
    return 0.0


def build_label(t: int, t_hat: Optional[int], gt_index: int, eor_index: int) -> int:
    """
    Target index at step ``t``: the ground truth up to ``t_hat``, EOR at
    ``t_hat + 1``. ``t_hat=None`` means the ground truth is not listed yet.
    """
    if t_hat is None or t <= t_hat:
        return gt_index
    if t == t_hat + 1:
        return eor_index
    raise ContractError(f"no label exists for step {t} after t_hat={t_hat}")


def combined_reward(scr_value: float, eor_value: float) -> float:
    if scr_value < 0 or eor_value < 0:
        raise ContractError(f"reward parts must be >= 0, got ({scr_value}, {eor_value})")
    return scr_value + eor_value


def discounted_returns(rewards: Sequence[float], discount: float) -> List[float]:
    """``Q_t = sum_{k >= t} discount^(k - t) r_k`` for every step."""
    if not 0.0 < discount <= 1.0:
        raise ContractError(f"discount must lie in (0, 1], got {discount}")
    returns = [0.0] * len(rewards)
    running = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        running = rewards[t] + discount * running
        returns[t] = running
    return returns


@dataclass
class RewardTrace:
    """Per-step rewards and labels of one supervised trace."""

    scr: List[float] = field(default_factory=list)
    eor: List[float] = field(default_factory=list)
    labels: List[int] = field(default_factory=list)
    zero_weight_steps: int = 0

    def append(self, scr_value: float, eor_value: float, label: int) -> float:
        reward = combined_reward(scr_value, eor_value)
        self.scr.append(scr_value)
        self.eor.append(eor_value)
        self.labels.append(label)
        if reward == 0.0:
            self.zero_weight_steps += 1
        return reward

    @property
    def combined(self) -> List[float]:
        return [s + e for s, e in zip(self.scr, self.eor)]

    def __len__(self) -> int:
        return len(self.labels)
