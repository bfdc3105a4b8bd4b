"""Rewards, labels and EOR reward adaptation."""

from scasrec.rewards.alpha import AlphaState, alpha_update
from scasrec.rewards.signals import (
    RewardTrace,
    build_label,
    combined_reward,
    discounted_returns,
    eor_reward,
    scr,
)

__all__ = [
    "AlphaState",
    "RewardTrace",
    "alpha_update",
    "build_label",
    "combined_reward",
    "discounted_returns",
    "eor_reward",
    "scr",
]
