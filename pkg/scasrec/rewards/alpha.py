"""Noise-aware adaptation of the EOR reward."""

import logging
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from scasrec.core.errors import ContractError

logger = logging.getLogger(__name__)


class AlphaState(BaseModel):
    """EOR reward ``alpha`` and the settings that move it."""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(default=0.1, ge=0.0)
    eta: float = Field(default=1e-4, gt=0.0)
    beta: float = Field(default=0.04, ge=0.0, le=1.0)
    last_e: Optional[float] = None


def alpha_update(state: AlphaState, e: float) -> AlphaState:
    """
    Step ``alpha`` by ``eta`` so the observed failure rate ``e`` tracks ``beta``.

    Too few failures (the model stops late) raise alpha; too many lower it,
    clamped at 0.
    """
    if not 0.0 <= e <= 1.0:
        raise ContractError(f"failure rate must lie in [0, 1], got {e!r}")
    if e < state.beta:
        alpha = state.alpha + state.eta
    elif e > state.beta:
        alpha = max(state.alpha - state.eta, 0.0)
    else:
        alpha = state.alpha
    return state.model_copy(update={"alpha": alpha, "last_e": e})
