"""Greedy and sampled list generation."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from scasrec.core.errors import ContractError
from scasrec.core.schema import Sample
from scasrec.diffengine.tensor import Graph, Tensor
from scasrec.features.normalization import FeatureStats
from scasrec.model.network import EncoderState, ScasrecModel

logger = logging.getLogger(__name__)

STOP_EOR = "eor"
STOP_T_MAX = "t_max"
STOP_EXHAUSTED = "exhausted"


@dataclass
class DecodeState:
    """
    Progress of one generated list.

    ``selected`` never contains EOR. ``actions`` holds every emitted action,
    including a final EOR when generation stopped on it. ``t_hat`` is the
    1-based step at which the ground truth entered the list (None if never).
    """

    n: int
    selected: List[int] = field(default_factory=list)
    actions: List[int] = field(default_factory=list)
    probs: List[np.ndarray] = field(default_factory=list)
    log_probs: List[float] = field(default_factory=list)
    log_prob_tensors: List[Tensor] = field(default_factory=list)
    t_hat: Optional[int] = None
    stop_reason: Optional[str] = None

    @property
    def eor_index(self) -> int:
        return self.n

    @property
    def t(self) -> int:
        """Number of decode steps taken."""
        return len(self.actions)

    def record(self, action: int, probs: np.ndarray, gt_index: Optional[int]) -> None:
        self.actions.append(action)
        self.probs.append(probs)
        self.log_probs.append(float(np.log(probs[action])))
        if action != self.eor_index:
            self.selected.append(action)
            if gt_index is not None and action == gt_index and self.t_hat is None:
                self.t_hat = len(self.actions)


def _check_t_max(t_max: int) -> None:
    if t_max < 1:
        raise ContractError(f"T_max must be >= 1, got {t_max}")


def greedy_decode(
    model: ScasrecModel,
    sample: Sample,
    stats: FeatureStats,
    t_max: int,
    graph: Optional[Graph] = None,
) -> DecodeState:
    """
    Inference: take the argmax of P_t (lowest index on ties) until EOR wins,
    ``t_max`` steps are used or every candidate is listed.
    """
    _check_t_max(t_max)
    g = graph if graph is not None else Graph(model.store, record=False)
    enc = model.encode_sample(g, sample, stats)
    state = DecodeState(n=enc.n)
    while True:
        if len(state.selected) == enc.n:
            state.stop_reason = STOP_EXHAUSTED
            break
        if state.t >= t_max:
            state.stop_reason = STOP_T_MAX
            break
        probs = model.decode_step(g, enc, state.selected).data[0]
        action = int(np.argmax(probs))
        state.record(action, probs, sample.gt_index)
        if action == enc.eor_index:
            state.stop_reason = STOP_EOR
            break
    return state


def _draw(probs: np.ndarray, excluded: Sequence[int], rng: np.random.Generator) -> int:
    weights = probs.copy()
    weights[list(excluded)] = 0.0
    cumulative = np.cumsum(weights)
    u = rng.random() * cumulative[-1]
    action = int(np.searchsorted(cumulative, u, side="right"))
    return min(action, len(probs) - 1)


def sample_decode(
    model: ScasrecModel,
    sample: Sample,
    stats: FeatureStats,
    t_max: int,
    rng: np.random.Generator,
    graph: Optional[Graph] = None,
) -> DecodeState:
    """
    Roll out a list by sampling each action from P_t.

    Stops on a sampled EOR, after ``t_max`` steps or when every candidate is
    listed. With a recording ``graph`` the per-step log-probabilities are also
    kept as graph tensors for policy-gradient losses.
    """
    _check_t_max(t_max)
    g = graph if graph is not None else Graph(model.store, record=False)
    enc = model.encode_sample(g, sample, stats)
    state = DecodeState(n=enc.n)
    while True:
        if len(state.selected) == enc.n:
            state.stop_reason = STOP_EXHAUSTED
            break
        if state.t >= t_max:
            state.stop_reason = STOP_T_MAX
            break
        step = model.decode_step(g, enc, state.selected)
        probs = step.data[0]
        excluded = list(state.selected)
        if not model.eor_enabled:
            excluded.append(enc.eor_index)
        action = _draw(probs, excluded, rng)
        state.record(action, probs, sample.gt_index)
        if g.record:
            state.log_prob_tensors.append(g.log(g.pick(step, (0, action))))
        if action == enc.eor_index:
            state.stop_reason = STOP_EOR
            break
    return state


def replay_log_probs(
    model: ScasrecModel,
    g: Graph,
    enc: EncoderState,
    actions: Sequence[int],
) -> List[Tensor]:
    """
    Log-probabilities of a fixed action sequence under the current parameters.

    Used to rebuild a sampled rollout on a fresh graph, e.g. for gradient checks.
    """
    selected: List[int] = []
    out: List[Tensor] = []
    for action in actions:
        step = model.decode_step(g, enc, selected)
        out.append(g.log(g.pick(step, (0, action))))
        if action == enc.eor_index:
            break
        selected.append(action)
    return out
