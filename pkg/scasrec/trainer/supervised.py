"""
Reward-weighted supervised training on self-decoded lists.

For every sample the model decodes greedily (never appending EOR) while each
step is supervised towards the ground truth, weighted by the stepwise
corrective reward. Once the ground truth is listed, one more step is
supervised towards EOR with weight ``alpha`` and the sample leaves the batch.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from scasrec.core.config import TrainConfig
from scasrec.core.errors import ContractError, NumericError, TrainingDivergedError
from scasrec.core.schema import Sample
from scasrec.diffengine.params import adam_step
from scasrec.diffengine.tensor import Graph, Tensor
from scasrec.features.normalization import FeatureStats
from scasrec.model.network import ScasrecModel
from scasrec.rewards.alpha import AlphaState, alpha_update
from scasrec.rewards.signals import RewardTrace, build_label, eor_reward, scr

logger = logging.getLogger(__name__)


@dataclass
class SampleTrace:
    """Supervised trace of one sample."""

    sample_id: int
    rewards: RewardTrace = field(default_factory=RewardTrace)
    actions: List[int] = field(default_factory=list)
    t_hat: Optional[int] = None
    failed: bool = False
    list_len: int = 0


@dataclass
class BatchOutcome:
    """Result of one training batch."""

    loss: float
    fail_ids: List[int]
    mean_list_len: float
    t_hats: Dict[int, Optional[int]]
    batch_size: int
    zero_weight_steps: int = 0
    mean_return: Optional[float] = None

    @property
    def e(self) -> float:
        """Failure rate ``|D_fail| / |batch|``."""
        return len(self.fail_ids) / self.batch_size if self.batch_size else 0.0


def _first_available(probs: np.ndarray, excluded: Sequence[int]) -> int:
    masked = probs.copy()
    masked[list(excluded)] = -np.inf
    return int(np.argmax(masked))


def trace_sample(
    model: ScasrecModel,
    g: Graph,
    sample: Sample,
    stats: FeatureStats,
    alpha: float,
    config: TrainConfig,
) -> Tuple[List[Tensor], SampleTrace]:
    """
    Run the supervised trace of one sample on ``g``.

    Returns:
        Weighted negative log-likelihood terms (shape [1] each) and the trace
    """
    enc = model.encode_sample(g, sample, stats)
    n, eor, gt = enc.n, enc.eor_index, sample.gt_index
    t_max = config.resolve_t_max(n)
    gt_cr = sample.cr[gt]
    trace = SampleTrace(sample_id=sample.sample_id)
    selected: List[int] = []
    terms: List[Tensor] = []
    stop_step: Optional[int] = None

    t = 0
    while True:
        t += 1
        eor_step = trace.t_hat is not None and t == trace.t_hat + 1
        if t > t_max and not eor_step:
            break
        if eor_step and not model.eor_enabled:
            break

        step = model.decode_step(g, enc, selected)
        probs = step.data[0]
        argmax_eor = model.eor_enabled and int(np.argmax(probs)) == eor
        if argmax_eor and stop_step is None:
            stop_step = t

        label = build_label(t, trace.t_hat, gt, eor)
        if eor_step:
            weight = trace.rewards.append(0.0, eor_reward(t, trace.t_hat, alpha), label)
        else:
            action = _first_available(probs, selected + [eor])
            listed = [sample.cr[i] for i in selected]
            if config.scr_after_append:
                listed.append(sample.cr[action])
            scr_value = 1.0 if config.disable_scr else scr(gt_cr, listed)
            if config.reward_floor is not None:
                scr_value = max(scr_value, config.reward_floor)
            weight = trace.rewards.append(scr_value, 0.0, label)

        if weight != 0.0:
            terms.append(g.scale(g.log(g.pick(step, (0, label))), -weight))
        if eor_step:
            break

        if argmax_eor:
            trace.failed = True
        selected.append(action)
        trace.actions.append(action)
        if action == gt:
            trace.t_hat = t
        elif len(selected) == n:
            break

    if trace.t_hat is None:
        trace.failed = True
    trace.list_len = stop_step - 1 if stop_step is not None else len(selected)
    return terms, trace


def supervised_loss(
    model: ScasrecModel,
    g: Graph,
    batch: Sequence[Sample],
    stats: FeatureStats,
    alpha: float,
    config: TrainConfig,
) -> Tuple[Tensor, BatchOutcome]:
    """
    Batch loss ``-sum_t r_t log P_t[Y_t]`` (averaged over samples unless
    ``config.loss_sum``) and the batch bookkeeping.
    """
    if not batch:
        raise ContractError("training batch is empty")
    terms: List[Tensor] = []
    traces: List[SampleTrace] = []
    for sample in batch:
        sample_terms, trace = trace_sample(model, g, sample, stats, alpha, config)
        terms.extend(sample_terms)
        traces.append(trace)

    if terms:
        loss = terms[0]
        for term in terms[1:]:
            loss = g.add(loss, term)
    else:
        loss = g.constant(np.zeros(1))
    if not config.loss_sum:
        loss = g.scale(loss, 1.0 / len(batch))

    zero_steps = sum(t.rewards.zero_weight_steps for t in traces)
    outcome = BatchOutcome(
        loss=loss.item(),
        fail_ids=[t.sample_id for t in traces if t.failed],
        mean_list_len=float(np.mean([t.list_len for t in traces])),
        t_hats={t.sample_id: t.t_hat for t in traces},
        batch_size=len(batch),
        zero_weight_steps=zero_steps,
    )
    return loss, outcome


def supervised_batch(
    model: ScasrecModel,
    batch: Sequence[Sample],
    stats: FeatureStats,
    alpha_state: AlphaState,
    config: TrainConfig,
    batch_id: int = 0,
) -> Tuple[BatchOutcome, AlphaState]:
    """
    One supervised update: loss, backward, Adam step, then the alpha update
    with the batch failure rate.

    Raises:
        TrainingDivergedError: If the loss or any intermediate value is non-finite
    """
    g = Graph(model.store)
    sample_ids = [s.sample_id for s in batch]
    try:
        loss, outcome = supervised_loss(model, g, batch, stats, alpha_state.alpha, config)
    except NumericError as e:
        raise TrainingDivergedError(batch_id, sample_ids, float("nan")) from e
    if not np.isfinite(outcome.loss):
        raise TrainingDivergedError(batch_id, sample_ids, outcome.loss)

    g.backward(loss)
    adam_step(
        model.store,
        learning_rate=config.learning_rate,
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        eps=config.adam_eps,
    )
    if outcome.zero_weight_steps:
        logger.debug("batch %d: %d zero-weight steps", batch_id, outcome.zero_weight_steps)
    return outcome, alpha_update(alpha_state, outcome.e)
