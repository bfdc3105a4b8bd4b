"""REINFORCE fine-tuning with stepwise list rewards."""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from scasrec.core.config import TrainConfig
from scasrec.core.errors import ContractError, NumericError, TrainingDivergedError
from scasrec.core.schema import Sample
from scasrec.diffengine.params import adam_step
from scasrec.diffengine.tensor import Graph, Tensor
from scasrec.features.normalization import FeatureStats
from scasrec.model.decoding import DecodeState, replay_log_probs, sample_decode
from scasrec.model.network import ScasrecModel
from scasrec.rewards.signals import discounted_returns, scr
from scasrec.trainer.supervised import BatchOutcome

logger = logging.getLogger(__name__)


def step_rewards(
    state: DecodeState, sample: Sample, alpha: float, config: TrainConfig
) -> List[float]:
    """
    Reward of every action of a rollout.

    Up to ``t_hat`` each step earns the corrective reward of the list; later
    non-EOR actions cost ``alpha``; the EOR action itself earns 0.
    """
    gt_cr = sample.cr[sample.gt_index]
    rewards: List[float] = []
    listed: List[float] = []
    for t, action in enumerate(state.actions, start=1):
        if action == state.eor_index:
            rewards.append(0.0)
            continue
        if state.t_hat is None or t <= state.t_hat:
            current = listed + [sample.cr[action]] if config.scr_after_append else listed
            rewards.append(1.0 if config.disable_scr else scr(gt_cr, current))
        else:
            rewards.append(-alpha)
        listed.append(sample.cr[action])
    return rewards


def surrogate(g: Graph, log_probs: Sequence[Tensor], returns: Sequence[float]) -> Optional[Tensor]:
    """``-sum_t log pi_t * Q_t``; None when no step carries a nonzero return."""
    if len(log_probs) != len(returns):
        raise ContractError(f"{len(log_probs)} log-probs but {len(returns)} returns")
    total: Optional[Tensor] = None
    for log_prob, q in zip(log_probs, returns):
        if q == 0.0:
            continue
        term = g.scale(log_prob, -q)
        total = term if total is None else g.add(total, term)
    return total


def frozen_surrogate(
    model: ScasrecModel,
    g: Graph,
    sample: Sample,
    stats: FeatureStats,
    actions: Sequence[int],
    returns: Sequence[float],
) -> Tensor:
    """Surrogate of a fixed rollout rebuilt on ``g`` (actions and returns frozen)."""
    enc = model.encode_sample(g, sample, stats)
    loss = surrogate(g, replay_log_probs(model, g, enc, actions), returns)
    return loss if loss is not None else g.constant(np.zeros(1))


def reinforce_loss(
    model: ScasrecModel,
    g: Graph,
    batch: Sequence[Sample],
    stats: FeatureStats,
    alpha: float,
    config: TrainConfig,
    rng: np.random.Generator,
) -> Tuple[Tensor, BatchOutcome]:
    """Sample one rollout per sample and build the batch surrogate loss."""
    if not batch:
        raise ContractError("training batch is empty")
    rollouts: List[Tuple[DecodeState, List[float]]] = []
    for sample in batch:
        t_max = config.resolve_t_max(sample.n_candidates)
        state = sample_decode(model, sample, stats, t_max, rng, g)
        returns = discounted_returns(step_rewards(state, sample, alpha, config), config.discount)
        rollouts.append((state, returns))

    baseline = 0.0
    if config.rl_baseline:
        every = [q for _, returns in rollouts for q in returns]
        baseline = float(np.mean(every)) if every else 0.0

    loss: Optional[Tensor] = None
    for state, returns in rollouts:
        term = surrogate(g, state.log_prob_tensors, [q - baseline for q in returns])
        if term is not None:
            loss = term if loss is None else g.add(loss, term)
    if loss is None:
        loss = g.constant(np.zeros(1))
    if not config.loss_sum:
        loss = g.scale(loss, 1.0 / len(batch))

    fail_ids = [
        s.sample_id for s, (state, _) in zip(batch, rollouts) if s.gt_index not in state.selected
    ]
    outcome = BatchOutcome(
        loss=loss.item(),
        fail_ids=fail_ids,
        mean_list_len=float(np.mean([len(state.selected) for state, _ in rollouts])),
        t_hats={s.sample_id: state.t_hat for s, (state, _) in zip(batch, rollouts)},
        batch_size=len(batch),
        mean_return=float(np.mean([r[0] if r else 0.0 for _, r in rollouts])),
    )
    return loss, outcome


def rl_batch(
    model: ScasrecModel,
    batch: Sequence[Sample],
    stats: FeatureStats,
    alpha: float,
    config: TrainConfig,
    rng: np.random.Generator,
    batch_id: int = 0,
) -> BatchOutcome:
    """One REINFORCE update; ``alpha`` stays fixed."""
    g = Graph(model.store)
    sample_ids = [s.sample_id for s in batch]
    try:
        loss, outcome = reinforce_loss(model, g, batch, stats, alpha, config, rng)
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
    return outcome
