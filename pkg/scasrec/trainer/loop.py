"""
Training run orchestration: epochs, periodic evaluation, checkpoints, resume.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from scasrec.core.config import RunConfig
from scasrec.core.errors import CheckpointError, ConfigError, TrainingDivergedError
from scasrec.core.schema import Regime, Sample
from scasrec.diffengine.checkpoint import load_checkpoint, save_checkpoint
from scasrec.evalkit.evaluate import evaluate
from scasrec.evalkit.rankers import ScasrecRanker
from scasrec.features.normalization import FeatureStats, fit_feature_stats
from scasrec.model.network import ScasrecModel
from scasrec.rewards.alpha import AlphaState
from scasrec.trainer.log import TrainingLog
from scasrec.trainer.reinforce import rl_batch
from scasrec.trainer.supervised import BatchOutcome, supervised_batch
from scasrec.utils.fingerprint import arrays_fingerprint
from scasrec.utils.tables import provenance_lines

logger = logging.getLogger(__name__)

BEST_CHECKPOINT = "best.ckpt"
LAST_CHECKPOINT = "last.ckpt"
FINAL_CHECKPOINT = "final.ckpt"
LOG_FILE = "train_log.csv"
DIVERGENCE_DUMP = "diverged_batch.json"

# Periodic evaluation reports LCR at this cutoff.
EVAL_LCR_K = 3


@dataclass
class TrainingResult:
    """Outcome of a training run."""

    model: ScasrecModel
    stats: FeatureStats
    alpha: float
    steps: int
    best_mrr: Optional[float]
    out_dir: Path
    losses: List[float] = field(default_factory=list)
    list_lengths: List[float] = field(default_factory=list)

    @property
    def log_path(self) -> Path:
        return self.out_dir / LOG_FILE

    @property
    def final_checkpoint(self) -> Path:
        return self.out_dir / FINAL_CHECKPOINT


def checkpoint_tensors(
    model: ScasrecModel,
    stats: FeatureStats,
    step: int,
    epoch: int,
    alpha: float,
    best_mrr: Optional[float] = None,
) -> Dict[str, np.ndarray]:
    """Everything needed to evaluate or resume: parameters, Adam state, statistics, counters."""
    tensors: Dict[str, np.ndarray] = {}
    tensors.update(model.meta_tensors())
    tensors.update(model.param_tensors())
    tensors.update(model.store.optimizer_state())
    tensors.update(stats.to_tensors())
    tensors["state/step"] = np.array([float(step)])
    tensors["state/epoch"] = np.array([float(epoch)])
    tensors["state/alpha"] = np.array([float(alpha)])
    tensors["state/best_mrr"] = np.array([np.nan if best_mrr is None else float(best_mrr)])
    return tensors


def load_trained(path: Path) -> Tuple[ScasrecModel, FeatureStats, Dict[str, float]]:
    """
    Load a checkpoint written by training.

    Returns:
        Model (with Adam state restored), feature statistics and the scalar
        ``state/*`` counters by short name

    Raises:
        CheckpointError: If the file is malformed or incomplete
    """
    tensors = load_checkpoint(path)
    model = ScasrecModel.from_tensors(tensors)
    stats = FeatureStats.from_tensors(tensors)
    model.store.load_optimizer_state({k: v for k, v in tensors.items() if k.startswith("adam/")})
    state = {
        k[len("state/"):]: float(v.reshape(-1)[0])
        for k, v in tensors.items()
        if k.startswith("state/")
    }
    return model, stats, state


def _dump_divergence(out_dir: Path, error: TrainingDivergedError) -> Path:
    path = out_dir / DIVERGENCE_DUMP
    payload = {"loss": repr(error.loss), **error.details()}
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def run_training(
    config: RunConfig,
    train: Sequence[Sample],
    eval_samples: Optional[Sequence[Sample]],
    out_dir: Path,
    resume: bool = False,
    progress: Optional[Callable[[int, int], None]] = None,
) -> TrainingResult:
    """
    Train a model and write its log and checkpoints into ``out_dir``.

    Batches are drawn from a per-epoch permutation seeded by ``(seed, epoch)``;
    RL rollouts use a generator seeded by ``(seed, step)``, so a resumed run
    continues exactly where the interrupted one would have.

    Args:
        config: Effective run configuration
        train: Training samples (also the source of the feature statistics)
        eval_samples: Held-out samples for periodic evaluation (None = skip)
        out_dir: Output directory
        resume: Continue from ``last.ckpt`` in ``out_dir`` when present
        progress: Optional callback(step, total_steps)

    Returns:
        TrainingResult

    Raises:
        ConfigError: If there are no training samples
        TrainingDivergedError: On a non-finite loss; ``diverged_batch.json``
            names the offending batch
    """
    if not train:
        raise ConfigError("no training samples", action="generate data with `scasrec gen-data`")
    tc = config.train
    regime = Regime.RL if tc.rl else Regime.SUPERVISED
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    last_path = out_dir / LAST_CHECKPOINT

    start_step = 0
    best_mrr: Optional[float] = None
    alpha = tc.alpha_init
    if resume and last_path.exists():
        model, stats, state = load_trained(last_path)
        start_step = int(state.get("step", 0))
        alpha = state.get("alpha", alpha)
        if not math.isnan(state.get("best_mrr", math.nan)):
            best_mrr = state["best_mrr"]
        if model.eor_enabled == tc.disable_eor:
            raise CheckpointError("checkpoint EOR setting does not match --disable-eor")
        logger.info("resuming from %s at step %d", last_path, start_step)
    else:
        if resume:
            logger.warning("no %s in %s; starting fresh", LAST_CHECKPOINT, out_dir)
        stats = fit_feature_stats(train)
        model = ScasrecModel.create(
            config.model,
            route_width=stats.route.width,
            scene_width=stats.scene.width,
            history_width=stats.history.width,
            seed=tc.seed,
            eor_enabled=not tc.disable_eor,
        )

    alpha_state = AlphaState(alpha=alpha, eta=tc.eta, beta=tc.beta)
    per_epoch = math.ceil(len(train) / tc.batch_size)
    total_steps = per_epoch * tc.epochs
    if tc.max_steps is not None:
        total_steps = min(total_steps, tc.max_steps)
    held_out = list(eval_samples or [])
    if tc.eval_limit is not None:
        held_out = held_out[: tc.eval_limit]

    result = TrainingResult(model, stats, alpha, start_step, best_mrr, out_dir)
    header = provenance_lines(config.fingerprint(), config.header_json())
    step, epoch = start_step, 0

    def save(name: str) -> None:
        tensors = checkpoint_tensors(model, stats, step, epoch, alpha_state.alpha, result.best_mrr)
        save_checkpoint(out_dir / name, tensors)
        digest = arrays_fingerprint(model.param_tensors())
        logger.info("saved %s at step %d (params %s)", name, step, digest)

    with TrainingLog(
        out_dir / LOG_FILE, regime, header, resume_step=start_step if resume else None
    ) as log:
        for epoch in range(tc.epochs):
            if step >= total_steps:
                break
            order = np.random.default_rng(np.random.SeedSequence([tc.seed, epoch])).permutation(
                len(train)
            )
            for index in range(per_epoch):
                global_step = epoch * per_epoch + index + 1
                if global_step <= start_step:
                    continue
                if global_step > total_steps:
                    break
                rows = order[index * tc.batch_size : (index + 1) * tc.batch_size]
                batch = [train[i] for i in rows]
                try:
                    outcome, alpha_state = _train_step(
                        model, batch, stats, alpha_state, config, global_step
                    )
                except TrainingDivergedError as e:
                    dump = _dump_divergence(out_dir, e)
                    logger.error("training diverged at batch %d; wrote %s", global_step, dump)
                    raise
                step = global_step
                logger.debug("step %d: %s", step, outcome_summary(outcome))

                eval_mrr = eval_lcr = None
                if held_out and (step % tc.eval_every == 0 or step == total_steps):
                    report = evaluate(
                        ScasrecRanker(model, stats, tc), held_out, [EVAL_LCR_K], alpha_state.alpha
                    )
                    eval_mrr, eval_lcr = report.mrr, report.lcr[EVAL_LCR_K]
                    if result.best_mrr is None or eval_mrr > result.best_mrr:
                        result.best_mrr = eval_mrr
                        save(BEST_CHECKPOINT)
                        logger.info("step %d: new best eval MRR %.4f", step, eval_mrr)

                row = dict(
                    step=step,
                    epoch=epoch + 1,
                    loss=outcome.loss,
                    e=outcome.e,
                    alpha=alpha_state.alpha,
                    mean_list_len=outcome.mean_list_len,
                    eval_mrr=eval_mrr,
                    eval_lcr3=eval_lcr,
                )
                if regime == Regime.RL:
                    row["mean_return"] = outcome.mean_return
                log.write(**row)
                result.losses.append(outcome.loss)
                result.list_lengths.append(outcome.mean_list_len)

                if step % tc.eval_every == 0:
                    save(LAST_CHECKPOINT)
                if progress:
                    progress(step, total_steps)

    save(LAST_CHECKPOINT)
    save(FINAL_CHECKPOINT)
    result.steps = step
    result.alpha = alpha_state.alpha
    logger.info(
        "finished %s training after %d steps (alpha %.5f)", regime.value, step, result.alpha
    )
    return result


def _train_step(
    model: ScasrecModel,
    batch: Sequence[Sample],
    stats: FeatureStats,
    alpha_state: AlphaState,
    config: RunConfig,
    step: int,
) -> Tuple[BatchOutcome, AlphaState]:
    tc = config.train
    if tc.rl:
        rng = np.random.default_rng(np.random.SeedSequence([tc.seed, 1, step]))
        outcome = rl_batch(model, batch, stats, alpha_state.alpha, tc, rng, batch_id=step)
        return outcome, alpha_state
    return supervised_batch(model, batch, stats, alpha_state, tc, batch_id=step)


def outcome_summary(outcome: BatchOutcome) -> str:
    return (
        f"loss={outcome.loss:.5f} e={outcome.e:.3f} "
        f"len={outcome.mean_list_len:.2f} fails={len(outcome.fail_ids)}"
    )
