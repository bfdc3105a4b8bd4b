"""Supervised and REINFORCE training plus run orchestration."""

from scasrec.trainer.ablation import AblationResult, AblationRun, ablation_grid, run_ablation
from scasrec.trainer.log import RL_COLUMNS, SUPERVISED_COLUMNS, TrainingLog
from scasrec.trainer.loop import (
    TrainingResult,
    checkpoint_tensors,
    load_trained,
    run_training,
)
from scasrec.trainer.reinforce import (
    frozen_surrogate,
    reinforce_loss,
    rl_batch,
    step_rewards,
    surrogate,
)
from scasrec.trainer.supervised import (
    BatchOutcome,
    SampleTrace,
    supervised_batch,
    supervised_loss,
    trace_sample,
)

__all__ = [
    "AblationResult",
    "AblationRun",
    "BatchOutcome",
    "RL_COLUMNS",
    "SUPERVISED_COLUMNS",
    "SampleTrace",
    "TrainingLog",
    "TrainingResult",
    "ablation_grid",
    "checkpoint_tensors",
    "frozen_surrogate",
    "load_trained",
    "reinforce_loss",
    "rl_batch",
    "run_ablation",
    "run_training",
    "step_rewards",
    "supervised_batch",
    "supervised_loss",
    "surrogate",
    "trace_sample",
]
