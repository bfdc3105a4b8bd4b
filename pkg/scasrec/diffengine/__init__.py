"""Reverse-mode differentiation engine, parameters, optimizer and checkpoints."""

from scasrec.diffengine.checkpoint import load_checkpoint, save_checkpoint
from scasrec.diffengine.gradcheck import GradCheckResult, grad_check
from scasrec.diffengine.params import ParamStore, adam_step
from scasrec.diffengine.tensor import MASK_VALUE, Graph, Tensor

__all__ = [
    "MASK_VALUE",
    "Graph",
    "GradCheckResult",
    "ParamStore",
    "Tensor",
    "adam_step",
    "grad_check",
    "load_checkpoint",
    "save_checkpoint",
]
