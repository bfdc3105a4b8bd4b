"""
Streaming CSV log of a training run.

One row per batch. Evaluation columns are empty except on the batches where
a periodic evaluation ran.
"""

import csv
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO

from scasrec.core.schema import Regime
from scasrec.utils.tables import format_cell, read_comments, read_csv_table

logger = logging.getLogger(__name__)

SUPERVISED_COLUMNS = (
    "step",
    "epoch",
    "loss",
    "e",
    "alpha",
    "mean_list_len",
    "eval_mrr",
    "eval_lcr3",
)
RL_COLUMNS = SUPERVISED_COLUMNS + ("mean_return",)


def log_columns(regime: Regime) -> Sequence[str]:
    return RL_COLUMNS if regime == Regime.RL else SUPERVISED_COLUMNS


class TrainingLog:
    """Per-batch training log writer."""

    def __init__(
        self,
        path: Path,
        regime: Regime,
        header: Sequence[str],
        resume_step: Optional[int] = None,
    ):
        """
        Initialize the log.

        Args:
            path: CSV file to write
            regime: Training regime; selects the column set
            header: Provenance comment lines written on a fresh log
            resume_step: When resuming, rows after this step are dropped and
                the existing header is kept
        """
        self.path = Path(path)
        self.regime = regime
        self.columns = list(log_columns(regime))
        self.header = list(header) + [
            f"# regime {regime.value}",
            f"# schema {','.join(self.columns)}",
        ]
        self.resume_step = resume_step
        self.file: Optional[TextIO] = None
        self.writer: Optional[csv.DictWriter] = None

    def __enter__(self) -> "TrainingLog":
        kept: List[Dict[str, str]] = []
        header = self.header
        if self.resume_step is not None and self.path.exists():
            header = [f"# {line}" for line in read_comments(self.path)]
            kept = [
                row
                for row in read_csv_table(self.path)
                if int(row["step"]) <= self.resume_step
            ]
            logger.info("resuming log %s with %d rows", self.path, len(kept))
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.file = open(self.path, "w", encoding="utf-8", newline="")
        for line in header:
            self.file.write(line + "\n")
        self.writer = csv.DictWriter(self.file, fieldnames=self.columns, lineterminator="\n")
        self.writer.writeheader()
        for row in kept:
            self.writer.writerow({k: row.get(k, "") for k in self.columns})
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.file:
            self.file.close()
            self.file = None

    def write(self, **values: Any) -> None:
        """Append one row; unknown columns are rejected."""
        if self.writer is None or self.file is None:
            raise RuntimeError("training log is not open")
        unknown = set(values) - set(self.columns)
        if unknown:
            raise KeyError(f"unknown log columns {sorted(unknown)}")
        self.writer.writerow({k: format_cell(values.get(k)) for k in self.columns})
        self.file.flush()
