"""
Ablation grid: the full model, the variant without SCR and EOR, and a sweep
over the assumed noise ratio beta.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from scasrec.core.config import RunConfig
from scasrec.core.schema import Sample
from scasrec.evalkit.evaluate import evaluate
from scasrec.evalkit.metrics import MetricsReport
from scasrec.evalkit.rankers import ScasrecRanker
from scasrec.trainer.loop import run_training
from scasrec.utils.tables import provenance_lines, write_csv_table

logger = logging.getLogger(__name__)

DEFAULT_BETAS = (0.02, 0.04, 0.08)
ABLATION_FILE = "ablation.csv"


@dataclass
class AblationRun:
    name: str
    config: RunConfig


@dataclass
class AblationResult:
    run: AblationRun
    report: MetricsReport
    steps: int
    final_alpha: float
    final_list_len: float


def ablation_grid(config: RunConfig, betas: Sequence[float] = DEFAULT_BETAS) -> List[AblationRun]:
    """Runs in order: ``full``, ``no_scr_eor``, then ``beta_<b>`` per beta."""
    runs = [
        AblationRun("full", config.with_overrides("train", disable_scr=False, disable_eor=False)),
        AblationRun(
            "no_scr_eor", config.with_overrides("train", disable_scr=True, disable_eor=True)
        ),
    ]
    for beta in betas:
        runs.append(AblationRun(f"beta_{beta:g}", config.with_overrides("train", beta=beta)))
    return runs


def run_ablation(
    config: RunConfig,
    train: Sequence[Sample],
    eval_samples: Sequence[Sample],
    out_dir: Path,
    betas: Sequence[float] = DEFAULT_BETAS,
    on_run: Optional[Callable[[AblationRun], None]] = None,
) -> List[AblationResult]:
    """
    Train and evaluate every run of the grid.

    Each run writes its training log and checkpoints to ``out_dir/<name>``;
    the summary table goes to ``out_dir/ablation.csv``.
    """
    out_dir = Path(out_dir)
    results: List[AblationResult] = []
    ks = config.eval.ks
    for run in ablation_grid(config, betas):
        if on_run:
            on_run(run)
        logger.info("ablation run %s", run.name)
        trained = run_training(run.config, train, eval_samples, out_dir / run.name)
        alpha = config.eval.alpha if config.eval.alpha is not None else trained.alpha
        report = evaluate(
            ScasrecRanker(trained.model, trained.stats, run.config.train),
            eval_samples,
            ks,
            alpha,
        )
        report.method = run.name
        results.append(
            AblationResult(
                run=run,
                report=report,
                steps=trained.steps,
                final_alpha=trained.alpha,
                final_list_len=trained.list_lengths[-1] if trained.list_lengths else 0.0,
            )
        )
    write_ablation_csv(out_dir / ABLATION_FILE, results, ks, config)
    return results


def ablation_columns(ks: Sequence[int]) -> List[str]:
    return [
        "run",
        "beta",
        "disable_scr",
        "disable_eor",
        "steps",
        "final_alpha",
        "final_train_len",
    ] + MetricsReport.columns(ks)[1:]


def write_ablation_csv(
    path: Path, results: Sequence[AblationResult], ks: Sequence[int], config: RunConfig
) -> int:
    rows: List[Dict[str, object]] = []
    for result in results:
        tc = result.run.config.train
        row: Dict[str, object] = {
            "run": result.run.name,
            "beta": tc.beta,
            "disable_scr": tc.disable_scr,
            "disable_eor": tc.disable_eor,
            "steps": result.steps,
            "final_alpha": result.final_alpha,
            "final_train_len": result.final_list_len,
        }
        row.update({k: v for k, v in result.report.to_row().items() if k != "method"})
        rows.append(row)
    header = provenance_lines(config.fingerprint(), config.header_json())
    return write_csv_table(path, header, ablation_columns(ks), rows)
