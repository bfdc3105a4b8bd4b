"""
Offline evaluation: rank every sample with each method and aggregate metrics.
"""

import logging
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from scasrec.core.config import RunConfig
from scasrec.core.errors import ConfigError, ContractError
from scasrec.core.schema import Sample
from scasrec.evalkit.baselines import train_pointwise
from scasrec.evalkit.metrics import (
    MetricsReport,
    gt_rank,
    hr_at_k,
    lcr_at_k,
    mrr,
    redundant_count,
)
from scasrec.evalkit.objective import objective_f
from scasrec.evalkit.rankers import (
    DPPRanker,
    MMRRanker,
    OracleRanker,
    PointwiseRanker,
    RandomRanker,
    Ranker,
    ScasrecRanker,
)
from scasrec.features.normalization import FeatureStats, fit_feature_stats
from scasrec.model.network import ScasrecModel
from scasrec.utils.parallel import map_ordered
from scasrec.utils.tables import provenance_lines, read_csv_table, write_csv_table

logger = logging.getLogger(__name__)

BASELINE_METHODS = ("dnn", "mmr", "dpp")


def aggregate(
    method: str,
    lists: Sequence[Sequence[int]],
    gt_indices: Sequence[int],
    crs: Sequence[Sequence[float]],
    ks: Sequence[int],
    alpha: float,
) -> MetricsReport:
    """
    Aggregate per-sample lists into one report.

    HR is reported as a fraction. Samples whose ground truth is missing from
    the list contribute 0 to MRR and HR and 0 to the redundant count.
    """
    if not (len(lists) == len(gt_indices) == len(crs)):
        raise ContractError(
            f"lists ({len(lists)}), gt indices ({len(gt_indices)}) and cr vectors "
            f"({len(crs)}) must align"
        )
    ks = sorted(set(ks))
    n = len(lists)
    report = MetricsReport(method=method, ks=list(ks), n_samples=n)
    if n == 0:
        report.hr = {k: 0.0 for k in ks}
        report.lcr = {k: 0.0 for k in ks}
        return report

    ranks = [gt_rank(ranked, gt) for ranked, gt in zip(lists, gt_indices)]
    report.mrr = mrr(ranks)
    report.hr = {
        k: float(np.mean([hr_at_k(r, gt, k) for r, gt in zip(lists, gt_indices)])) for k in ks
    }
    report.lcr = {k: float(np.mean([lcr_at_k(r, cr, k) for r, cr in zip(lists, crs)])) for k in ks}
    report.lcr_all = float(np.mean([lcr_at_k(r, cr) for r, cr in zip(lists, crs)]))
    report.mean_len = float(np.mean([len(r) for r in lists]))
    report.mean_z = float(np.mean([redundant_count(r, gt) for r, gt in zip(lists, gt_indices)]))
    report.mean_f = float(
        np.mean([objective_f(r, cr, gt, alpha) for r, cr, gt in zip(lists, crs, gt_indices)])
    )
    return report


def rank_all(
    ranker: Ranker,
    samples: Sequence[Sample],
    truncate_lengths: Optional[Mapping[int, int]] = None,
    progress_callback: Optional[Callable[[int, int], None]] = None,
) -> List[List[int]]:
    """Ranked list per sample, optionally cut to a per-sample length keyed by sample id."""
    lists = map_ordered(samples, ranker.rank, max_workers=1, progress_callback=progress_callback)
    if truncate_lengths is None:
        return [list(r) for r in lists]
    return [list(r)[: truncate_lengths[s.sample_id]] for r, s in zip(lists, samples)]


def evaluate(
    ranker: Ranker,
    samples: Sequence[Sample],
    ks: Sequence[int],
    alpha: float,
    truncate_lengths: Optional[Mapping[int, int]] = None,
    progress_callback: Optional[Callable[[int, int], None]] = None,
) -> MetricsReport:
    """Rank every sample with ``ranker`` and aggregate the metrics."""
    lists = rank_all(ranker, samples, truncate_lengths, progress_callback)
    report = aggregate(
        ranker.name,
        lists,
        [s.gt_index for s in samples],
        [s.cr for s in samples],
        ks,
        alpha,
    )
    logger.info(
        "%s: mrr=%.4f lcr@%d=%.4f mean_len=%.2f over %d samples",
        ranker.name,
        report.mrr,
        report.ks[-1],
        report.lcr[report.ks[-1]],
        report.mean_len,
        report.n_samples,
    )
    return report


def baseline_pointwise(
    train_samples: Sequence[Sample],
    eval_samples: Sequence[Sample],
    config: RunConfig,
    stats: Optional[FeatureStats] = None,
) -> MetricsReport:
    """Train the pointwise scorer on ``train_samples`` and evaluate its full ranking."""
    if stats is None:
        stats = fit_feature_stats(train_samples)
    model = train_pointwise(
        train_samples,
        stats,
        config.model,
        config.train,
        epochs=config.eval.baseline_epochs,
        seed=config.eval.seed,
    )
    alpha = config.eval.alpha if config.eval.alpha is not None else config.train.alpha_init
    return evaluate(PointwiseRanker(model, stats), eval_samples, config.eval.ks, alpha)


def build_rankers(
    methods: Sequence[str],
    config: RunConfig,
    model: Optional[ScasrecModel] = None,
    stats: Optional[FeatureStats] = None,
    train_samples: Optional[Sequence[Sample]] = None,
) -> List[Ranker]:
    """
    Instantiate rankers in the order given.

    Raises:
        ConfigError: If a method lacks what it needs (a checkpoint for
            ``scasrec``, training data for the pointwise baselines)
    """
    rankers: List[Ranker] = []
    pointwise = None
    needs_baseline = any(m in BASELINE_METHODS for m in methods)
    if needs_baseline:
        if not train_samples:
            raise ConfigError(
                f"methods {[m for m in methods if m in BASELINE_METHODS]} need training data",
                action="pass --train-data",
            )
        if stats is None:
            raise ConfigError("feature statistics are required for the pointwise baselines")
        logger.info("training pointwise baseline on %d samples", len(train_samples))
        pointwise = train_pointwise(
            train_samples,
            stats,
            config.model,
            config.train,
            epochs=config.eval.baseline_epochs,
            seed=config.eval.seed,
        )

    for method in methods:
        if method == "scasrec":
            if model is None or stats is None:
                raise ConfigError("method 'scasrec' needs a checkpoint", action="pass --ckpt")
            rankers.append(ScasrecRanker(model, stats, config.train))
        elif method == "dnn":
            rankers.append(PointwiseRanker(pointwise, stats))
        elif method == "mmr":
            rankers.append(MMRRanker(pointwise, stats, config.eval.mmr_lambda))
        elif method == "dpp":
            rankers.append(DPPRanker(pointwise, stats, config.eval.dpp_k))
        elif method == "oracle":
            rankers.append(OracleRanker())
        elif method == "random":
            rankers.append(RandomRanker(config.eval.seed))
        else:
            raise ConfigError(f"unknown method {method!r}")
    return rankers


def run_evaluation(
    rankers: Sequence[Ranker],
    samples: Sequence[Sample],
    ks: Sequence[int],
    alpha: float,
    truncate_to_model_len: bool = False,
    progress_callback: Optional[Callable[[str, int, int], None]] = None,
) -> List[MetricsReport]:
    """
    Evaluate every ranker on the same samples.

    With ``truncate_to_model_len`` every non-SCASRec list is cut to the length
    the SCASRec ranker generated for that sample.
    """
    truncate: Optional[Dict[int, int]] = None
    reports: Dict[str, MetricsReport] = {}

    def callback_for(name: str):
        if progress_callback is None:
            return None
        return lambda done, total: progress_callback(name, done, total)

    if truncate_to_model_len:
        model_rankers = [r for r in rankers if isinstance(r, ScasrecRanker)]
        if not model_rankers:
            raise ConfigError("truncation to model length needs the 'scasrec' method")
        ranker = model_rankers[0]
        lists = rank_all(ranker, samples, progress_callback=callback_for(ranker.name))
        truncate = {s.sample_id: len(r) for s, r in zip(samples, lists)}
        reports[ranker.name] = aggregate(
            ranker.name, lists, [s.gt_index for s in samples], [s.cr for s in samples], ks, alpha
        )

    for ranker in rankers:
        if ranker.name in reports:
            continue
        limit = None if isinstance(ranker, ScasrecRanker) else truncate
        reports[ranker.name] = evaluate(
            ranker, samples, ks, alpha, limit, progress_callback=callback_for(ranker.name)
        )
    return [reports[r.name] for r in rankers]


def write_report_csv(
    path: Path, reports: Sequence[MetricsReport], ks: Sequence[int], config: RunConfig
) -> int:
    """Write one row per method under a provenance header."""
    header = provenance_lines(config.fingerprint(), config.header_json())
    ks = sorted(set(ks))
    return write_csv_table(
        path, header, MetricsReport.columns(ks), (report.to_row() for report in reports)
    )


def read_report_csv(path: Path) -> List[Dict[str, str]]:
    return read_csv_table(path)
