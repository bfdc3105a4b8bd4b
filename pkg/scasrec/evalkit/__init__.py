"""Offline metrics, the list objective, baselines and evaluation runs."""

from scasrec.evalkit.baselines import (
    PointwiseModel,
    dpp_greedy,
    mmr_rank,
    route_similarity,
    train_pointwise,
)
from scasrec.evalkit.evaluate import (
    baseline_pointwise,
    aggregate,
    build_rankers,
    evaluate,
    read_report_csv,
    run_evaluation,
    write_report_csv,
)
from scasrec.evalkit.metrics import (
    MetricsReport,
    gt_rank,
    hr_at_k,
    lcr_at_k,
    mrr,
    redundant_count,
)
from scasrec.evalkit.objective import enumerate_lists, objective_f, optimal_lists
from scasrec.evalkit.rankers import (
    DPPRanker,
    MMRRanker,
    OracleRanker,
    PointwiseRanker,
    RandomRanker,
    Ranker,
    ScasrecRanker,
)

__all__ = [
    "DPPRanker",
    "MMRRanker",
    "MetricsReport",
    "OracleRanker",
    "PointwiseModel",
    "PointwiseRanker",
    "RandomRanker",
    "Ranker",
    "ScasrecRanker",
    "aggregate",
    "baseline_pointwise",
    "build_rankers",
    "dpp_greedy",
    "enumerate_lists",
    "evaluate",
    "gt_rank",
    "hr_at_k",
    "lcr_at_k",
    "mmr_rank",
    "mrr",
    "objective_f",
    "optimal_lists",
    "read_report_csv",
    "redundant_count",
    "route_similarity",
    "run_evaluation",
    "train_pointwise",
    "write_report_csv",
]
