"""Feature normalization and representation assembly."""

from scasrec.features.encoding import (
    FeatureDims,
    Representation,
    assemble,
    embed_discrete,
    history_attention,
    init_feature_params,
    scene_vector,
)
from scasrec.features.normalization import (
    FeatureStats,
    NormStats,
    fit_columns,
    fit_feature_stats,
    fit_zscore,
)

__all__ = [
    "FeatureDims",
    "FeatureStats",
    "NormStats",
    "Representation",
    "assemble",
    "embed_discrete",
    "fit_columns",
    "fit_feature_stats",
    "fit_zscore",
    "history_attention",
    "init_feature_params",
    "scene_vector",
]
