"""auxgeo: geometry proof goals closed by searching for auxiliary constructions."""

from .deduction import KnowledgeBase, default_rules, explain, proves, saturate
from .features import DEFAULT_BETA, FeatureVector, TolerancePolicy, feature_vector
from .geometry import Conclusion, Fact, Plane, Point, Scene, Segment, make_fact
from .scorer import ContributionClassifier, TrainConfig, TrainingExample
from .search import (
    EpisodeResult,
    NodeStats,
    SearchConfig,
    StatsStore,
    train_search,
    guidance_score,
    guided_solve,
    run_episode,
    select_action,
    uct_solve,
    uct_score,
)
from .strategies import (
    DEFAULT_ALPHA,
    Strategy,
    apply_strategy,
    compute_levels,
    correlation,
    generate_strategies,
    point_sign,
    subgraph,
)

__version__ = "0.1.0"

__all__ = [
    "Conclusion", "ContributionClassifier", "DEFAULT_ALPHA", "DEFAULT_BETA",
    "EpisodeResult", "Fact", "FeatureVector", "KnowledgeBase", "NodeStats",
    "Plane", "Point", "Scene", "SearchConfig", "Segment", "StatsStore",
    "Strategy", "TolerancePolicy", "TrainConfig", "TrainingExample",
    "train_search", "apply_strategy", "compute_levels", "correlation",
    "default_rules", "explain", "feature_vector", "generate_strategies",
    "guidance_score", "guided_solve", "make_fact", "point_sign", "proves",
    "run_episode", "saturate", "select_action", "subgraph", "uct_solve",
    "uct_score",
]
