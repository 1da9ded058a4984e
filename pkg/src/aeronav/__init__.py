"""aeronav: a desk-scale aerial dialog-navigation workbench.

Vector geometry for rotated view areas, a synthetic dialog/episode generator,
from-scratch policies (transformer and LSTM) with a hand-rolled autograd-free
training loop, ensemble fusion, trajectory metrics, a session simulator, and a
FastAPI commander service with a thin CLI.
"""

__version__ = "0.1.0"

from .dataset import (
    AttentionMask,
    DialogRound,
    DialogStyle,
    Episode,
    GeneratorConfig,
    episode_from_dict,
    episode_to_dict,
    generate_corpus,
    generate_episode,
    goal_overlap_mask,
    load_episodes,
    save_episodes,
)
from .fusion import Ensemble, fuse_outputs, fused_policy, load_ensemble
from .geometry import Polygon, Trajectory, ViewArea, intersection_area, iou, path_length
from .metrics import (
    EpisodeResult,
    GpMode,
    MetricConfig,
    MetricReport,
    evaluate_split,
    format_table,
    goal_progress,
    spl,
    success,
    success_rate,
)
from .sessions import (
    Session,
    SessionManager,
    SessionPhase,
    episode_from_transcript,
    session_to_episode,
)
from .simulator import (
    PredictedTrajectory,
    RolloutConfig,
    StopReason,
    load_predictions,
    overfit_report,
    predictions_as_trajectories,
    run_episode,
    save_predictions,
)
from .worldmap import WorldMap

__all__ = [
    "Polygon",
    "Trajectory",
    "ViewArea",
    "intersection_area",
    "iou",
    "path_length",
    "EpisodeResult",
    "GpMode",
    "MetricConfig",
    "MetricReport",
    "evaluate_split",
    "format_table",
    "goal_progress",
    "spl",
    "success",
    "success_rate",
    "AttentionMask",
    "DialogRound",
    "DialogStyle",
    "Episode",
    "GeneratorConfig",
    "episode_from_dict",
    "episode_to_dict",
    "generate_corpus",
    "generate_episode",
    "goal_overlap_mask",
    "load_episodes",
    "save_episodes",
    "WorldMap",
    "Ensemble",
    "fuse_outputs",
    "fused_policy",
    "load_ensemble",
    "PredictedTrajectory",
    "RolloutConfig",
    "StopReason",
    "load_predictions",
    "overfit_report",
    "predictions_as_trajectories",
    "run_episode",
    "save_predictions",
    "Session",
    "SessionManager",
    "SessionPhase",
    "episode_from_transcript",
    "session_to_episode",
    "__version__",
]
