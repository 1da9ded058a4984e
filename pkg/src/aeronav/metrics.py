"""Navigation evaluation: success, SR, SPL, goal progress, split reports.

SR counts an episode as successful when the final predicted view overlaps the
goal area with IoU at or above a configurable threshold.  SPL weights success
by the ratio of demonstration length to the length actually flown.  Goal
progress measures distance made toward the goal center, with two readings of
"progress": the literal trajectory length minus remaining distance, or the
conventional start-to-goal displacement minus remaining distance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

from .geometry import Trajectory, ViewArea, iou, path_length


class GpMode(str, Enum):
    PATH_LITERAL = "path_literal"
    DISPLACEMENT = "displacement"


@dataclass(frozen=True)
class MetricConfig:
    iou_threshold: float = 0.4
    gp_mode: GpMode = GpMode.PATH_LITERAL

    def __post_init__(self):
        if not (0.0 < self.iou_threshold <= 1.0):
            raise ValueError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")
        object.__setattr__(self, "gp_mode", GpMode(self.gp_mode))


@dataclass(frozen=True)
class EpisodeResult:
    """Per-episode scoring record."""

    episode_id: str
    success: bool
    shortest_length: float   # demonstration path length
    taken_length: float      # predicted path length
    goal_progress: float
    final_iou: float

    def __post_init__(self):
        if self.shortest_length < 0.0 or self.taken_length < 0.0:
            raise ValueError("path lengths must be non-negative")


@dataclass(frozen=True)
class MetricReport:
    spl: float
    sr: float
    gp: float
    per_episode: tuple[EpisodeResult, ...]
    config: MetricConfig = field(default_factory=MetricConfig)

    def __post_init__(self):
        object.__setattr__(self, "per_episode", tuple(self.per_episode))
        if not (-1e-9 <= self.spl <= self.sr + 1e-9 and self.sr <= 100.0 + 1e-9):
            raise ValueError(
                f"report violates 0 <= SPL <= SR <= 100: spl={self.spl} sr={self.sr}")

    def to_dict(self) -> dict:
        return {
            "spl": self.spl,
            "sr": self.sr,
            "gp": self.gp,
            "config": {
                "iou_threshold": self.config.iou_threshold,
                "gp_mode": self.config.gp_mode.value,
            },
            "per_episode": [
                {
                    "episode_id": r.episode_id,
                    "success": r.success,
                    "shortest_length": r.shortest_length,
                    "taken_length": r.taken_length,
                    "goal_progress": r.goal_progress,
                    "final_iou": r.final_iou,
                }
                for r in self.per_episode
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        cfg = MetricConfig(iou_threshold=d["config"]["iou_threshold"],
                           gp_mode=GpMode(d["config"]["gp_mode"]))
        per = tuple(
            EpisodeResult(
                episode_id=r["episode_id"],
                success=bool(r["success"]),
                shortest_length=r["shortest_length"],
                taken_length=r["taken_length"],
                goal_progress=r["goal_progress"],
                final_iou=r["final_iou"],
            )
            for r in d["per_episode"]
        )
        return cls(spl=d["spl"], sr=d["sr"], gp=d["gp"], per_episode=per, config=cfg)

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        return cls.from_dict(json.loads(text))


def success(final_view: ViewArea, goal: ViewArea, cfg: MetricConfig) -> bool:
    """True iff the final view meets the IoU requirement against the goal."""
    return iou(final_view, goal) >= cfg.iou_threshold


def success_rate(results: list[EpisodeResult] | tuple[EpisodeResult, ...]) -> float:
    if not results:
        raise ValueError("success rate is undefined for an empty result list")
    return 100.0 * sum(1 for r in results if r.success) / len(results)


def spl(results: list[EpisodeResult] | tuple[EpisodeResult, ...]) -> float:
    """Success weighted by inverse path length: mean of S*l/max(p, l), in percent."""
    if not results:
        raise ValueError("SPL is undefined for an empty result list")
    total = 0.0
    for r in results:
        if not r.success:
            continue
        denom = max(r.taken_length, r.shortest_length)
        if denom <= 0.0:
            raise ValueError(
                f"episode {r.episode_id!r}: successful episode with zero-length "
                "demonstration and prediction is ill-posed for SPL")
        total += r.shortest_length / denom
    return 100.0 * total / len(results)


def goal_progress(traj: Trajectory, goal: ViewArea, cfg: MetricConfig) -> float:
    """Distance progressed toward the goal center; may be negative."""
    fx, fy = traj.final.center
    gx, gy = goal.center
    remaining = math.hypot(gx - fx, gy - fy)
    if cfg.gp_mode is GpMode.DISPLACEMENT:
        sx, sy = traj.start.center
        return math.hypot(gx - sx, gy - sy) - remaining
    return path_length(traj) - remaining


def evaluate_split(episodes, predictions: dict[str, Trajectory],
                   cfg: MetricConfig | None = None) -> MetricReport:
    """Score a prediction set against a list of episodes.

    `episodes` is any iterable of objects with `.id`, `.goal` and
    `.gt_trajectory` attributes (see aeronav.dataset.Episode).  Every episode
    must have an entry in `predictions`; aggregation is in episode order, so
    identical inputs produce identical reports.
    """
    cfg = cfg or MetricConfig()
    episodes = list(episodes)
    if not episodes:
        raise ValueError("cannot evaluate an empty split")
    results = []
    for ep in episodes:
        if ep.id not in predictions:
            raise ValueError(f"missing prediction for episode {ep.id!r}")
        pred = predictions[ep.id]
        final_iou = iou(pred.final, ep.goal)
        results.append(EpisodeResult(
            episode_id=ep.id,
            success=final_iou >= cfg.iou_threshold,
            shortest_length=path_length(ep.gt_trajectory),
            taken_length=path_length(pred),
            goal_progress=goal_progress(pred, ep.goal, cfg),
            final_iou=final_iou,
        ))
    gp = sum(r.goal_progress for r in results) / len(results)
    return MetricReport(spl=spl(results), sr=success_rate(results), gp=gp,
                        per_episode=tuple(results), config=cfg)


def format_table(rows: list[tuple[str, float, float, float]]) -> str:
    """Plain-text leaderboard table: Method, SPL, SR, GP."""
    label_width = max(len("Method"), max((len(r[0]) for r in rows), default=0))
    header = f"{'Method':<{label_width}}  {'SPL':>8}  {'SR':>8}  {'GP':>8}"
    lines = [header, "-" * len(header)]
    for label, s, sr_, gp_ in rows:
        lines.append(f"{label:<{label_width}}  {s:>8.2f}  {sr_:>8.2f}  {gp_:>8.2f}")
    return "\n".join(lines)
