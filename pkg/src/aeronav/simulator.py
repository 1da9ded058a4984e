"""Closed-loop episode execution.

`run_episode` flies any policy against an Episode: at each step the full
flown history plus the dialog revealed so far (one round per step) is packed
into an AgentState, the policy answers with an AgentOutput, and the waypoint
is applied after clipping — first to the per-step travel budget, then to the
world square, accounting for the rotated view's footprint.  The drone's yaw
turns to face the direction it actually moves.

Stopping is decided before moving: an output whose stop probability clears
the threshold ends the rollout without extending the trajectory, so the
output log always holds exactly one entry per movement.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .agents.base import AgentOutput, AgentState
from .agents.models import policy_from_checkpoint
from .agents.vocab import Vocabulary, tokenize_dialog
from .dataset import (
    AttentionMask,
    Episode,
    _view_from_dict,
    _view_to_dict,
    rasterize_observation,
)
from .geometry import Trajectory, ViewArea
from .metrics import MetricConfig, evaluate_split
from .nn.checkpoint import Checkpoint, load_checkpoint

SCHEMA_VERSION = 1


class StopReason(str, Enum):
    STOPPED = "stopped"
    MAX_STEPS = "max_steps"


@dataclass(frozen=True)
class RolloutConfig:
    """Execution knobs for one rollout."""

    step_max: float = 12.0
    stop_threshold: float = 0.5
    record_attention: bool = True
    max_steps: int | None = None       # None: use the episode's budget
    resolution: int = 16               # must match the policy's input raster

    def __post_init__(self):
        if self.step_max <= 0.0:
            raise ValueError("step_max must be positive")
        if not (0.0 <= self.stop_threshold <= 1.0):
            raise ValueError("stop_threshold must lie in [0, 1]")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps override must be >= 1")
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")


@dataclass(frozen=True)
class PredictedTrajectory:
    """A finished rollout: where the drone flew and what the policy said."""

    episode_id: str
    trajectory: Trajectory
    outputs: tuple[AgentOutput, ...]
    stop_reason: StopReason

    def __post_init__(self):
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "stop_reason", StopReason(self.stop_reason))
        if len(self.outputs) != len(self.trajectory) - 1:
            raise ValueError(
                f"{len(self.outputs)} outputs logged for "
                f"{len(self.trajectory)} views (want one per movement)")


def _as_policy_fn(policy):
    if hasattr(policy, "act"):
        return policy.act
    if callable(policy):
        return policy
    raise TypeError(f"policy {policy!r} is neither callable nor has .act")


def _margin(side: float, rotation: float) -> float:
    """Half-extent of a rotated square's axis-aligned footprint."""
    return 0.5 * side * (abs(math.cos(rotation)) + abs(math.sin(rotation)))


def apply_move(view: ViewArea, out: AgentOutput, step_max: float,
               world_side: float) -> ViewArea:
    """Next view after clipping the requested move.

    The delta is capped at `step_max`, yaw turns to face the (capped)
    movement, and the center is clamped so the rotated footprint stays inside
    the world.  If that clamp would drag the drone further than `step_max`
    (possible when the new yaw widens the footprint), the drone keeps its
    current yaw instead — that clamp is always reachable within budget.
    """
    dx = out.next_center[0] - view.center_x
    dy = out.next_center[1] - view.center_y
    dist = math.hypot(dx, dy)
    if dist > step_max:
        dx *= step_max / dist
        dy *= step_max / dist
    rotation = math.atan2(dy, dx) if math.hypot(dx, dy) > 1e-12 else view.rotation

    def clamp(rot: float) -> tuple[float, float]:
        m = _margin(view.side, rot)
        return (min(max(view.center_x + dx, m), world_side - m),
                min(max(view.center_y + dy, m), world_side - m))

    cx, cy = clamp(rotation)
    if math.hypot(cx - view.center_x, cy - view.center_y) > step_max + 1e-9:
        rotation = view.rotation
        cx, cy = clamp(rotation)
    return ViewArea(cx, cy, view.side, rotation)


def rollout_state(episode: Episode, views, vocab: Vocabulary,
                  resolution: int = 16) -> AgentState:
    """AgentState for a partially flown trajectory.

    Dialog rounds are revealed one per step, exactly as during training, so a
    policy sees the same input distribution it was fitted on.
    """
    views = list(views)
    position = len(views) - 1
    heard = episode.dialog[:min(position + 1, len(episode.dialog))]
    history = []
    for v in views:
        obs = rasterize_observation(episode.map_seed, v, resolution,
                                    episode.world_side)
        history.append((obs.direction, obs))
    return AgentState(dialog_tokens=tokenize_dialog(heard, vocab),
                      history=tuple(history), step_index=position,
                      current_view=views[-1])


_PLACEHOLDER_ATTENTION = AttentionMask(((0.0,),))


def _logged(out: AgentOutput, record_attention: bool) -> AgentOutput:
    if record_attention:
        return out
    # thrift mode: drop the grid, keep the navigation payload
    return AgentOutput(next_center=out.next_center,
                       next_rotation=out.next_rotation,
                       stop_prob=out.stop_prob,
                       attention=_PLACEHOLDER_ATTENTION)


def run_episode(policy, episode: Episode, cfg: RolloutConfig | None = None,
                vocab: Vocabulary | None = None) -> PredictedTrajectory:
    """Fly `policy` through `episode` until it stops or the budget runs out."""
    cfg = cfg or RolloutConfig()
    vocab = vocab or Vocabulary.default()
    act = _as_policy_fn(policy)
    budget = cfg.max_steps if cfg.max_steps is not None else episode.max_steps
    views = [episode.start_view]
    outputs: list[AgentOutput] = []
    reason = StopReason.MAX_STEPS
    for step in range(budget):
        state = rollout_state(episode, views, vocab, cfg.resolution)
        try:
            out = act(state)
        except Exception as exc:
            raise RuntimeError(
                f"policy failed at step {step} of episode "
                f"{episode.id}: {exc}") from exc
        if out.stop_prob >= cfg.stop_threshold:
            reason = StopReason.STOPPED
            break
        outputs.append(_logged(out, cfg.record_attention))
        views.append(apply_move(views[-1], out, cfg.step_max,
                                episode.world_side))
    return PredictedTrajectory(episode_id=episode.id,
                               trajectory=Trajectory(tuple(views)),
                               outputs=tuple(outputs), stop_reason=reason)


# --------------------------------------------------------------- persistence

def _output_to_dict(out: AgentOutput) -> dict:
    return {
        "next_center": [out.next_center[0], out.next_center[1]],
        "next_rotation": out.next_rotation,
        "stop_prob": out.stop_prob,
        "attention": [list(row) for row in out.attention.grid],
    }


def _output_from_dict(d: dict) -> AgentOutput:
    return AgentOutput(
        next_center=(float(d["next_center"][0]), float(d["next_center"][1])),
        next_rotation=float(d["next_rotation"]),
        stop_prob=float(d["stop_prob"]),
        attention=AttentionMask(tuple(tuple(row) for row in d["attention"])),
    )


def prediction_to_dict(pred: PredictedTrajectory) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "episode_id": pred.episode_id,
        "stop_reason": pred.stop_reason.value,
        "views": [_view_to_dict(v) for v in pred.trajectory.views],
        "outputs": [_output_to_dict(o) for o in pred.outputs],
    }


def prediction_from_dict(d: dict) -> PredictedTrajectory:
    return PredictedTrajectory(
        episode_id=d["episode_id"],
        trajectory=Trajectory(tuple(_view_from_dict(v) for v in d["views"])),
        outputs=tuple(_output_from_dict(o) for o in d["outputs"]),
        stop_reason=StopReason(d["stop_reason"]),
    )


def save_predictions(predictions, path) -> None:
    """One JSON line per rollout, keyed by episode_id."""
    with open(path, "w", encoding="utf-8") as fh:
        for pred in predictions:
            fh.write(json.dumps(prediction_to_dict(pred), sort_keys=True))
            fh.write("\n")


def load_predictions(path) -> list[PredictedTrajectory]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                if doc.get("schema_version") != SCHEMA_VERSION:
                    raise ValueError(
                        f"unsupported schema_version {doc.get('schema_version')!r}")
                out.append(prediction_from_dict(doc))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(
                    f"prediction file {path}, line {lineno}: {exc}") from exc
    return out


def predictions_as_trajectories(predictions) -> dict[str, Trajectory]:
    """The mapping `metrics.evaluate_split` consumes."""
    return {p.episode_id: p.trajectory for p in predictions}


# -------------------------------------------------------- checkpoint ablation

def overfit_report(checkpoints, episodes, rollout_cfg: RolloutConfig | None = None,
                   metric_cfg: MetricConfig | None = None,
                   vocab: Vocabulary | None = None
                   ) -> list[tuple[str, float, float, float]]:
    """Score each checkpoint on a split; one (label, SPL, SR, GP) row apiece.

    Accepts Checkpoint objects or file paths; rows are labeled kind@iteration
    in input order, so successive training checkpoints read as an ablation
    over training time.
    """
    episodes = list(episodes)
    if not episodes:
        raise ValueError("cannot report on an empty split")
    checkpoints = list(checkpoints)
    if not checkpoints:
        raise ValueError("no checkpoints given")
    rows = []
    for item in checkpoints:
        if isinstance(item, Checkpoint):
            ckpt = item
        else:
            try:
                ckpt = load_checkpoint(item)
            except (OSError, ValueError) as exc:
                raise RuntimeError(
                    f"cannot load checkpoint {item}: {exc}") from exc
        policy = policy_from_checkpoint(ckpt)
        cfg = rollout_cfg or RolloutConfig(
            step_max=policy.config.step_max,
            resolution=policy.config.resolution)
        preds = {ep.id: run_episode(policy, ep, cfg, vocab).trajectory
                 for ep in episodes}
        report = evaluate_split(episodes, preds, metric_cfg)
        rows.append((f"{ckpt.kind}@{ckpt.iteration}",
                     report.spl, report.sr, report.gp))
    return rows
