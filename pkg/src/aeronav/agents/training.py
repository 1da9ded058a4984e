"""Teacher-forced waypoint training.

Every ground-truth trajectory of n hops yields n+1 supervised samples: at
position s the agent has heard the dialog rounds spoken so far, has flown the
first s hops, and must either regress the next world-frame hop (stop target 0)
or hold position (delta (0, 0), stop target 1) at the final view.  The
attention target is the goal-overlap grid of the current view.

The loss is a weighted sum of a normalized waypoint MSE, a stop-logit binary
cross-entropy, and a mean per-patch attention cross-entropy.  Optimization is
plain minibatch AdamW with gradients averaged over the batch; everything is
seeded, so a (seed, data) pair reproduces checkpoints byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dataset import (
    AttentionMask,
    AugmentConfig,
    Episode,
    augment,
    rasterize_observation,
)
from ..nn.checkpoint import Checkpoint
from ..nn.optim import AdamW
from .base import AgentState
from .models import LstmPolicy, ModelConfig, TransformerPolicy, POLICY_KINDS
from .vocab import Vocabulary, tokenize_dialog


@dataclass(frozen=True)
class TrainConfig:
    """Optimization schedule and loss weighting."""

    total_iterations: int
    batch_size: int = 4
    lr: float = 1e-5
    checkpoint_iterations: tuple[int, ...] = ()
    loss_weights: tuple[float, float, float] = (1.0, 0.5, 0.5)
    weight_decay: float = 0.01
    seed: int = 0
    augment_ops: AugmentConfig | None = None

    def __post_init__(self):
        if self.total_iterations < 0:
            raise ValueError("total_iterations must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.lr <= 0.0:
            raise ValueError("lr must be positive")
        plan = tuple(int(i) for i in self.checkpoint_iterations)
        if list(plan) != sorted(set(plan)):
            raise ValueError("checkpoint_iterations must be strictly increasing")
        if plan and (plan[0] < 0 or plan[-1] > self.total_iterations):
            raise ValueError(
                f"checkpoint iterations must lie in [0, {self.total_iterations}]")
        object.__setattr__(self, "checkpoint_iterations", plan)
        w = tuple(float(x) for x in self.loss_weights)
        if len(w) != 3 or any(x < 0.0 for x in w):
            raise ValueError("loss_weights must be three non-negative floats")
        object.__setattr__(self, "loss_weights", w)

    @property
    def checkpoint_plan(self) -> tuple[int, ...]:
        """Normalized schedule: an empty request means final-only."""
        if self.checkpoint_iterations:
            return self.checkpoint_iterations
        return (self.total_iterations,)


@dataclass(frozen=True)
class TrainingSample:
    """One teacher-forced position along a ground-truth trajectory."""

    state: AgentState
    target_delta: tuple[float, float]     # world-frame meters; (0,0) at goal
    stop_target: float                    # 1.0 exactly at the final view
    attention_target: AttentionMask


def build_state(episode: Episode, position: int, vocab: Vocabulary,
                resolution: int = 16) -> AgentState:
    """Agent input at trajectory position `position` (0 = start view).

    Dialog rounds are revealed one per hop: at position s the agent has heard
    rounds 0..s (the round guiding the next hop), capped at the rounds that
    exist.  The observation history covers views 0..s.
    """
    views = episode.gt_trajectory.views
    if not (0 <= position < len(views)):
        raise ValueError(
            f"position {position} outside trajectory of {len(views)} views")
    heard = episode.dialog[:min(position + 1, len(episode.dialog))]
    tokens = tokenize_dialog(heard, vocab)
    history = []
    for view in views[:position + 1]:
        obs = rasterize_observation(episode.map_seed, view, resolution,
                                    episode.world_side)
        history.append((obs.direction, obs))
    return AgentState(dialog_tokens=tokens, history=tuple(history),
                      step_index=position, current_view=views[position])


def episode_samples(episode: Episode, vocab: Vocabulary,
                    resolution: int = 16) -> list[TrainingSample]:
    """All n+1 teacher-forced samples of one episode, in path order."""
    views = episode.gt_trajectory.views
    n = len(views) - 1
    out = []
    for s in range(n + 1):
        state = build_state(episode, s, vocab, resolution)
        if s < n:
            delta = (views[s + 1].center_x - views[s].center_x,
                     views[s + 1].center_y - views[s].center_y)
            stop = 0.0
        else:
            delta = (0.0, 0.0)
            stop = 1.0
        out.append(TrainingSample(state=state, target_delta=delta,
                                  stop_target=stop,
                                  attention_target=episode.gt_attention[s]))
    return out


def _world_to_view(delta: tuple[float, float], rotation: float
                   ) -> tuple[float, float]:
    """World displacement → (rightward, forward) components of the view frame."""
    c, s = math.cos(rotation), math.sin(rotation)
    dx, dy = delta
    return (s * dx - c * dy, c * dx + s * dy)


def _view_to_world(wp: tuple[float, float], rotation: float
                   ) -> tuple[float, float]:
    c, s = math.cos(rotation), math.sin(rotation)
    wx, wy = wp
    return (s * wx + c * wy, -c * wx + s * wy)


def augment_sample(sample: TrainingSample, ops: AugmentConfig,
                   seed: int) -> TrainingSample:
    """Augment the current (last) observation, keeping supervision in register.

    The waypoint target is flipped in the view frame and mapped back to world
    coordinates, so a mirrored image trains the mirrored move.
    """
    direction, obs = sample.state.history[-1]
    rotation = sample.state.current_view.rotation
    wp_view = _world_to_view(sample.target_delta, rotation)
    new_obs, new_mask, new_wp = augment(obs, sample.attention_target,
                                        wp_view, ops, seed)
    history = sample.state.history[:-1] + ((direction, new_obs),)
    state = AgentState(dialog_tokens=sample.state.dialog_tokens,
                       history=history,
                       step_index=sample.state.step_index,
                       current_view=sample.state.current_view)
    return TrainingSample(state=state,
                          target_delta=_view_to_world(new_wp, rotation),
                          stop_target=sample.stop_target,
                          attention_target=new_mask)


def _bce_from_logit(z: float, target: float) -> tuple[float, float]:
    """Numerically stable binary cross-entropy; returns (loss, dloss/dz)."""
    loss = max(z, 0.0) - z * target + math.log1p(math.exp(-abs(z)))
    grad = 1.0 / (1.0 + math.exp(-z)) - target
    return loss, grad


def sample_loss(policy, sample: TrainingSample,
                weights: tuple[float, float, float]
                ) -> tuple[float, dict[str, np.ndarray]]:
    """Weighted loss of one sample plus parameter gradients."""
    cfg = policy.config
    w_way, w_stop, w_att = weights
    raw, cache = policy.forward(sample.state)

    # waypoint: squared error of the bounded delta, normalized by world size
    t = np.tanh(raw["way"])                       # (1, 2)
    pred = t * cfg.step_max
    diff = (pred - np.asarray(sample.target_delta)) / cfg.world_side
    way_loss = float((diff ** 2).sum() / 2.0)
    d_way = w_way * diff * (cfg.step_max / cfg.world_side) * (1.0 - t ** 2)

    stop_loss, d_stop = _bce_from_logit(raw["stop"], sample.stop_target)

    att_t = sample.attention_target.array.reshape(-1)
    if att_t.size != raw["att"].size:
        raise ValueError(
            f"attention target has {att_t.size} cells, model emits "
            f"{raw['att'].size}")
    z = raw["att"]
    att_losses = np.maximum(z, 0.0) - z * att_t + np.log1p(np.exp(-np.abs(z)))
    att_loss = float(att_losses.mean())
    d_att = w_att * (1.0 / (1.0 + np.exp(-z)) - att_t) / att_t.size

    loss = w_way * way_loss + w_stop * stop_loss + w_att * att_loss
    grads = policy.backward(cache, d_way, w_stop * d_stop, d_att)
    return loss, grads


def batch_loss(policy, samples, weights: tuple[float, float, float]
               ) -> tuple[float, dict[str, np.ndarray]]:
    """Mean loss and mean gradients over a list of samples."""
    if not samples:
        raise ValueError("batch must be non-empty")
    total = 0.0
    acc: dict[str, np.ndarray] | None = None
    for sample in samples:
        loss, grads = sample_loss(policy, sample, weights)
        total += loss
        if acc is None:
            acc = {k: g.copy() for k, g in grads.items()}
        else:
            for k, g in grads.items():
                acc[k] += g
    scale = 1.0 / len(samples)
    return total * scale, {k: g * scale for k, g in acc.items()}


def split_loss(policy, samples, weights: tuple[float, float, float]) -> float:
    """Mean loss over a full split (no gradient use)."""
    loss, _ = batch_loss(policy, samples, weights)
    return loss


def train(kind: str, train_episodes, val_episodes, cfg: TrainConfig,
          vocab: Vocabulary | None = None,
          model_config: ModelConfig | None = None) -> list[Checkpoint]:
    """Fit a policy of the requested kind; returns the scheduled checkpoints.

    Checkpoint metrics carry the full-split train (and, when present, val)
    loss at that iteration.  A non-finite batch loss aborts with the failing
    iteration in the message.
    """
    if kind not in POLICY_KINDS:
        raise ValueError(f"unknown policy kind {kind!r}")
    train_episodes = list(train_episodes)
    val_episodes = list(val_episodes)
    if not train_episodes:
        raise ValueError("training split is empty")
    vocab = vocab if vocab is not None else Vocabulary.default()
    if model_config is None:
        model_config = ModelConfig(vocab_size=len(vocab),
                                   world_side=train_episodes[0].world_side)

    train_samples = []
    for ep in train_episodes:
        train_samples.extend(episode_samples(ep, vocab, model_config.resolution))
    val_samples = []
    for ep in val_episodes:
        val_samples.extend(episode_samples(ep, vocab, model_config.resolution))

    root = np.random.default_rng(cfg.seed)
    init_seed = int(root.integers(0, 2 ** 31))
    policy = POLICY_KINDS[kind](model_config, init_seed=init_seed)
    opt = AdamW(policy.params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    plan = set(cfg.checkpoint_plan)
    out: list[Checkpoint] = []

    def emit(iteration: int) -> None:
        metrics = {"train_loss": split_loss(policy, train_samples,
                                            cfg.loss_weights)}
        if val_samples:
            metrics["val_loss"] = split_loss(policy, val_samples,
                                             cfg.loss_weights)
        out.append(policy.to_checkpoint(iteration, cfg.seed, metrics))

    for it in range(cfg.total_iterations + 1):
        if it in plan:
            emit(it)
        if it == cfg.total_iterations:
            break
        idx = root.integers(0, len(train_samples), size=cfg.batch_size)
        batch = [train_samples[i] for i in idx]
        if cfg.augment_ops is not None:
            batch = [augment_sample(s, cfg.augment_ops,
                                    seed=int(root.integers(0, 2 ** 31)))
                     for s in batch]
        loss, grads = batch_loss(policy, batch, cfg.loss_weights)
        if not math.isfinite(loss):
            raise RuntimeError(f"non-finite training loss at iteration {it + 1}")
        policy.params = opt.step(policy.params, grads)
    return out
