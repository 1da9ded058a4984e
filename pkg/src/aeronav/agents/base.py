"""Shared agent-facing types: the input state and the policy output."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..dataset import AttentionMask, Observation
from ..geometry import ViewArea
from .vocab import TokenSequence


@dataclass(frozen=True)
class AgentState:
    """Everything a policy may look at when choosing the next waypoint.

    `history` holds one (direction, observation) pair per step flown so far,
    oldest first; `current_view` is where the drone is right now (the view the
    last history entry was rasterized from).
    """

    dialog_tokens: TokenSequence
    history: tuple[tuple[tuple[float, float], Observation], ...]
    step_index: int
    current_view: ViewArea

    def __post_init__(self):
        object.__setattr__(self, "history", tuple(self.history))
        if self.step_index < 0:
            raise ValueError("step_index must be non-negative")
        if len(self.history) != self.step_index + 1:
            raise ValueError(
                f"history has {len(self.history)} entries for step_index "
                f"{self.step_index} (want step_index + 1)")
        for direction, obs in self.history:
            dx, dy = direction
            if abs(math.hypot(dx, dy) - 1.0) > 1e-9:
                raise ValueError(f"history direction ({dx}, {dy}) is not unit length")
            if not isinstance(obs, Observation):
                raise TypeError("history entries must carry Observation values")


@dataclass(frozen=True)
class AgentOutput:
    """One decision: where to fly, whether to stop, and predicted attention."""

    next_center: tuple[float, float]
    next_rotation: float
    stop_prob: float
    attention: AttentionMask

    def __post_init__(self):
        x, y = self.next_center
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"next_center must be finite, got ({x}, {y})")
        object.__setattr__(self, "next_center", (float(x), float(y)))
        if not (0.0 <= self.stop_prob <= 1.0):
            raise ValueError(f"stop_prob {self.stop_prob} outside [0, 1]")
        if not math.isfinite(self.next_rotation):
            raise ValueError("next_rotation must be finite")
