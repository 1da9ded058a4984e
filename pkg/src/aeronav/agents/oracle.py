"""A perfect-information reference agent.

Given the goal view it flies straight at it, clipped to the per-step travel
budget, and calls for a stop as soon as the current view overlaps the goal
well enough to count as a success.  Useful as an upper bound and for
exercising the simulator without trained weights.
"""

from __future__ import annotations

import math

from ..dataset import goal_overlap_mask
from ..geometry import ViewArea, iou
from .base import AgentOutput, AgentState


def oracle_policy(state: AgentState, goal: ViewArea, step_max: float,
                  patch_grid: int = 4, iou_threshold: float = 0.4
                  ) -> AgentOutput:
    """Fly toward `goal`, at most `step_max` per move; stop once overlapping.

    The next rotation is the heading toward the goal (current rotation is
    kept once on top of it), and attention is the exact goal-overlap grid.
    """
    if step_max <= 0:
        raise ValueError("step_max must be positive")
    cur = state.current_view
    dx = goal.center_x - cur.center_x
    dy = goal.center_y - cur.center_y
    dist = math.hypot(dx, dy)
    if dist <= step_max:
        next_center = (goal.center_x, goal.center_y)
    else:
        scale = step_max / dist
        next_center = (cur.center_x + dx * scale, cur.center_y + dy * scale)
    if dist > 1e-12:
        rotation = math.atan2(dy, dx)
    else:
        rotation = goal.rotation
    stop = 1.0 if iou(cur, goal) >= iou_threshold else 0.0
    attention = goal_overlap_mask(cur, goal, patch_grid)
    return AgentOutput(next_center=next_center, next_rotation=rotation,
                       stop_prob=stop, attention=attention)
