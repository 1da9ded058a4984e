"""Output-level ensembling of waypoint policies.

Two (or more) trained policies are combined by arithmetic-averaging their
per-step outputs: centers, stop probabilities and attention grids are plain
means, and rotations are averaged on the circle (mean of unit vectors), since
raw radians have a seam at the period boundary.  Fusing happens per decision
during a single rollout, so an ensemble produces one coherent trajectory
rather than a pointwise blend of two finished ones.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .agents.base import AgentOutput, AgentState
from .agents.models import POLICY_KINDS, policy_from_checkpoint
from .dataset import AttentionMask
from .nn.checkpoint import Checkpoint, load_checkpoint

_TIE_EPS = 1e-12


def _circular_mean(rotations: list[float], fallback: float) -> float:
    """Mean direction of a list of angles.

    Identical inputs short-circuit to the shared value, so fusing copies of
    one output reproduces it exactly.  When the unit vectors cancel (exactly
    opposed rotations) there is no mean direction; the documented tie rule
    returns the first member's rotation.
    """
    if all(r == rotations[0] for r in rotations):
        return rotations[0]
    ux = math.fsum(math.cos(r) for r in rotations) / len(rotations)
    uy = math.fsum(math.sin(r) for r in rotations) / len(rotations)
    if math.hypot(ux, uy) < _TIE_EPS:
        return fallback
    return math.atan2(uy, ux)


def fuse_outputs(outputs: list[AgentOutput] | tuple[AgentOutput, ...]
                 ) -> AgentOutput:
    """Arithmetic mean of member outputs (circular mean for rotation).

    Identical outputs fuse to themselves exactly; otherwise means are
    computed with exact summation, so member order never matters.
    """
    outputs = list(outputs)
    if len(outputs) < 2:
        raise ValueError(f"fusion needs at least 2 outputs, got {len(outputs)}")
    sizes = {o.attention.size for o in outputs}
    if len(sizes) != 1:
        raise ValueError(f"attention grids disagree in size: {sorted(sizes)}")
    if all(o == outputs[0] for o in outputs):
        return outputs[0]

    n = len(outputs)
    cx = math.fsum(o.next_center[0] for o in outputs) / n
    cy = math.fsum(o.next_center[1] for o in outputs) / n
    stop = math.fsum(o.stop_prob for o in outputs) / n
    rotation = _circular_mean([o.next_rotation for o in outputs],
                              fallback=outputs[0].next_rotation)
    p = outputs[0].attention.size
    grid = tuple(
        tuple(math.fsum(o.attention.grid[i][j] for o in outputs) / n
              for j in range(p))
        for i in range(p))
    return AgentOutput(next_center=(cx, cy), next_rotation=rotation,
                       stop_prob=min(max(stop, 0.0), 1.0),
                       attention=AttentionMask(grid))


@dataclass(frozen=True)
class Ensemble:
    """An ordered, immutable collection of (kind, checkpoint) members."""

    members: tuple[tuple[str, Checkpoint], ...]

    def __post_init__(self):
        members = tuple(self.members)
        object.__setattr__(self, "members", members)
        if len(members) < 2:
            raise ValueError(
                f"an ensemble needs at least 2 members, got {len(members)}")
        grids = set()
        for i, (kind, ckpt) in enumerate(members):
            if kind not in POLICY_KINDS:
                raise ValueError(f"member {i}: unknown policy kind {kind!r}")
            if ckpt.kind != kind:
                raise ValueError(
                    f"member {i}: declared kind {kind!r} but checkpoint is "
                    f"{ckpt.kind!r}")
            grids.add(int(ckpt.config.get("patch_grid", 0)))
        if len(grids) != 1:
            raise ValueError(
                f"members disagree on attention grid size: {sorted(grids)}")
        object.__setattr__(
            self, "_policies",
            tuple(policy_from_checkpoint(c) for _, c in members))

    @property
    def policies(self) -> tuple:
        return self._policies


def fused_policy(ensemble: Ensemble, state: AgentState) -> AgentOutput:
    """Run every member on the same state and average the outputs."""
    outputs = []
    for i, policy in enumerate(ensemble.policies):
        try:
            outputs.append(policy.act(state))
        except Exception as exc:
            raise RuntimeError(
                f"ensemble member {i} ({ensemble.members[i][0]}) failed: "
                f"{exc}") from exc
    return fuse_outputs(outputs)


def load_ensemble(manifest_path) -> Ensemble:
    """Read an ensemble manifest: JSON {"members": [{"kind", "path"}, ...]}.

    Member checkpoint paths are resolved relative to the manifest file.
    """
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"ensemble manifest {manifest_path}: {exc}") from exc
    entries = doc.get("members")
    if not isinstance(entries, list):
        raise ValueError(
            f"ensemble manifest {manifest_path} lacks a 'members' list")
    members = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "kind" not in entry or "path" not in entry:
            raise ValueError(
                f"ensemble manifest member {i} must carry 'kind' and 'path'")
        path = manifest_path.parent / entry["path"]
        try:
            ckpt = load_checkpoint(path)
        except (OSError, ValueError) as exc:
            raise ValueError(
                f"ensemble member {i}: cannot load {path}: {exc}") from exc
        members.append((entry["kind"], ckpt))
    return Ensemble(members=tuple(members))
