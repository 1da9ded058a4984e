"""Interactive human-in-the-loop sessions.

A session wraps one episode with a phase machine: the commander types an
instruction, the agent flies a bounded number of steps, and control returns
to the commander (with a follow-up question) unless the agent stopped or ran
out of budget.  Every observable change is appended to a per-session event
log with a monotone sequence number, so a transport layer can replay history
to late subscribers and stream the tail — the event log *is* the transcript.

A finished session serializes back through the Episode schema: the flown
trajectory becomes the ground-truth path and the typed dialog becomes the
instruction record, which is exactly how a human-collected corpus would be
captured.
"""

from __future__ import annotations

import itertools
import json
import threading
from dataclasses import dataclass, field
from enum import Enum

from .agents.base import AgentState
from .agents.oracle import oracle_policy
from .agents.vocab import Vocabulary, tokenize_dialog
from .dataset import (
    _QUESTIONS,
    DialogRound,
    DialogStyle,
    Episode,
    generate_episode,
    goal_overlap_mask,
    rasterize_observation,
)
from .geometry import Trajectory, ViewArea, iou, view_polygon
from .simulator import RolloutConfig, StopReason, _as_policy_fn, apply_move


class SessionPhase(str, Enum):
    AWAITING_INSTRUCTION = "awaiting_instruction"
    AGENT_FLYING = "agent_flying"
    FINISHED = "finished"


class PhaseError(RuntimeError):
    """Operation attempted outside its legal phase."""


class CapacityError(RuntimeError):
    """The session registry is full."""


def view_payload(view: ViewArea) -> dict:
    """JSON view record, with world-frame corners precomputed server-side."""
    return {
        "center": [view.center_x, view.center_y],
        "side": view.side,
        "rotation": view.rotation,
        "vertices": [[x, y] for x, y in view_polygon(view).vertices],
    }


@dataclass
class Session:
    """Mutable state of one interactive episode."""

    session_id: str
    episode: Episode
    views: list[ViewArea]
    max_moves: int                     # effective move budget for this session
    dialog: list[DialogRound] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    phase: SessionPhase = SessionPhase.AWAITING_INSTRUCTION
    pending_question: str | None = None
    stop_reason: StopReason | None = None
    final_iou: float | None = None
    success: bool | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    new_event: threading.Condition = field(
        default_factory=threading.Condition, repr=False)
    sink: object = field(default=None, repr=False)  # callable(session, event)

    @property
    def moves(self) -> int:
        return len(self.views) - 1

    def emit(self, kind: str, **payload) -> dict:
        event = {"seq": len(self.events), "type": kind,
                 "phase": self.phase.value, **payload}
        with self.new_event:
            self.events.append(event)
            self.new_event.notify_all()
        if self.sink is not None:
            self.sink(self, event)
        return event

    def snapshot(self) -> dict:
        """Full state for a state-fetch endpoint; superset of the event data."""
        return {
            "session_id": self.session_id,
            "phase": self.phase.value,
            "episode_id": self.episode.id,
            "map_seed": self.episode.map_seed,
            "world_side": self.episode.world_side,
            "max_steps": self.max_moves,
            "moves": self.moves,
            "goal": view_payload(self.episode.goal),
            "views": [view_payload(v) for v in self.views],
            "dialog": [{"question": r.question, "instruction": r.instruction}
                       for r in self.dialog],
            "pending_question": self.pending_question,
            "stop_reason": None if self.stop_reason is None
            else self.stop_reason.value,
            "final_iou": self.final_iou,
            "success": self.success,
            "last_event_seq": len(self.events) - 1,
        }


class SessionManager:
    """Registry of concurrent sessions, each serialized by its own lock.

    `policy` is anything `run_episode` would accept; None selects an oracle
    autopilot flying toward each session's goal (the demo pilot, and the
    policy the acceptance flow exercises).
    """

    def __init__(self, policy=None, capacity: int = 64,
                 steps_per_round: int = 1,
                 rollout_cfg: RolloutConfig | None = None,
                 vocab: Vocabulary | None = None,
                 attention_grid: int = 4,
                 iou_threshold: float = 0.4,
                 event_sink=None):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if steps_per_round < 1:
            raise ValueError("steps_per_round must be >= 1")
        self.policy = policy
        self.capacity = capacity
        self.steps_per_round = steps_per_round
        self.rollout_cfg = rollout_cfg or RolloutConfig()
        self.vocab = vocab or Vocabulary.default()
        self.attention_grid = attention_grid
        self.iou_threshold = iou_threshold
        self.event_sink = event_sink   # callable(session, event); set before
        self._sessions: dict[str, Session] = {}  # opening the first session
        self._registry_lock = threading.Lock()
        self._ids = itertools.count(1)

    # ------------------------------------------------------------- registry

    def open_session(self, source: Episode | int) -> Session:
        """Start a session from an Episode record or a generator seed."""
        episode = source if isinstance(source, Episode) else \
            generate_episode(int(source))
        with self._registry_lock:
            if len(self._sessions) >= self.capacity:
                raise CapacityError(
                    f"session registry full ({self.capacity} sessions)")
            sid = f"s-{next(self._ids):04d}"
            session = Session(session_id=sid, episode=episode,
                              views=[episode.start_view],
                              max_moves=self._max_moves(episode),
                              sink=self.event_sink)
            self._sessions[sid] = session
        session.emit(
            "opened",
            session_id=sid,
            episode_id=episode.id,
            map_seed=episode.map_seed,
            world_side=episode.world_side,
            max_steps=session.max_moves,
            view=view_payload(episode.start_view),
            goal=view_payload(episode.goal),
        )
        return session

    def get(self, session_id: str) -> Session:
        with self._registry_lock:
            if session_id not in self._sessions:
                raise KeyError(f"unknown session {session_id!r}")
            return self._sessions[session_id]

    def close_session(self, session_id: str) -> None:
        with self._registry_lock:
            self._sessions.pop(session_id, None)

    def session_ids(self) -> list[str]:
        with self._registry_lock:
            return sorted(self._sessions)

    # ------------------------------------------------------------ the round

    def _max_moves(self, episode: Episode) -> int:
        if self.rollout_cfg.max_steps is not None:
            return self.rollout_cfg.max_steps
        return episode.max_steps

    def _act(self, session: Session):
        if self.policy is not None:
            return _as_policy_fn(self.policy)
        goal = session.episode.goal
        return lambda state: oracle_policy(
            state, goal, self.rollout_cfg.step_max,
            patch_grid=self.attention_grid,
            iou_threshold=self.iou_threshold)

    def _state(self, session: Session) -> AgentState:
        # Unlike batch training, a live agent has heard every round spoken so
        # far regardless of how many steps it has flown.
        history = []
        for v in session.views:
            obs = rasterize_observation(
                session.episode.map_seed, v, self.rollout_cfg.resolution,
                session.episode.world_side)
            history.append((obs.direction, obs))
        return AgentState(
            dialog_tokens=tokenize_dialog(session.dialog, self.vocab),
            history=tuple(history),
            step_index=len(session.views) - 1,
            current_view=session.views[-1])

    def _finish(self, session: Session, reason: StopReason) -> dict:
        session.phase = SessionPhase.FINISHED
        session.stop_reason = reason
        session.final_iou = iou(session.views[-1], session.episode.goal)
        session.success = session.final_iou >= self.iou_threshold
        kind = "stopped" if reason is StopReason.STOPPED else "finished"
        return session.emit(kind, reason=reason.value,
                            view=view_payload(session.views[-1]),
                            iou=session.final_iou, success=session.success)

    def submit_instruction(self, session_id: str, text: str) -> list[dict]:
        """One commander turn: record the instruction, fly the agent's round.

        Returns the events appended by this call, in order.  Raises KeyError
        for an unknown session, PhaseError outside awaiting_instruction, and
        ValueError for blank text (all before mutating anything).
        """
        session = self.get(session_id)
        if not session.lock.acquire(blocking=False):
            raise PhaseError(
                f"session {session_id} is busy (phase agent_flying)")
        try:
            if session.phase is not SessionPhase.AWAITING_INSTRUCTION:
                raise PhaseError(
                    f"session {session_id} is in phase "
                    f"{session.phase.value}, not awaiting_instruction")
            if not text or not text.strip():
                raise ValueError("instruction must be non-empty")
            first = len(session.events)
            round_ = DialogRound(instruction=text.strip(),
                                 question=session.pending_question,
                                 style=DialogStyle.MIXED)
            session.dialog.append(round_)
            session.pending_question = None
            session.phase = SessionPhase.AGENT_FLYING
            session.emit("instruction", text=round_.instruction,
                         round=len(session.dialog) - 1)
            try:
                self._fly_round(session)
            except Exception:
                # leave the session usable: the instruction was recorded but
                # the round is void, so hand control back to the commander
                if session.phase is SessionPhase.AGENT_FLYING:
                    session.phase = SessionPhase.AWAITING_INSTRUCTION
                raise
            return session.events[first:]
        finally:
            session.lock.release()

    def _fly_round(self, session: Session) -> None:
        act = self._act(session)
        cfg = self.rollout_cfg
        limit = session.max_moves
        budget = min(self.steps_per_round, limit - session.moves)
        for _ in range(budget):
            state = self._state(session)
            try:
                out = act(state)
            except Exception as exc:
                raise RuntimeError(
                    f"policy failed in session {session.session_id} at move "
                    f"{session.moves}: {exc}") from exc
            if out.stop_prob >= cfg.stop_threshold:
                self._finish(session, StopReason.STOPPED)
                return
            nxt = apply_move(session.views[-1], out, cfg.step_max,
                             session.episode.world_side)
            session.views.append(nxt)
            session.emit(
                "moved", step=session.moves, view=view_payload(nxt),
                stop_prob=out.stop_prob,
                attention=[list(row) for row in out.attention.grid]
                if cfg.record_attention else None)
        if session.moves >= limit:
            self._finish(session, StopReason.MAX_STEPS)
            return
        question = _QUESTIONS[(len(session.dialog) - 1) % len(_QUESTIONS)]
        session.pending_question = question
        session.phase = SessionPhase.AWAITING_INSTRUCTION
        session.emit("question", text=question)


def session_to_episode(session: Session) -> Episode:
    """Serialize a finished session as a dataset record.

    The flown trajectory becomes the reference path and the typed dialog the
    instruction record; attention targets are recomputed as goal overlap, the
    same labeling rule the generator uses.
    """
    if session.phase is not SessionPhase.FINISHED:
        raise ValueError(
            f"session {session.session_id} is not finished "
            f"(phase {session.phase.value})")
    ep = session.episode
    grid = session.views  # every view, in flight order
    masks = tuple(goal_overlap_mask(v, ep.goal, _episode_grid(ep))
                  for v in grid)
    return Episode(
        id=f"session-{session.session_id}",
        map_seed=ep.map_seed,
        world_side=ep.world_side,
        start_view=grid[0],
        start_direction=grid[0].rotation,
        goal=ep.goal,
        max_steps=session.max_moves,
        dialog=tuple(session.dialog),
        gt_trajectory=Trajectory(tuple(grid)),
        gt_attention=masks,
    )


def _episode_grid(episode: Episode) -> int:
    """Attention grid size to label with: match the source episode's masks."""
    return episode.gt_attention[0].size if episode.gt_attention else 4


def _payload_view(payload: dict) -> ViewArea:
    cx, cy = payload["center"]
    return ViewArea(float(cx), float(cy),
                    float(payload["side"]), float(payload["rotation"]))


def episode_from_transcript(path) -> Episode:
    """Rebuild a dataset record from a saved per-session event log.

    The transcript is the authoritative trace: the opened event fixes world
    and goal, moved events carry every flown view, and instruction/question
    events carry the dialog.  The log must belong to a finished session
    (its last event is terminal).
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty transcript")
    try:
        events = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: {exc}") from exc
    opened = events[0]
    if opened.get("type") != "opened":
        raise ValueError(f"{path}: transcript does not start with an "
                         f"opened event")
    if events[-1].get("type") not in ("stopped", "finished"):
        raise ValueError(f"{path}: transcript is not finished")

    views = [_payload_view(opened["view"])]
    rounds: list[DialogRound] = []
    pending_question: str | None = None
    grid = 4
    for event in events[1:]:
        kind = event["type"]
        if kind == "moved":
            views.append(_payload_view(event["view"]))
            if event.get("attention"):
                grid = len(event["attention"])
        elif kind == "instruction":
            rounds.append(DialogRound(instruction=event["text"],
                                      question=pending_question,
                                      style=DialogStyle.MIXED))
            pending_question = None
        elif kind == "question":
            pending_question = event["text"]

    goal = _payload_view(opened["goal"])
    return Episode(
        id=f"session-{opened['session_id']}",
        map_seed=int(opened["map_seed"]),
        world_side=float(opened["world_side"]),
        start_view=views[0],
        start_direction=views[0].rotation,
        goal=goal,
        max_steps=int(opened["max_steps"]),
        dialog=tuple(rounds),
        gt_trajectory=Trajectory(tuple(views)),
        gt_attention=tuple(goal_overlap_mask(v, goal, grid) for v in views),
    )
