"""HTTP face of the interactive session layer.

A thin FastAPI wrapper around SessionManager: request bodies are validated
with pydantic, responses reuse the same JSON shapes as the file formats, and
a server-sent-events endpoint replays a session's event log from any sequence
number and then follows the live tail.  The server computes everything the
commander console displays — view polygons, attention grids, the map raster —
so clients never re-derive geometry.

Every event is also appended to a per-session transcript file when the app is
created with a transcript directory, giving an audit trail that survives the
process.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import StreamingResponse
from pydantic import BaseModel, model_validator

from .dataset import episode_from_dict
from .sessions import (
    CapacityError,
    PhaseError,
    Session,
    SessionManager,
    SessionPhase,
)
from .worldmap import WorldMap

_TERMINAL_EVENTS = {"stopped", "finished"}


# ------------------------------------------------------------- body schemas

class CreateSessionRequest(BaseModel):
    """Start from a generator seed or a full episode record (not both)."""

    seed: int | None = None
    episode: dict | None = None

    @model_validator(mode="after")
    def _exactly_one_source(self):
        if (self.seed is None) == (self.episode is None):
            raise ValueError("provide exactly one of 'seed' or 'episode'")
        return self


class InstructionRequest(BaseModel):
    text: str


class ViewModel(BaseModel):
    center: tuple[float, float]
    side: float
    rotation: float
    vertices: list[tuple[float, float]]


class DialogRoundModel(BaseModel):
    question: str | None
    instruction: str


class SessionStateModel(BaseModel):
    session_id: str
    phase: str
    episode_id: str
    map_seed: int
    world_side: float
    max_steps: int
    moves: int
    goal: ViewModel
    views: list[ViewModel]
    dialog: list[DialogRoundModel]
    pending_question: str | None
    stop_reason: str | None
    final_iou: float | None
    success: bool | None
    last_event_seq: int


class EventsResponse(BaseModel):
    session_id: str
    events: list[dict]
    phase: str


class MapResponse(BaseModel):
    map_seed: int
    world_side: float
    resolution: int
    values: list[list[float]]   # row 0 = north edge (max y), canvas order


class HealthResponse(BaseModel):
    status: str
    sessions: int


# -------------------------------------------------------------- transcripts

def transcript_sink(directory: Path):
    """Event sink appending one JSON line per event to {session_id}.jsonl."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lock = threading.Lock()

    def sink(session: Session, event: dict) -> None:
        line = json.dumps(event, sort_keys=True)
        with lock:
            with open(directory / f"{session.session_id}.jsonl", "a",
                      encoding="utf-8") as fh:
                fh.write(line + "\n")

    return sink


# ---------------------------------------------------------------------- app

def create_app(manager: SessionManager | None = None,
               transcript_dir=None) -> FastAPI:
    """Build the service around a (possibly shared) session manager."""
    manager = manager or SessionManager()
    if transcript_dir is not None:
        manager.event_sink = transcript_sink(Path(transcript_dir))
    app = FastAPI(title="aeronav sessions", version="1.0")
    app.state.manager = manager

    def _session(session_id: str) -> Session:
        try:
            return manager.get(session_id)
        except KeyError as exc:
            raise HTTPException(status_code=404,
                                detail=exc.args[0]) from exc

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", sessions=len(manager.session_ids()))

    @app.post("/sessions", status_code=201, response_model=SessionStateModel)
    def create_session(req: CreateSessionRequest):
        if req.episode is not None:
            try:
                source = episode_from_dict(req.episode)
            except (KeyError, TypeError, ValueError) as exc:
                raise HTTPException(status_code=422,
                                    detail=f"invalid episode: {exc}") from exc
        else:
            source = req.seed
        try:
            session = manager.open_session(source)
        except CapacityError as exc:
            raise HTTPException(status_code=503, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return session.snapshot()

    @app.get("/sessions/{session_id}", response_model=SessionStateModel)
    def get_session(session_id: str):
        return _session(session_id).snapshot()

    @app.post("/sessions/{session_id}/instructions",
              response_model=EventsResponse)
    def submit_instruction(session_id: str, req: InstructionRequest):
        _session(session_id)    # 404 beats 409/422 for unknown ids
        try:
            events = manager.submit_instruction(session_id, req.text)
        except PhaseError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        session = _session(session_id)
        return EventsResponse(session_id=session_id, events=events,
                              phase=session.phase.value)

    @app.get("/sessions/{session_id}/events")
    def stream_events(session_id: str,
                      after: int = Query(default=-1, ge=-1),
                      follow: bool = Query(default=True)):
        """Server-sent events: replay seq > `after`, then follow the tail.

        The stream closes after the terminal event (stopped/finished), or
        once history is drained when `follow` is off.
        """
        session = _session(session_id)

        def gen():
            cursor = after + 1
            while True:
                with session.new_event:
                    batch = list(session.events[cursor:])
                    if not batch:
                        if not follow or session.phase is SessionPhase.FINISHED:
                            return
                        session.new_event.wait(timeout=15.0)
                        batch = list(session.events[cursor:])
                        if not batch:
                            yield ": keep-alive\n\n"
                            continue
                for event in batch:
                    cursor = event["seq"] + 1
                    yield (f"id: {event['seq']}\n"
                           f"data: {json.dumps(event, sort_keys=True)}\n\n")
                if batch[-1]["type"] in _TERMINAL_EVENTS:
                    return

        return StreamingResponse(gen(), media_type="text/event-stream")

    @app.get("/sessions/{session_id}/map", response_model=MapResponse)
    def session_map(session_id: str,
                    resolution: int = Query(default=64, ge=1, le=512)):
        """Background raster of the session's whole world, canvas row order."""
        ep = _session(session_id).episode
        world = WorldMap(ep.map_seed, ep.world_side)
        centers = (np.arange(resolution) + 0.5) * (ep.world_side / resolution)
        values = world.sample(centers[None, :], centers[::-1, None])
        return MapResponse(
            map_seed=ep.map_seed, world_side=ep.world_side,
            resolution=resolution,
            values=[[round(float(v), 6) for v in row] for row in values])

    return app
