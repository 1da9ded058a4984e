// Wire types for the flight session service.  Every interface here mirrors a
// JSON shape the server emits verbatim — the client never invents fields and
// never re-derives the numbers inside them.

export type Phase = "awaiting_instruction" | "agent_flying" | "finished";

/** A view square with its four world-frame corners precomputed server-side. */
export interface ViewPayload {
  center: [number, number];
  side: number;
  rotation: number;
  vertices: [number, number][];
}

export interface DialogRound {
  question: string | null;
  instruction: string;
}

/** Full session snapshot, as returned by POST /sessions and GET /sessions/{id}. */
export interface SessionState {
  session_id: string;
  phase: Phase;
  episode_id: string;
  map_seed: number;
  world_side: number;
  max_steps: number;
  moves: number;
  goal: ViewPayload;
  views: ViewPayload[];
  dialog: DialogRound[];
  pending_question: string | null;
  stop_reason: string | null;
  final_iou: number | null;
  success: boolean | null;
  last_event_seq: number;
}

// ------------------------------------------------------------ event stream

interface EventBase {
  seq: number;
  phase: Phase;
}

export interface OpenedEvent extends EventBase {
  type: "opened";
  session_id: string;
  episode_id: string;
  map_seed: number;
  world_side: number;
  max_steps: number;
  view: ViewPayload;
  goal: ViewPayload;
}

export interface InstructionEvent extends EventBase {
  type: "instruction";
  text: string;
  round: number;
}

export interface MovedEvent extends EventBase {
  type: "moved";
  step: number;
  view: ViewPayload;
  stop_prob: number;
  attention: number[][] | null;
}

export interface QuestionEvent extends EventBase {
  type: "question";
  text: string;
}

/** Terminal event: "stopped" (agent chose to stop) or "finished" (budget). */
export interface StopEvent extends EventBase {
  type: "stopped" | "finished";
  reason: string;
  view: ViewPayload;
  iou: number;
  success: boolean;
}

export type SessionEvent =
  | OpenedEvent
  | InstructionEvent
  | MovedEvent
  | QuestionEvent
  | StopEvent;

// -------------------------------------------------------------- other bodies

export interface EventsResponse {
  session_id: string;
  events: SessionEvent[];
  phase: Phase;
}

/** World raster; values[0] is the north edge, already in canvas row order. */
export interface MapResponse {
  map_seed: number;
  world_side: number;
  resolution: number;
  values: number[][];
}
