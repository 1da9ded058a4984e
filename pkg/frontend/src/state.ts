// Client-side view model: a verbatim mirror of the server's session state.
//
// The reducer below folds server events into the mirror in arrival order.
// It copies values; it never simulates.  Positions, IoU, success, phase —
// every number and flag on the model was sent by the server in some message.

import type {
  MovedEvent,
  Phase,
  SessionEvent,
  SessionState,
  StopEvent,
} from "./types.js";

export type ConnectionStatus =
  | "idle"          // no stream opened yet
  | "connecting"    // first attempt in flight
  | "live"          // stream open, events flowing
  | "reconnecting"  // stream dropped, retrying
  | "closed"        // terminal event received, stream done
  | "error";        // unrecoverable (e.g. session unknown to the server)

export interface ViewModel {
  /** Mirrored SessionState; null until a snapshot or opened event arrives. */
  session: SessionState | null;
  /** Latest attention grid the server sent (P rows of P values), verbatim. */
  attention: number[][] | null;
  connection: ConnectionStatus;
  /** Inline error text (409s, rejected input, stream gaps); null when clear. */
  banner: string | null;
  /** Sequence number of the last applied event; -1 before any. */
  lastSeq: number;
}

export function initialModel(): ViewModel {
  return {
    session: null,
    attention: null,
    connection: "idle",
    banner: null,
    lastSeq: -1,
  };
}

/** Replace the mirror with a full snapshot (session create / state fetch). */
export function applyState(model: ViewModel, state: SessionState): ViewModel {
  return {
    ...model,
    session: state,
    lastSeq: state.last_event_seq,
    banner: null,
  };
}

export function setConnection(
  model: ViewModel,
  connection: ConnectionStatus,
): ViewModel {
  return { ...model, connection };
}

export function setBanner(model: ViewModel, banner: string | null): ViewModel {
  return { ...model, banner };
}

/**
 * Fold one event into the mirror.
 *
 * Events must arrive in sequence order.  Replayed duplicates (seq already
 * applied) are ignored, which makes stream reconnects idempotent; a gap in
 * the sequence means the tab missed messages, so the event is dropped and a
 * banner asks for a reload instead of guessing at the missing state.
 */
export function applyEvent(model: ViewModel, event: SessionEvent): ViewModel {
  if (event.seq <= model.lastSeq) {
    return model; // replay overlap after a reconnect
  }
  if (event.seq !== model.lastSeq + 1 && !(event.type === "opened" && model.session === null)) {
    return setBanner(model, `missed events ${model.lastSeq + 1}..${event.seq - 1}; reload the page`);
  }

  switch (event.type) {
    case "opened": {
      const session: SessionState = {
        session_id: event.session_id,
        phase: event.phase,
        episode_id: event.episode_id,
        map_seed: event.map_seed,
        world_side: event.world_side,
        max_steps: event.max_steps,
        moves: 0,
        goal: event.goal,
        views: [event.view],
        dialog: [],
        pending_question: null,
        stop_reason: null,
        final_iou: null,
        success: null,
        last_event_seq: event.seq,
      };
      return { ...model, session, lastSeq: event.seq };
    }
    case "instruction": {
      const s = requireSession(model, event);
      if (s === null) return model;
      const session: SessionState = {
        ...s,
        phase: event.phase,
        // the server threads its pending question into the round it answers
        dialog: [...s.dialog, { question: s.pending_question, instruction: event.text }],
        pending_question: null,
        last_event_seq: event.seq,
      };
      return { ...model, session, lastSeq: event.seq };
    }
    case "moved": {
      const s = requireSession(model, event);
      if (s === null) return model;
      const session: SessionState = {
        ...s,
        phase: event.phase,
        views: [...s.views, event.view],
        moves: event.step, // the server's move counter, not a client count
        last_event_seq: event.seq,
      };
      return {
        ...model,
        session,
        attention: latestAttention(model, event),
        lastSeq: event.seq,
      };
    }
    case "question": {
      const s = requireSession(model, event);
      if (s === null) return model;
      const session: SessionState = {
        ...s,
        phase: event.phase,
        pending_question: event.text,
        last_event_seq: event.seq,
      };
      return { ...model, session, lastSeq: event.seq };
    }
    case "stopped":
    case "finished": {
      const s = requireSession(model, event);
      if (s === null) return model;
      const session: SessionState = {
        ...s,
        phase: event.phase,
        stop_reason: event.reason,
        final_iou: event.iou,       // the server's number, displayed as-is
        success: event.success,
        last_event_seq: event.seq,
      };
      return { ...model, session, lastSeq: event.seq };
    }
  }
}

export function isTerminal(event: SessionEvent): event is StopEvent {
  return event.type === "stopped" || event.type === "finished";
}

/** True while the commander may type: mirrors the server's phase gate. */
export function inputEnabled(model: ViewModel): boolean {
  return model.session?.phase === "awaiting_instruction";
}

export function phaseLabel(phase: Phase | undefined): string {
  switch (phase) {
    case "awaiting_instruction": return "awaiting instruction";
    case "agent_flying": return "agent flying";
    case "finished": return "finished";
    default: return "no session";
  }
}

function requireSession(model: ViewModel, event: SessionEvent): SessionState | null {
  if (model.session === null) {
    // can't fold a mid-session event with no mirror to fold it into
    return null;
  }
  void event;
  return model.session;
}

function latestAttention(model: ViewModel, event: MovedEvent): number[][] | null {
  // a null grid means the server elected not to record attention this step;
  // keep showing the most recent one it did send
  return event.attention ?? model.attention;
}
