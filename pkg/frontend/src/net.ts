// HTTP + event-stream plumbing for the session service.
//
// The service speaks plain JSON plus one server-sent-events endpoint.  The
// stream reader below reconnects on its own, resuming from the caller's
// cursor (`?after=`), and reports its status so the UI can show it.

import type {
  EventsResponse,
  MapResponse,
  SessionEvent,
  SessionState,
} from "./types.js";
import type { ConnectionStatus } from "./state.js";
import { isTerminal } from "./state.js";

export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function requestJson<T>(
  fetchImpl: FetchLike,
  url: string,
  init?: RequestInit,
): Promise<T> {
  const res = await fetchImpl(url, init);
  if (!res.ok) {
    let detail = res.statusText || `status ${res.status}`;
    try {
      const body: unknown = await res.json();
      if (body && typeof body === "object" && "detail" in body) {
        detail = String((body as { detail: unknown }).detail);
      }
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(res.status, detail);
  }
  return (await res.json()) as T;
}

export function createSession(
  base: string,
  seed: number,
  fetchImpl: FetchLike = fetch,
): Promise<SessionState> {
  return requestJson<SessionState>(fetchImpl, `${base}/sessions`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ seed }),
  });
}

export function fetchState(
  base: string,
  sessionId: string,
  fetchImpl: FetchLike = fetch,
): Promise<SessionState> {
  return requestJson<SessionState>(fetchImpl, `${base}/sessions/${sessionId}`);
}

export function fetchMap(
  base: string,
  sessionId: string,
  resolution: number,
  fetchImpl: FetchLike = fetch,
): Promise<MapResponse> {
  return requestJson<MapResponse>(
    fetchImpl,
    `${base}/sessions/${sessionId}/map?resolution=${resolution}`,
  );
}

export function postInstruction(
  base: string,
  sessionId: string,
  text: string,
  fetchImpl: FetchLike = fetch,
): Promise<EventsResponse> {
  return requestJson<EventsResponse>(
    fetchImpl,
    `${base}/sessions/${sessionId}/instructions`,
    {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text }),
    },
  );
}

// ------------------------------------------------------------- SSE parsing

export interface SseFrame {
  id: number | null;
  data: string;
}

export interface SseParse {
  frames: SseFrame[];
  rest: string;
}

/**
 * Split a text buffer into complete SSE frames plus the trailing partial.
 *
 * Handles `id:` and `data:` fields and drops comment lines (`: keep-alive`).
 * Multiple data lines in one frame are joined with newlines per the SSE
 * format, though the service sends one per event.
 */
export function parseSse(buffer: string): SseParse {
  const chunks = buffer.split("\n\n");
  const rest = chunks.pop() ?? "";
  const frames: SseFrame[] = [];
  for (const chunk of chunks) {
    let id: number | null = null;
    const data: string[] = [];
    for (const line of chunk.split("\n")) {
      if (line.startsWith(":")) continue;
      if (line.startsWith("id:")) id = Number(line.slice(3).trim());
      else if (line.startsWith("data:")) data.push(line.slice(5).trimStart());
    }
    if (data.length > 0) frames.push({ id, data: data.join("\n") });
  }
  return { frames, rest };
}

// ------------------------------------------------------------ stream reader

export interface StreamHandlers {
  onEvent(event: SessionEvent): void;
  onStatus(status: ConnectionStatus): void;
}

export interface StreamOptions {
  fetchImpl?: FetchLike;
  retryMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

/**
 * Follow a session's event stream, reconnecting until a terminal event.
 *
 * `after` is consulted on every attempt, so a reconnect resumes from the
 * last event the model actually applied rather than replaying history.
 * Returns a function that stops the loop.
 */
export function streamEvents(
  base: string,
  sessionId: string,
  after: () => number,
  handlers: StreamHandlers,
  options: StreamOptions = {},
): () => void {
  const fetchImpl = options.fetchImpl ?? fetch;
  const retryMs = options.retryMs ?? 2000;
  const sleep = options.sleep ?? defaultSleep;
  const controller = new AbortController();
  let stopped = false;

  const run = async (): Promise<void> => {
    let attempt = 0;
    while (!stopped) {
      handlers.onStatus(attempt === 0 ? "connecting" : "reconnecting");
      try {
        const url = `${base}/sessions/${sessionId}/events?after=${after()}`;
        const res = await fetchImpl(url, {
          headers: { accept: "text/event-stream" },
          signal: controller.signal,
        });
        if (res.status === 404) {
          // the session is gone server-side; retrying cannot bring it back
          handlers.onStatus("error");
          return;
        }
        if (!res.ok || res.body === null) {
          throw new ApiError(res.status, res.statusText || "no stream body");
        }
        handlers.onStatus("live");
        const terminal = await pump(res.body, handlers);
        if (terminal) {
          handlers.onStatus("closed");
          return;
        }
        // stream ended without a terminal event: server restart or timeout
      } catch {
        if (stopped) return;
      }
      attempt += 1;
      await sleep(retryMs);
    }
  };

  void run();
  return () => {
    stopped = true;
    controller.abort();
  };
}

/** Read frames off the stream; true if a terminal event was delivered. */
async function pump(
  body: ReadableStream<Uint8Array>,
  handlers: StreamHandlers,
): Promise<boolean> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  try {
    for (;;) {
      const { done, value } = await reader.read();
      if (done) return false;
      buffer += decoder.decode(value, { stream: true });
      const { frames, rest } = parseSse(buffer);
      buffer = rest;
      for (const frame of frames) {
        const event = JSON.parse(frame.data) as SessionEvent;
        handlers.onEvent(event);
        if (isTerminal(event)) return true;
      }
    }
  } finally {
    reader.releaseLock();
  }
}
