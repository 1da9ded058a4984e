// Commander console: one session per tab, session id in the URL fragment.
//
// The page is a passive mirror of the session service.  It posts the
// commander's instructions and repaints from the server's event stream;
// nothing on screen is predicted ahead of a server message.

import type { MapResponse, ViewPayload } from "./types.js";
import {
  applyEvent,
  applyState,
  initialModel,
  inputEnabled,
  phaseLabel,
  setBanner,
  setConnection,
  type ViewModel,
} from "./state.js";
import {
  ApiError,
  createSession,
  fetchMap,
  fetchState,
  postInstruction,
  streamEvents,
} from "./net.js";
import {
  drawAttentionPanel,
  drawMap,
  drawTrail,
  drawViewSquare,
  makeProjector,
} from "./render.js";

// ============================================================
// DOM references
// ============================================================

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const mapCanvas = el<HTMLCanvasElement>("map");
const attentionCanvas = el<HTMLCanvasElement>("attention");
const attentionLabel = el<HTMLSpanElement>("attention-label");
const phaseBadge = el<HTMLSpanElement>("phase");
const connectionBadge = el<HTMLSpanElement>("connection");
const sessionLabel = el<HTMLSpanElement>("session-label");
const metaLine = el<HTMLSpanElement>("meta");
const bannerBox = el<HTMLDivElement>("banner");
const resultBox = el<HTMLDivElement>("result");
const transcriptList = el<HTMLUListElement>("transcript");
const pendingBox = el<HTMLDivElement>("pending-question");
const openPanel = el<HTMLElement>("open-panel");
const openForm = el<HTMLFormElement>("open-form");
const seedInput = el<HTMLInputElement>("seed");
const sessionPanel = el<HTMLElement>("session-panel");
const instructionForm = el<HTMLFormElement>("instruction-form");
const instructionInput = el<HTMLInputElement>("instruction");
const sendButton = el<HTMLButtonElement>("send");

// ============================================================
// State
// ============================================================

const base = ""; // same origin; serve.mjs proxies /sessions to the service

let model: ViewModel = initialModel();
let sessionId: string | null = null;
let worldRaster: MapResponse | null = null;
let mapLayer: HTMLCanvasElement | null = null; // raster pre-painted once
let stopStream: (() => void) | null = null;
let sending = false;

function update(next: ViewModel): void {
  model = next;
  paint();
}

// ============================================================
// Painting
// ============================================================

function fitCanvas(canvas: HTMLCanvasElement): CanvasRenderingContext2D {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth;
  const h = canvas.clientHeight;
  if (canvas.width !== Math.round(w * dpr) || canvas.height !== Math.round(h * dpr)) {
    canvas.width = Math.round(w * dpr);
    canvas.height = Math.round(h * dpr);
  }
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas unsupported");
  ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
  return ctx;
}

function buildMapLayer(raster: MapResponse): HTMLCanvasElement {
  const layer = document.createElement("canvas");
  layer.width = 512;
  layer.height = 512;
  const ctx = layer.getContext("2d");
  if (ctx) drawMap(ctx, raster, layer.width, layer.height);
  return layer;
}

function paintMap(): void {
  const ctx = fitCanvas(mapCanvas);
  const w = mapCanvas.clientWidth;
  const h = mapCanvas.clientHeight;
  ctx.clearRect(0, 0, w, h);
  if (mapLayer) ctx.drawImage(mapLayer, 0, 0, w, h);
  const s = model.session;
  if (!s) return;
  const proj = makeProjector(s.world_side, w, h);
  drawViewSquare(ctx, proj, s.goal, "#ffb020", [6, 4]);
  drawTrail(ctx, proj, s.views);
  const current: ViewPayload | undefined = s.views[s.views.length - 1];
  if (current) {
    drawViewSquare(ctx, proj, current, "#ffffff", [], "rgba(255, 255, 255, 0.12)");
  }
}

function paintAttention(): void {
  const ctx = fitCanvas(attentionCanvas);
  const w = attentionCanvas.clientWidth;
  const h = attentionCanvas.clientHeight;
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, w, h);
  if (model.attention) {
    drawAttentionPanel(ctx, model.attention, w, h);
    const rows = model.attention.length;
    const cols = model.attention[0]?.length ?? 0;
    attentionLabel.textContent = `agent attention (${rows}×${cols})`;
  } else {
    attentionLabel.textContent = "agent attention (no grid yet)";
  }
}

function paintTranscript(): void {
  const s = model.session;
  transcriptList.replaceChildren();
  if (!s) return;
  s.dialog.forEach((round, i) => {
    const item = document.createElement("li");
    if (round.question !== null) {
      const q = document.createElement("em");
      q.textContent = `agent: ${round.question}`;
      item.append(q, document.createElement("br"));
    }
    const text = document.createElement("span");
    text.textContent = `round ${i + 1}: ${round.instruction}`;
    item.append(text);
    transcriptList.append(item);
  });
  if (s.pending_question !== null) {
    pendingBox.textContent = `agent asks: ${s.pending_question}`;
    pendingBox.hidden = false;
  } else {
    pendingBox.hidden = true;
  }
}

function paintResult(): void {
  const s = model.session;
  if (!s || s.phase !== "finished" || s.final_iou === null) {
    resultBox.hidden = true;
    return;
  }
  // verdict and overlap both come from the terminal event, displayed as-is
  const iou = s.final_iou.toFixed(3);
  const why = s.stop_reason === "max_steps" ? "step budget exhausted" : "agent stopped";
  resultBox.textContent = s.success
    ? `Goal reached — IoU ${iou} (${why})`
    : `Goal missed — IoU ${iou} (${why})`;
  resultBox.className = s.success ? "result ok" : "result bad";
  resultBox.hidden = false;
}

function paint(): void {
  const s = model.session;
  phaseBadge.textContent = phaseLabel(s?.phase);
  phaseBadge.className = `badge phase-${s?.phase ?? "none"}`;
  connectionBadge.textContent = model.connection;
  connectionBadge.className = `badge conn-${model.connection}`;
  sessionLabel.textContent = sessionId ?? "—";
  metaLine.textContent = s
    ? `episode ${s.episode_id} · moves ${s.moves}/${s.max_steps}`
    : "";

  bannerBox.hidden = model.banner === null;
  bannerBox.textContent = model.banner ?? "";

  const finished = s?.phase === "finished";
  instructionForm.hidden = finished || s === null; // finished: read-only transcript
  instructionInput.disabled = !inputEnabled(model) || sending;
  sendButton.disabled = !inputEnabled(model) || sending;

  paintResult();
  paintTranscript();
  paintMap();
  paintAttention();
}

// ============================================================
// Commands
// ============================================================

async function submitInstruction(): Promise<void> {
  if (sessionId === null || sending) return;
  const text = instructionInput.value.trim();
  if (text === "") {
    update(setBanner(model, "instruction must be non-empty"));
    return;
  }
  if (!inputEnabled(model)) return;
  sending = true;
  update(setBanner(model, null));
  try {
    await postInstruction(base, sessionId, text);
    // no state change here: the event stream is the only state path
    instructionInput.value = "";
  } catch (err) {
    const message = err instanceof ApiError
      ? `${err.status === 409 ? "not your turn" : "rejected"}: ${err.detail}`
      : `request failed: ${String(err)}`;
    update(setBanner(model, message));
  } finally {
    sending = false;
    paint();
  }
}

async function openSession(seed: number): Promise<void> {
  try {
    const state = await createSession(base, seed);
    // hand off to the hash-routed boot path; one session per tab
    window.location.hash = state.session_id;
  } catch (err) {
    const message = err instanceof ApiError
      ? `cannot open session: ${err.detail}`
      : `cannot reach the session service: ${String(err)}`;
    update(setBanner(model, message));
  }
}

// ============================================================
// Boot
// ============================================================

function startStream(id: string): void {
  stopStream?.();
  stopStream = streamEvents(base, id, () => model.lastSeq, {
    onEvent: (event) => update(applyEvent(model, event)),
    onStatus: (status) => update(setConnection(model, status)),
  });
}

async function attach(id: string): Promise<void> {
  sessionId = id;
  document.title = `commander · ${id}`;
  openPanel.hidden = true;
  sessionPanel.hidden = false;
  let state;
  try {
    state = await fetchState(base, id);
  } catch (err) {
    // unknown session: show the banner and the open form, keep the page alive
    const message = err instanceof ApiError && err.status === 404
      ? `unknown session ${id}`
      : `cannot reach the session service: ${String(err)}`;
    sessionPanel.hidden = true;
    openPanel.hidden = false;
    update(setBanner(model, message));
    return;
  }
  update(applyState(model, state));
  try {
    worldRaster = await fetchMap(base, id, 192);
    mapLayer = buildMapLayer(worldRaster);
  } catch {
    mapLayer = null; // map is decoration; the session still works without it
  }
  if (state.phase !== "finished") {
    startStream(id);
  } else {
    update(setConnection(model, "closed"));
  }
  paint();
}

function boot(): void {
  const id = window.location.hash.replace(/^#/, "").trim();
  if (id === "") {
    openPanel.hidden = false;
    sessionPanel.hidden = true;
    paint();
    return;
  }
  void attach(id);
}

openForm.addEventListener("submit", (ev) => {
  ev.preventDefault();
  const seed = Number(seedInput.value);
  void openSession(Number.isFinite(seed) ? Math.trunc(seed) : 0);
});

instructionForm.addEventListener("submit", (ev) => {
  ev.preventDefault();
  void submitInstruction();
});

window.addEventListener("hashchange", () => {
  window.location.reload(); // fragment names the tab's one session
});

window.addEventListener("resize", () => paint());

boot();
