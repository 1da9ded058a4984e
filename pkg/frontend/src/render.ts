// Canvas painting.  Everything drawn here comes straight from server
// payloads: view squares use the server's four vertices (never recomputed
// from center + rotation), the background uses the server's raster rows in
// the order they arrive, and the attention panel paints one cell per grid
// value.  The only math is the world-to-pixel projection.

import type { MapResponse, ViewPayload } from "./types.js";

export interface Projector {
  x(wx: number): number;
  y(wy: number): number;
}

/** World coordinates to canvas pixels, north up (y grows downward on canvas). */
export function makeProjector(worldSide: number, width: number, height: number): Projector {
  return {
    x: (wx) => (wx / worldSide) * width,
    y: (wy) => (1 - wy / worldSide) * height,
  };
}

function clamp01(v: number): number {
  return v < 0 ? 0 : v > 1 ? 1 : v;
}

/** Terrain-ish ramp: deep water blue through green to pale sand. */
export function rampColor(t: number): string {
  const v = clamp01(t);
  let r: number, g: number, b: number;
  if (v < 0.5) {
    const u = v / 0.5;
    r = 18 + u * (52 - 18);
    g = 34 + u * (112 - 34);
    b = 74 + u * (78 - 74);
  } else {
    const u = (v - 0.5) / 0.5;
    r = 52 + u * (214 - 52);
    g = 112 + u * (196 - 112);
    b = 78 + u * (142 - 78);
  }
  return `rgb(${Math.round(r)}, ${Math.round(g)}, ${Math.round(b)})`;
}

/** Paint the raster as background tiles; row 0 is already the north edge. */
export function drawMap(
  ctx: CanvasRenderingContext2D,
  map: MapResponse,
  width: number,
  height: number,
): void {
  let lo = Infinity;
  let hi = -Infinity;
  for (const row of map.values) {
    for (const v of row) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  const span = hi > lo ? hi - lo : 1;
  const tileW = width / map.resolution;
  const tileH = height / map.resolution;
  for (let r = 0; r < map.values.length; r++) {
    const row = map.values[r];
    if (!row) continue;
    for (let c = 0; c < row.length; c++) {
      ctx.fillStyle = rampColor(((row[c] ?? lo) - lo) / span);
      // overshoot by a hair to avoid seams between tiles
      ctx.fillRect(c * tileW, r * tileH, tileW + 0.5, tileH + 0.5);
    }
  }
}

/** Polyline through the centers the server has reported so far. */
export function drawTrail(
  ctx: CanvasRenderingContext2D,
  proj: Projector,
  views: ViewPayload[],
): void {
  if (views.length === 0) return;
  ctx.save();
  ctx.strokeStyle = "rgba(255, 255, 255, 0.85)";
  ctx.lineWidth = 2;
  ctx.setLineDash([]);
  ctx.beginPath();
  views.forEach((v, i) => {
    const px = proj.x(v.center[0]);
    const py = proj.y(v.center[1]);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.stroke();
  for (const v of views) {
    ctx.beginPath();
    ctx.arc(proj.x(v.center[0]), proj.y(v.center[1]), 3, 0, Math.PI * 2);
    ctx.fillStyle = "rgba(255, 255, 255, 0.9)";
    ctx.fill();
  }
  ctx.restore();
}

/** Stroke a view square through the server-computed corner list. */
export function drawViewSquare(
  ctx: CanvasRenderingContext2D,
  proj: Projector,
  view: ViewPayload,
  stroke: string,
  dash: number[] = [],
  fill: string | null = null,
): void {
  if (view.vertices.length === 0) return;
  ctx.save();
  ctx.beginPath();
  view.vertices.forEach(([wx, wy], i) => {
    const px = proj.x(wx);
    const py = proj.y(wy);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.closePath();
  if (fill !== null) {
    ctx.fillStyle = fill;
    ctx.fill();
  }
  ctx.strokeStyle = stroke;
  ctx.lineWidth = 2;
  ctx.setLineDash(dash);
  ctx.stroke();
  ctx.restore();
}

/**
 * Paint the attention heatmap: exactly one cell per server grid value, so
 * the panel's cell count always equals the grid the agent actually produced.
 * The caller clears the canvas first; this draws only the cells.
 */
export function drawAttentionPanel(
  ctx: CanvasRenderingContext2D,
  grid: number[][],
  width: number,
  height: number,
): void {
  const rows = grid.length;
  if (rows === 0) return;
  const cellH = height / rows;
  for (let r = 0; r < rows; r++) {
    const row = grid[r];
    if (!row || row.length === 0) continue;
    const cellW = width / row.length;
    for (let c = 0; c < row.length; c++) {
      const v = clamp01(row[c] ?? 0);
      ctx.fillStyle = `rgba(255, 176, 32, ${(0.08 + 0.92 * v).toFixed(3)})`;
      ctx.fillRect(c * cellW + 1, r * cellH + 1, cellW - 2, cellH - 2);
    }
  }
}
