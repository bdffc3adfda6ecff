// Top-down arena map: snapshot -> glyph list (pure and testable), plus the
// canvas painter.  Height is shown as a per-blimp bar rather than a third
// axis.

import { Snapshot } from "./protocol.js";

export const MODE_COLORS: Record<string, string> = {
  Manual: "#e8b339",
  RandomWalk: "#5aa469",
  MoveToGoal: "#3f7cc4",
  PassThroughGoal: "#d4502e",
};

export const BALLOON_COLORS: Record<string, string> = {
  free: "#cc3b3b",
  captured: "#8a2be2",
  delivered: "#777777",
};

export interface Glyph {
  kind: "blimp" | "balloon" | "hoop";
  id: number;
  x: number; // arena meters, +x east
  y: number; // arena meters, +y north
  color: string;
  heading?: number; // rad, blimps only
  height?: number; // m above floor
  shape?: string; // hoops only
  radius?: number;
  selected?: boolean;
  carrying?: boolean;
  label: string;
}

export interface ArenaView {
  glyphs: Glyph[];
  stale: boolean;
  arena: [number, number];
}

export function arenaView(
  snapshot: Snapshot | null,
  selected: number | null,
  stale: boolean,
  arena: [number, number] = [20, 15],
): ArenaView {
  const glyphs: Glyph[] = [];
  if (snapshot) {
    for (const h of snapshot.hoops) {
      glyphs.push({
        kind: "hoop",
        id: h.id,
        x: h.r[0],
        y: h.r[1],
        color: "#b9a23a",
        shape: h.shape,
        radius: h.radius,
        height: h.r[2],
        label: `hoop ${h.id} (${h.shape})`,
      });
    }
    for (const b of snapshot.balloons) {
      if (b.state === "delivered") continue;
      glyphs.push({
        kind: "balloon",
        id: b.id,
        x: b.r[0],
        y: b.r[1],
        color: BALLOON_COLORS[b.state] ?? BALLOON_COLORS.free,
        height: b.r[2],
        label: `balloon ${b.id} (${b.state})`,
      });
    }
    for (const bl of snapshot.blimps) {
      glyphs.push({
        kind: "blimp",
        id: bl.id,
        x: bl.r[0],
        y: bl.r[1],
        heading: bl.euler[2],
        color: MODE_COLORS[bl.mode] ?? "#999999",
        height: bl.r[2],
        selected: selected === bl.id,
        carrying: bl.carrying,
        label: `blimp ${bl.id} — ${bl.mode}${bl.carrying ? " (carrying)" : ""}`,
      });
    }
  }
  return { glyphs, stale, arena };
}

/** Click-to-select: nearest blimp within pickRadius meters, else null. */
export function hitTestBlimp(
  view: ArenaView,
  x: number,
  y: number,
  pickRadius = 1.0,
): number | null {
  let best: number | null = null;
  let bestD = pickRadius;
  for (const g of view.glyphs) {
    if (g.kind !== "blimp") continue;
    const d = Math.hypot(g.x - x, g.y - y);
    if (d <= bestD) {
      bestD = d;
      best = g.id;
    }
  }
  return best;
}

export function canvasToArena(
  view: ArenaView,
  px: number,
  py: number,
  w: number,
  h: number,
): [number, number] {
  const [ax, ay] = view.arena;
  return [(px / w - 0.5) * ax, (0.5 - py / h) * ay];
}

export function drawArena(
  ctx: CanvasRenderingContext2D,
  view: ArenaView,
  w: number,
  h: number,
): void {
  const [ax, ay] = view.arena;
  const sx = w / ax;
  const sy = h / ay;
  const X = (x: number) => (x + ax / 2) * sx;
  const Y = (y: number) => (ay / 2 - y) * sy;

  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = view.stale ? "#3c3c3c" : "#20262b";
  ctx.fillRect(0, 0, w, h);
  ctx.strokeStyle = "#4a555e";
  ctx.strokeRect(1, 1, w - 2, h - 2);

  for (const g of view.glyphs) {
    ctx.save();
    if (view.stale) ctx.globalAlpha = 0.45;
    if (g.kind === "hoop") {
      ctx.strokeStyle = g.color;
      ctx.lineWidth = 2;
      const r = (g.radius ?? 0.75) * sx;
      ctx.beginPath();
      if (g.shape === "circle") {
        ctx.arc(X(g.x), Y(g.y), r, 0, 2 * Math.PI);
      } else {
        const sides = g.shape === "triangle" ? 3 : 4;
        for (let i = 0; i <= sides; i++) {
          const a = Math.PI / 2 + (i * 2 * Math.PI) / sides;
          const px = X(g.x) + r * Math.cos(a);
          const py = Y(g.y) - r * Math.sin(a);
          i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
        }
      }
      ctx.stroke();
    } else if (g.kind === "balloon") {
      ctx.fillStyle = g.color;
      ctx.beginPath();
      ctx.arc(X(g.x), Y(g.y), 4, 0, 2 * Math.PI);
      ctx.fill();
    } else {
      // blimp: disk + heading arrow + height bar
      const cx = X(g.x);
      const cy = Y(g.y);
      ctx.fillStyle = g.color;
      ctx.beginPath();
      ctx.arc(cx, cy, 7, 0, 2 * Math.PI);
      ctx.fill();
      if (g.selected) {
        ctx.strokeStyle = "#ffffff";
        ctx.lineWidth = 2;
        ctx.stroke();
      }
      const hd = g.heading ?? 0;
      ctx.strokeStyle = "#e8e8e8";
      ctx.beginPath();
      ctx.moveTo(cx, cy);
      ctx.lineTo(cx + 14 * Math.cos(hd), cy - 14 * Math.sin(hd));
      ctx.stroke();
      if (g.carrying) {
        ctx.fillStyle = BALLOON_COLORS.captured;
        ctx.beginPath();
        ctx.arc(cx, cy + 10, 3, 0, 2 * Math.PI);
        ctx.fill();
      }
      const frac = Math.min(1, (g.height ?? 0) / 8);
      ctx.fillStyle = "#8fd3ff";
      ctx.fillRect(cx + 10, cy + 8 - 16 * frac, 3, 16 * frac);
    }
    ctx.restore();
  }
}
