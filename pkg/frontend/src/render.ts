// Top-down arena rendering and the pure geometry it relies on. World axes:
// x forward, y left; the canvas draws x up-screen and y left-screen.

import { FootstepInfo, Pose2d, StateFrame, Vec2 } from "./protocol.js";
import { CockpitState } from "./state.js";

export interface Viewport {
  width: number;
  height: number;
  scale: number;    // pixels per meter
  center: Vec2;     // world point mapped to the canvas center
}

export function worldToScreen(view: Viewport, p: Vec2): Vec2 {
  return [
    view.width / 2 - (p[1] - view.center[1]) * view.scale,
    view.height / 2 - (p[0] - view.center[0]) * view.scale,
  ];
}

export function footprintCorners(pose: Pose2d, length: number, width: number): Vec2[] {
  const c = Math.cos(pose.yaw);
  const s = Math.sin(pose.yaw);
  const half: Vec2[] = [
    [length / 2, width / 2],
    [-length / 2, width / 2],
    [-length / 2, -width / 2],
    [length / 2, -width / 2],
  ];
  return half.map(([x, y]) => [pose.x + c * x - s * y, pose.y + s * x + c * y]);
}

export interface ArenaStyle {
  soleLength: number;
  soleWidth: number;
}

function polyline(ctx: CanvasRenderingContext2D, view: Viewport, pts: readonly Vec2[]) {
  if (pts.length < 2) return;
  ctx.beginPath();
  const [x0, y0] = worldToScreen(view, pts[0]);
  ctx.moveTo(x0, y0);
  for (const p of pts.slice(1)) {
    const [x, y] = worldToScreen(view, p);
    ctx.lineTo(x, y);
  }
  ctx.stroke();
}

function drawFoot(ctx: CanvasRenderingContext2D, view: Viewport, pose: Pose2d,
                  style: ArenaStyle, stroke: string, fill?: string) {
  const corners = footprintCorners(pose, style.soleLength, style.soleWidth);
  ctx.beginPath();
  const [x0, y0] = worldToScreen(view, corners[0]);
  ctx.moveTo(x0, y0);
  for (const c of corners.slice(1)) {
    const [x, y] = worldToScreen(view, c);
    ctx.lineTo(x, y);
  }
  ctx.closePath();
  if (fill) {
    ctx.fillStyle = fill;
    ctx.fill();
  }
  ctx.strokeStyle = stroke;
  ctx.stroke();
}

function drawMarker(ctx: CanvasRenderingContext2D, view: Viewport, p: Vec2,
                    color: string, r = 3) {
  const [x, y] = worldToScreen(view, p);
  ctx.beginPath();
  ctx.arc(x, y, r, 0, 2 * Math.PI);
  ctx.fillStyle = color;
  ctx.fill();
}

export function drawArena(ctx: CanvasRenderingContext2D, view: Viewport,
                          cockpit: CockpitState, style: ArenaStyle): void {
  ctx.clearRect(0, 0, view.width, view.height);
  const frame = cockpit.latest;
  ctx.save();

  // Grid, 0.5 m pitch.
  ctx.strokeStyle = "#223";
  ctx.lineWidth = 1;
  const span = Math.max(view.width, view.height) / view.scale;
  const pitch = 0.5;
  const x0 = Math.floor((view.center[0] - span) / pitch) * pitch;
  for (let x = x0; x < view.center[0] + span; x += pitch) {
    polyline(ctx, view, [[x, view.center[1] - span], [x, view.center[1] + span]]);
  }
  const y0 = Math.floor((view.center[1] - span) / pitch) * pitch;
  for (let y = y0; y < view.center[1] + span; y += pitch) {
    polyline(ctx, view, [[view.center[0] - span, y], [view.center[0] + span, y]]);
  }

  if (frame) {
    // Executed footsteps, then the plan.
    for (const f of cockpit.executed) {
      drawFoot(ctx, view, f, style, "#4a6", "rgba(60,140,90,0.25)");
    }
    for (const f of frame.footsteps) {
      drawFoot(ctx, view, f, style, f.foot === "left" ? "#7af" : "#fa7");
    }
    drawFoot(ctx, view, frame.feet.left, style, "#7af", "rgba(100,160,255,0.4)");
    drawFoot(ctx, view, frame.feet.right, style, "#fa7", "rgba(255,170,100,0.4)");

    // Traces and live markers.
    ctx.lineWidth = 1.5;
    ctx.strokeStyle = "#6d6";
    polyline(ctx, view, cockpit.comTrace.points());
    ctx.strokeStyle = "#d6d";
    polyline(ctx, view, cockpit.dcmTrace.points());
    ctx.strokeStyle = "#dd6";
    polyline(ctx, view, cockpit.zmpTrace.points());
    drawMarker(ctx, view, frame.com, "#6d6");
    drawMarker(ctx, view, frame.dcm, "#d6d");
    drawMarker(ctx, view, frame.zmp, "#dd6");
    drawMarker(ctx, view, frame.dcm_ref, "#858", 2);

    // Heading wedge at the base.
    const base = frame.base;
    const tip: Vec2 = [base.x + 0.12 * Math.cos(base.yaw),
                       base.y + 0.12 * Math.sin(base.yaw)];
    ctx.strokeStyle = "#fff";
    ctx.lineWidth = 2;
    polyline(ctx, view, [[base.x, base.y], tip]);
  }
  ctx.restore();
}

export function handErrorBars(frame: StateFrame): { side: string; err: number }[] {
  const norm = (v: readonly number[]) => Math.hypot(v[0], v[1], v[2]);
  return [
    { side: "left", err: norm(frame.hands.left.err_pos) },
    { side: "right", err: norm(frame.hands.right.err_pos) },
  ];
}

export function describeFootsteps(steps: FootstepInfo[]): string {
  return steps.map((s) => `${s.foot[0].toUpperCase()}@(${s.x.toFixed(2)}, ${s.y.toFixed(2)})`).join("  ");
}
