// Cockpit entry point: wire the socket, inputs, and the render loop together.

import {
  advanceDraft,
  axesFromGamepad,
  axesFromKeys,
  defaultInputConfig,
  dragHand,
  NO_INPUT,
} from "./input.js";
import { BridgeClient } from "./net.js";
import { CommandDraft, StateFrame, Vec3, neutralDraft } from "./protocol.js";
import { drawArena, handErrorBars, Viewport } from "./render.js";
import { CockpitState } from "./state.js";

const params = new URLSearchParams(window.location.search);
const host = params.get("host") ?? window.location.hostname ?? "127.0.0.1";
const port = params.get("port") ?? "8787";

const canvas = document.getElementById("arena") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const banner = document.getElementById("banner")!;
const panel = document.getElementById("panel")!;

const cockpit = new CockpitState();
let inputCfg = defaultInputConfig();
let draft: CommandDraft = neutralDraft();
let soleLength = 0.12;
let soleWidth = 0.07;

const keysDown = new Set<string>();
window.addEventListener("keydown", (e) => {
  keysDown.add(e.code);
});
window.addEventListener("keyup", (e) => {
  keysDown.delete(e.code);
});

const client = new BridgeClient({
  onHello(frame) {
    cockpit.connection = "connected";
    if (frame.max_walk_speed) inputCfg = defaultInputConfig(frame.max_walk_speed);
    client.startSending(() => draft);
  },
  onState(frame) {
    cockpit.applyState(frame as StateFrame, performance.now());
  },
  onError(message) {
    console.warn("bridge:", message);
  },
  onClose() {
    cockpit.connection = "closed";
  },
});
client.attach(new WebSocket(`ws://${host}:${port}`) as never);

// Pointer drag on the hand widgets: horizontal drag moves the target forward,
// vertical drag moves it up (screen metaphor for the operator's reach).
for (const side of ["left", "right"] as const) {
  const widget = document.getElementById(`hand-${side}`)!;
  let anchor: [number, number] | null = null;
  widget.addEventListener("pointerdown", (e) => {
    anchor = [e.clientX, e.clientY];
    widget.setPointerCapture(e.pointerId);
  });
  widget.addEventListener("pointermove", (e) => {
    if (!anchor) return;
    const delta: Vec3 = [
      (e.clientX - anchor[0]) / 1000,   // px to meters: 100 px = 10 cm
      0,
      (anchor[1] - e.clientY) / 1000,
    ];
    anchor = [e.clientX, e.clientY];
    draft = dragHand(draft, side, delta, inputCfg);
    client.markDirty();
  });
  widget.addEventListener("pointerup", () => {
    anchor = null;
  });
}

let lastTick = performance.now();
function tick(now: number) {
  const dt = Math.min(0.1, (now - lastTick) / 1000);
  lastTick = now;

  let axes = axesFromKeys(keysDown);
  const pads = navigator.getGamepads ? navigator.getGamepads() : [];
  const pad = pads && pads[0];
  if (pad && axes === NO_INPUT) axes = axesFromGamepad(pad);
  const before = draft;
  draft = advanceDraft(draft, axes, dt, inputCfg);
  if (before.v_u !== draft.v_u || before.theta_u !== draft.theta_u) {
    client.markDirty();
  }

  const frame = cockpit.latest;
  const view: Viewport = {
    width: canvas.width,
    height: canvas.height,
    scale: 220,
    center: frame ? [frame.base.x, frame.base.y] : [0, 0],
  };
  drawArena(ctx, view, cockpit, { soleLength, soleWidth });

  const stale = cockpit.isStale(now);
  banner.textContent =
    cockpit.connection === "closed" ? "DISCONNECTED"
    : stale ? "STALE (no state for > 1 s)"
    : "";
  banner.className = banner.textContent ? "banner alert" : "banner";

  if (frame) {
    const bars = handErrorBars(frame);
    panel.innerHTML = [
      `<div>t = ${frame.t.toFixed(2)} s &nbsp; phase: <b>${frame.phase}</b></div>`,
      `<div>command: v = ${draft.v_u.toFixed(2)} m/s, heading = ${draft.theta_u.toFixed(2)} rad</div>`,
      `<div>base yaw: ${frame.base.yaw.toFixed(3)} rad</div>`,
      ...bars.map((b) =>
        `<div>hand ${b.side}: ${(b.err * 1000).toFixed(1)} mm ` +
        `<span class="bar" style="width:${Math.min(120, b.err * 1200)}px"></span></div>`),
      `<div>qp: f = ${frame.qp.objective.toExponential(2)}, ` +
      `residual = ${frame.qp.residual.toExponential(1)}</div>`,
    ].join("");
  }
  requestAnimationFrame(tick);
}
requestAnimationFrame(tick);
