// Operator input: keyboard/gamepad steer the walking command, pointer drags
// nudge the hand targets. The speed springs back to zero when released, like
// stepping off a treadmill; everything is clamped before it leaves the app.

import { CommandDraft, Vec3, neutralDraft } from "./protocol.js";

export interface InputConfig {
  maxWalkSpeed: number;   // m/s cap from the server hello
  rampRate: number;       // m/s per second while holding forward/back
  decayRate: number;      // m/s per second spring-back with no input
  turnRate: number;       // rad/s heading change while holding left/right
  handRange: number;      // |offset| clamp per axis, meters
}

export function defaultInputConfig(maxWalkSpeed = 0.6): InputConfig {
  return {
    maxWalkSpeed,
    rampRate: 0.4,
    decayRate: 0.5,
    turnRate: 0.8,
    handRange: 0.25,
  };
}

export interface Axes {
  forward: number; // +1 forward (W / stick up), -1 back (S)
  turn: number;    // +1 left (A / stick left), -1 right (D)
}

export const NO_INPUT: Axes = { forward: 0, turn: 0 };

export function axesFromKeys(down: ReadonlySet<string>): Axes {
  let forward = 0;
  let turn = 0;
  if (down.has("KeyW") || down.has("ArrowUp")) forward += 1;
  if (down.has("KeyS") || down.has("ArrowDown")) forward -= 1;
  if (down.has("KeyA") || down.has("ArrowLeft")) turn += 1;
  if (down.has("KeyD") || down.has("ArrowRight")) turn -= 1;
  return { forward, turn };
}

export interface GamepadLike {
  axes: readonly number[];
}

export function axesFromGamepad(pad: GamepadLike, deadzone = 0.15): Axes {
  const sx = pad.axes.length > 0 ? pad.axes[0] : 0;
  const sy = pad.axes.length > 1 ? pad.axes[1] : 0;
  return {
    forward: Math.abs(sy) > deadzone ? -sy : 0, // stick up is negative
    turn: Math.abs(sx) > deadzone ? -sx : 0,
  };
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, v));
}

/** Advance the command draft by dt seconds of held input. */
export function advanceDraft(
  draft: CommandDraft,
  axes: Axes,
  dt: number,
  cfg: InputConfig,
): CommandDraft {
  let v = draft.v_u;
  if (axes.forward > 0) {
    v = clamp(v + axes.forward * cfg.rampRate * dt, 0, cfg.maxWalkSpeed);
  } else if (axes.forward < 0) {
    v = clamp(v + axes.forward * cfg.rampRate * dt, 0, cfg.maxWalkSpeed);
  } else {
    v = Math.max(0, v - cfg.decayRate * dt);
  }
  const theta = draft.theta_u + axes.turn * cfg.turnRate * dt;
  return {
    v_u: v,
    theta_u: theta,
    lhandOffset: [...draft.lhandOffset] as Vec3,
    rhandOffset: [...draft.rhandOffset] as Vec3,
  };
}

/** Apply a pointer drag on a hand widget: dx forward, dy left, dz up, meters. */
export function dragHand(
  draft: CommandDraft,
  side: "left" | "right",
  delta: Vec3,
  cfg: InputConfig,
): CommandDraft {
  const out = {
    v_u: draft.v_u,
    theta_u: draft.theta_u,
    lhandOffset: [...draft.lhandOffset] as Vec3,
    rhandOffset: [...draft.rhandOffset] as Vec3,
  };
  const target = side === "left" ? out.lhandOffset : out.rhandOffset;
  for (let i = 0; i < 3; i++) {
    target[i] = clamp(target[i] + delta[i], -cfg.handRange, cfg.handRange);
  }
  return out;
}

export function resetDraftSpeedless(draft: CommandDraft): CommandDraft {
  const out = neutralDraft();
  out.lhandOffset = [...draft.lhandOffset] as Vec3;
  out.rhandOffset = [...draft.rhandOffset] as Vec3;
  out.theta_u = draft.theta_u;
  return out;
}
