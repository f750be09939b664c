// Bridge wire protocol: JSON text frames over one WebSocket. The shape mirrors
// the shared schema file (../src/telewalk/data/protocol.schema.json); the
// schema-conformance test in tests/protocol.test.ts keeps them in lockstep.

export const PROTOCOL_VERSION = 1;

export type Vec2 = [number, number];
export type Vec3 = [number, number, number];
export type Mat3 = [number, number, number, number, number, number, number, number, number];

export interface Pose2d {
  x: number;
  y: number;
  yaw: number;
}

export interface HandState {
  pos: Vec3;
  target: Vec3;
  err_pos: Vec3;
  err_rot: Vec3;
}

export interface FootstepInfo {
  foot: "left" | "right";
  x: number;
  y: number;
  yaw: number;
  impact_time: number;
  executed: boolean;
}

export interface HelloFrame {
  kind: "hello";
  seq: number;
  protocol: number;
  role: "server" | "operator" | "observer";
  model?: { name: string; joints: number };
  dt?: number;
  max_walk_speed?: number;
}

export interface StateFrame {
  kind: "state";
  seq: number;
  t: number;
  phase: string;
  base: Pose2d;
  com: Vec2;
  com_ref: Vec2;
  dcm: Vec2;
  dcm_ref: Vec2;
  zmp: Vec2;
  zmp_ref: Vec2;
  feet: { left: Pose2d; right: Pose2d };
  footsteps: FootstepInfo[];
  hands: { left: HandState; right: HandState };
  qp: { objective: number; residual: number };
}

export interface HandDraft {
  pos: Vec3;
  rot: Mat3;
}

export interface CommandFrame {
  kind: "command";
  seq: number;
  v_u: number;
  theta_u: number;
  lhand: HandDraft;
  rhand: HandDraft;
  head_rot: Mat3;
}

export interface ErrorFrame {
  kind: "error";
  seq: number;
  message: string;
}

export type Frame = HelloFrame | StateFrame | CommandFrame | ErrorFrame;

export const IDENTITY_ROT: Mat3 = [1, 0, 0, 0, 1, 0, 0, 0, 1];

export function clientHello(seq = 0): HelloFrame {
  return { kind: "hello", seq, protocol: PROTOCOL_VERSION, role: "operator" };
}

export interface CommandDraft {
  v_u: number;
  theta_u: number;
  lhandOffset: Vec3; // VR-frame hand translation relative to the calibrated neutral
  rhandOffset: Vec3;
}

export function neutralDraft(): CommandDraft {
  return { v_u: 0, theta_u: 0, lhandOffset: [0, 0, 0], rhandOffset: [0, 0, 0] };
}

export function commandFrame(draft: CommandDraft, seq: number): CommandFrame {
  return {
    kind: "command",
    seq,
    v_u: draft.v_u,
    theta_u: draft.theta_u,
    lhand: { pos: [...draft.lhandOffset] as Vec3, rot: [...IDENTITY_ROT] as Mat3 },
    rhand: { pos: [...draft.rhandOffset] as Vec3, rot: [...IDENTITY_ROT] as Mat3 },
    head_rot: [...IDENTITY_ROT] as Mat3,
  };
}

export function encodeFrame(frame: Frame): string {
  return JSON.stringify(frame);
}

const KINDS = new Set(["hello", "state", "command", "error"]);

export class ProtocolError extends Error {}

export function decodeFrame(text: string): Frame {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (e) {
    throw new ProtocolError(`frame is not JSON: ${e}`);
  }
  if (typeof raw !== "object" || raw === null) {
    throw new ProtocolError("frame must be an object");
  }
  const frame = raw as { kind?: unknown; seq?: unknown };
  if (typeof frame.kind !== "string" || !KINDS.has(frame.kind)) {
    throw new ProtocolError(`unknown frame kind: ${String(frame.kind)}`);
  }
  if (typeof frame.seq !== "number" || !Number.isInteger(frame.seq) || frame.seq < 0) {
    throw new ProtocolError("frame seq must be a non-negative integer");
  }
  return raw as Frame;
}

/** Tracks per-direction strictly increasing sequence numbers. */
export class SeqTracker {
  private last = -1;

  accept(seq: number): boolean {
    if (seq <= this.last) return false;
    this.last = seq;
    return true;
  }
}
