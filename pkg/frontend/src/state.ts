// Cockpit-side view of the simulation: the latest state snapshot plus short
// traces for the arena. Display only; simulation truth never originates here.

import { SeqTracker, StateFrame, Vec2 } from "./protocol.js";

export const STALE_AFTER_MS = 1000;

export type Connection = "connecting" | "connected" | "closed";

export class TraceBuffer {
  private buf: Vec2[] = [];

  constructor(readonly capacity: number) {}

  push(p: Vec2): void {
    this.buf.push([p[0], p[1]]);
    if (this.buf.length > this.capacity) this.buf.shift();
  }

  points(): readonly Vec2[] {
    return this.buf;
  }

  clear(): void {
    this.buf = [];
  }
}

export class CockpitState {
  latest: StateFrame | null = null;
  connection: Connection = "connecting";
  lastStateWallMs = -Infinity;
  droppedFrames = 0;
  executed: { foot: string; x: number; y: number; yaw: number }[] = [];
  readonly comTrace = new TraceBuffer(600);
  readonly dcmTrace = new TraceBuffer(600);
  readonly zmpTrace = new TraceBuffer(600);
  private seq = new SeqTracker();
  private lastPhase = "stand";

  applyState(frame: StateFrame, wallMs: number): boolean {
    if (!this.seq.accept(frame.seq)) {
      this.droppedFrames += 1;
      return false;
    }
    // A swing that just ended means the previous plan's first step landed.
    if (this.lastPhase.startsWith("ss_") && frame.phase !== this.lastPhase) {
      const foot = this.lastPhase === "ss_left" ? "left" : "right";
      const landed = frame.feet[foot as "left" | "right"];
      this.executed.push({ foot, x: landed.x, y: landed.y, yaw: landed.yaw });
      if (this.executed.length > 60) this.executed.shift();
    }
    this.lastPhase = frame.phase;
    this.latest = frame;
    this.lastStateWallMs = wallMs;
    this.comTrace.push(frame.com);
    this.dcmTrace.push(frame.dcm);
    this.zmpTrace.push(frame.zmp);
    return true;
  }

  isStale(wallMs: number): boolean {
    return this.latest !== null && wallMs - this.lastStateWallMs > STALE_AFTER_MS;
  }
}
