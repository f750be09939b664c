// Criterion: a scripted headless client drives the straight-walk input
// sequence through the live bridge; the resulting walk matches the recorded
// replay (byte-identical telemetry via the tick-sampled capture) and covers
// the required distance.

import { spawn } from "node:child_process";
import { createHash } from "node:crypto";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import WebSocket from "ws";
import { describe, expect, it } from "vitest";

import { advanceDraft, defaultInputConfig } from "../src/input.js";
import {
  clientHello,
  commandFrame,
  decodeFrame,
  encodeFrame,
  neutralDraft,
} from "../src/protocol.js";

const repoRoot = fileURLToPath(new URL("../..", import.meta.url));
const scenario = join(repoRoot,
  "src/telewalk/data/scenarios/straight_walk.yaml");

function runCli(args: string[]): Promise<{ code: number; out: string; err: string }> {
  return new Promise((resolve) => {
    const proc = spawn("python3", ["-m", "telewalk.cli", ...args],
                       { cwd: repoRoot });
    let out = "";
    let err = "";
    proc.stdout.on("data", (d) => (out += d));
    proc.stderr.on("data", (d) => (err += d));
    proc.on("close", (code) => resolve({ code: code ?? -1, out, err }));
  });
}

function summaryNumber(out: string, label: string): number {
  const line = out.split("\n").find((l) => l.startsWith(label));
  if (!line) throw new Error(`summary line '${label}' missing in:\n${out}`);
  return parseFloat(line.split(":")[1]);
}

function sha256(path: string): string {
  return createHash("sha256").update(readFileSync(path)).digest("hex");
}

describe("headless cockpit drive through the live bridge", () => {
  it("walks the straight-walk sequence and matches its replay", async () => {
    const dir = mkdtempSync(join(tmpdir(), "cockpit-e2e-"));
    const livePath = join(dir, "live.csv");
    const capturePath = join(dir, "capture.csv");
    const replayPath = join(dir, "replay.csv");
    const port = 21000 + Math.floor(Math.random() * 20000);

    const server = spawn("python3", ["-m", "telewalk.cli", "serve",
      "--config", scenario, "--port", String(port), "--duration", "12",
      "--set", "bridge.realtime_factor=25",
      "--set", "bridge.wait_for_client_s=20",
      "--out", livePath, "--capture", capturePath], { cwd: repoRoot });
    let serverOut = "";
    let serverErr = "";
    server.stdout.on("data", (d) => (serverOut += d));
    server.stderr.on("data", (d) => (serverErr += d));
    const serverExit = new Promise<number>((resolve) =>
      server.on("close", (code) => resolve(code ?? -1)));

    // Connect with retries while the server binds its socket.
    const ws = await (async () => {
      for (let attempt = 0; attempt < 100; attempt++) {
        try {
          return await new Promise<WebSocket>((resolve, reject) => {
            const sock = new WebSocket(`ws://127.0.0.1:${port}`);
            sock.once("open", () => resolve(sock));
            sock.once("error", reject);
          });
        } catch {
          await new Promise((r) => setTimeout(r, 100));
        }
      }
      throw new Error(`server never accepted on port ${port}\n${serverErr}`);
    })();

    let states = 0;
    let lastPhase = "";
    ws.on("message", (data) => {
      const frame = decodeFrame(String(data));
      if (frame.kind === "state") {
        states += 1;
        lastPhase = frame.phase;
      }
    });
    ws.send(encodeFrame(clientHello()));

    // Hold "forward" at the straight-walk speed: ramp to 0.2 and keep
    // streaming commands at the cockpit cadence until the server ends the run.
    const cfg = defaultInputConfig(0.2);
    let draft = neutralDraft();
    let seq = 0;
    const sender = setInterval(() => {
      if (ws.readyState !== WebSocket.OPEN) return;
      draft = advanceDraft(draft, { forward: 1, turn: 0 }, 1 / 30, cfg);
      seq += 1;
      ws.send(encodeFrame(commandFrame(draft, seq)));
    }, 1000 / 30);

    const code = await serverExit;
    clearInterval(sender);
    ws.close();

    expect(code).toBe(0);
    expect(states).toBeGreaterThan(10);
    expect(lastPhase).not.toBe("");

    const liveDistance = summaryNumber(serverOut, "distance walked");
    expect(liveDistance).toBeGreaterThan(0.5);

    // Replaying the captured tick-sampled commands reproduces the live run.
    const replay = await runCli(["replay", "--config", scenario,
      "--set", "duration=12", "--commands", capturePath, "--out", replayPath]);
    expect(replay.code).toBe(0);
    const replayDistance = summaryNumber(replay.out, "distance walked");
    expect(Math.abs(replayDistance - liveDistance)).toBeLessThan(1e-9);
    expect(sha256(replayPath)).toBe(sha256(livePath));
  }, 120_000);
});
