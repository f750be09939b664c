"""Live teleoperation bridge: state out, operator commands in, over WebSocket.

JSON text frames against the schema shipped in data/protocol.schema.json. The
simulation runs as an asyncio task paced by a realtime factor; the only shared
points with the connection handlers are a latest-command mailbox and bounded
per-client snapshot queues (oldest dropped first, command intake never blocks).
"""

from __future__ import annotations

import asyncio
import collections
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from jsonschema import Draft7Validator

from .config import ScenarioConfig
from .retarget import OperatorCommand
from .simloop import (
    CommandStream,
    RunSummary,
    World,
    init_world,
    step,
    write_command_stream,
)
from .spatial import Transform, check_rotation
from .telemetry import TelemetryRecord, TelemetryWriter

PROTOCOL_VERSION = 1


def load_protocol_schema() -> dict:
    text = resources.files("telewalk").joinpath("data/protocol.schema.json").read_text()
    return json.loads(text)


_validator = Draft7Validator(load_protocol_schema())


class ProtocolError(ValueError):
    pass


def encode_frame(frame: dict) -> str:
    errors = sorted(_validator.iter_errors(frame), key=str)
    if errors:
        raise ProtocolError(f"outbound frame invalid: {errors[0].message}")
    return json.dumps(frame, separators=(",", ":"))


def decode_frame(text: str) -> dict:
    try:
        frame = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"frame is not JSON: {e}") from e
    errors = sorted(_validator.iter_errors(frame), key=str)
    if errors:
        raise ProtocolError(f"frame invalid: {errors[0].message}")
    return frame


def command_from_frame(frame: dict, time: float) -> OperatorCommand:
    def transform(h):
        R = np.asarray(h["rot"], dtype=float).reshape(3, 3)
        check_rotation(R, "hand rotation")
        return Transform(R, np.asarray(h["pos"], dtype=float))

    head = np.asarray(frame["head_rot"], dtype=float).reshape(3, 3)
    check_rotation(head, "head rotation")
    return OperatorCommand(time, float(frame["v_u"]), float(frame["theta_u"]),
                           transform(frame["lhand"]), transform(frame["rhand"]),
                           head)


def command_to_frame(cmd: OperatorCommand, seq: int) -> dict:
    def hand(t: Transform):
        return {"pos": [float(v) for v in t.translation],
                "rot": [float(v) for v in t.rotation.reshape(9)]}

    return {"kind": "command", "seq": seq, "v_u": float(cmd.walk_speed),
            "theta_u": float(cmd.heading), "lhand": hand(cmd.left_hand),
            "rhand": hand(cmd.right_hand),
            "head_rot": [float(v) for v in cmd.head_orientation.reshape(9)]}


def state_frame(world: World, record: TelemetryRecord, seq: int) -> dict:
    g = world.gait
    kin_feet = {}
    for side, ref in (("left", g.ref_left), ("right", g.ref_right)):
        kin_feet[side] = {"x": float(ref[0]), "y": float(ref[1]),
                          "yaw": float(ref[2])}
    footsteps = []
    if g.plan is not None:
        for s in g.plan.footsteps:
            footsteps.append({"foot": s.foot, "x": float(s.pose2d[0]),
                              "y": float(s.pose2d[1]), "yaw": float(s.pose2d[2]),
                              "impact_time": float(s.impact_time),
                              "executed": False})
    hands = {}
    for side, err_p, err_r in (("left", record.lhand_err_pos, record.lhand_err_rot),
                               ("right", record.rhand_err_pos, record.rhand_err_rot)):
        # target = measured - error by the error definition
        pos = world.last_hand_pos[side]
        hands[side] = {"pos": [float(v) for v in pos],
                       "target": [float(v) for v in (pos - err_p)],
                       "err_pos": [float(v) for v in err_p],
                       "err_rot": [float(v) for v in err_r]}
    base = world.robot.base_pose
    return {
        "kind": "state", "seq": seq, "t": record.t, "phase": record.phase,
        "base": {"x": float(base.translation[0]), "y": float(base.translation[1]),
                 "yaw": record.base_yaw},
        "com": [float(v) for v in record.com],
        "com_ref": [float(v) for v in record.com_ref],
        "dcm": [float(v) for v in record.dcm],
        "dcm_ref": [float(v) for v in record.dcm_ref],
        "zmp": [float(v) for v in record.zmp_applied],
        "zmp_ref": [float(v) for v in record.zmp_ref],
        "feet": kin_feet,
        "footsteps": footsteps,
        "hands": hands,
        "qp": {"objective": record.qp_objective, "residual": record.qp_residual},
    }


@dataclass
class Mailbox:
    """Latest-command slot written by the session, read once per tick."""

    command: OperatorCommand | None = None
    last_update: float = -1.0          # sim time of the latest write
    connected: bool = False

    def write(self, cmd: OperatorCommand, now: float):
        self.command = cmd
        self.last_update = now


@dataclass
class BridgeState:
    mailbox: Mailbox = field(default_factory=Mailbox)
    clients: list = field(default_factory=list)
    operator: object = None
    stop: bool = False


class LiveCommandSource:
    """Command provider for the sim loop: hold, then decay after disconnect."""

    def __init__(self, mailbox: Mailbox, grace_s: float, decay_s: float):
        self.mailbox = mailbox
        self.grace_s = grace_s
        self.decay_s = decay_s
        self.disconnect_time: float | None = None

    def at(self, t: float) -> OperatorCommand:
        cmd = self.mailbox.command
        if cmd is None:
            return OperatorCommand.neutral(t)
        if self.mailbox.connected:
            return cmd
        if self.disconnect_time is None:
            return cmd
        elapsed = t - self.disconnect_time
        if elapsed <= self.grace_s:
            return cmd
        u = (elapsed - self.grace_s) / self.decay_s
        scale = max(0.0, 1.0 - u)
        return OperatorCommand(t, cmd.walk_speed * scale, cmd.heading,
                               cmd.left_hand, cmd.right_hand,
                               cmd.head_orientation)


class BridgeServer:
    """One simulating server; first client is the operator, others observe."""

    def __init__(self, config: ScenarioConfig, port: int | None = None,
                 duration: float | None = None, telemetry_path=None,
                 capture_path=None):
        self.config = config
        self.port = port if port is not None else int(config.bridge["port"])
        self.duration = duration if duration is not None else config.duration
        self.telemetry_path = telemetry_path
        self.capture_path = capture_path
        self.state = BridgeState()
        self.source = LiveCommandSource(
            self.state.mailbox,
            float(config.bridge["disconnect_grace_s"]),
            float(config.bridge["decay_time_s"]))
        self.summary: RunSummary | None = None
        self.bound_port: int | None = None
        self._server = None
        self._state_seq = 0
        self._operator_lost = False

    async def _send_error(self, ws, seq: int, message: str):
        try:
            await ws.send(encode_frame({"kind": "error", "seq": seq,
                                        "message": message}))
        except Exception:
            pass

    async def _handle_client(self, ws):
        st = self.state
        role = "operator" if st.operator is None else "observer"
        hello = {"kind": "hello", "seq": 0, "protocol": PROTOCOL_VERSION,
                 "role": "server",
                 "model": {"name": self.config.model.name,
                           "joints": self.config.model.n_joints},
                 "dt": self.config.dt,
                 "max_walk_speed": float(self.config.bridge["max_walk_speed"])}
        await ws.send(encode_frame(hello))
        try:
            first = decode_frame(await ws.recv())
            if first.get("kind") != "hello":
                await self._send_error(ws, 1, "hello must be the first frame")
                return
            if first.get("protocol") != PROTOCOL_VERSION:
                await self._send_error(
                    ws, 1, f"protocol version mismatch: server speaks "
                           f"{PROTOCOL_VERSION}")
                return
        except ProtocolError as e:
            await self._send_error(ws, 1, str(e))
            return
        except Exception:
            return

        queue: collections.deque = collections.deque(maxlen=8)
        wakeup = asyncio.Event()
        client = {"ws": ws, "queue": queue, "wakeup": wakeup, "role": role}
        st.clients.append(client)
        if role == "operator":
            st.operator = client
            st.mailbox.connected = True
        err_seq = 1
        last_cmd_seq = -1

        async def sender():
            while True:
                while queue:
                    try:
                        await ws.send(queue.popleft())
                    except Exception:
                        return
                if st.stop:
                    return
                wakeup.clear()
                try:
                    await asyncio.wait_for(wakeup.wait(), timeout=0.05)
                except asyncio.TimeoutError:
                    pass

        send_task = asyncio.create_task(sender())
        try:
            async for message in ws:
                try:
                    frame = decode_frame(message)
                except ProtocolError as e:
                    err_seq += 1
                    await self._send_error(ws, err_seq, str(e))
                    continue  # malformed frame: session survives
                if frame["kind"] == "command":
                    if role != "operator":
                        err_seq += 1
                        await self._send_error(ws, err_seq,
                                               "observer sessions are read-only")
                        continue
                    if frame["seq"] <= last_cmd_seq:
                        err_seq += 1
                        await self._send_error(ws, err_seq,
                                               "seq must strictly increase")
                        continue
                    last_cmd_seq = frame["seq"]
                    try:
                        cmd = command_from_frame(frame, 0.0)
                    except ValueError as e:
                        err_seq += 1
                        await self._send_error(ws, err_seq, str(e))
                        continue
                    speed = min(cmd.walk_speed,
                                float(self.config.bridge["max_walk_speed"]))
                    cmd = OperatorCommand(cmd.time, speed, cmd.heading,
                                          cmd.left_hand, cmd.right_hand,
                                          cmd.head_orientation)
                    st.mailbox.write(cmd, 0.0)
                elif frame["kind"] == "hello":
                    pass  # repeated hello tolerated
                else:
                    err_seq += 1
                    await self._send_error(ws, err_seq,
                                           f"unexpected kind {frame['kind']}")
        except Exception:
            pass
        finally:
            send_task.cancel()
            st.clients.remove(client)
            if st.operator is client:
                st.operator = None
                st.mailbox.connected = False
                self.source.disconnect_time = None  # set by sim task at sim time
                self._operator_lost = True

    async def _sim_task(self):
        cfg = self.config
        world = init_world(cfg)
        n_ticks = int(round(self.duration / cfg.dt))
        state_every = max(1, int(round(1.0 / (float(cfg.bridge["state_rate_hz"])
                                              * cfg.dt))))
        factor = float(cfg.bridge["realtime_factor"])
        tick_wall = cfg.dt / factor if factor > 0 else 0.0

        buffer = io.StringIO()
        writer = TelemetryWriter(buffer, cfg.model.n_joints)
        consumed: list[OperatorCommand] = []
        loop = asyncio.get_event_loop()
        next_deadline = loop.time()
        dcm_sq = 0.0
        max_residual = 0.0
        start = world.lipm.x.copy()
        record = None

        for k in range(n_ticks):
            if self.state.stop:
                break
            if self._operator_lost and self.source.disconnect_time is None:
                self.source.disconnect_time = world.time
                self._operator_lost = False
            cmd = self.source.at(world.time)
            consumed.append(OperatorCommand(world.time, cmd.walk_speed, cmd.heading,
                                            cmd.left_hand, cmd.right_hand,
                                            cmd.head_orientation))
            record = step(world, cmd)
            err = record.dcm - record.dcm_ref
            dcm_sq += float(err @ err)
            max_residual = max(max_residual, record.qp_residual)
            writer.write(record)
            if k % state_every == 0:
                frame = encode_frame(state_frame(world, record, self._state_seq))
                self._state_seq += 1
                for client in list(self.state.clients):
                    client["queue"].append(frame)   # deque drops oldest itself
                    client["wakeup"].set()
            if tick_wall > 0:
                next_deadline += tick_wall
                delay = next_deadline - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
                else:
                    # Compute-bound: yield so client I/O interleaves, and do
                    # not accumulate pacing debt.
                    await asyncio.sleep(0)
                    next_deadline = loop.time()
            else:
                await asyncio.sleep(0)

        text = buffer.getvalue()
        if self.telemetry_path is not None:
            Path(self.telemetry_path).write_text(text, encoding="utf-8")
        if self.capture_path is not None:
            cap = io.StringIO()
            write_command_stream(CommandStream(consumed), cap)
            Path(self.capture_path).write_text(cap.getvalue(), encoding="utf-8")
        self.summary = RunSummary(
            status="ok", ticks=world.tick,
            distance=float(np.linalg.norm(world.lipm.x - start)),
            dcm_rms=math.sqrt(dcm_sq / max(world.tick, 1)),
            max_qp_residual=max_residual,
            final_base_yaw=record.base_yaw if record is not None else 0.0,
            limit_violations=world.limit_violations,
            telemetry_sha256=hashlib.sha256(text.encode()).hexdigest(),
            dt=cfg.dt)
        self.state.stop = True

    async def run(self) -> RunSummary:
        import websockets

        async with websockets.serve(self._handle_client, "127.0.0.1",
                                    self.port) as server:
            self._server = server
            sockets = list(server.sockets or [])
            self.bound_port = sockets[0].getsockname()[1] if sockets else self.port
            # Optionally hold the sim clock until an operator shows up, so
            # short accelerated runs don't finish before anyone connects.
            wait_s = float(self.config.bridge.get("wait_for_client_s", 0.0))
            loop = asyncio.get_event_loop()
            deadline = loop.time() + wait_s
            while (self.state.operator is None and not self.state.stop
                   and loop.time() < deadline):
                await asyncio.sleep(0.005)
            await self._sim_task()
            # Let per-client senders drain their queues before closing.
            flush_deadline = loop.time() + 2.0
            while (any(c["queue"] for c in self.state.clients)
                   and loop.time() < flush_deadline):
                await asyncio.sleep(0.01)
        return self.summary


def serve(config: ScenarioConfig, port: int | None = None,
          duration: float | None = None, telemetry_path=None,
          capture_path=None) -> RunSummary:
    server = BridgeServer(config, port=port, duration=duration,
                          telemetry_path=telemetry_path,
                          capture_path=capture_path)
    return asyncio.run(server.run())
