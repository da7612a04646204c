"""Live teleoperation session over a WebSocket.

One control-loop thread owns the session (controllers, follower, contact
world) exclusively and ticks it on an internal monotone clock at the
configured rate. The transport reader feeds messages through a
single-producer queue; per tick the loop coalesces queued stylus poses and
uses the most recent one. Outbound traffic is written by a single writer
task: safety events and errors go through an unbounded queue and are never
dropped; periodic state frames go through a bounded queue that drops the
oldest frame under backpressure, so a slow client can never stall the
control tick.

Sessions record the per-tick pose stream they actually consumed, which the
offline harness replays to a field-identical log.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path
from queue import Empty, Queue

import websockets

from . import protocol
from .config import ScenarioConfig, build_session
from .eye_hand import engagement_aligned
from .harness import write_log
from .se3 import Pose, quat_to_rotation, rotation_to_quat
from .world import LogRecord, TeleopSession


@dataclass
class TerminationReport:
    reason: str
    ticks: int
    overruns: int
    engaged: bool
    degraded: bool


class _Outbound:
    """Writer-side queues; state frames may drop, safety frames may not.

    Every enqueued frame is stamped with the next value of one shared
    sequence counter, so outbound tick indices are strictly increasing
    across all frame kinds. Only the control thread enqueues.
    """

    def __init__(self, state_capacity: int = 512):
        self.safety: deque = deque()
        self.state: deque = deque(maxlen=state_capacity)
        self._seq = 0

    def _stamp(self, msg: dict) -> str:
        msg["tick"] = self._seq
        self._seq += 1
        return protocol.encode(msg)

    def send_safety(self, msg: dict) -> None:
        self.safety.append(self._stamp(msg))

    def send_state(self, msg: dict) -> None:
        self.state.append(self._stamp(msg))


class SessionRecorder:
    """Captures the consumed pose stream and the produced log for replay."""

    def __init__(self):
        self.latch_pose: Pose | None = None
        self.poses: list[Pose | None] = []
        self.records: list[LogRecord] = []

    def record_latch(self, pose: Pose) -> None:
        self.latch_pose = pose

    def record_tick(self, pose: Pose | None, record: LogRecord) -> None:
        self.poses.append(pose)
        self.records.append(record)

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        write_log(self.records, directory / "log.jsonl")
        stream = {
            "latch": protocol.pose_to_wire(self.latch_pose) if self.latch_pose else None,
            "poses": [protocol.pose_to_wire(p) if p is not None else None for p in self.poses],
        }
        (directory / "inbound_stream.json").write_text(json.dumps(stream, separators=(",", ":")))


class ControlLoop(threading.Thread):
    """Fixed-rate session loop with exclusive ownership of the session."""

    def __init__(
        self,
        cfg: ScenarioConfig,
        inbound: Queue,
        outbound: _Outbound,
        stop_event: threading.Event,
        state_decimation: int = 4,
        engagement_timeout_s: float = 60.0,
    ):
        super().__init__(daemon=True)
        self.cfg = cfg
        self.session: TeleopSession = build_session(cfg)
        self.inbound = inbound
        self.outbound = outbound
        self.stop_event = stop_event
        self.state_decimation = state_decimation
        self.engagement_timeout_s = engagement_timeout_s
        self.recorder = SessionRecorder()
        self.report: TerminationReport | None = None
        self._limiter_enabled = cfg.safety.scaling_gain > 0.0
        self._configured_gain = cfg.safety.scaling_gain
        self._pedal = False
        self._latest_pose: Pose | None = None
        self._engage_armed = False
        self._overruns = 0
        self._max_force = 0.0
        self._contact_ticks = 0
        self._degraded = False

    def mark_degraded(self) -> None:
        """Transport lost: keep ticking on the last reference, flag the session."""
        self._degraded = True

    # -- inbound handling ---------------------------------------------------

    def _drain_inbound(self) -> None:
        while True:
            try:
                msg = self.inbound.get_nowait()
            except Empty:
                return
            kind = msg["kind"]
            if kind == "stylus_pose":
                self._latest_pose = msg["pose"]
            elif kind == "engage_request":
                self._engage_armed = True
            elif kind == "toggle_limiter":
                self._limiter_enabled = msg["enabled"]
                self._apply_gain()
            elif kind == "set_param":
                if msg["name"] == "reference_scaling_gain":
                    self._configured_gain = max(0.0, float(msg["value"]))
                    self._apply_gain()
            elif kind == "foot_pedal":
                self._pedal = msg["pressed"]

    def _apply_gain(self) -> None:
        gain = self._configured_gain if self._limiter_enabled else 0.0
        ctrl = self.session.interaction
        ctrl.safety = replace(ctrl.safety, scaling_gain=gain)

    # -- phases ---------------------------------------------------------------

    def run(self) -> None:
        period = self.cfg.period_s
        tick = 0
        engaged = False
        reason = "stopped"
        next_deadline = time.perf_counter() + period

        held_ticks = 0
        need_hold = max(1, int(round(self.cfg.engagement_hold_s / period)))
        engagement_ticks = int(round(self.engagement_timeout_s / period))

        # engagement phase: stream target vs measured until aligned long enough
        while not self.stop_event.is_set():
            self._drain_inbound()
            follower = self.session.follower.pose
            if self._latest_pose is not None:
                target = self.session.eye_hand.engagement_target(self._latest_pose, follower)
                target_pose = Pose(target.translation, rotation_to_quat(target.rotation))
                aligned = engagement_aligned(
                    quat_to_rotation(follower.orientation),
                    target.rotation,
                    self.cfg.engagement_tolerance_rad,
                )
                held_ticks = held_ticks + 1 if (aligned and self._engage_armed) else 0
                if held_ticks >= need_hold:
                    self.session.engage(self._latest_pose)
                    self.recorder.record_latch(self._latest_pose)
                    engaged = True
                    # the completion frame is critical: never dropped
                    self.outbound.send_safety(
                        protocol.engagement_status_msg(target_pose, follower, True, held_ticks * period, True)
                    )
                    break
                if tick % self.state_decimation == 0:
                    self.outbound.send_state(
                        protocol.engagement_status_msg(
                            target_pose, follower, aligned, held_ticks * period, False
                        )
                    )
            tick += 1
            if tick >= engagement_ticks:
                self.outbound.send_safety(protocol.error_msg("engagement timeout"))
                self.report = TerminationReport("engagement_timeout", 0, self._overruns, False, False)
                return
            next_deadline = self._pace(next_deadline, period)

        if not engaged:
            self.report = TerminationReport("stopped", 0, self._overruns, False, False)
            return

        # run phase
        prev_flags = (False, False, False)
        run_tick = 0
        while not self.stop_event.is_set():
            self._drain_inbound()
            pose = self._latest_pose
            record = self.session.tick(pose, run_tick * period)
            self.recorder.record_tick(pose, record)
            self._max_force = max(self._max_force, record.force_norm)
            if record.force_norm > 0.0:
                self._contact_ticks += 1

            flags = (record.stale_reference, record.deviation_clamped, record.emergency_active)
            if flags != prev_flags:
                self.outbound.send_safety(protocol.safety_event_msg(run_tick, *flags))
                prev_flags = flags
            if run_tick % self.state_decimation == 0:
                self.outbound.send_state(protocol.state_msg(run_tick, record, self._limiter_enabled, self._pedal))
                self.outbound.send_state(protocol.feedback_force_msg(run_tick, record.feedback_force))
            if run_tick % 125 == 0:
                self.outbound.send_state(
                    protocol.stats_snapshot_msg(
                        run_tick, run_tick + 1, self._contact_ticks, self._max_force, self._overruns
                    )
                )
            run_tick += 1
            next_deadline = self._pace(next_deadline, period)

        reason = "client_disconnected" if self.stop_event.is_set() else reason
        self.report = TerminationReport(reason, run_tick, self._overruns, True, self._degraded)

    def _pace(self, deadline: float, period: float) -> float:
        now = time.perf_counter()
        if now < deadline:
            time.sleep(deadline - now)
        else:
            self._overruns += 1
        return deadline + period


class TeleopServer:
    """Single-session WebSocket server wrapping the control loop."""

    def __init__(
        self,
        cfg: ScenarioConfig,
        host: str = "127.0.0.1",
        port: int = 0,
        record_dir=None,
        state_decimation: int = 4,
        engagement_timeout_s: float = 60.0,
        state_capacity: int = 512,
    ):
        self.cfg = cfg
        self.host = host
        self.port = port
        self.record_dir = record_dir
        self.state_decimation = state_decimation
        self.engagement_timeout_s = engagement_timeout_s
        self.state_capacity = state_capacity
        self.last_report: TerminationReport | None = None
        self.last_recorder: SessionRecorder | None = None
        self._busy = False
        self._loop: asyncio.AbstractEventLoop | None = None
        self._stopped: asyncio.Event | None = None
        self._thread: threading.Thread | None = None
        self._ready = threading.Event()

    async def _writer(self, ws, outbound: _Outbound, stop: threading.Event):
        # single writer: safety first, never dropped; then state frames
        try:
            while True:
                sent = False
                while outbound.safety:
                    await ws.send(outbound.safety.popleft())
                    sent = True
                while outbound.state:
                    await ws.send(outbound.state.popleft())
                    sent = True
                if stop.is_set() and not outbound.safety and not outbound.state:
                    return
                if not sent:
                    await asyncio.sleep(0.002)
        except websockets.ConnectionClosed:
            return

    async def _handle(self, ws):
        if self._busy:
            await ws.send(protocol.encode(protocol.error_msg("session already in progress")))
            await ws.close()
            return
        self._busy = True
        inbound: Queue = Queue()
        outbound = _Outbound.create()
        stop = threading.Event()
        loop = ControlLoop(
            self.cfg,
            inbound,
            outbound,
            stop,
            state_decimation=self.state_decimation,
            engagement_timeout_s=self.engagement_timeout_s,
        )
        loop.start()
        writer = asyncio.create_task(self._writer(ws, outbound, stop))
        try:
            async for text in ws:
                try:
                    inbound.put(protocol.decode_inbound(text))
                except protocol.ProtocolError as exc:
                    outbound.send_safety(protocol.error_msg(str(exc)))
        except websockets.ConnectionClosedOK:
            pass
        except websockets.ConnectionClosedError:
            # transport lost: let the loop demonstrate the stale-reference
            # hold briefly before shutting the session down
            loop.mark_degraded()
            await asyncio.sleep(0.5)
        finally:
            stop.set()
            loop.join(timeout=5.0)
            try:
                await asyncio.wait_for(writer, timeout=5.0)
            except (asyncio.TimeoutError, websockets.ConnectionClosed):
                writer.cancel()
            self.last_report = loop.report
            self.last_recorder = loop.recorder
            if self.record_dir is not None and loop.recorder.latch_pose is not None:
                loop.recorder.save(self.record_dir)
            self._busy = False

    async def _amain(self):
        self._stopped = asyncio.Event()
        async with websockets.serve(self._handle, self.host, self.port) as server:
            self.port = server.sockets[0].getsockname()[1]
            self._loop = asyncio.get_running_loop()
            self._ready.set()
            await self._stopped.wait()

    def start(self) -> int:
        """Run the server in a background thread; returns the bound port."""
        self._thread = threading.Thread(target=lambda: asyncio.run(self._amain()), daemon=True)
        self._thread.start()
        if not self._ready.wait(timeout=10.0):
            raise RuntimeError("server failed to start")
        return self.port

    def stop(self) -> None:
        if self._loop is not None and self._stopped is not None:
            self._loop.call_soon_threadsafe(self._stopped.set)
        if self._thread is not None:
            self._thread.join(timeout=10.0)

    def run_forever(self) -> None:
        """Blocking entry point used by the CLI."""
        try:
            asyncio.run(self._amain())
        except KeyboardInterrupt:
            pass


def load_recorded_stream(directory) -> tuple[Pose, list[Pose | None]]:
    """Read a recorded inbound stream for offline replay."""
    data = json.loads((Path(directory) / "inbound_stream.json").read_text())
    latch = protocol.pose_from_wire(data["latch"])
    poses = [protocol.pose_from_wire(p) if p is not None else None for p in data["poses"]]
    return latch, poses
