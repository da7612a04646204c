"""Scripted protocol client used to exercise the live service in tests.

Speaks the exact wire protocol of the browser cockpit: JSON frames over a
WebSocket. Collects every server frame it receives on a background thread
so tests can assert on ordering, rates, and completeness.
"""

from __future__ import annotations

import json
import threading
import time

import numpy as np
from websockets.sync.client import connect

from teleopsim import protocol
from teleopsim.se3 import Pose, UnitQuaternion


class SyntheticClient:
    def __init__(self, uri: str, open_timeout: float = 10.0):
        self.ws = connect(uri, open_timeout=open_timeout)
        self.frames: list[dict] = []
        self._lock = threading.Lock()
        self._closed = threading.Event()
        self._paused = threading.Event()
        self._paused.set()  # reading by default; pause_reading() stalls it
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    # -- receiving ----------------------------------------------------------

    def _read_loop(self) -> None:
        try:
            while True:
                self._paused.wait()
                text = self.ws.recv()
                with self._lock:
                    self.frames.append(json.loads(text))
        except Exception:
            self._closed.set()

    def pause_reading(self) -> None:
        """Stop consuming frames (simulates a stalled client)."""
        self._paused.clear()

    def resume_reading(self) -> None:
        self._paused.set()

    def snapshot(self) -> list[dict]:
        with self._lock:
            return list(self.frames)

    def frames_of(self, kind: str) -> list[dict]:
        return [f for f in self.snapshot() if f.get("kind") == kind]

    def wait_for(self, predicate, timeout: float = 10.0):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            for frame in self.snapshot():
                if predicate(frame):
                    return frame
            time.sleep(0.01)
        return None

    # -- sending ------------------------------------------------------------

    def send(self, msg: dict) -> None:
        self.ws.send(protocol.encode(msg))

    def send_raw(self, text: str) -> None:
        self.ws.send(text)

    def send_pose(self, pose: Pose, client_time: float = 0.0) -> None:
        self.send(protocol.stylus_pose_msg(pose, client_time))

    # -- scripted phases ------------------------------------------------------

    def engage(self, rate_hz: float = 125.0, timeout: float = 10.0) -> Pose:
        """Arm the latch and stream aligned poses until the server engages.

        With identity frame configuration the engagement target orientation
        equals the stylus orientation, so alignment means matching the
        follower orientation read back from the status stream.
        """
        self.send(protocol.engage_request_msg())
        self.send_pose(Pose.identity())
        status = self.wait_for(lambda f: f.get("kind") == "engagement_status", timeout)
        if status is None:
            raise TimeoutError("no engagement status received")
        follower_ori = UnitQuaternion(*status["measured"]["orientation"])
        aligned = Pose(np.zeros(3), follower_ori)
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            self.send_pose(aligned)
            done = self.wait_for(
                lambda f: f.get("kind") == "engagement_status" and f.get("engaged"), 1.0 / rate_hz
            )
            if done is not None:
                return aligned
        raise TimeoutError("engagement did not complete")

    def stream(self, poses, rate_hz: float = 60.0) -> None:
        period = 1.0 / rate_hz
        next_deadline = time.monotonic()
        for pose in poses:
            self.send_pose(pose)
            next_deadline += period
            delay = next_deadline - time.monotonic()
            if delay > 0:
                time.sleep(delay)

    def close(self) -> None:
        try:
            self.ws.close()
        except Exception:
            pass
        self._closed.wait(timeout=5.0)

    def __enter__(self):
        self.resume_reading()
        return self

    def __exit__(self, *exc):
        self.close()
