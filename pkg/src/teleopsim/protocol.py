"""Wire protocol of the live teleoperation service.

JSON messages, one per WebSocket frame. Every message carries the protocol
version under ``"v"`` and its kind under ``"kind"``.

Client to server kinds:

* ``stylus_pose``: {position: [x,y,z], orientation: [w,x,y,z], client_time}
* ``engage_request``: arms the engagement latch
* ``set_param``: {name, value} (currently ``reference_scaling_gain``)
* ``toggle_limiter``: {enabled}
* ``foot_pedal``: {pressed}

Server to client kinds: ``state``, ``engagement_status``, ``safety_event``,
``feedback_force``, ``stats_snapshot``, and ``error`` for rejected input.
Every server frame carries ``tick``, a strictly increasing sequence number
stamped at enqueue time; frames tied to a control cycle additionally carry
``control_tick``. Client timestamps are informational; the server clock is
authoritative.
"""

from __future__ import annotations

import json

import numpy as np

from .se3 import Pose, UnitQuaternion
from .world import LogRecord, record_to_obj

PROTOCOL_VERSION = 1

INBOUND_KINDS = {"stylus_pose", "engage_request", "set_param", "toggle_limiter", "foot_pedal"}
OUTBOUND_KINDS = {"state", "engagement_status", "safety_event", "feedback_force", "stats_snapshot", "error"}

SETTABLE_PARAMS = {"reference_scaling_gain"}


class ProtocolError(ValueError):
    """Malformed or unsupported wire message."""


def encode(msg: dict) -> str:
    return json.dumps(msg, separators=(",", ":"))


def pose_to_wire(pose: Pose) -> dict:
    q = pose.orientation
    return {"position": [float(v) for v in pose.position], "orientation": [q.w, q.x, q.y, q.z]}


def pose_from_wire(obj) -> Pose:
    try:
        position = np.array(obj["position"], dtype=float).reshape(3)
        wxyz = [float(v) for v in obj["orientation"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"bad pose payload: {exc}") from exc
    if len(wxyz) != 4:
        raise ProtocolError("orientation must have 4 components")
    norm = float(np.linalg.norm(wxyz))
    if not 0.9 < norm < 1.1:
        raise ProtocolError(f"orientation is not a unit quaternion (norm {norm:.3f})")
    return Pose(position, UnitQuaternion(*wxyz))


def decode_inbound(text: str) -> dict:
    try:
        msg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"invalid JSON: {exc}") from exc
    if not isinstance(msg, dict):
        raise ProtocolError("message must be an object")
    if msg.get("v") != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version: {msg.get('v')!r}")
    kind = msg.get("kind")
    if kind not in INBOUND_KINDS:
        raise ProtocolError(f"unknown inbound kind: {kind!r}")
    if kind == "stylus_pose":
        msg["pose"] = pose_from_wire(msg)
    elif kind == "set_param":
        if msg.get("name") not in SETTABLE_PARAMS:
            raise ProtocolError(f"unknown parameter: {msg.get('name')!r}")
        if not isinstance(msg.get("value"), (int, float)) or isinstance(msg.get("value"), bool):
            raise ProtocolError("parameter value must be a number")
    elif kind == "toggle_limiter":
        if not isinstance(msg.get("enabled"), bool):
            raise ProtocolError("toggle_limiter needs a boolean 'enabled'")
    elif kind == "foot_pedal":
        if not isinstance(msg.get("pressed"), bool):
            raise ProtocolError("foot_pedal needs a boolean 'pressed'")
    return msg


def stylus_pose_msg(pose: Pose, client_time: float = 0.0) -> dict:
    msg = {"v": PROTOCOL_VERSION, "kind": "stylus_pose", "client_time": client_time}
    msg.update(pose_to_wire(pose))
    return msg


def engage_request_msg() -> dict:
    return {"v": PROTOCOL_VERSION, "kind": "engage_request"}


def toggle_limiter_msg(enabled: bool) -> dict:
    return {"v": PROTOCOL_VERSION, "kind": "toggle_limiter", "enabled": enabled}


def set_param_msg(name: str, value: float) -> dict:
    return {"v": PROTOCOL_VERSION, "kind": "set_param", "name": name, "value": value}


def foot_pedal_msg(pressed: bool) -> dict:
    return {"v": PROTOCOL_VERSION, "kind": "foot_pedal", "pressed": pressed}


def state_msg(control_tick: int, record: LogRecord, limiter_enabled: bool, pedal: bool) -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "kind": "state",
        "control_tick": control_tick,
        "record": record_to_obj(record),
        "limiter_enabled": limiter_enabled,
        "foot_pedal": pedal,
    }


def engagement_status_msg(target: Pose, measured: Pose, aligned: bool, held_s: float, engaged: bool) -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "kind": "engagement_status",
        "target": pose_to_wire(target),
        "measured": pose_to_wire(measured),
        "aligned": aligned,
        "held_s": held_s,
        "engaged": engaged,
    }


def safety_event_msg(control_tick: int, stale: bool, clamped: bool, emergency: bool) -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "kind": "safety_event",
        "control_tick": control_tick,
        "stale_reference": stale,
        "deviation_clamped": clamped,
        "emergency_active": emergency,
    }


def feedback_force_msg(control_tick: int, force) -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "kind": "feedback_force",
        "control_tick": control_tick,
        "force": [float(v) for v in force],
    }


def stats_snapshot_msg(control_tick: int, ticks: int, contact_ticks: int, max_force: float, overruns: int) -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "kind": "stats_snapshot",
        "control_tick": control_tick,
        "ticks": ticks,
        "contact_ticks": contact_ticks,
        "max_force": max_force,
        "overruns": overruns,
    }


def error_msg(message: str) -> dict:
    return {"v": PROTOCOL_VERSION, "kind": "error", "message": message}
