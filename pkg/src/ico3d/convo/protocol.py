"""Viewer wire protocol.

Control messages are UTF-8 JSON objects with a `type` field:
  {"type": "chat",   "text": str}
  {"type": "camera", "pose": [16 floats row-major], "intrinsics":
       {"fx", "fy", "cx", "cy", "width", "height"}}
  {"type": "event",  "kind": str, "detail": object}

Frame messages are binary, little-endian: u64 frame_index, u32 width,
u32 height, u8 format (0 = raw RGB8, 1 = PNG), then the payload. Audio
replies are WAV binaries announced by a preceding {"type": "event",
"kind": "audio"} control message.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from ..core.camera import CameraModel
from ..errors import InvalidInputError

FORMAT_RAW_RGB8 = 0
FORMAT_PNG = 1

EVENT_REPLY = "reply"
EVENT_AUDIO = "audio"
EVENT_BUSY = "busy"
EVENT_ERROR = "error"

_HEADER = struct.Struct("<QIIB")
_INTRINSIC_KEYS = ("fx", "fy", "cx", "cy", "width", "height")


def make_chat(text: str) -> str:
    return json.dumps({"type": "chat", "text": text})


def make_camera(camera: CameraModel) -> str:
    return json.dumps({
        "type": "camera",
        "pose": [float(v) for v in camera.world_to_camera.ravel()],
        "intrinsics": {"fx": camera.fx, "fy": camera.fy,
                       "cx": camera.cx, "cy": camera.cy,
                       "width": camera.width, "height": camera.height},
    })


def make_event(kind: str, detail=None) -> str:
    return json.dumps({"type": "event", "kind": kind, "detail": detail})


def parse_control(text: str) -> dict:
    try:
        msg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"control message is not JSON: {exc}") from exc
    if not isinstance(msg, dict) or "type" not in msg:
        raise InvalidInputError("control message must be an object with a type")
    kind = msg["type"]
    if kind == "chat":
        if not isinstance(msg.get("text"), str):
            raise InvalidInputError("chat message needs a text string")
    elif kind == "camera":
        pose = msg.get("pose")
        if not isinstance(pose, list) or len(pose) != 16 \
                or not all(isinstance(v, (int, float)) for v in pose):
            raise InvalidInputError("camera message needs 16 float pose values")
        intr = msg.get("intrinsics")
        if not isinstance(intr, dict) or set(intr) != set(_INTRINSIC_KEYS) \
                or not all(isinstance(intr[k], (int, float)) for k in _INTRINSIC_KEYS):
            raise InvalidInputError(
                "camera message needs intrinsics fx, fy, cx, cy, width, height")
    elif kind == "event":
        if not isinstance(msg.get("kind"), str):
            raise InvalidInputError("event message needs a kind string")
    else:
        raise InvalidInputError(f"unknown control message type {kind!r}")
    return msg


def camera_from_message(msg: dict) -> CameraModel:
    """Build the engine camera from a validated camera control message."""
    intr = msg["intrinsics"]
    return CameraModel(
        fx=float(intr["fx"]), fy=float(intr["fy"]),
        cx=float(intr["cx"]), cy=float(intr["cy"]),
        width=int(intr["width"]), height=int(intr["height"]),
        world_to_camera=np.array(msg["pose"], dtype=np.float64).reshape(4, 4))


@dataclass(frozen=True)
class FrameMessage:
    frame_index: int
    width: int
    height: int
    format: int
    payload: bytes


def encode_frame(frame_index: int, width: int, height: int, fmt: int,
                 payload: bytes) -> bytes:
    if fmt not in (FORMAT_RAW_RGB8, FORMAT_PNG):
        raise InvalidInputError(f"unknown frame format {fmt}")
    if fmt == FORMAT_RAW_RGB8 and len(payload) != width * height * 3:
        raise InvalidInputError(
            f"raw RGB8 payload must be {width * height * 3} bytes")
    return _HEADER.pack(frame_index, width, height, fmt) + payload


def decode_frame(data: bytes) -> FrameMessage:
    if len(data) < _HEADER.size:
        raise InvalidInputError(
            f"frame message shorter than its {_HEADER.size}-byte header")
    frame_index, width, height, fmt = _HEADER.unpack_from(data)
    payload = bytes(data[_HEADER.size:])
    if fmt == FORMAT_RAW_RGB8 and len(payload) != width * height * 3:
        raise InvalidInputError("raw RGB8 payload size does not match header")
    if fmt not in (FORMAT_RAW_RGB8, FORMAT_PNG):
        raise InvalidInputError(f"unknown frame format {fmt}")
    return FrameMessage(frame_index, width, height, fmt, payload)


def png_bytes(img: np.ndarray) -> bytes:
    """Encode a float image in [0,1] (H, W, 3) as PNG."""
    data = np.clip(np.asarray(img) * 255.0 + 0.5, 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(data, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def png_image(payload: bytes) -> np.ndarray:
    """Decode PNG bytes to a uint8 (H, W, 3) array."""
    try:
        return np.asarray(Image.open(io.BytesIO(payload)).convert("RGB"))
    except Exception as exc:
        raise InvalidInputError(f"payload is not a decodable PNG: {exc}") from exc


def frame_payload(img: np.ndarray, fmt: int) -> bytes:
    if fmt == FORMAT_PNG:
        return png_bytes(img)
    return np.clip(np.asarray(img) * 255.0 + 0.5, 0, 255).astype(np.uint8).tobytes()
