"""WebSocket avatar service: streams rendered frames, answers chat turns.

One websocket endpoint, `/ws`. The server pushes binary frame messages
at the session fps and listens for JSON control messages (chat, camera).
A chat turn replies with a `reply` event, an `audio` event, and the WAV
bytes; stage failures and malformed controls come back as `error`
events, and turns arriving mid-action as `busy` events.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from ..anim import (ActionSegment, KeyframeLibrary, format_keyframes,
                    parse_keyframes)
from ..body.model import BodyModel
from ..compose import composed_transform, format_rig, parse_rig, transform_set
from ..compose.align import RigAlignment
from ..core.bundle import load_bundle, save_bundle
from ..core.camera import CameraModel, default_camera
from ..core.gaussians import GaussianSet, concat, logit
from ..core.sh import rgb_to_dc
from ..errors import (InvalidInputError, SessionBusyError, StageFailureError)
from ..head.model import HeadModel, head_forward
from ..render import render_tiled
from .protocol import (EVENT_AUDIO, EVENT_BUSY, EVENT_ERROR, EVENT_REPLY,
                       FORMAT_PNG, camera_from_message, encode_frame,
                       frame_payload, make_event, parse_control)
from .session import FrameScheduler, PipelineConfig, Session

META_KEYFRAMES = "keyframes"
META_RIG = "rig"


def default_library(body: Optional[BodyModel]) -> KeyframeLibrary:
    """A usable library for bundles that do not ship one: rest on the
    first two frames, one reversible action over the remaining span."""
    n = body.n_frames if body is not None else 2
    if n < 2:
        n = 2
    action = ActionSegment(1, n - 1) if n > 2 else ActionSegment(0, 1)
    return KeyframeLibrary(n_frames=n, rest_start=0, rest_end=1,
                           actions=(action,))


@dataclass
class AvatarAssets:
    """Everything the live service needs to draw one avatar.

    `splats` holds the static head-side geometry (aligned head plus any
    injected border splats) with the head-model-driven rows first; the
    body contributes per-frame splats through its window models.
    """

    splats: GaussianSet
    head: Optional[HeadModel] = None
    body: Optional[BodyModel] = None
    library: KeyframeLibrary = field(default_factory=lambda: default_library(None))
    rig: Optional[RigAlignment] = None
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.head is not None and self.head.count > self.splats.count:
            raise InvalidInputError(
                f"head model drives {self.head.count} splats but the bundle "
                f"only has {self.splats.count}")
        if self.body is not None and self.library.n_frames > self.body.n_frames:
            raise InvalidInputError(
                f"keyframe library spans {self.library.n_frames} frames but "
                f"the body model only has {self.body.n_frames}")
        if self.rig is not None and self.body is not None \
                and self.rig.n_frames < self.library.n_frames:
            raise InvalidInputError(
                "rig sidecar has fewer frames than the keyframe library")


def meta_text(bundle_meta: dict, key: str) -> Optional[str]:
    # bundle META values are single-line, so sidecar text rides as JSON strings
    if key not in bundle_meta:
        return None
    try:
        text = json.loads(bundle_meta[key])
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"meta entry {key!r} is not a JSON string") from exc
    if not isinstance(text, str):
        raise InvalidInputError(f"meta entry {key!r} is not a JSON string")
    return text


def load_assets(path) -> AvatarAssets:
    bundle = load_bundle(path)
    lib_text = meta_text(bundle.meta, META_KEYFRAMES)
    lib = (parse_keyframes(lib_text) if lib_text is not None
           else default_library(bundle.body))
    rig_text = meta_text(bundle.meta, META_RIG)
    rig = parse_rig(rig_text) if rig_text is not None else None
    return AvatarAssets(splats=bundle.splats, head=bundle.head,
                        body=bundle.body, library=lib, rig=rig)


def save_assets(path, assets: AvatarAssets) -> None:
    meta = {META_KEYFRAMES: json.dumps(format_keyframes(assets.library))}
    if assets.rig is not None:
        meta[META_RIG] = json.dumps(format_rig(assets.rig))
    save_bundle(path, assets.splats, head=assets.head, body=assets.body,
                meta=meta)


def assemble_avatar(assets: AvatarAssets, body_frame: int,
                    expression: np.ndarray) -> GaussianSet:
    """Splats to draw for one tick: head rows recolored by the expression
    model, optional rig placement relative to its frame-0 pose, body
    splats deformed to the keyframe."""
    base = assets.splats
    if assets.head is not None and assets.head.count:
        n = assets.head.count
        rgb, opacity = head_forward(assets.head, expression, base.means[:n])
        base = base.copy()
        base.sh_coeffs[:n, 0, :] = rgb_to_dc(rgb)
        base.opacity_logits[:n] = logit(opacity)
    if assets.rig is not None and base.count:
        t_rel = composed_transform(assets.rig, body_frame).compose(
            composed_transform(assets.rig, 0).inverse())
        base = transform_set(base, t_rel)
    if assets.body is not None:
        return concat(base, assets.body.frame_set(body_frame))
    return base


def render_avatar(assets: AvatarAssets, body_frame: int,
                  expression: np.ndarray, camera: CameraModel,
                  workers: int = 1):
    return render_tiled(assemble_avatar(assets, body_frame, expression),
                        camera, background=assets.background, workers=workers)


def default_view(assets: AvatarAssets, width: int = 128,
                 height: int = 128) -> CameraModel:
    """Frame the whole avatar: look at its centroid from along -z."""
    pts = [assets.splats.means] if assets.splats.count else []
    if assets.body is not None:
        pts.append(assets.body.frame_set(assets.library.rest_start).means)
    if not pts:
        return default_camera(width, height)
    allpts = np.vstack(pts)
    center = allpts.mean(axis=0)
    radius = float(np.linalg.norm(allpts - center, axis=1).max())
    distance = max(3.0 * radius, 1.0)
    eye = center - np.array([0.0, 0.0, distance])
    return default_camera(width, height, eye=eye, target=center)


def create_app(assets: AvatarAssets, config: Optional[PipelineConfig] = None,
               *, frame_format: int = FORMAT_PNG, width: int = 128,
               height: int = 128, workers: int = 1, seed: int = 0) -> FastAPI:
    cfg = config if config is not None else PipelineConfig()
    app = FastAPI()

    @app.websocket("/ws")
    async def ws(websocket: WebSocket):
        await websocket.accept()
        session = Session(assets.library, default_view(assets, width, height),
                          cfg, rng=np.random.default_rng(seed))
        send_lock = asyncio.Lock()

        async def send_text(text: str) -> None:
            async with send_lock:
                await websocket.send_text(text)

        async def send_bytes(data: bytes) -> None:
            async with send_lock:
                await websocket.send_bytes(data)

        async def produce_frames() -> None:
            scheduler = FrameScheduler(fps=cfg.fps)
            while True:
                tick = scheduler.next_due()
                if tick is None:
                    await asyncio.sleep(0.25 / cfg.fps)
                    continue
                frame, expression = session.anim_at(tick)
                cam = session.camera
                rendered = await asyncio.to_thread(
                    render_avatar, assets, frame, expression, cam, workers)
                payload = frame_payload(rendered.rgb, frame_format)
                await send_bytes(encode_frame(tick, cam.width, cam.height,
                                              frame_format, payload))

        async def handle_chat(text: str) -> None:
            try:
                result = await asyncio.to_thread(session.handle_turn, text)
            except SessionBusyError as exc:
                await send_text(make_event(EVENT_BUSY, str(exc)))
                return
            except (InvalidInputError, StageFailureError) as exc:
                await send_text(make_event(EVENT_ERROR, str(exc)))
                return
            await send_text(make_event(EVENT_REPLY, result.reply_text))
            await send_text(make_event(EVENT_AUDIO,
                                       {"bytes": len(result.audio)}))
            await send_bytes(result.audio)

        producer = asyncio.create_task(produce_frames())
        try:
            while True:
                message = await websocket.receive()
                if message["type"] == "websocket.disconnect":
                    break
                text = message.get("text")
                if text is None:
                    await send_text(make_event(
                        EVENT_ERROR, "controls must be JSON text messages"))
                    continue
                try:
                    control = parse_control(text)
                    if control["type"] == "chat":
                        await handle_chat(control["text"])
                    elif control["type"] == "camera":
                        session.camera = camera_from_message(control)
                except InvalidInputError as exc:
                    await send_text(make_event(EVENT_ERROR, str(exc)))
        except WebSocketDisconnect:
            pass
        finally:
            producer.cancel()

    return app
