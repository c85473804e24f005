"""Conversational session state and frame pacing.

A session owns the dialogue history, the current camera, and the
animation state machine. Turns run through four stages (ASR, LLM, TTS,
expression); each stage calls a remote HTTP endpoint when a URL is
configured and falls back to the built-in deterministic mock otherwise.

The animation clock is an integer tick line at the session fps. While
idle the avatar ping-pongs over the rest span and blinks at random;
`handle_turn` plans an action walk timed to the synthesized audio and
`anim_at` plays it back, returning to idle at the rest pose.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Union

import httpx
import numpy as np

from ..anim import (BLINK_ENVELOPE_FRAMES, BLINK_RATE_HZ, AnimPlan,
                    KeyframeLibrary, pingpong_frame, plan_action)
from ..core.camera import CameraModel
from ..errors import InvalidInputError, SessionBusyError, StageFailureError
from ..head.expression import DEFAULT_FPS, N_AUDIO
from ..head.model import DEFAULT_CHANNELS
from .audio import wav_duration
from .mocks import mock_asr, mock_expr, mock_llm, mock_tts


@dataclass(frozen=True)
class PipelineConfig:
    """Stage endpoints (None selects the mock) and session tunables."""

    asr_url: Optional[str] = None
    llm_url: Optional[str] = None
    tts_url: Optional[str] = None
    expr_url: Optional[str] = None
    timeout_s: float = 10.0
    fps: float = DEFAULT_FPS
    blink_rate_hz: float = BLINK_RATE_HZ
    blink_during_actions: bool = False

    def __post_init__(self):
        if not self.timeout_s > 0:
            raise InvalidInputError("stage timeout must be positive")
        if not self.fps > 0:
            raise InvalidInputError("fps must be positive")
        if self.blink_rate_hz < 0:
            raise InvalidInputError("blink rate must be nonnegative")

    @staticmethod
    def from_env(env=os.environ) -> "PipelineConfig":
        return PipelineConfig(
            asr_url=env.get("ICO3D_ASR_URL"),
            llm_url=env.get("ICO3D_LLM_URL"),
            tts_url=env.get("ICO3D_TTS_URL"),
            expr_url=env.get("ICO3D_EXPR_URL"),
            timeout_s=float(env.get("ICO3D_STAGE_TIMEOUT_S", "10.0")),
            blink_rate_hz=float(env.get("ICO3D_BLINK_RATE_HZ",
                                        str(BLINK_RATE_HZ))))


def _post(url: str, timeout_s: float, stage: str, **kwargs) -> httpx.Response:
    try:
        resp = httpx.post(url, timeout=timeout_s, **kwargs)
        resp.raise_for_status()
        return resp
    except httpx.HTTPError as exc:
        raise StageFailureError(f"{stage} stage failed: {exc}") from exc


def run_asr(config: PipelineConfig, audio: bytes) -> str:
    """Audio to transcript. Remote: POST WAV body, JSON {"text": ...} back."""
    if config.asr_url is None:
        return mock_asr(audio)
    return _post(config.asr_url, config.timeout_s, "ASR",
                 content=audio).json()["text"]


def run_llm(config: PipelineConfig, prompt: str) -> str:
    """Prompt to reply. Remote: POST {"prompt": ...}, {"text": ...} back."""
    if config.llm_url is None:
        return mock_llm(prompt)
    return _post(config.llm_url, config.timeout_s, "LLM",
                 json={"prompt": prompt}).json()["text"]


def run_tts(config: PipelineConfig, text: str) -> bytes:
    """Reply to speech. Remote: POST {"text": ...}, WAV bytes back."""
    if config.tts_url is None:
        return mock_tts(text)
    return _post(config.tts_url, config.timeout_s, "TTS",
                 json={"text": text}).content


def run_expr(config: PipelineConfig, audio: bytes) -> np.ndarray:
    """Speech to audio-feature rows. Remote: POST WAV, {"expression": [[..]]}."""
    if config.expr_url is None:
        return mock_expr(audio)
    rows = np.asarray(_post(config.expr_url, config.timeout_s, "expression",
                            content=audio).json()["expression"], dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != N_AUDIO:
        raise StageFailureError(
            f"expression stage returned shape {rows.shape}, wanted (T, {N_AUDIO})")
    return rows


@dataclass(frozen=True)
class TurnResult:
    reply_text: str
    audio: bytes
    expression: np.ndarray
    plan: AnimPlan


class _BlinkSampler:
    """Streaming blink flags for an unbounded tick line.

    Queries must use nondecreasing ticks; arrivals are drawn lazily so a
    bounded prefix matches `sample_blink_flags` with the same rng state.
    """

    def __init__(self, rng: np.random.Generator, rate_hz: float, fps: float):
        self._rng = rng
        self._rate = rate_hz
        self._fps = fps
        self._next = rng.exponential(1.0 / rate_hz) if rate_hz > 0 else None
        self._until = -1

    def flag(self, tick: int) -> bool:
        while self._next is not None and int(self._next * self._fps) <= tick:
            start = int(self._next * self._fps)
            self._until = max(self._until, start + BLINK_ENVELOPE_FRAMES)
            self._next += self._rng.exponential(1.0 / self._rate)
        return tick < self._until


def _assemble_expression(feats: np.ndarray, blinks: np.ndarray) -> np.ndarray:
    """Per-frame channel rows: audio features padded by repetition to the
    plan length, eye channels driven hard by the blink flags."""
    n = len(blinks)
    out = np.zeros((n, DEFAULT_CHANNELS), dtype=np.float64)
    if len(feats) and n:
        out[:, :N_AUDIO] = feats[np.minimum(np.arange(n), len(feats) - 1)]
    out[:, N_AUDIO:] = blinks.astype(np.float64)[:, None]
    return out


class Session:
    """One connected conversation: history, camera, animation state."""

    def __init__(self, library: KeyframeLibrary, camera: CameraModel,
                 config: Optional[PipelineConfig] = None,
                 rng: Optional[np.random.Generator] = None,
                 session_id: str = "local"):
        self.library = library
        self.camera = camera
        self.config = config if config is not None else PipelineConfig()
        self.session_id = session_id
        self._rng = rng if rng is not None else np.random.default_rng(0)
        self.history: list[tuple[str, str]] = []
        self.last_tick = -1
        self._plan: Optional[AnimPlan] = None
        self._plan_expr: Optional[np.ndarray] = None
        self._plan_start: Optional[int] = None
        # Idle phase at tick t is anchor_phase + (t - anchor_tick).
        self._idle_anchor_tick = 0
        self._idle_anchor_phase = 0
        self._blinks = _BlinkSampler(self._rng, self.config.blink_rate_hz,
                                     self.config.fps)

    @property
    def acting(self) -> bool:
        return self._plan is not None

    def handle_turn(self, user_input: Union[str, bytes]) -> TurnResult:
        """Run one conversational turn and start its action.

        Raises SessionBusyError while a previous action is still playing,
        InvalidInputError on empty input, StageFailureError when a remote
        stage times out or rejects the request.
        """
        if self.acting:
            raise SessionBusyError(
                "a turn is already playing; wait for the avatar to finish")
        if isinstance(user_input, (bytes, bytearray)):
            text = run_asr(self.config, bytes(user_input))
        elif isinstance(user_input, str):
            text = user_input
        else:
            raise InvalidInputError("turn input must be text or WAV bytes")
        if not text.strip():
            raise InvalidInputError("turn input is empty")

        reply = run_llm(self.config, text)
        audio = run_tts(self.config, reply)
        feats = run_expr(self.config, audio)
        duration_frames = math.ceil(wav_duration(audio) * self.config.fps)
        rate = (self.config.blink_rate_hz
                if self.config.blink_during_actions else 0.0)
        plan = plan_action(self.library, duration_frames, self._rng,
                           blink_rate_hz=rate, fps=int(self.config.fps))
        expression = _assemble_expression(feats, plan.blinks)
        self.history.append(("user", text))
        self.history.append(("avatar", reply))
        if len(plan):
            self._plan = plan
            self._plan_expr = expression
            self._plan_start = None
        return TurnResult(reply_text=reply, audio=audio,
                          expression=expression, plan=plan)

    def anim_at(self, tick: int) -> tuple[int, np.ndarray]:
        """Body keyframe index and (39,) expression row for a tick.

        Ticks must be nondecreasing. A pending action anchors to the
        first tick rendered after `handle_turn`; when it runs out the
        session resumes the idle ping-pong from the rest pose.
        """
        if tick < self.last_tick:
            raise InvalidInputError("animation ticks must be nondecreasing")
        self.last_tick = tick
        if self._plan is not None:
            if self._plan_start is None:
                self._plan_start = tick
            i = tick - self._plan_start
            if i < len(self._plan):
                return int(self._plan.frames[i]), self._plan_expr[i]
            # Action finished: re-anchor idle so the walk keeps stepping
            # away from rest_end without repeating it.
            span = self.library.rest_end - self.library.rest_start
            self._idle_anchor_tick = self._plan_start + len(self._plan) - 1
            self._idle_anchor_phase = span
            self._plan = None
            self._plan_expr = None
            self._plan_start = None
        phase = self._idle_anchor_phase + (tick - self._idle_anchor_tick)
        frame = pingpong_frame(self.library, phase)
        row = np.zeros(DEFAULT_CHANNELS, dtype=np.float64)
        if self._blinks.flag(tick):
            row[N_AUDIO:] = 1.0
        return frame, row


class FrameScheduler:
    """Wall-clock to frame-index mapping that skips but never repeats.

    `next_due` returns the latest frame index whose deadline has passed,
    or None when the current index was already handed out.
    """

    def __init__(self, fps: float = DEFAULT_FPS,
                 clock: Callable[[], float] = time.monotonic):
        if not fps > 0:
            raise InvalidInputError("fps must be positive")
        self.fps = fps
        self._clock = clock
        self._start: Optional[float] = None
        self._last = -1

    def next_due(self) -> Optional[int]:
        now = self._clock()
        if self._start is None:
            self._start = now
        idx = int((now - self._start) * self.fps)
        if idx <= self._last:
            return None
        self._last = idx
        return idx


def frame_loop(session: Session, render_fn, *, max_frames: Optional[int] = None,
               clock: Callable[[], float] = time.monotonic,
               sleep: Callable[[float], None] = time.sleep,
               ) -> Iterator[tuple[int, object]]:
    """Drive a session in real time, yielding (tick, render_fn result).

    `render_fn(body_frame, expression, camera)` renders one frame; the
    camera is snapshotted per frame so control messages apply to the
    next scheduled tick. Pass a fake clock and sleep to run offline.
    """
    scheduler = FrameScheduler(fps=session.config.fps, clock=clock)
    produced = 0
    while max_frames is None or produced < max_frames:
        tick = scheduler.next_due()
        if tick is None:
            sleep(0.25 / session.config.fps)
            continue
        frame, expression = session.anim_at(tick)
        yield tick, render_fn(frame, expression, session.camera)
        produced += 1
