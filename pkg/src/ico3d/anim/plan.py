"""Procedural animation plans over the trained body sequence.

Plans are walks on the frame index line (every step is +-1, so playback is
always continuous). The idle loop ping-pongs across the rest segment with
randomly inserted blinks; action plans greedily chain keyframe segments to
match a requested duration and always come to rest at `rest_end`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from ..errors import InvalidInputError
from .library import KeyframeLibrary

FPS = 30
BLINK_ENVELOPE_FRAMES = 6
BLINK_RATE_HZ = 0.25   # exponential inter-arrival, mean 4 s


@dataclass(frozen=True)
class AnimPlan:
    frames: np.ndarray   # (T,) int64 body-sequence indices
    blinks: np.ndarray   # (T,) bool eye-envelope overlay flags

    def __post_init__(self) -> None:
        frames = np.ascontiguousarray(self.frames, dtype=np.int64)
        blinks = np.ascontiguousarray(self.blinks, dtype=bool)
        if frames.ndim != 1 or blinks.shape != frames.shape:
            raise InvalidInputError("frames and blinks must be equal-length 1-D")
        if len(frames) > 1 and np.any(np.abs(np.diff(frames)) != 1):
            raise InvalidInputError("plan frames must step by exactly +-1")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "blinks", blinks)

    def __len__(self) -> int:
        return len(self.frames)

    @staticmethod
    def empty() -> "AnimPlan":
        return AnimPlan(frames=np.zeros(0, dtype=np.int64),
                        blinks=np.zeros(0, dtype=bool))


def pingpong_frame(lib: KeyframeLibrary, k: int) -> int:
    span = lib.rest_end - lib.rest_start
    phase = k % (2 * span)
    return lib.rest_start + (phase if phase <= span else 2 * span - phase)


def sample_blink_flags(n_frames: int, rng: np.random.Generator,
                       rate_hz: float = BLINK_RATE_HZ,
                       fps: int = FPS) -> np.ndarray:
    flags = np.zeros(n_frames, dtype=bool)
    if rate_hz <= 0.0:
        return flags
    t = rng.exponential(1.0 / rate_hz)
    while int(t * fps) < n_frames:
        start = int(t * fps)
        flags[start:start + BLINK_ENVELOPE_FRAMES] = True
        t += rng.exponential(1.0 / rate_hz)
    return flags


def idle_stream(lib: KeyframeLibrary, rng: np.random.Generator,
                duration_frames: Optional[int] = None,
                blink_rate_hz: float = BLINK_RATE_HZ, fps: int = FPS):
    """Ping-pong over the rest segment with random blinks.

    With a duration, returns an AnimPlan; without one, an endless iterator
    of (frame_index, blink_flag) pairs drawing blinks lazily.
    """
    if duration_frames is not None:
        if duration_frames < 0:
            raise InvalidInputError("duration must be non-negative")
        frames = np.array([pingpong_frame(lib, k)
                           for k in range(duration_frames)], dtype=np.int64)
        return AnimPlan(frames=frames,
                        blinks=sample_blink_flags(duration_frames, rng,
                                                  blink_rate_hz, fps))

    def endless() -> Iterator[tuple[int, bool]]:
        t = rng.exponential(1.0 / blink_rate_hz) if blink_rate_hz > 0.0 else None
        blink_until = -1
        k = 0
        while True:
            while t is not None and int(t * fps) <= k:
                blink_until = max(blink_until,
                                  int(t * fps) + BLINK_ENVELOPE_FRAMES)
                t += rng.exponential(1.0 / blink_rate_hz)
            yield pingpong_frame(lib, k), k < blink_until
            k += 1

    return endless()


def _extend_walk(frames: list[int], target: int) -> None:
    while frames[-1] != target:
        frames.append(frames[-1] + (1 if target > frames[-1] else -1))


def plan_action(lib: KeyframeLibrary, duration_frames: int,
                rng: np.random.Generator,
                blink_rate_hz: float = 0.0, fps: int = FPS) -> AnimPlan:
    """Chain random keyframe segments to fill `duration_frames` +- 1 frame,
    ending at rest_end. Duration 0 means an immediate idle transition."""
    if duration_frames < 0:
        raise InvalidInputError("duration must be non-negative")
    if not lib.actions:
        raise InvalidInputError("keyframe library has no action segments")
    if duration_frames == 0:
        return AnimPlan.empty()

    frames: list[int] = []
    while True:
        at = frames[-1] if frames else None
        options = []
        for seg in lib.actions:
            ends = [(seg.start, seg.end)]
            if seg.reversible:
                ends.append((seg.end, seg.start))
            for entry, exit_ in ends:
                if at is None:
                    cost = abs(exit_ - entry) + 1
                else:
                    cost = abs(entry - at) + abs(exit_ - entry)
                    if cost == 0:
                        continue   # zero-length move, would never terminate
                reserve = abs(lib.rest_end - exit_)
                if len(frames) + cost + reserve <= duration_frames:
                    options.append((entry, exit_))
        if not options:
            break
        entry, exit_ = options[rng.integers(len(options))]
        if not frames:
            frames.append(entry)
        else:
            _extend_walk(frames, entry)
        _extend_walk(frames, exit_)

    if not frames:
        # nothing fits: bounce walk of exact length ending at rest_end
        frames = [lib.rest_end - ((duration_frames - 1 - i) % 2)
                  for i in range(duration_frames)]
    else:
        _extend_walk(frames, lib.rest_end)
        for _ in range((duration_frames - len(frames)) // 2):
            frames += [lib.rest_end - 1, lib.rest_end]

    out = np.array(frames, dtype=np.int64)
    return AnimPlan(frames=out,
                    blinks=sample_blink_flags(len(out), rng, blink_rate_hz, fps))
