"""Keyframe library: the frame segments procedural animation draws from.

The library indexes into the trained body sequence: a rest segment the idle
loop ping-pongs over, and action segments (each optionally reversible) that
action plans traverse. Stored as UTF-8 key/value text:

    n_frames = 120
    rest = 10 12
    action = 20 45 reversible
    action = 50 80 oneway
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..errors import InvalidInputError


@dataclass(frozen=True)
class ActionSegment:
    start: int
    end: int
    reversible: bool = True

    @property
    def length(self) -> int:
        return abs(self.end - self.start) + 1


@dataclass(frozen=True)
class KeyframeLibrary:
    n_frames: int
    rest_start: int
    rest_end: int
    actions: tuple[ActionSegment, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", tuple(self.actions))
        if self.n_frames < 2:
            raise InvalidInputError("body sequence must have at least 2 frames")
        if not 0 <= self.rest_start < self.rest_end < self.n_frames:
            raise InvalidInputError(
                f"rest segment [{self.rest_start}, {self.rest_end}] must be "
                f"ascending, at least 2 frames, within 0..{self.n_frames - 1}")
        for seg in self.actions:
            if not (0 <= seg.start < self.n_frames
                    and 0 <= seg.end < self.n_frames):
                raise InvalidInputError(
                    f"action segment ({seg.start}, {seg.end}) outside "
                    f"0..{self.n_frames - 1}")


def read_keyframes(path) -> KeyframeLibrary:
    return parse_keyframes(Path(path).read_text(encoding="utf-8"))


def parse_keyframes(text: str) -> KeyframeLibrary:
    n_frames = None
    rest = None
    actions = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"keyframe line {lineno}: expected 'key = values'")
        key, _, value = line.partition("=")
        key, parts = key.strip(), value.split()
        try:
            if key == "n_frames":
                (n_frames,) = (int(p) for p in parts)
            elif key == "rest":
                rest = tuple(int(p) for p in parts)
                if len(rest) != 2:
                    raise ValueError("rest needs 2 indices")
            elif key == "action":
                if len(parts) != 3 or parts[2] not in ("reversible", "oneway"):
                    raise ValueError("action needs 'start end reversible|oneway'")
                actions.append(ActionSegment(int(parts[0]), int(parts[1]),
                                             parts[2] == "reversible"))
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise InvalidInputError(f"keyframe line {lineno}: {exc}") from exc
    if n_frames is None or rest is None:
        raise InvalidInputError("keyframe file needs n_frames and rest entries")
    return KeyframeLibrary(n_frames=n_frames, rest_start=rest[0],
                           rest_end=rest[1], actions=tuple(actions))


def format_keyframes(lib: KeyframeLibrary) -> str:
    lines = [f"n_frames = {lib.n_frames}",
             f"rest = {lib.rest_start} {lib.rest_end}"]
    for seg in lib.actions:
        flag = "reversible" if seg.reversible else "oneway"
        lines.append(f"action = {seg.start} {seg.end} {flag}")
    return "\n".join(lines) + "\n"


def write_keyframes(path, lib: KeyframeLibrary) -> None:
    Path(path).write_text(format_keyframes(lib), encoding="utf-8")
