"""Procedural body animation: idle ping-pong with blinks, action planning."""

from .library import (ActionSegment, KeyframeLibrary, format_keyframes,
                      parse_keyframes, read_keyframes, write_keyframes)
from .plan import (BLINK_ENVELOPE_FRAMES, BLINK_RATE_HZ, FPS, AnimPlan,
                   idle_stream, pingpong_frame, plan_action,
                   sample_blink_flags)

__all__ = [
    "ActionSegment", "KeyframeLibrary", "format_keyframes", "parse_keyframes",
    "read_keyframes", "write_keyframes",
    "BLINK_ENVELOPE_FRAMES", "BLINK_RATE_HZ", "FPS", "AnimPlan",
    "idle_stream", "pingpong_frame", "plan_action", "sample_blink_flags",
]
