"""Motion-driven sliding-window partitioning of a frame sequence.

A sequence of N_f frames has N_f - 1 transitions. Per-camera motion
magnitudes are averaged across cameras and accumulated along the sequence;
whenever the running sum reaches the threshold a window boundary is spawned
at the incoming frame and the accumulator resets. Consecutive windows share
exactly one frame (the boundary), and the final window absorbs the tail.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError

MAX_WINDOW_CAP = 150


@dataclass(frozen=True)
class MotionSignal:
    """Per-camera, per-transition motion magnitudes, shape (cameras, N_f - 1).

    A 1D array is accepted as a single-camera signal. Entry (c, i) measures
    the motion between frames i and i+1 seen by camera c.
    """

    values: np.ndarray = field(default_factory=lambda: np.zeros((1, 0)))

    def __post_init__(self) -> None:
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[None, :]
        if vals.ndim != 2 or vals.shape[0] == 0:
            raise InvalidInputError("motion signal must be (cameras, transitions)")
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("motion signal contains NaN/Inf")
        if np.any(vals < 0):
            raise InvalidInputError("motion magnitudes must be non-negative")
        object.__setattr__(self, "values", vals)

    @property
    def n_cameras(self) -> int:
        return self.values.shape[0]

    @property
    def n_transitions(self) -> int:
        return self.values.shape[1]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1] + 1

    def camera_mean(self) -> np.ndarray:
        """Per-transition motion averaged across cameras, shape (N_f - 1,)."""
        return self.values.mean(axis=0)


@dataclass(frozen=True)
class WindowPlan:
    """Ordered inclusive frame ranges covering 0..N_f-1 with 1-frame overlaps."""

    ranges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        ranges = tuple((int(a), int(b)) for a, b in self.ranges)
        object.__setattr__(self, "ranges", ranges)
        if not ranges:
            raise InvalidInputError("a window plan needs at least one window")
        if ranges[0][0] != 0:
            raise InvalidInputError("first window must start at frame 0")
        for idx, (start, end) in enumerate(ranges):
            if end - start + 1 < 2:
                raise InvalidInputError(
                    f"window {idx} spans [{start},{end}]: fewer than 2 frames")
            if idx and start != ranges[idx - 1][1]:
                raise InvalidInputError(
                    f"windows {idx - 1} and {idx} do not overlap by exactly 1 frame")

    @property
    def n_windows(self) -> int:
        return len(self.ranges)

    @property
    def n_frames(self) -> int:
        return self.ranges[-1][1] + 1

    def window_of_frame(self, frame: int) -> int:
        """Index of the first window containing `frame`."""
        for idx, (start, end) in enumerate(self.ranges):
            if start <= frame <= end:
                return idx
        raise InvalidInputError(f"frame {frame} outside the plan")


def partition_windows(motion: MotionSignal | np.ndarray, v_thresh: float,
                      max_window_cap: int = MAX_WINDOW_CAP) -> WindowPlan:
    """Split the sequence into overlapping windows driven by motion.

    Scanning transitions in order, the camera-averaged magnitudes accumulate;
    a boundary is spawned at frame i+1 as soon as the running sum reaches
    v_thresh after adding transition i, and the sum resets. A boundary is
    also forced when a window would otherwise exceed `max_window_cap` frames
    (this covers the all-zero-motion case). No boundary is spawned at the
    final frame: the last window absorbs the tail.
    """
    if not isinstance(motion, MotionSignal):
        motion = MotionSignal(np.asarray(motion))
    if not (v_thresh > 0):
        raise InvalidInputError("v_thresh must be positive")
    if max_window_cap < 2:
        raise InvalidInputError("max_window_cap must allow 2-frame windows")
    n_frames = motion.n_frames
    if n_frames < 2:
        raise InvalidInputError("need at least 2 frames (1 transition)")
    per_transition = motion.camera_mean()

    boundaries = [0]
    acc = 0.0
    for i in range(n_frames - 1):
        acc += per_transition[i]
        frame = i + 1
        if frame >= n_frames - 1:
            break
        if acc >= v_thresh or frame - boundaries[-1] + 1 >= max_window_cap:
            boundaries.append(frame)
            acc = 0.0
    boundaries.append(n_frames - 1)
    ranges = tuple((boundaries[j], boundaries[j + 1])
                   for j in range(len(boundaries) - 1))
    return WindowPlan(ranges)


def _frame_stack(frames) -> np.ndarray:
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim < 3:
        raise InvalidInputError(
            "frames must stack to (N_f, H, W[, C]); got ragged or scalar input")
    return arr


def motion_from_frames(frames_per_camera) -> MotionSignal:
    """Mean squared consecutive-frame difference, per camera.

    Accepts one frame stack (N_f, H, W[, C]) for a single camera, or a
    list/tuple of such stacks, one per camera (equal shapes). Identical
    consecutive frames score zero.
    """
    if isinstance(frames_per_camera, (list, tuple)):
        stacks = frames_per_camera
        if not stacks:
            raise InvalidInputError("need at least one camera's frames")
    else:
        stacks = [frames_per_camera]
    arrays = []
    for stack in stacks:
        try:
            arrays.append(_frame_stack(stack))
        except ValueError as exc:  # ragged per-frame shapes fail to stack
            raise InvalidInputError(f"frames are not equal-sized: {exc}") from exc
    shape0 = arrays[0].shape
    for arr in arrays[1:]:
        if arr.shape != shape0:
            raise InvalidInputError(
                f"camera frame stacks disagree: {arr.shape} vs {shape0}")
    if shape0[0] < 2:
        raise InvalidInputError("need at least 2 frames per camera")
    rows = []
    for arr in arrays:
        diff = arr[1:] - arr[:-1]
        rows.append((diff * diff).reshape(diff.shape[0], -1).mean(axis=1))
    return MotionSignal(np.stack(rows))
