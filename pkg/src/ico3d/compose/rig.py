"""Sidecar file formats for composition: rig files and boundary CSVs.

Rig file: UTF-8 key/value text, one `key = 16 floats` line per matrix
(row-major 4x4). Keys `c_ref_w1`, `c_ref_w2`, `h_ref_w1`, `h_ref_w2` hold
the reference transforms; `frame_0` .. `frame_{N-1}` the per-frame head
poses of setup 2. `#` starts a comment; blank lines are ignored.

Boundary file: CSV of x,y,z vertices (meters, head-canonical frame), with
an optional `x,y,z` header row.
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from ..core.pose import Pose
from ..errors import InvalidInputError
from .align import RigAlignment

_REF_KEYS = ("c_ref_w1", "c_ref_w2", "h_ref_w1", "h_ref_w2")
_FRAME_RE = re.compile(r"^frame_(\d+)$")


def _parse_matrix(key: str, text: str) -> Pose:
    parts = text.split()
    if len(parts) != 16:
        raise InvalidInputError(
            f"rig entry {key!r} has {len(parts)} values, expected 16")
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise InvalidInputError(f"rig entry {key!r}: {exc}") from exc
    return Pose(np.array(values).reshape(4, 4))


def read_rig(path) -> RigAlignment:
    return parse_rig(Path(path).read_text(encoding="utf-8"))


def parse_rig(text: str) -> RigAlignment:
    entries: dict[str, Pose] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"rig line {lineno}: expected 'key = values'")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in entries:
            raise InvalidInputError(f"rig line {lineno}: duplicate key {key!r}")
        entries[key] = _parse_matrix(key, value)

    for key in _REF_KEYS:
        if key not in entries:
            raise InvalidInputError(f"rig file is missing {key!r}")
    frames: dict[int, Pose] = {}
    for key, pose in entries.items():
        if key in _REF_KEYS:
            continue
        match = _FRAME_RE.match(key)
        if not match:
            raise InvalidInputError(f"unknown rig key {key!r}")
        frames[int(match.group(1))] = pose
    if not frames:
        raise InvalidInputError("rig file has no frame_<i> entries")
    if sorted(frames) != list(range(len(frames))):
        raise InvalidInputError("rig frame indices must be contiguous from 0")

    return RigAlignment(
        c_ref_w1=entries["c_ref_w1"], c_ref_w2=entries["c_ref_w2"],
        h_ref_w1=entries["h_ref_w1"], h_ref_w2=entries["h_ref_w2"],
        h_i_w2=[frames[i] for i in range(len(frames))])


def format_rig(rig: RigAlignment) -> str:
    def line(key: str, pose: Pose) -> str:
        return key + " = " + " ".join(repr(float(v)) for v in pose.matrix.ravel())

    lines = [line(key, getattr(rig, key)) for key in _REF_KEYS]
    lines += [line(f"frame_{i}", pose) for i, pose in enumerate(rig.h_i_w2)]
    return "\n".join(lines) + "\n"


def write_rig(path, rig: RigAlignment) -> None:
    Path(path).write_text(format_rig(rig), encoding="utf-8")


def read_boundary(path) -> np.ndarray:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or not "".join(row).strip():
                continue
            if lineno == 1 and [c.strip().lower() for c in row] == ["x", "y", "z"]:
                continue
            if len(row) != 3:
                raise InvalidInputError(
                    f"boundary line {lineno}: expected 3 columns, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise InvalidInputError(f"boundary line {lineno}: {exc}") from exc
    if not rows:
        raise InvalidInputError("boundary file has no vertices")
    verts = np.array(rows, dtype=np.float64)
    if not np.isfinite(verts).all():
        raise InvalidInputError("boundary vertices must be finite")
    return verts


def write_boundary(path, vertices) -> None:
    verts = np.asarray(vertices, dtype=np.float64)
    if verts.ndim != 2 or verts.shape[1] != 3:
        raise InvalidInputError("vertices must have shape (N, 3)")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z"])
        writer.writerows(verts.tolist())
