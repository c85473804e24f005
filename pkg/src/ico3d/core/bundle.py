"""Model bundle I/O.

Container layout: 8-byte magic "ICO3DGSB", u32 version, then little-endian
chunks of [4-byte tag][u64 payload length][payload]. Tags:

  SPLT  splat payload in the community PLY layout (binary little-endian,
        fields x,y,z,f_dc_*,f_rest_*,opacity,scale_*,rot_*; opacity stored as
        a logit, scales as logs, activated on access)
  HEAD  expression-driven head model weights (tagged array block)
  BODY  windowed body model weights (tagged array block)
  META  UTF-8 "key=value" lines

Internal saves write double-precision PLY properties so save -> load
roundtrips are bit-exact; the import path also accepts float32 community
splat files (with or without normal fields).
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import (BundleFormatError, BundleNaNError, BundleTruncatedError,
                      BundleVersionError, InvalidInputError)
from .gaussians import GaussianSet

MAGIC = b"ICO3DGSB"
VERSION = 1

_DTYPE_CODES = {np.dtype("<f8"): 0, np.dtype("<f4"): 1,
                np.dtype("<i8"): 2, np.dtype("u1"): 3}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}
_PLY_TYPES = {"float": "<f4", "float32": "<f4", "double": "<f8", "float64": "<f8",
              "int": "<i4", "int32": "<i4", "uint": "<u4", "uint32": "<u4",
              "uchar": "u1", "uint8": "u1", "short": "<i2", "ushort": "<u2"}


# ---------------------------------------------------------------------------
# PLY subset (binary little-endian, scalar properties on one vertex element)

def write_ply(fields: list[tuple[str, str]], columns: dict[str, np.ndarray]) -> bytes:
    """Serialize named columns as a binary little-endian PLY vertex element."""
    n = len(next(iter(columns.values()))) if columns else 0
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    dtype = []
    for name, ply_type in fields:
        header.append(f"property {ply_type} {name}")
        dtype.append((name, _PLY_TYPES[ply_type]))
    header.append("end_header")
    rows = np.empty(n, dtype=dtype)
    for name, _ in fields:
        rows[name] = columns[name]
    return ("\n".join(header) + "\n").encode("ascii") + rows.tobytes()


def read_ply(data: bytes) -> dict[str, np.ndarray]:
    """Parse the PLY subset back into float64 columns."""
    end = data.find(b"end_header\n")
    if end < 0:
        raise BundleFormatError("PLY payload missing end_header")
    header = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[end + len(b"end_header\n"):]
    if not header or header[0].strip() != "ply":
        raise BundleFormatError("not a PLY payload")
    count = None
    fmt_ok = False
    dtype: list[tuple[str, str]] = []
    in_vertex = False
    for line in header[1:]:
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if parts[1] != "binary_little_endian":
                raise BundleFormatError(f"unsupported PLY format {parts[1]!r}")
            fmt_ok = True
        elif parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                count = int(parts[2])
            elif int(parts[2]) != 0:
                raise BundleFormatError("only the vertex element is supported")
        elif parts[0] == "property" and in_vertex:
            if parts[1] == "list":
                raise BundleFormatError("list properties are not supported")
            if parts[1] not in _PLY_TYPES:
                raise BundleFormatError(f"unsupported property type {parts[1]!r}")
            dtype.append((parts[2], _PLY_TYPES[parts[1]]))
    if not fmt_ok or count is None or not dtype:
        raise BundleFormatError("incomplete PLY header")
    rows_dtype = np.dtype(dtype)
    need = count * rows_dtype.itemsize
    if len(body) < need:
        raise BundleTruncatedError(
            f"PLY payload holds {len(body)} bytes, expected {need}")
    rows = np.frombuffer(body[:need], dtype=rows_dtype)
    return {name: np.ascontiguousarray(rows[name], dtype=np.float64)
            for name, _ in dtype}


def splats_to_ply(splats: GaussianSet, precision: str = "double") -> bytes:
    """Community-layout splat payload; raw logits/logs/quats go to disk as-is."""
    n = splats.count
    k = splats.sh_coeffs.shape[1]
    cols: dict[str, np.ndarray] = {}
    fields: list[tuple[str, str]] = []

    def add(name: str, values: np.ndarray) -> None:
        fields.append((name, precision))
        cols[name] = values

    for i, axis in enumerate("xyz"):
        add(axis, splats.means[:, i])
    for c in range(3):
        add(f"f_dc_{c}", splats.sh_coeffs[:, 0, c])
    # f_rest is channel-major: all R rest coefficients, then G, then B.
    rest = splats.sh_coeffs[:, 1:, :].transpose(0, 2, 1).reshape(n, 3 * (k - 1))
    for j in range(3 * (k - 1)):
        add(f"f_rest_{j}", rest[:, j])
    add("opacity", splats.opacity_logits)
    for i in range(3):
        add(f"scale_{i}", splats.scale_logs[:, i])
    for i in range(4):
        add(f"rot_{i}", splats.rotations[:, i])
    return write_ply(fields, cols)


def splats_from_ply(data: bytes) -> GaussianSet:
    cols = read_ply(data)
    for required in ("x", "y", "z", "opacity", "scale_0", "rot_0"):
        if required not in cols:
            raise BundleFormatError(f"splat payload missing field {required!r}")
    n = len(cols["x"])
    rest_count = len([name for name in cols if name.startswith("f_rest_")])
    if rest_count % 3 != 0:
        raise BundleFormatError("f_rest field count is not divisible by 3")
    k = 1 + rest_count // 3
    deg = int(round(np.sqrt(k))) - 1
    if (deg + 1) ** 2 != k:
        raise BundleFormatError(f"{k} SH coefficients per channel is not a square count")

    sh = np.zeros((n, k, 3))
    for c in range(3):
        sh[:, 0, c] = cols.get(f"f_dc_{c}", np.zeros(n))
    if k > 1:
        rest = np.stack([cols[f"f_rest_{j}"] for j in range(3 * (k - 1))], axis=1)
        sh[:, 1:, :] = rest.reshape(n, 3, k - 1).transpose(0, 2, 1)

    quats = np.stack([cols[f"rot_{i}"] for i in range(4)], axis=1)
    arrays = {
        "means": np.stack([cols["x"], cols["y"], cols["z"]], axis=1),
        "scale_logs": np.stack([cols[f"scale_{i}"] for i in range(3)], axis=1),
        "opacity_logits": cols["opacity"],
        "sh_coeffs": sh,
        "rotations": quats,
    }
    for name, arr in arrays.items():
        if not np.all(np.isfinite(arr)):
            raise BundleNaNError(f"splat field {name} contains NaN/Inf")
    norms = np.linalg.norm(quats, axis=1)
    if np.any(norms < 1e-12):
        raise BundleFormatError("degenerate zero-norm rotation quaternion")
    # Keep stored bits when already unit (bit-exact roundtrip); only files
    # with free/unnormalized rotations get renormalized on import.
    off = np.abs(norms - 1.0) > 1e-6
    if np.any(off):
        quats = quats.copy()
        quats[off] /= norms[off, None]
        arrays["rotations"] = quats
    return GaussianSet(**arrays)


# ---------------------------------------------------------------------------
# Tagged array blocks (HEAD / BODY payloads)

def pack_arrays(arrays: dict[str, np.ndarray]) -> bytes:
    """Deterministic named-array block: names sorted, little-endian payloads."""
    out = io.BytesIO()
    out.write(struct.pack("<I", len(arrays)))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype == np.float32:
            arr = arr.astype("<f4")
        elif arr.dtype == np.int64:
            arr = arr.astype("<i8")
        elif arr.dtype == np.uint8:
            arr = arr.astype("u1")
        else:
            arr = arr.astype("<f8")
        code = _DTYPE_CODES[arr.dtype]
        encoded = name.encode("utf-8")
        out.write(struct.pack("<H", len(encoded)))
        out.write(encoded)
        out.write(struct.pack("<BB", code, arr.ndim))
        out.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
        out.write(arr.tobytes())
    return out.getvalue()


def unpack_arrays(data: bytes) -> dict[str, np.ndarray]:
    view = memoryview(data)
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise BundleTruncatedError("array block ended mid-record")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = bytes(take(name_len)).decode("utf-8")
        code, ndim = struct.unpack("<BB", take(2))
        if code not in _CODE_DTYPES or ndim > 8:
            raise BundleFormatError(f"bad array record for {name!r}")
        shape = struct.unpack(f"<{ndim}q", take(8 * ndim))
        if any(s < 0 for s in shape) or int(np.prod(shape, dtype=np.int64)) > 1 << 33:
            raise BundleFormatError(f"implausible shape {shape} for {name!r}")
        dtype = _CODE_DTYPES[code]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        arr = np.frombuffer(take(nbytes), dtype=dtype).reshape(shape)
        if np.issubdtype(arr.dtype, np.floating) and not np.all(np.isfinite(arr)):
            raise BundleNaNError(f"array {name!r} contains NaN/Inf")
        arrays[name] = np.ascontiguousarray(arr)
    return arrays


# ---------------------------------------------------------------------------
# Container

@dataclass
class Bundle:
    splats: GaussianSet
    head: Any = None
    body: Any = None
    meta: dict[str, str] = field(default_factory=dict)


def _meta_to_bytes(meta: dict[str, str]) -> bytes:
    lines = []
    for key, value in meta.items():
        if "=" in key or "\n" in key or "\n" in str(value):
            raise InvalidInputError(f"META key/value may not contain '=' in key or newlines: {key!r}")
        lines.append(f"{key}={value}")
    return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")


def _meta_from_bytes(data: bytes) -> dict[str, str]:
    meta: dict[str, str] = {}
    for idx, line in enumerate(data.decode("utf-8").splitlines()):
        if not line.strip():
            continue
        if "=" not in line:
            raise BundleFormatError(f"META line {idx} is not key=value")
        key, value = line.split("=", 1)
        meta[key] = value
    return meta


def save_bundle(path, splats, head=None, body=None,
                meta: dict[str, str] | None = None) -> None:
    """Write a bundle. `splats` may be a GaussianSet or a whole Bundle (in
    which case the remaining arguments must be left unset)."""
    if isinstance(splats, Bundle):
        if head is not None or body is not None or meta is not None:
            raise InvalidInputError(
                "pass either a Bundle or unpacked parts, not both")
        splats, head, body, meta = (splats.splats, splats.head, splats.body,
                                    splats.meta)
    chunks: list[tuple[bytes, bytes]] = [(b"SPLT", splats_to_ply(splats))]
    if head is not None:
        from ..head.model import head_to_arrays
        chunks.append((b"HEAD", pack_arrays(head_to_arrays(head))))
    if body is not None:
        from ..body.model import body_to_arrays
        chunks.append((b"BODY", pack_arrays(body_to_arrays(body))))
    chunks.append((b"META", _meta_to_bytes(meta or {})))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        for tag, payload in chunks:
            fh.write(tag)
            fh.write(struct.pack("<Q", len(payload)))
            fh.write(payload)


def load_bundle(path) -> Bundle:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + 4:
        raise BundleTruncatedError("file shorter than the bundle header")
    if data[:len(MAGIC)] != MAGIC:
        raise BundleVersionError("bad magic bytes, not a model bundle")
    (version,) = struct.unpack_from("<I", data, len(MAGIC))
    if version != VERSION:
        raise BundleVersionError(f"unsupported bundle version {version}")
    pos = len(MAGIC) + 4
    splats = None
    head = body = None
    meta: dict[str, str] = {}
    while pos < len(data):
        if pos + 12 > len(data):
            raise BundleTruncatedError("file ended inside a chunk header")
        tag = data[pos:pos + 4]
        (length,) = struct.unpack_from("<Q", data, pos + 4)
        pos += 12
        if pos + length > len(data):
            raise BundleTruncatedError(
                f"chunk {tag!r} declares {length} bytes but file ends early")
        payload = data[pos:pos + length]
        pos += length
        if tag == b"SPLT":
            splats = splats_from_ply(payload)
        elif tag == b"HEAD":
            from ..head.model import head_from_arrays
            head = head_from_arrays(unpack_arrays(payload))
        elif tag == b"BODY":
            from ..body.model import body_from_arrays
            body = body_from_arrays(unpack_arrays(payload))
        elif tag == b"META":
            meta = _meta_from_bytes(payload)
        # Unknown tags are skipped for forward compatibility.
    if splats is None:
        raise BundleFormatError("bundle has no SPLT chunk")
    return Bundle(splats=splats, head=head, body=body, meta=meta)
