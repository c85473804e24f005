"""Operator entry points.

Subcommands:
  render    offline rendering of a bundle to PNG frames (+ optional metrics)
  compose   align/prune/harmonize/inject a head bundle onto a body bundle
  bench     frame-timing report over the standard configuration rows
  validate  invariant audit of a bundle file
  serve     launch the websocket avatar service

Exit codes are stable: 0 success, 1 data or validation failure (diagnostic
on stderr), 2 usage error (bad flags). Randomized paths take --seed and are
deterministic given it.
"""

from __future__ import annotations

import argparse
import csv
import os
import struct
import sys
import time
from pathlib import Path

import numpy as np

from .anim import parse_keyframes, read_keyframes
from .body.model import BodyModel
from .compose import (RigAlignment, composed_transform, default_prune_config,
                      harmonize_colors, inject_border, prune_mask,
                      read_boundary, read_rig, transform_set, PruneConfig)
from .convo import (FORMAT_PNG, FORMAT_RAW_RGB8, AvatarAssets, PipelineConfig,
                    assemble_avatar, create_app, default_library, default_view,
                    load_assets, meta_text, save_assets)
from .core.bundle import load_bundle, read_ply, unpack_arrays, MAGIC, VERSION
from .core.camera import CameraModel
from .core.gaussians import GaussianSet, concat
from .core.pose import Pose, interpolate_pose
from .errors import Ico3dError, InvalidInputError
from .render import (l1, psnr, psnr_masked, read_png, render_oracle,
                     render_tiled, ssim, warmup_kernels, write_png)

_CAMERA_COLUMNS = (["frame", "fx", "fy", "cx", "cy", "width", "height"]
                   + [f"m{r}{c}" for r in range(4) for c in range(4)])


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _parse_resolution(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        width, height = int(w), int(h)
    except ValueError as exc:
        raise InvalidInputError(f"resolution must look like 640x480: {text!r}") from exc
    if width <= 0 or height <= 0:
        raise InvalidInputError("resolution must be positive")
    return width, height


def _parse_frames(text: str) -> tuple[int, int]:
    try:
        a, b = text.split("..")
        start, end = int(a), int(b)
    except ValueError as exc:
        raise InvalidInputError(f"frame range must look like 0..29: {text!r}") from exc
    if start < 0 or end < start:
        raise InvalidInputError(f"frame range {text!r} must be ascending and nonnegative")
    return start, end


def _parse_vec3(text: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise InvalidInputError(f"expected x,y,z, got {text!r}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise InvalidInputError(f"expected x,y,z floats, got {text!r}") from exc


# ---------------------------------------------------------------------------
# Camera paths

def read_camera_path(path) -> list[tuple[int, CameraModel]]:
    """Keyframed camera rows: frame,fx,fy,cx,cy,width,height,m00..m33."""
    rows: list[tuple[int, CameraModel]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, 1):
            cells = [c.strip() for c in row]
            if not cells or not "".join(cells):
                continue
            if lineno == 1 and cells[0].lower() == "frame":
                if [c.lower() for c in cells] != _CAMERA_COLUMNS:
                    raise InvalidInputError(
                        "camera path header must be "
                        + ",".join(_CAMERA_COLUMNS))
                continue
            if len(cells) != len(_CAMERA_COLUMNS):
                raise InvalidInputError(
                    f"camera path line {lineno}: expected "
                    f"{len(_CAMERA_COLUMNS)} columns, got {len(cells)}")
            try:
                frame = int(cells[0])
                values = [float(c) for c in cells[1:]]
            except ValueError as exc:
                raise InvalidInputError(f"camera path line {lineno}: {exc}") from exc
            cam = CameraModel(
                fx=values[0], fy=values[1], cx=values[2], cy=values[3],
                width=int(values[4]), height=int(values[5]),
                world_to_camera=np.array(values[6:]).reshape(4, 4))
            rows.append((frame, cam))
    if not rows:
        raise InvalidInputError("camera path has no keyframes")
    frames = [f for f, _ in rows]
    if frames != sorted(set(frames)):
        raise InvalidInputError("camera path frames must be strictly increasing")
    return rows


def camera_at(path_rows: list[tuple[int, CameraModel]], frame: int) -> CameraModel:
    """Camera for a frame: keyframe poses blended geodesically, intrinsics
    held from the keyframe at or before the frame."""
    if frame <= path_rows[0][0]:
        return path_rows[0][1]
    if frame >= path_rows[-1][0]:
        return path_rows[-1][1]
    for (f0, c0), (f1, c1) in zip(path_rows, path_rows[1:]):
        if f0 <= frame <= f1:
            if frame == f0:
                return c0
            beta = (frame - f0) / (f1 - f0)
            pose = interpolate_pose(
                [Pose(c0.world_to_camera), Pose(c1.world_to_camera)],
                np.array([1.0 - beta, beta]))
            return c0.with_pose(pose.matrix)
    raise InvalidInputError(f"frame {frame} not covered by the camera path")


# ---------------------------------------------------------------------------
# render

def cmd_render(args) -> int:
    assets = load_assets(args.bundle)
    width, height = _parse_resolution(args.resolution)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.frames is not None:
        start, end = _parse_frames(args.frames)
    elif assets.body is not None:
        start, end = 0, assets.body.n_frames - 1
    else:
        start, end = 0, 0
    if assets.body is not None and end >= assets.body.n_frames:
        return _fail(f"frame range ends at {end} but the body sequence "
                     f"has {assets.body.n_frames} frames")

    path_rows = read_camera_path(args.camera) if args.camera else None
    static_cam = default_view(assets, width, height)
    neutral = np.zeros(assets.head.n_channels if assets.head is not None
                       else 39)
    renderer = render_oracle if args.oracle else render_tiled

    metric_rows = []
    for frame in range(start, end + 1):
        cam = camera_at(path_rows, frame) if path_rows else static_cam
        body_frame = frame if assets.body is not None else 0
        splats = assemble_avatar(assets, body_frame, neutral)
        if args.oracle:
            rendered = renderer(splats, cam, background=assets.background)
        else:
            rendered = renderer(splats, cam, background=assets.background,
                                workers=args.workers)
        name = f"frame_{frame:06d}.png"
        write_png(out_dir / name, rendered.rgb)
        if args.refs:
            ref_path = Path(args.refs) / name
            if not ref_path.exists():
                return _fail(f"missing reference image {ref_path}")
            ours = read_png(out_dir / name)
            ref = read_png(ref_path)
            if ours.shape != ref.shape:
                return _fail(f"reference {ref_path} has shape {ref.shape}, "
                             f"render is {ours.shape}")
            mask = rendered.alpha > 1e-6
            metric_rows.append((frame, psnr(ours, ref),
                                psnr_masked(ours, ref, mask),
                                ssim(ours, ref), l1(ours, ref)))

    if metric_rows:
        with open(out_dir / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame", "psnr", "psnr_masked", "ssim", "l1"])
            for frame, p, pm, s, e in metric_rows:
                writer.writerow([frame, repr(float(p)), repr(float(pm)),
                                 repr(float(s)), repr(float(e))])
    print(f"rendered {end - start + 1} frame(s) to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# compose

def _prune_config(args, head_splats: GaussianSet) -> PruneConfig | None:
    if args.jaw_point is None and args.prune_radius is None:
        return None
    if args.jaw_point is None or args.jaw_normal is None:
        raise InvalidInputError(
            "pruning needs both --jaw-point and --jaw-normal")
    jaw_point = _parse_vec3(args.jaw_point)
    jaw_normal = _parse_vec3(args.jaw_normal)
    if args.prune_radius is None:
        return default_prune_config(head_splats, jaw_point, jaw_normal)
    center = (_parse_vec3(args.prune_center) if args.prune_center
              else head_splats.means.mean(axis=0))
    return PruneConfig(sphere_center=center, radius=args.prune_radius,
                       jaw_point=jaw_point, jaw_normal=jaw_normal)


def cmd_compose(args) -> int:
    head_bundle = load_bundle(args.head)
    body_bundle = load_bundle(args.body)
    rig = read_rig(args.rig) if args.rig else RigAlignment.identity(1)
    if not 0 <= args.frame < rig.n_frames:
        return _fail(f"--frame {args.frame} outside the rig's "
                     f"{rig.n_frames} frame(s)")
    placement = composed_transform(rig, args.frame)
    aligned = transform_set(head_bundle.splats, placement)
    head_count = aligned.count

    body_model = body_bundle.body
    body_static = body_bundle.splats
    cfg = _prune_config(args, head_bundle.splats)
    pruned = 0
    if cfg is not None:
        if body_model is not None:
            windows = []
            for window in body_model.windows:
                mask = prune_mask(window.canonical, cfg, placement)
                pruned += int(mask.sum())
                windows.append(window.take(np.flatnonzero(~mask)))
            body_model = BodyModel(windows)
        if body_static.count:
            mask = prune_mask(body_static, cfg, placement)
            pruned += int(mask.sum())
            body_static = body_static.take(np.flatnonzero(~mask))

    body_count = body_static.count + (
        sum(w.canonical.count for w in body_model.windows)
        if body_model is not None else 0)
    if body_count == 0:
        print("warning: body contributes 0 splats after pruning",
              file=sys.stderr)
        body_model = None

    if args.band_width is not None:
        reference = (body_model.windows[0].canonical if body_model is not None
                     else body_static)
        if reference.count == 0:
            print("warning: skipping harmonization, no body splats in band",
                  file=sys.stderr)
        else:
            aligned = harmonize_colors(aligned, reference,
                                       args.band_width).head

    injected = GaussianSet.empty(aligned.sh_degree)
    if args.inject > 0:
        if not args.boundary:
            return _fail("--inject needs --boundary vertices")
        vertices = placement.apply(read_boundary(args.boundary))
        injected = inject_border(aligned, vertices, args.inject,
                                 np.random.default_rng(args.seed))

    splats = concat(concat(aligned, injected), body_static)
    if args.library:
        library = read_keyframes(args.library)
    else:
        lib_text = meta_text(body_bundle.meta, "keyframes")
        library = (parse_keyframes(lib_text) if lib_text is not None
                   else default_library(body_model))
    store_rig = None
    if args.rig and rig.n_frames >= library.n_frames:
        store_rig = rig

    assets = AvatarAssets(splats=splats, head=head_bundle.head,
                          body=body_model, library=library, rig=store_rig)
    save_assets(args.out, assets)
    print(f"head splats: {head_count}")
    print(f"body splats: {body_count} (pruned {pruned})")
    print(f"border injected: {injected.count}")
    print(f"merged total: {head_count + injected.count + body_count}")
    return 0


# ---------------------------------------------------------------------------
# bench

def _bench_rows(assets: AvatarAssets):
    neutral = np.zeros(assets.head.n_channels if assets.head is not None
                       else 39)

    def bg_only(frame: int) -> GaussianSet:
        return assets.splats

    def bg_body(frame: int) -> GaussianSet:
        if assets.body is None:
            return assets.splats
        return concat(assets.splats, assets.body.frame_set(frame))

    def bg_body_head(frame: int) -> GaussianSet:
        return assemble_avatar(assets, frame, neutral)

    return [("✓", "", "", bg_only),
            ("✓", "✓", "", bg_body),
            ("✓", "✓", "✓", bg_body_head)]


def cmd_bench(args) -> int:
    assets = load_assets(args.bundle)
    width, height = _parse_resolution(args.resolution)
    cam = default_view(assets, width, height)
    n_frames = assets.body.n_frames if assets.body is not None else 1

    lines = [
        f"# frame timing at {width}x{height}, workers={args.workers}, "
        f"{args.seconds:.1f}s per row after {args.warmup_s:.1f}s warm-up",
        "# reference viewer full configuration: 105.27 fps (9.50 ms/frame), "
        "reported for context, not a gate",
        "bg,body,head,frames,mean_ms,p99_ms,fps",
    ]
    for bg, body, head, build in _bench_rows(assets):
        times_ms = []
        start = time.perf_counter()
        frame = 0
        while True:
            now = time.perf_counter()
            if now - start >= args.warmup_s + args.seconds:
                break
            splats = build(frame % n_frames)
            render_tiled(splats, cam, background=assets.background,
                         workers=args.workers)
            done = time.perf_counter()
            if now - start >= args.warmup_s:
                times_ms.append((done - now) * 1000.0)
            frame += 1
        if not times_ms:
            times_ms.append(float("nan"))
        mean_ms = float(np.mean(times_ms))
        p99_ms = float(np.percentile(times_ms, 99))
        fps = 1000.0 / mean_ms if mean_ms > 0 else float("inf")
        lines.append(f"{bg},{body},{head},{len(times_ms)},"
                     f"{mean_ms:.3f},{p99_ms:.3f},{fps:.2f}")

    report = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(report, encoding="utf-8")
    sys.stdout.write(report)
    return 0


# ---------------------------------------------------------------------------
# validate

def _audit_splat_payload(payload: bytes, problems: list[str]) -> None:
    cols = read_ply(payload)
    required = ("x", "y", "z", "opacity", "scale_0", "scale_1", "scale_2",
                "rot_0", "rot_1", "rot_2", "rot_3")
    missing = [name for name in required if name not in cols]
    if missing:
        problems.append(f"splat payload missing fields {missing}")
        return
    for name, arr in cols.items():
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            problems.append(
                f"splat field {name} has NaN/Inf at indices {bad[:10].tolist()}")
    quats = np.stack([cols[f"rot_{i}"] for i in range(4)], axis=1)
    finite = np.isfinite(quats).all(axis=1)
    norms = np.linalg.norm(np.where(finite[:, None], quats, 0.0), axis=1)
    bad = np.flatnonzero(finite & (np.abs(norms - 1.0) > 1e-6))
    if bad.size:
        problems.append(
            f"non-unit rotation quaternions at indices {bad[:10].tolist()}")


def cmd_validate(args) -> int:
    path = Path(args.bundle)
    problems: list[str] = []
    try:
        data = path.read_bytes()
    except OSError as exc:
        return _fail(str(exc))

    if len(data) < len(MAGIC) + 4 or data[:len(MAGIC)] != MAGIC:
        return _fail("not a model bundle (bad magic)")
    (version,) = struct.unpack_from("<I", data, len(MAGIC))
    if version != VERSION:
        return _fail(f"unsupported bundle version {version}")
    pos = len(MAGIC) + 4
    seen = []
    try:
        while pos < len(data):
            if pos + 12 > len(data):
                problems.append("file ended inside a chunk header")
                break
            tag = data[pos:pos + 4]
            (length,) = struct.unpack_from("<Q", data, pos + 4)
            pos += 12
            if pos + length > len(data):
                problems.append(
                    f"chunk {tag.decode('ascii', 'replace')} declares "
                    f"{length} bytes but the file ends early")
                break
            payload = data[pos:pos + length]
            pos += length
            seen.append(tag)
            if tag == b"SPLT":
                _audit_splat_payload(payload, problems)
            elif tag in (b"HEAD", b"BODY"):
                for name, arr in unpack_arrays(payload).items():
                    if arr.dtype.kind == "f" and not np.isfinite(arr).all():
                        problems.append(
                            f"{tag.decode()} array {name} has NaN/Inf")
        if b"SPLT" not in seen:
            problems.append("bundle has no SPLT chunk")
        if not problems:
            # structural audit passed; the full loader applies model checks
            load_bundle(path)
    except Ico3dError as exc:
        problems.append(str(exc))
    except Exception as exc:    # noqa: BLE001 - fuzzed input must diagnose
        problems.append(f"malformed payload: {exc}")

    if problems:
        for problem in problems:
            print(f"invalid: {problem}", file=sys.stderr)
        return 1
    print(f"{path.name}: ok")
    return 0


# ---------------------------------------------------------------------------
# serve

def cmd_serve(args) -> int:
    import uvicorn

    bundle = args.bundle or os.environ.get("ICO3D_BUNDLE")
    if not bundle:
        return _fail("no bundle: pass --bundle or set ICO3D_BUNDLE")
    width, height = _parse_resolution(args.resolution)
    assets = load_assets(bundle)
    warmup_kernels()  # compile before accepting sessions, not on frame one
    fmt = FORMAT_PNG if args.format == "png" else FORMAT_RAW_RGB8
    app = create_app(assets, PipelineConfig.from_env(), frame_format=fmt,
                     width=width, height=height, workers=args.workers,
                     seed=args.seed)
    port = args.port or int(os.environ.get("ICO3D_PORT", "8787"))
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ico3d", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a bundle to PNG frames")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--camera", help="camera path CSV")
    p.add_argument("--frames", help="inclusive range a..b")
    p.add_argument("--resolution", default="128x128")
    p.add_argument("--oracle", action="store_true",
                   help="use the reference renderer")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--refs", help="reference PNG directory for metrics")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("compose", help="compose head and body bundles")
    p.add_argument("--head", required=True)
    p.add_argument("--body", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rig", help="rig alignment file")
    p.add_argument("--frame", type=int, default=0,
                   help="rig frame used for placement")
    p.add_argument("--prune-radius", type=float)
    p.add_argument("--prune-center", help="x,y,z in the head frame")
    p.add_argument("--jaw-point", help="x,y,z in the head frame")
    p.add_argument("--jaw-normal", help="x,y,z unit vector in the head frame")
    p.add_argument("--band-width", type=float,
                   help="harmonization band width")
    p.add_argument("--boundary", help="boundary vertex CSV")
    p.add_argument("--inject", type=int, default=0,
                   help="number of border splats to inject")
    p.add_argument("--library", help="keyframe library file for the output")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("bench", help="frame timing report")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", help="CSV output path (also printed)")
    p.add_argument("--resolution", default="256x256")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seconds", type=float, default=4.0,
                   help="measured seconds per row")
    p.add_argument("--warmup-s", type=float, default=2.0,
                   help="warm-up seconds excluded per row")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("validate", help="audit a bundle file")
    p.add_argument("--bundle", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="run the websocket avatar service")
    p.add_argument("--bundle")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int)
    p.add_argument("--resolution", default="128x128")
    p.add_argument("--format", choices=("png", "raw"), default="png",
                   help="frame payload encoding")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Ico3dError as exc:
        return _fail(str(exc))
    except OSError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
