"""Build a small deterministic avatar for demos and smoke tests.

Writes three bundles into --out: head.i3d (a blob of Gaussians with an
expression model whose basis is perturbed so expressions visibly change
color), body.i3d (a second blob below the head with a two-window
deformation model and a keyframe library), and avatar.i3d composed from
the two via the command-line compose path. Everything is seeded, so the
same arguments always produce byte-identical bundles.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from ico3d.anim import ActionSegment, KeyframeLibrary, format_keyframes
from ico3d.body import BodyModel, new_window_model
from ico3d.cli import main as cli_main
from ico3d.core.bundle import save_bundle
from ico3d.core.gaussians import random_set
from ico3d.head.model import new_head_model


def build_bundles(out_dir: Path, seed: int, head_splats: int,
                  body_splats: int, n_frames: int) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    head = random_set(rng, head_splats, sh_degree=0, center=(0.0, 0.42, 0.0),
                      spread=0.16, scale_range=(0.02, 0.06))
    model = new_head_model(rng, head_splats, latent_dim=8, pe_levels=4,
                           hidden=16)
    model.basis[:] = rng.normal(0.0, 0.3, model.basis.shape)
    save_bundle(out_dir / "head.i3d", head, head=model)

    split = n_frames // 2
    canonical = random_set(rng, body_splats, sh_degree=0,
                           center=(0.0, -0.25, 0.0), spread=0.3,
                           scale_range=(0.02, 0.08))
    windows = []
    for frame_range in ((0, split), (split, n_frames - 1)):
        window = new_window_model(rng, canonical, frame_range,
                                  resolutions=(4, 8), feature_dim=4,
                                  hidden=16, modes=2)
        window.mlp.weights[-1][:] = rng.normal(0.0, 0.05,
                                               window.mlp.weights[-1].shape)
        windows.append(window)
    library = KeyframeLibrary(n_frames, 0, min(2, n_frames - 1),
                              (ActionSegment(1, n_frames - 1),))
    save_bundle(out_dir / "body.i3d", random_set(rng, 0, sh_degree=0),
                body=BodyModel(windows),
                meta={"keyframes": json.dumps(format_keyframes(library))})

    avatar = out_dir / "avatar.i3d"
    code = cli_main(["compose", "--head", str(out_dir / "head.i3d"),
                     "--body", str(out_dir / "body.i3d"),
                     "--out", str(avatar), "--seed", str(seed)])
    if code != 0:
        raise RuntimeError("compose step failed")
    return avatar


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--head-splats", type=int, default=60)
    parser.add_argument("--body-splats", type=int, default=80)
    parser.add_argument("--frames", type=int, default=12,
                        help="body frame count (>= 3)")
    args = parser.parse_args(argv)
    if args.frames < 3:
        parser.error("--frames must be at least 3")
    avatar = build_bundles(Path(args.out), args.seed, args.head_splats,
                           args.body_splats, args.frames)
    print(f"avatar bundle: {avatar}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
