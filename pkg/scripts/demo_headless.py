"""End-to-end headless demo: one mock conversation turn, rendered to disk.

Builds (or loads) a toy avatar, sends one chat message through the fully
mocked pipeline, then drives the frame loop with a simulated 30 FPS clock,
writing every rendered frame as a PNG plus the reply audio as a WAV. No
network, no GPU, no display; finishes in seconds and exits 0 on success.

    python3 scripts/demo_headless.py --out demo_out
"""

import argparse
import subprocess
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from ico3d.convo import (PipelineConfig, Session, default_view, frame_loop,
                         load_assets, render_avatar, wav_duration)
from ico3d.render import write_png


class SimulatedClock:
    """Monotonic clock that only moves when the loop sleeps."""

    def __init__(self):
        self.now = 0.0

    def __call__(self) -> float:
        return self.now

    def sleep(self, dt: float) -> None:
        self.now += dt


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="demo_out", help="output directory")
    parser.add_argument("--bundle", help="existing avatar bundle "
                        "(default: build a toy one under --out)")
    parser.add_argument("--text", default="hello avatar",
                        help="chat message to send")
    parser.add_argument("--frames", type=int, default=60,
                        help="number of frames to render")
    parser.add_argument("--resolution", default="96x96")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        width, height = (int(v) for v in args.resolution.split("x"))
    except ValueError:
        parser.error("--resolution must look like 96x96")

    if args.bundle:
        bundle = Path(args.bundle)
    else:
        builder = Path(__file__).with_name("make_toy_avatar.py")
        subprocess.run([sys.executable, str(builder), "--out",
                        str(out_dir / "assets"), "--seed", str(args.seed)],
                       check=True)
        bundle = out_dir / "assets" / "avatar.i3d"

    assets = load_assets(bundle)
    camera = default_view(assets, width, height)
    session = Session(assets.library, camera, PipelineConfig(),
                      rng=np.random.default_rng(args.seed))

    result = session.handle_turn(args.text)
    wav_path = out_dir / "reply.wav"
    wav_path.write_bytes(result.audio)
    print(f"reply: {result.reply_text}")
    print(f"audio: {wav_path} ({wav_duration(result.audio):.2f} s, "
          f"{len(result.plan)} talking frames)")

    frames_dir = out_dir / "frames"
    frames_dir.mkdir(exist_ok=True)
    clock = SimulatedClock()

    def render(frame, expression, cam):
        return render_avatar(assets, frame, expression, cam)

    written = 0
    for tick, rendered in frame_loop(session, render,
                                     max_frames=args.frames,
                                     clock=clock, sleep=clock.sleep):
        write_png(frames_dir / f"frame_{tick:06d}.png", rendered.rgb)
        written += 1
    print(f"frames: {written} PNGs in {frames_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
