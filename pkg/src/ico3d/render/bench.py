"""Render throughput benchmarking.

Each configuration row renders one scene repeatedly: a wall-clock warm-up
period is discarded (JIT compilation, cache priming), then frame times are
collected for the measurement window. Reported per row: mean and p99
milliseconds per frame plus derived fps.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass

import numpy as np

from ..core.camera import CameraModel
from ..core.gaussians import GaussianSet
from .rasterizer import render_tiled, warmup_kernels

WARMUP_SECONDS = 2.0


@dataclass
class BenchRow:
    scene: str
    splats: int
    resolution: str
    workers: int
    mean_ms: float
    p99_ms: float
    fps: float

    def as_record(self) -> list[str]:
        return [
            self.scene,
            str(self.splats),
            self.resolution,
            str(self.workers),
            f"{self.mean_ms:.3f}",
            f"{self.p99_ms:.3f}",
            f"{self.fps:.2f}",
        ]


CSV_HEADER = ["scene", "splats", "resolution", "workers", "mean_ms", "p99_ms", "fps"]


def bench_scene(
    name: str,
    splats: GaussianSet,
    cam: CameraModel,
    workers: int = 1,
    seconds: float = 5.0,
    warmup_seconds: float = WARMUP_SECONDS,
    min_frames: int = 3,
    clock=time.perf_counter,
) -> BenchRow:
    """Benchmark one scene; warm-up frames are rendered but not recorded."""
    warmup_kernels()
    deadline = clock() + warmup_seconds
    while clock() < deadline:
        render_tiled(splats, cam, workers=workers)
    times: list[float] = []
    deadline = clock() + seconds
    while clock() < deadline or len(times) < min_frames:
        t0 = clock()
        render_tiled(splats, cam, workers=workers)
        times.append(clock() - t0)
    arr = np.asarray(times) * 1e3
    mean_ms = float(arr.mean())
    return BenchRow(
        scene=name,
        splats=splats.count,
        resolution=f"{cam.width}x{cam.height}",
        workers=workers,
        mean_ms=mean_ms,
        p99_ms=float(np.percentile(arr, 99)),
        fps=(1e3 / mean_ms) if mean_ms > 0 else float("inf"),
    )


def bench_rows(
    scenes: list[tuple[str, GaussianSet]],
    cam: CameraModel,
    workers: int = 1,
    seconds: float = 5.0,
    warmup_seconds: float = WARMUP_SECONDS,
) -> list[BenchRow]:
    return [
        bench_scene(name, splats, cam, workers=workers, seconds=seconds,
                    warmup_seconds=warmup_seconds)
        for name, splats in scenes
    ]


def rows_to_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    for row in rows:
        buf.write(",".join(row.as_record()) + "\n")
    return buf.getvalue()
