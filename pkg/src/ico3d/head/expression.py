"""Expression vector streams: CSV files and a synthetic oscillator.

Layout is fixed: 32 audio features followed by 7 eye parameters, one frame
per row at a fixed frame rate. Eye parameters live in [0,1].
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from .model import N_AUDIO, N_EYE

EXPRESSION_COLUMNS = [f"a{i}" for i in range(N_AUDIO)] + \
    [f"eye{i}" for i in range(N_EYE)]
DEFAULT_FPS = 30.0


@dataclass
class ExpressionStream:
    vectors: np.ndarray  # (T, 39)
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != len(EXPRESSION_COLUMNS):
            raise InvalidInputError(
                f"expression stream needs {len(EXPRESSION_COLUMNS)} columns, "
                f"got shape {self.vectors.shape}")
        if not np.isfinite(self.vectors).all():
            raise InvalidInputError("expression stream contains non-finite values")
        eye = self.vectors[:, N_AUDIO:]
        if eye.size and (eye.min() < 0.0 or eye.max() > 1.0):
            raise InvalidInputError("eye parameters must lie in [0,1]")

    @property
    def frames(self) -> int:
        return self.vectors.shape[0]

    @property
    def duration(self) -> float:
        return self.frames / self.fps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.frames) / self.fps

    def frame(self, idx: int) -> np.ndarray:
        return self.vectors[idx]


def read_expression_csv(path: str | os.PathLike,
                        fps: float = DEFAULT_FPS) -> ExpressionStream:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError("expression file is empty") from None
        if [h.strip() for h in header] != EXPRESSION_COLUMNS:
            raise InvalidInputError(
                "expression header must be a0..a31,eye0..eye6")
        rows = []
        for i, row in enumerate(reader):
            if not row:
                continue
            if len(row) != len(EXPRESSION_COLUMNS):
                raise InvalidInputError(
                    f"row {i + 1}: expected {len(EXPRESSION_COLUMNS)} values, "
                    f"got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise InvalidInputError(f"row {i + 1}: {exc}") from None
    if not rows:
        raise InvalidInputError("expression file has no data rows")
    return ExpressionStream(np.asarray(rows), fps=fps)


def write_expression_csv(path: str | os.PathLike,
                         stream: ExpressionStream) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EXPRESSION_COLUMNS)
        for row in stream.vectors:
            writer.writerow([f"{v:.10g}" for v in row])


@dataclass
class OscillatorConfig:
    """Seed-deterministic synthetic expressions: each audio channel is a
    sine with rng-drawn frequency/phase scaled by `amplitude`; eye channels
    oscillate inside [0, amplitude] so amplitude 0 yields all-zero frames."""
    amplitude: float = 0.5
    seed: int = 0
    freq_range: tuple[float, float] = (0.4, 2.5)

    def __post_init__(self):
        if not 0.0 <= self.amplitude <= 1.0:
            raise InvalidInputError("oscillator amplitude must be in [0,1]")


def oscillator_stream(frames: int, config: OscillatorConfig | None = None,
                      fps: float = DEFAULT_FPS) -> ExpressionStream:
    cfg = config or OscillatorConfig()
    rng = np.random.default_rng(cfg.seed)
    n_ch = len(EXPRESSION_COLUMNS)
    freqs = rng.uniform(*cfg.freq_range, size=n_ch)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_ch)
    t = np.arange(frames)[:, None] / fps
    waves = np.sin(2.0 * np.pi * freqs[None, :] * t + phases[None, :])
    vectors = np.empty((frames, n_ch))
    vectors[:, :N_AUDIO] = cfg.amplitude * waves[:, :N_AUDIO]
    vectors[:, N_AUDIO:] = 0.5 * cfg.amplitude * (1.0 + waves[:, N_AUDIO:])
    return ExpressionStream(vectors, fps=fps)


def expression_stream(source, fps: float = DEFAULT_FPS, *,
                      frames: int | None = None) -> ExpressionStream:
    """File path -> parsed CSV stream; OscillatorConfig -> synthetic stream
    (requires `frames`)."""
    if isinstance(source, OscillatorConfig):
        if frames is None:
            raise InvalidInputError("synthetic streams need a frame count")
        return oscillator_stream(frames, source, fps=fps)
    return read_expression_csv(source, fps=fps)
