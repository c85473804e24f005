"""Deterministic stand-ins for the remote pipeline stages.

Every mock is a pure function of its input, so a fully mocked turn is
reproducible end to end. The TTS length rule (0.06 s per character) pins
down the audio/animation sync arithmetic that the rest of the pipeline is
tested against.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError
from ..head.model import N_AUDIO
from .audio import SAMPLE_RATE, wav_bytes, wav_samples

MOCK_TRANSCRIPT = "hello avatar"
SECONDS_PER_CHAR = 0.06
EXPR_FPS = 30
SAMPLES_PER_EXPR_FRAME = SAMPLE_RATE // EXPR_FPS   # 800

# fixed per-channel gains turning the loudness envelope into 32 features
_CHANNEL_GAIN = np.linspace(1.0, 0.1, N_AUDIO)


def mock_asr(audio: bytes) -> str:
    """Fixed transcript regardless of content (audio must decode)."""
    wav_samples(audio)
    return MOCK_TRANSCRIPT


def mock_llm(prompt: str) -> str:
    if not isinstance(prompt, str) or not prompt.strip():
        raise InvalidInputError("prompt must be nonempty text")
    return f"You said: {prompt.strip()}"


def mock_tts(text: str) -> bytes:
    """Sine-carrier speech: 0.06 s per character, tone pitched by the
    character code, with a short fade at segment edges."""
    if not isinstance(text, str):
        raise InvalidInputError("text must be a string")
    seg = int(round(SECONDS_PER_CHAR * SAMPLE_RATE))
    samples = np.zeros(seg * len(text))
    fade = np.minimum(1.0, np.minimum(np.arange(seg), np.arange(seg)[::-1]) / 120.0)
    t = np.arange(seg) / SAMPLE_RATE
    for i, ch in enumerate(text):
        freq = 200.0 + 10.0 * (ord(ch) % 64)
        samples[i * seg:(i + 1) * seg] = \
            0.4 * np.sin(2.0 * np.pi * freq * t) * fade
    return wav_bytes(samples)


def mock_expr(audio: bytes) -> np.ndarray:
    """Loudness-envelope features: (T, 32) at 30 fps, T = ceil(samples/800).

    Each frame is the chunk RMS spread over the channels by fixed gains, so
    silence maps to exactly zero (the neutral expression)."""
    samples, rate = wav_samples(audio)
    if rate != SAMPLE_RATE:
        raise InvalidInputError(f"expected {SAMPLE_RATE} Hz audio, got {rate}")
    n_frames = -(-len(samples) // SAMPLES_PER_EXPR_FRAME)
    env = np.zeros(n_frames)
    for f in range(n_frames):
        chunk = samples[f * SAMPLES_PER_EXPR_FRAME:(f + 1) * SAMPLES_PER_EXPR_FRAME]
        env[f] = np.sqrt(np.mean(chunk * chunk))
    return env[:, None] * _CHANNEL_GAIN[None, :]
