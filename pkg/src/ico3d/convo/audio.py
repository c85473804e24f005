"""WAV plumbing for the conversational pipeline: mono PCM16 at 24 kHz."""

from __future__ import annotations

import io
import wave

import numpy as np

from ..errors import InvalidInputError

SAMPLE_RATE = 24000


def wav_bytes(samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> bytes:
    """Encode float samples in [-1, 1] as a mono PCM16 WAV."""
    samples = np.asarray(samples, dtype=np.float64).reshape(-1)
    if not np.isfinite(samples).all():
        raise InvalidInputError("audio samples must be finite")
    pcm = np.clip(np.round(samples * 32767.0), -32768, 32767).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(sample_rate)
        wav.writeframes(pcm.tobytes())
    return buf.getvalue()


def wav_samples(data: bytes) -> tuple[np.ndarray, int]:
    """Decode a mono PCM16 WAV into (float samples in [-1, 1], sample rate)."""
    try:
        with wave.open(io.BytesIO(data), "rb") as wav:
            channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            raw = wav.readframes(wav.getnframes())
    except (wave.Error, EOFError) as exc:
        raise InvalidInputError(f"not a readable WAV: {exc}") from exc
    if channels != 1 or width != 2:
        raise InvalidInputError(
            f"expected mono PCM16, got {channels} channel(s) {8 * width}-bit")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0
    return samples, rate


def wav_duration(data: bytes) -> float:
    samples, rate = wav_samples(data)
    return len(samples) / rate
