"""Conversational pipeline: audio IO, stage mocks, wire protocol,
session state machine, and the websocket frame service."""

from .audio import SAMPLE_RATE, wav_bytes, wav_duration, wav_samples
from .mocks import (MOCK_TRANSCRIPT, mock_asr, mock_expr, mock_llm,
                    mock_tts)
from .protocol import (EVENT_AUDIO, EVENT_BUSY, EVENT_ERROR, EVENT_REPLY,
                       FORMAT_PNG, FORMAT_RAW_RGB8, FrameMessage,
                       camera_from_message, decode_frame, encode_frame,
                       frame_payload, make_camera, make_chat, make_event,
                       parse_control, png_bytes, png_image)
from .service import (AvatarAssets, assemble_avatar, create_app,
                      default_library, default_view, load_assets,
                      meta_text, render_avatar, save_assets)
from .session import (FrameScheduler, PipelineConfig, Session, TurnResult,
                      frame_loop, run_asr, run_expr, run_llm, run_tts)

__all__ = [
    "SAMPLE_RATE", "wav_bytes", "wav_duration", "wav_samples",
    "MOCK_TRANSCRIPT", "mock_asr", "mock_expr", "mock_llm", "mock_tts",
    "EVENT_AUDIO", "EVENT_BUSY", "EVENT_ERROR", "EVENT_REPLY",
    "FORMAT_PNG", "FORMAT_RAW_RGB8", "FrameMessage",
    "camera_from_message", "decode_frame", "encode_frame", "frame_payload",
    "make_camera", "make_chat", "make_event", "parse_control",
    "png_bytes", "png_image",
    "AvatarAssets", "assemble_avatar", "create_app", "default_library",
    "default_view", "load_assets", "meta_text", "render_avatar",
    "save_assets",
    "FrameScheduler", "PipelineConfig", "Session", "TurnResult",
    "frame_loop", "run_asr", "run_expr", "run_llm", "run_tts",
]
