"""Spatiotemporal variance-guided denoising of 1spp ray-traced channels,
with a deterministic mini path tracer producing its inputs and ground truth."""

from .frames import (ChannelKind, DenoiseConfig, FrameSequence, GBufferFrame,
                     NoisyChannel, TemporalHistory, validate_frame)
from .pipeline import PRESETS, preset_config, run_pipeline, synthesize_sequence
from .scenes import load_scene, preset_scene, scene_from_dict
from .store import load_sequence, save_sequence

__all__ = [
    "ChannelKind", "DenoiseConfig", "FrameSequence", "GBufferFrame",
    "NoisyChannel", "TemporalHistory", "validate_frame",
    "PRESETS", "preset_config", "run_pipeline", "synthesize_sequence",
    "load_scene", "preset_scene", "scene_from_dict",
    "load_sequence", "save_sequence",
]
