"""Per-frame data model shared by the synthesizer, the pipeline and the tools.

A frame is a set of named float images (the G-buffer channels plus the noisy
1spp signals); a sequence is an ordered list of frames plus a JSON manifest.
All buffers are immutable value data once built: every pass reads its inputs
and writes fresh arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from enum import Enum

import numpy as np

FORMAT_VERSION = 1

# canonical channel set: name -> (stored arity, in-memory arity)
CHANNELS = {
    "depth": (1, 1),
    "normal": (3, 3),
    "motion": (3, 2),  # 2-vector padded to 3 channels on disk
    "object_id": (1, 1),
    "albedo": (3, 3),
    "roughness": (1, 1),
    "emissive": (3, 3),
    "shadow_angle": (1, 1),
    "shadow_1spp": (1, 1),
    "specular_1spp": (3, 3),
    "shadow_ref": (1, 1),
    "specular_ref": (3, 3),
    "reference": (3, 3),
    # pipeline outputs
    "shadow_denoised": (1, 1),
    "specular_denoised": (3, 3),
    "composite": (3, 3),
    "composite_noisy": (3, 3),
}


def is_known_channel(name: str) -> bool:
    """Channels outside the registry are allowed under the debug_ prefix."""
    return name in CHANNELS or name.startswith("debug_")

GBUFFER_CHANNELS = ("depth", "normal", "motion", "object_id", "albedo", "roughness", "emissive")


class ChannelKind(Enum):
    SHADOW = "shadow"
    INDIRECT_SPECULAR = "specular"


@dataclass
class GBufferFrame:
    """Per-pixel geometric attributes from the primary visibility pass.

    depth is linear view-space distance (+inf where no geometry was hit),
    normals are unit world-space vectors, motion is the pixel offset from the
    current pixel center to its position in the previous frame.
    """

    width: int
    height: int
    depth: np.ndarray      # (H, W) float32
    normal: np.ndarray     # (H, W, 3) float32
    motion: np.ndarray     # (H, W, 2) float32
    object_id: np.ndarray  # (H, W) int32, 0 = background
    albedo: np.ndarray     # (H, W, 3) float32
    roughness: np.ndarray  # (H, W) float32
    emissive: np.ndarray   # (H, W, 3) float32

    @property
    def foreground(self) -> np.ndarray:
        return self.object_id != 0


@dataclass
class NoisyChannel:
    """A 1spp HDR signal to denoise: scalar visibility or RGB specular."""

    kind: ChannelKind
    data: np.ndarray  # (H, W) for SHADOW, (H, W, 3) for INDIRECT_SPECULAR
    spp: int = 1


@dataclass
class TemporalHistory:
    """Accumulated color, luminance moments and integrated-frame count."""

    color: np.ndarray        # (H, W, C)
    moment1: np.ndarray      # (H, W)
    moment2: np.ndarray      # (H, W)
    history_len: np.ndarray  # (H, W) int32


@dataclass
class DenoiseConfig:
    """Every tunable of the denoising pipeline.

    Defaults follow common SVGF practice where the technique itself leaves
    them open; the two adaptive-start thresholds and the Reinhard symbols are
    the documented values of the corresponding techniques.
    """

    alpha: float = 0.2
    moments_alpha: float = 0.2
    clamp_gamma: float = 1.0
    rectify_mode: str = "off"  # off | clamp | clip
    sigma_z: float = 1.0
    sigma_n: float = 128.0
    sigma_l: float = 4.0
    iterations: int = 4
    adaptive_start: bool = False
    roughness_start_threshold: float = 0.2
    shadow_angle_start_threshold: float = 6.0
    separable: bool = False
    reinhard: bool = False
    luma_multiplier: float = 1.0
    reinhard_weight: float = 1.0
    ibl_adaptive_iterations: bool = False
    spatial_variance_min_history: int = 4
    feedback: str = "first_iteration"  # first_iteration | none
    depth_consistency: float = 0.1
    normal_consistency: float = 0.9
    history_cap: int = 256

    def validate(self) -> None:
        problems = []
        if not 0.0 < self.alpha <= 1.0:
            problems.append(f"alpha {self.alpha} outside (0, 1]")
        if not 0.0 < self.moments_alpha <= 1.0:
            problems.append(f"moments_alpha {self.moments_alpha} outside (0, 1]")
        if self.clamp_gamma <= 0:
            problems.append(f"clamp_gamma {self.clamp_gamma} must be > 0")
        if self.rectify_mode not in ("off", "clamp", "clip"):
            problems.append(f"rectify_mode {self.rectify_mode!r} not one of off/clamp/clip")
        for name in ("sigma_z", "sigma_n", "sigma_l"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be > 0")
        if not 0 <= self.iterations <= 8:
            problems.append(f"iterations {self.iterations} outside [0, 8]")
        if self.luma_multiplier < 0 or self.reinhard_weight < 0:
            problems.append("reinhard parameters must be >= 0")
        if self.spatial_variance_min_history < 1:
            problems.append("spatial_variance_min_history must be >= 1")
        if self.feedback not in ("first_iteration", "none"):
            problems.append(f"feedback {self.feedback!r} not one of first_iteration/none")
        if problems:
            raise ValueError("invalid DenoiseConfig: " + "; ".join(problems))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DenoiseConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown DenoiseConfig keys: {sorted(unknown)}")
        cfg = cls(**known)
        cfg.validate()
        return cfg


@dataclass
class FrameSequence:
    """An on-disk animation: manifest plus per-frame named channel images."""

    manifest: dict
    frames: list = field(default_factory=list)  # list[dict[str, np.ndarray]]

    @property
    def width(self) -> int:
        return int(self.manifest["width"])

    @property
    def height(self) -> int:
        return int(self.manifest["height"])

    @property
    def channels(self) -> list:
        return list(self.manifest["channels"])

    def gbuffer(self, index: int) -> GBufferFrame:
        f = self.frames[index]
        return GBufferFrame(
            width=self.width,
            height=self.height,
            depth=f["depth"],
            normal=f["normal"],
            motion=f["motion"],
            object_id=f["object_id"].astype(np.int32),
            albedo=f["albedo"],
            roughness=f["roughness"],
            emissive=f["emissive"],
        )

    def noisy(self, index: int, kind: ChannelKind) -> NoisyChannel:
        name = "shadow_1spp" if kind is ChannelKind.SHADOW else "specular_1spp"
        return NoisyChannel(kind=kind, data=self.frames[index][name],
                            spp=int(self.manifest.get("spp", 1)))


def _first_bad_pixel(mask: np.ndarray) -> tuple:
    ys, xs = np.nonzero(mask)
    return int(xs[0]), int(ys[0])


def validate_frame(frame: dict, width: int, height: int) -> list:
    """Collect every violated frame invariant; an empty list means valid.

    Never raises: a violation is reported as one message naming the channel
    and an example pixel.
    """
    violations = []
    for name, arr in frame.items():
        expect = CHANNELS.get(name)
        if expect is not None:
            arity = expect[1]
            want = (height, width) if arity == 1 else (height, width, arity)
            if arr.shape != want:
                violations.append(f"channel '{name}' has shape {arr.shape}, expected {want}")
                continue
        bad = ~np.isfinite(arr)
        if name == "depth":
            bad = bad & ~np.isposinf(arr)  # +inf marks background misses
        if np.any(bad):
            x, y = _first_bad_pixel(bad.reshape(height, width, -1).any(axis=2))
            violations.append(f"non-finite value in channel '{name}' at pixel ({x}, {y})")

    oid = frame.get("object_id")
    fg = None
    if oid is not None:
        fg = oid.reshape(height, width) != 0

    normal = frame.get("normal")
    if normal is not None and fg is not None and normal.shape == (height, width, 3):
        norms = np.linalg.norm(normal.astype(np.float64), axis=2)
        bad = fg & (np.abs(norms - 1.0) > 1e-4)
        if np.any(bad):
            x, y = _first_bad_pixel(bad)
            violations.append(
                f"channel 'normal' not unit length at pixel ({x}, {y}): |n| = {norms[y, x]:.6f}")

    depth = frame.get("depth")
    if depth is not None and fg is not None and depth.shape == (height, width):
        bad = fg & ~(depth > 0)
        if np.any(bad):
            x, y = _first_bad_pixel(bad)
            violations.append(f"channel 'depth' not positive on geometry at pixel ({x}, {y})")

    rough = frame.get("roughness")
    if rough is not None and rough.shape == (height, width):
        bad = (rough < 0) | (rough > 1)
        if np.any(bad):
            x, y = _first_bad_pixel(bad)
            violations.append(f"channel 'roughness' outside [0, 1] at pixel ({x}, {y})")

    shadow = frame.get("shadow_1spp")
    if shadow is not None and shadow.shape == (height, width):
        bad = np.isfinite(shadow) & ((shadow < 0) | (shadow > 1))
        if np.any(bad):
            x, y = _first_bad_pixel(bad)
            violations.append(f"channel 'shadow_1spp' outside [0, 1] at pixel ({x}, {y})")

    spec = frame.get("specular_1spp")
    if spec is not None and spec.shape == (height, width, 3):
        bad = np.isfinite(spec) & (spec < 0)
        if np.any(bad):
            x, y = _first_bad_pixel(bad.any(axis=2))
            violations.append(f"channel 'specular_1spp' negative at pixel ({x}, {y})")

    return violations
