"""Scene descriptors: analytic geometry, a spherical area light, env maps.

Scenes are plain JSON documents. Any vec3-valued field that animates
(camera position/look-at, light center, per-object offsets) accepts either a
constant `[x, y, z]` or `{"keyframes": [[frame, [x, y, z]], ...]}` with
linear interpolation, clamped outside the keyframed range.

Four presets mirror the usual test structure for this kind of denoiser:
`cubes-distance` (roughness-graded reflectors), `shadow-objects` (floating
occluders over a ground plane), `pillars` and `breakfast-lite`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


def _kf_parse(value):
    """Normalize a constant or keyframed vec3 into [(frame, vec3), ...]."""
    if isinstance(value, dict):
        kfs = [(int(f), np.asarray(v, dtype=np.float64)) for f, v in value["keyframes"]]
        if not kfs:
            raise ValueError("empty keyframe list")
        return sorted(kfs, key=lambda kv: kv[0])
    return [(0, np.asarray(value, dtype=np.float64))]


def _kf_eval(keyframes, frame: float) -> np.ndarray:
    if frame <= keyframes[0][0]:
        return keyframes[0][1]
    if frame >= keyframes[-1][0]:
        return keyframes[-1][1]
    for (f0, v0), (f1, v1) in zip(keyframes, keyframes[1:]):
        if f0 <= frame <= f1:
            if f1 == f0:
                return v1
            t = (frame - f0) / (f1 - f0)
            return v0 + t * (v1 - v0)
    return keyframes[-1][1]


def _kf_dump(keyframes):
    if len(keyframes) == 1:
        return list(keyframes[0][1])
    return {"keyframes": [[f, list(v)] for f, v in keyframes]}


@dataclass
class Material:
    albedo: np.ndarray
    roughness: float
    emissive: np.ndarray


@dataclass
class SceneObject:
    kind: str  # sphere | box
    oid: int
    material: Material
    center: np.ndarray = None     # sphere
    radius: float = 0.0           # sphere
    lo: np.ndarray = None         # box
    hi: np.ndarray = None         # box
    motion: list = field(default_factory=lambda: [(0, np.zeros(3))])

    def offset_at(self, frame: float) -> np.ndarray:
        return _kf_eval(self.motion, frame)


@dataclass
class GroundPlane:
    height: float
    oid: int
    material: Material


@dataclass
class AreaLight:
    center_kf: list
    intensity: np.ndarray
    radius: float

    def center_at(self, frame: float) -> np.ndarray:
        return _kf_eval(self.center_kf, frame)


@dataclass
class Scene:
    name: str
    width: int
    height: int
    camera_pos: list      # keyframes
    camera_look: list     # keyframes
    camera_up: np.ndarray
    vfov_deg: float
    objects: list
    ground: GroundPlane
    light: AreaLight
    shadow_angle_deg: float
    reference_point: np.ndarray
    env: np.ndarray       # (He, We, 3) lat-long radiance
    env_spec: dict
    frame_count: int = None
    raw: dict = None

    def camera_at(self, frame: float):
        return (_kf_eval(self.camera_pos, frame), _kf_eval(self.camera_look, frame),
                self.camera_up, self.vfov_deg)

    def validate(self) -> None:
        if not self.objects:
            raise ValueError("scene needs at least one object")
        ids = [o.oid for o in self.objects]
        if self.ground is not None:
            ids.append(self.ground.oid)
        if len(set(ids)) != len(ids) or any(i < 1 for i in ids):
            raise ValueError("object ids must be unique and >= 1")
        if self.light.radius < 0:
            raise ValueError("light radius must be >= 0")
        if self.env.shape[0] < 4 or self.env.shape[1] < 8:
            raise ValueError("env map must be at least 8x4")


# ---------------------------------------------------------------------------
# environment maps

def env_constant(value, width=16, height=8) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=np.float64),
                           (height, width, 3)).copy()


def env_gradient_sky(width=32, height=16, scale=1.0, sun_dir=(0.4, 0.65, -0.3),
                     sun_intensity=(24.0, 22.0, 18.0), sun_cos=0.985) -> np.ndarray:
    """Zenith-to-horizon gradient with a dark lower hemisphere and a sun blob."""
    from .envmap import latlong_directions

    dirs = latlong_directions(width, height)
    up = dirs[:, :, 1]
    zenith = np.array([0.25, 0.45, 0.90]) * scale
    horizon = np.array([0.75, 0.80, 0.90]) * scale
    below = np.array([0.16, 0.13, 0.11]) * scale
    t = np.clip(up, 0.0, 1.0)[..., None]
    sky = horizon * (1 - t) + zenith * t
    img = np.where(up[..., None] >= 0.0, sky, below)
    sd = np.asarray(sun_dir, dtype=np.float64)
    sd = sd / np.linalg.norm(sd)
    cos = dirs @ sd
    img = img + (cos[..., None] > sun_cos) * np.asarray(sun_intensity)
    return img


def _build_env(spec: dict) -> np.ndarray:
    kind = spec.get("kind", "gradient")
    if kind == "constant":
        return env_constant(spec.get("value", [0.5, 0.5, 0.5]),
                            spec.get("width", 16), spec.get("height", 8))
    if kind == "gradient":
        keys = ("width", "height", "scale", "sun_dir", "sun_intensity", "sun_cos")
        return env_gradient_sky(**{k: spec[k] for k in keys if k in spec})
    if kind == "file":
        from .pfm import read_pfm
        arr = read_pfm(spec["path"]).astype(np.float64)
        if arr.ndim == 2:
            arr = np.repeat(arr[:, :, None], 3, axis=2)
        return arr
    raise ValueError(f"unknown env map kind {kind!r}")


# ---------------------------------------------------------------------------
# JSON (de)serialization

def _material_from(d: dict) -> Material:
    return Material(albedo=np.asarray(d.get("albedo", [0.5, 0.5, 0.5]), dtype=np.float64),
                    roughness=float(d.get("roughness", 0.5)),
                    emissive=np.asarray(d.get("emissive", [0.0, 0.0, 0.0]), dtype=np.float64))


def scene_from_dict(doc: dict) -> Scene:
    cam = doc["camera"]
    objects = []
    for od in doc["objects"]:
        mat = _material_from(od)
        obj = SceneObject(kind=od["type"], oid=int(od["id"]), material=mat,
                          motion=_kf_parse(od.get("motion", [0.0, 0.0, 0.0])))
        if od["type"] == "sphere":
            obj.center = np.asarray(od["center"], dtype=np.float64)
            obj.radius = float(od["radius"])
        elif od["type"] == "box":
            obj.lo = np.asarray(od["min"], dtype=np.float64)
            obj.hi = np.asarray(od["max"], dtype=np.float64)
        else:
            raise ValueError(f"unknown object type {od['type']!r}")
        objects.append(obj)

    ground = None
    if doc.get("ground"):
        g = doc["ground"]
        ground = GroundPlane(height=float(g.get("height", 0.0)), oid=int(g["id"]),
                             material=_material_from(g))

    ldoc = doc["light"]
    center_kf = _kf_parse(ldoc["center"])
    reference_point = np.asarray(doc.get("reference_point", [0.0, 0.0, 0.0]), dtype=np.float64)
    shadow_angle = doc.get("shadow_angle_deg")
    if "radius" in ldoc and ldoc["radius"] is not None:
        radius = float(ldoc["radius"])
        if shadow_angle is None:
            dist = np.linalg.norm(_kf_eval(center_kf, 0) - reference_point)
            shadow_angle = math.degrees(2.0 * math.atan2(radius, dist))
    else:
        if shadow_angle is None:
            raise ValueError("light needs either a radius or a scene shadow_angle_deg")
        # radius from the cone the light subtends at the reference receiver,
        # fixed at frame 0 so a moving light keeps its size
        dist = np.linalg.norm(_kf_eval(center_kf, 0) - reference_point)
        radius = dist * math.tan(math.radians(shadow_angle) / 2.0)

    env_spec = doc.get("env", {"kind": "gradient"})
    width, height = doc["resolution"]
    scene = Scene(
        name=doc.get("name", "unnamed"),
        width=int(width), height=int(height),
        camera_pos=_kf_parse(cam["position"]),
        camera_look=_kf_parse(cam["look_at"]),
        camera_up=np.asarray(cam.get("up", [0.0, 1.0, 0.0]), dtype=np.float64),
        vfov_deg=float(cam.get("vfov_deg", 45.0)),
        objects=objects,
        ground=ground,
        light=AreaLight(center_kf=center_kf,
                        intensity=np.asarray(ldoc["intensity"], dtype=np.float64),
                        radius=radius),
        shadow_angle_deg=float(shadow_angle),
        reference_point=reference_point,
        env=_build_env(env_spec),
        env_spec=env_spec,
        frame_count=doc.get("frame_count"),
        raw=doc,
    )
    scene.validate()
    return scene


def load_scene(path) -> Scene:
    with open(path) as f:
        return scene_from_dict(json.load(f))


# ---------------------------------------------------------------------------
# presets

def _movement_kf(base, movement: str, delta, frames=64, teleport_frame=32):
    base = np.asarray(base, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if movement == "linear":
        return {"keyframes": [[0, list(base)], [frames - 1, list(base + delta)]]}
    if movement == "teleport":
        return {"keyframes": [[teleport_frame - 1, list(base)],
                              [teleport_frame, list(base + delta)]]}
    return list(base)


def preset_scene(name: str, width=96, height=96, roughness=0.3, shadow_angle=4.0,
                 movement="static", teleport_frame=32) -> dict:
    """Build a preset scene document.

    movement: static | camera | lights-objects | light-teleport
    """
    mv_cam = movement == "camera"
    mv_obj = movement == "lights-objects"
    mv_tel = movement == "light-teleport"

    if name == "cubes-distance":
        # reflectors float above the floor so their penumbrae are wide and
        # visible; the light is bright enough that shadow noise matters in
        # the composite alongside the reflections
        cubes = []
        for i, (x, z, alb) in enumerate([(-1.9, 0.3, (0.75, 0.22, 0.18)),
                                         (0.0, -1.4, (0.20, 0.65, 0.25)),
                                         (1.9, -3.1, (0.22, 0.32, 0.80))]):
            cube = {"type": "box", "min": [x - 0.65, 0.8, z - 0.65],
                    "max": [x + 0.65, 2.1, z + 0.65],
                    "albedo": list(alb), "roughness": roughness, "id": 2 + i}
            if mv_obj and i == 1:
                cube["motion"] = _movement_kf([0, 0, 0], "linear", [1.4, 0.0, 0.0])
            cubes.append(cube)
        cam_pos = [0.0, 2.6, 6.8]
        doc = {
            "name": "cubes-distance",
            "resolution": [width, height],
            "camera": {
                "position": _movement_kf(cam_pos, "linear", [1.8, 0, 0]) if mv_cam else cam_pos,
                "look_at": _movement_kf([0, 0.9, -1], "linear", [1.8, 0, 0]) if mv_cam else [0, 0.9, -1],
                "vfov_deg": 42.0,
            },
            "objects": cubes,
            "ground": {"height": 0.0, "albedo": [0.42, 0.42, 0.44],
                       "roughness": roughness, "id": 1},
            "light": {"center": [3.5, 6.5, 4.0], "intensity": [220.0, 214.0, 200.0]},
            "shadow_angle_deg": shadow_angle,
            "reference_point": [0.0, 0.0, 0.0],
            "env": {"kind": "gradient", "scale": 1.0},
        }
        if mv_obj or mv_tel:
            doc["light"]["center"] = _movement_kf(
                [3.5, 6.5, 4.0], "teleport" if mv_tel else "linear",
                [-6.0, 0.0, 0.0], teleport_frame=teleport_frame)
        return doc

    if name == "shadow-objects":
        objs = [
            {"type": "sphere", "center": [-1.3, 1.6, 0.2], "radius": 0.75,
             "albedo": [0.70, 0.55, 0.35], "roughness": 0.8, "id": 2},
            {"type": "box", "min": [0.4, 0.9, -0.3], "max": [1.7, 1.8, 0.8],
             "albedo": [0.35, 0.55, 0.70], "roughness": 0.7, "id": 3},
            {"type": "sphere", "center": [0.1, 2.6, -1.3], "radius": 0.5,
             "albedo": [0.60, 0.60, 0.60], "roughness": 0.6, "id": 4},
        ]
        if mv_obj:
            objs[0]["motion"] = _movement_kf([0, 0, 0], "linear", [1.2, 0.0, 0.6])
        doc = {
            "name": "shadow-objects",
            "resolution": [width, height],
            "camera": {
                "position": _movement_kf([0, 4.2, 7.5], "linear", [1.5, 0, 0]) if mv_cam else [0, 4.2, 7.5],
                "look_at": [0.0, 0.8, -0.5],
                "vfov_deg": 46.0,
            },
            "objects": objs,
            "ground": {"height": 0.0, "albedo": [0.50, 0.48, 0.45],
                       "roughness": 0.85, "id": 1},
            "light": {"center": [2.8, 7.5, 3.2], "intensity": [75.0, 73.0, 70.0]},
            "shadow_angle_deg": shadow_angle,
            "reference_point": [0.0, 0.0, 0.0],
            "env": {"kind": "gradient", "scale": 0.8},
        }
        if mv_obj or mv_tel:
            doc["light"]["center"] = _movement_kf(
                [2.8, 7.5, 3.2], "teleport" if mv_tel else "linear",
                [-5.6, 0.0, 0.0], teleport_frame=teleport_frame)
        return doc

    if name == "pillars":
        pillars = [{"type": "box", "min": [x - 0.35, 0.0, -0.35], "max": [x + 0.35, 2.6, 0.35],
                    "albedo": [0.55, 0.52, 0.48], "roughness": 0.75, "id": 2 + i}
                   for i, x in enumerate([-2.4, -0.8, 0.8, 2.4])]
        doc = {
            "name": "pillars",
            "resolution": [width, height],
            "camera": {"position": [0.0, 3.6, 8.5], "look_at": [0.0, 1.0, 0.0],
                       "vfov_deg": 44.0},
            "objects": pillars,
            "ground": {"height": 0.0, "albedo": [0.46, 0.46, 0.44],
                       "roughness": 0.9, "id": 1},
            "light": {"center": [6.0, 3.5, 2.0], "intensity": [55.0, 53.0, 50.0]},
            "shadow_angle_deg": shadow_angle,
            "reference_point": [0.0, 0.0, 0.0],
            "env": {"kind": "gradient", "scale": 0.7},
        }
        if mv_obj or mv_tel:
            doc["light"]["center"] = _movement_kf(
                [6.0, 3.5, 2.0], "teleport" if mv_tel else "linear",
                [-9.0, 2.0, 0.0], teleport_frame=teleport_frame)
        return doc

    if name == "breakfast-lite":
        objs = [
            {"type": "box", "min": [-4.0, 0.0, -3.2], "max": [4.0, 3.2, -3.0],
             "albedo": [0.70, 0.66, 0.58], "roughness": 0.9, "id": 2},  # back wall
            {"type": "box", "min": [-1.4, 0.0, -1.2], "max": [1.4, 1.0, 0.8],
             "albedo": [0.50, 0.34, 0.22], "roughness": max(roughness, 0.05), "id": 3},  # table
            {"type": "sphere", "center": [-0.5, 1.35, -0.3], "radius": 0.35,
             "albedo": [0.85, 0.85, 0.88], "roughness": roughness, "id": 4},
            {"type": "sphere", "center": [0.6, 1.28, 0.1], "radius": 0.28,
             "albedo": [0.80, 0.40, 0.25], "roughness": 0.5, "id": 5},
        ]
        if mv_obj:
            objs[3]["motion"] = _movement_kf([0, 0, 0], "linear", [-0.9, 0.0, 0.4])
        doc = {
            "name": "breakfast-lite",
            "resolution": [width, height],
            "camera": {
                "position": _movement_kf([0.2, 2.2, 4.6], "linear", [1.0, 0, 0]) if mv_cam else [0.2, 2.2, 4.6],
                "look_at": [0.0, 1.0, -0.6],
                "vfov_deg": 48.0,
            },
            "objects": objs,
            "ground": {"height": 0.0, "albedo": [0.40, 0.38, 0.36],
                       "roughness": 0.8, "id": 1},
            "light": {"center": [1.8, 4.5, 2.5], "intensity": [34.0, 33.0, 31.0]},
            "shadow_angle_deg": shadow_angle,
            "reference_point": [0.0, 1.0, 0.0],
            "env": {"kind": "gradient", "scale": 0.6},
        }
        if mv_tel:
            doc["light"]["center"] = _movement_kf(
                [1.8, 4.5, 2.5], "teleport", [-3.4, 0.0, 0.0], teleport_frame=teleport_frame)
        return doc

    raise ValueError(f"unknown preset {name!r}; have cubes-distance, shadow-objects, "
                     "pillars, breakfast-lite")


PRESET_NAMES = ("cubes-distance", "shadow-objects", "pillars", "breakfast-lite")
