"""Synthetic textured scenes with analytic ground-truth depth.

Two surface types: an infinite plane and an infinite tube (cylinder viewed
from inside, the GI-tract stand-in). Ray intersections are closed-form, so
rendered depth carries no rasterization error; the procedural texture is
band-limited to keep bilinear resampling error well under the test budgets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import SceneCoverageError
from .geometry import CameraIntrinsics, PoseSE3, pose_compose, pose_inverse


@dataclass(frozen=True)
class ProceduralTexture:
    """Sum of three seeded sinusoidal octaves over surface coordinates (mm)."""

    seed: int = 0
    base_wavelength_mm: float = 15.0
    contrast: float = 1.0  # 0.1 mimics weak-texture endoscopic walls
    _params: tuple = field(init=False, repr=False, default=None)

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        amps = np.array([1.0, 0.5, 0.25])
        freqs = np.array([1.0, 2.0, 4.0]) / self.base_wavelength_mm
        angles = rng.uniform(0, np.pi, 3)
        phases = rng.uniform(0, 2 * np.pi, 3)
        object.__setattr__(self, "_params", (amps, freqs, angles, phases))

    def value(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Texture intensity in [0.5 - 0.3*contrast, 0.5 + 0.3*contrast]."""
        amps, freqs, angles, phases = self._params
        acc = np.zeros_like(np.asarray(u, dtype=np.float64))
        for a, f, th, ph in zip(amps, freqs, angles, phases):
            acc += a * np.sin(2 * np.pi * f * (np.cos(th) * u + np.sin(th) * v) + ph)
        return 0.5 + 0.3 * self.contrast * acc / amps.sum()


@dataclass(frozen=True)
class Scene:
    """A textured plane or tube in world coordinates.

    plane: unit `normal` and `offset` (the plane is normal . x = offset);
    tube: `axis_point`, unit `axis_dir`, and `radius`, camera inside.
    """

    kind: str
    normal: tuple = (0.0, 0.0, 1.0)
    offset: float = 50.0
    axis_point: tuple = (0.0, 0.0, 0.0)
    axis_dir: tuple = (0.0, 0.0, 1.0)
    radius: float = 20.0
    texture: ProceduralTexture = field(default_factory=ProceduralTexture)

    def __post_init__(self):
        if self.kind not in ("plane", "tube"):
            raise ValueError(f"unknown scene kind {self.kind!r}")
        if self.kind == "plane" and self.offset <= 0:
            raise ValueError("plane offset must be positive")
        if self.kind == "tube" and self.radius <= 0:
            raise ValueError("tube radius must be positive")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": {
                "normal": list(self.normal),
                "offset": self.offset,
                "axis_point": list(self.axis_point),
                "axis_dir": list(self.axis_dir),
                "radius": self.radius,
            },
            "texture_seed": self.texture.seed,
            "texture_contrast": self.texture.contrast,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        params = d.get("params", {})
        tex = ProceduralTexture(
            seed=int(d.get("texture_seed", 0)),
            contrast=float(d.get("texture_contrast", 1.0)),
        )
        return cls(
            kind=d["kind"],
            normal=tuple(params.get("normal", (0.0, 0.0, 1.0))),
            offset=float(params.get("offset", 50.0)),
            axis_point=tuple(params.get("axis_point", (0.0, 0.0, 0.0))),
            axis_dir=tuple(params.get("axis_dir", (0.0, 0.0, 1.0))),
            radius=float(params.get("radius", 20.0)),
            texture=tex,
        )

    @classmethod
    def load_json(cls, path) -> "Scene":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _plane_frame(normal):
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    helper = np.array([1.0, 0.0, 0.0])
    if abs(n @ helper) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    e1 = np.cross(n, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return n, e1, e2


def render_view(scene: Scene, K: CameraIntrinsics, pose_world_to_cam: PoseSE3):
    """Render (image, depth) from the given camera; exact per-pixel geometry.

    Raises SceneCoverageError if any pixel ray misses the surface in front
    of the camera.
    """
    H, W = K.height, K.width
    v, u = np.meshgrid(np.arange(H, dtype=np.float64), np.arange(W, dtype=np.float64), indexing="ij")
    dirs_cam = np.stack([(u - K.cx) / K.fx, (v - K.cy) / K.fy, np.ones_like(u)], axis=-1)

    R = pose_world_to_cam.rotation
    t = pose_world_to_cam.translation
    center = -R.T @ t  # camera center in world coords
    dirs_w = dirs_cam @ R  # R^T applied to each cam-frame direction

    if scene.kind == "plane":
        n, e1, e2 = _plane_frame(scene.normal)
        denom = dirs_w @ n
        if np.any(np.abs(denom) < 1e-12):
            raise SceneCoverageError("a pixel ray is parallel to the plane")
        s = (scene.offset - center @ n) / denom
        if np.any(s <= 0):
            raise SceneCoverageError("plane is behind the camera for some pixels")
        points = center + s[..., None] * dirs_w
        tex_u = points @ e1
        tex_v = points @ e2
    else:
        a0 = np.asarray(scene.axis_point, dtype=np.float64)
        ad = np.asarray(scene.axis_dir, dtype=np.float64)
        ad = ad / np.linalg.norm(ad)
        oc = center - a0
        d_perp = dirs_w - (dirs_w @ ad)[..., None] * ad
        o_perp = oc - (oc @ ad) * ad
        a = (d_perp * d_perp).sum(axis=-1)
        b = 2.0 * (d_perp @ o_perp)
        c = o_perp @ o_perp - scene.radius ** 2
        disc = b * b - 4 * a * c
        if np.any(disc < 0) or np.any(a < 1e-18):
            raise SceneCoverageError("a pixel ray misses the tube")
        s = (-b + np.sqrt(disc)) / (2 * a)  # exit root: camera sits inside
        if np.any(s <= 0):
            raise SceneCoverageError("tube intersection behind the camera")
        points = center + s[..., None] * dirs_w
        rel = points - a0
        axial = rel @ ad
        radial = rel - axial[..., None] * ad
        _, e1, e2 = _plane_frame(ad)
        theta = np.arctan2(radial @ e2, radial @ e1)
        tex_u = theta * scene.radius  # arc length, mm
        tex_v = axial

    # With dirs_cam z-component 1, the ray parameter equals camera-frame depth.
    depth = s
    image = scene.texture.value(tex_u, tex_v)
    return image, depth


def make_pair(scene: Scene, K: CameraIntrinsics, pose_t: PoseSE3, pose_s: PoseSE3):
    """Render a target/source pair plus their relative pose (target -> source)."""
    image_t, depth_t = render_view(scene, K, pose_t)
    image_s, depth_s = render_view(scene, K, pose_s)
    pose_t_to_s = pose_compose(pose_s, pose_inverse(pose_t))
    return image_t, depth_t, image_s, depth_s, pose_t_to_s
