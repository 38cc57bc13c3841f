"""Pinhole camera model, SE(3) rigid transforms, and depth-driven view-synthesis warping.

All geometry is done in double precision. Depths and translations are in
millimeters; pixel coordinates follow the convention that integer coordinates
address pixel centers and the image spans [0, W-1] x [0, H-1].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# Points with camera-frame Z below this are treated as behind the camera.
Z_EPS = 1e-6
BOUND_EPS = 1e-6  # border tolerance for the in-bounds test, pixels

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics (focal lengths and principal point in pixels)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            width=int(d["width"]),
            height=int(d["height"]),
        )

    @classmethod
    def load_json(cls, path) -> "CameraIntrinsics":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class PoseSE3:
    """Rigid transform x -> R @ x + t with t in millimeters."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if R.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if np.max(np.abs(R.T @ R - np.eye(3))) > _ORTHO_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation determinant must be +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "PoseSE3":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, t) -> "PoseSE3":
        return cls(np.eye(3), np.asarray(t, dtype=np.float64))

    @classmethod
    def from_axis_angle(cls, rotvec, translation=(0.0, 0.0, 0.0)) -> "PoseSE3":
        """Rodrigues' formula from an axis-angle vector (radians * axis)."""
        w = np.asarray(rotvec, dtype=np.float64).reshape(3)
        theta = np.linalg.norm(w)
        if theta < 1e-12:
            R = np.eye(3)
        else:
            k = w / theta
            K = np.array(
                [[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]]
            )
            R = np.eye(3) + np.sin(theta) * K + (1 - np.cos(theta)) * (K @ K)
        return cls(R, np.asarray(translation, dtype=np.float64))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform points of shape (..., 3)."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    @classmethod
    def from_matrix(cls, M) -> "PoseSE3":
        M = np.asarray(M, dtype=np.float64)
        if M.shape != (4, 4):
            raise ValueError("pose matrix must be 4x4")
        if np.max(np.abs(M[3] - np.array([0.0, 0.0, 0.0, 1.0]))) > 1e-9:
            raise ValueError("bottom row of a pose matrix must be 0 0 0 1")
        return cls(M[:3, :3], M[:3, 3])

    @classmethod
    def load_json(cls, path) -> "PoseSE3":
        with open(path) as f:
            return cls.from_matrix(np.array(json.load(f), dtype=np.float64))


def pose_compose(a: PoseSE3, b: PoseSE3) -> PoseSE3:
    """Compose transforms: apply b first, then a."""
    return PoseSE3(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def pose_inverse(a: PoseSE3) -> PoseSE3:
    return PoseSE3(a.rotation.T, -a.rotation.T @ a.translation)


@dataclass
class WarpField:
    """Per-target-pixel sampling coordinates into the source frame.

    coords[..., 0] is the source u (column) coordinate, coords[..., 1] the
    source v (row) coordinate. src_depth is the target point's depth in the
    source camera frame. d_coords_d_depth / d_src_depth_d_depth are the
    analytic partials of coords and src_depth with respect to the target
    depth at the same pixel.
    """

    coords: np.ndarray
    src_depth: np.ndarray
    valid: np.ndarray
    d_coords_d_depth: np.ndarray = field(repr=False, default=None)
    d_src_depth_d_depth: np.ndarray = field(repr=False, default=None)


def backproject(pixel, depth: float, K: CameraIntrinsics) -> np.ndarray:
    """Lift a pixel to a 3D camera-frame point: depth * K^-1 * (u, v, 1)."""
    if depth <= 0:
        raise ValueError("depth must be positive")
    u, v = float(pixel[0]), float(pixel[1])
    return np.array(
        [depth * (u - K.cx) / K.fx, depth * (v - K.cy) / K.fy, depth]
    )


def project(point, K: CameraIntrinsics):
    """Project a camera-frame point to (pixel, depth, valid).

    Points with Z <= Z_EPS are flagged invalid; their pixel values are
    unspecified (computed with a clamped denominator).
    """
    X, Y, Z = np.asarray(point, dtype=np.float64).reshape(3)
    valid = Z > Z_EPS
    z = Z if valid else Z_EPS
    pixel = np.array([K.fx * X / z + K.cx, K.fy * Y / z + K.cy])
    return pixel, Z, valid


def warp_field(depth_t: np.ndarray, K: CameraIntrinsics, pose_t_to_s: PoseSE3) -> WarpField:
    """View-synthesis warp: backproject the target depth map, transform to the
    source frame, and project to source pixel coordinates.

    A pixel is valid when its source-frame depth exceeds Z_EPS and its
    projected coordinates land inside [0, W-1] x [0, H-1].
    """
    D = np.asarray(depth_t, dtype=np.float64)
    H, W = D.shape
    if (W, H) != (K.width, K.height):
        raise ValueError("depth map dimensions do not match the intrinsics")
    if np.any(D <= 0):
        raise ValueError("depth map must be strictly positive")

    v, u = np.meshgrid(np.arange(H, dtype=np.float64), np.arange(W, dtype=np.float64), indexing="ij")
    rx = (u - K.cx) / K.fx
    ry = (v - K.cy) / K.fy

    R = pose_t_to_s.rotation
    t = pose_t_to_s.translation
    # Camera point D*(rx, ry, 1) mapped through the pose.
    Xs = D * (R[0, 0] * rx + R[0, 1] * ry + R[0, 2]) + t[0]
    Ys = D * (R[1, 0] * rx + R[1, 1] * ry + R[1, 2]) + t[1]
    Zs = D * (R[2, 0] * rx + R[2, 1] * ry + R[2, 2]) + t[2]

    front = Zs > Z_EPS
    Zc = np.where(front, Zs, Z_EPS)
    us = K.fx * Xs / Zc + K.cx
    vs = K.fy * Ys / Zc + K.cy

    # Small tolerance so projection round-off cannot invalidate pixels that
    # land exactly on the image border (identity pose, axial motion).
    inb = (
        (us >= -BOUND_EPS)
        & (us <= W - 1 + BOUND_EPS)
        & (vs >= -BOUND_EPS)
        & (vs <= H - 1 + BOUND_EPS)
    )
    valid = front & inb

    # Partials with respect to the target depth at the same pixel.
    ax = R[0, 0] * rx + R[0, 1] * ry + R[0, 2]
    ay = R[1, 0] * rx + R[1, 1] * ry + R[1, 2]
    az = R[2, 0] * rx + R[2, 1] * ry + R[2, 2]
    du_dD = K.fx * (ax * Zc - Xs * az) / (Zc * Zc)
    dv_dD = K.fy * (ay * Zc - Ys * az) / (Zc * Zc)

    return WarpField(
        coords=np.stack([us, vs], axis=-1),
        src_depth=Zs,
        valid=valid,
        d_coords_d_depth=np.stack([du_dD, dv_dD], axis=-1),
        d_src_depth_d_depth=az,
    )
