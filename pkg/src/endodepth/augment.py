"""Occlusion-mask data augmentation.

A single rectangle with each side one quarter of the frame is blanked out
of the target image; the warped source depth serves as a constant
pseudo-label for the masked branch, supervised only where the mask does
not occlude and the warp is valid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CameraIntrinsics, PoseSE3, warp_field
from .sampler import sample_bilinear


@dataclass(frozen=True)
class OcclusionMask:
    occluded: np.ndarray  # (H, W) bool, True on the rectangle
    rect: tuple  # (top, left, h_m, w_m)
    seed: int


def make_occlusion_mask(height: int, width: int, seed: int = 0) -> OcclusionMask:
    """Rectangle of floor(H/4) x floor(W/4) at a seeded uniform position."""
    if height < 4 or width < 4:
        raise ValueError("image must be at least 4x4 to place a quarter-size mask")
    h_m = height // 4
    w_m = width // 4
    rng = np.random.default_rng(seed)
    top = int(rng.integers(0, height - h_m + 1))
    left = int(rng.integers(0, width - w_m + 1))
    occ = np.zeros((height, width), dtype=bool)
    occ[top : top + h_m, left : left + w_m] = True
    return OcclusionMask(occluded=occ, rect=(top, left, h_m, w_m), seed=seed)


def apply_mask(image: np.ndarray, mask: OcclusionMask, fill: float = 0.0) -> np.ndarray:
    im = np.asarray(image, dtype=np.float64)
    if im.shape[:2] != mask.occluded.shape:
        raise ValueError("image and mask dimensions differ")
    out = im.copy()
    out[mask.occluded] = fill
    return out


def augmented_depth_target(
    depth_t_pred: np.ndarray,
    depth_s_pred: np.ndarray,
    K: CameraIntrinsics,
    pose_t_to_s: PoseSE3,
):
    """Warp the source depth prediction into the target frame.

    The warp is driven by the target-frame depth estimate; the source depth
    is then bilinearly sampled at the warp coordinates. The result is a
    constant pseudo-label (no gradient flows into it) with a validity mask.
    """
    warp = warp_field(np.asarray(depth_t_pred, dtype=np.float64), K, pose_t_to_s)
    s = sample_bilinear(np.asarray(depth_s_pred, dtype=np.float64), warp.coords)
    valid = s.valid & warp.valid
    out = np.where(valid, s.values, 0.0)
    return out, valid


def depth_loss_mask(mask: OcclusionMask, warp_valid: np.ndarray) -> np.ndarray:
    """M_t for the masked depth loss: not occluded and warp-valid."""
    return (~mask.occluded) & np.asarray(warp_valid, dtype=bool)
