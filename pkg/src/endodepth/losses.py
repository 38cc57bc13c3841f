"""Training objectives with analytic gradients.

Each loss returns a LossValue holding the scalar and a dict of gradient
grids keyed by input name. Masked losses put exact zeros at excluded pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySupportError
from .sampler import SampledGrid

# Clamp applied inside the logs of the semantic-consistency loss; warped
# probabilities can be exactly 0 after zero-fill sampling.
LOG_EPS = 1e-7


@dataclass
class LossValue:
    value: float
    grads: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LossWeights:
    photo: float = 1.0
    smooth: float = 1e-3
    depth: float = 1.0
    semantic: float = 0.1

    def __post_init__(self):
        for name in ("photo", "smooth", "depth", "semantic"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name} must be non-negative")


def photometric_loss(target: np.ndarray, recon: SampledGrid) -> LossValue:
    """Mean absolute intensity difference over valid pixels and channels."""
    I_t = np.asarray(target, dtype=np.float64)
    vals = recon.values
    if I_t.shape != vals.shape:
        raise ValueError("target and reconstruction shapes differ")
    valid = recon.valid
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise EmptySupportError("photometric loss has no valid pixels")
    mask = valid[..., None] if vals.ndim == 3 else valid
    n = n_valid * (vals.shape[2] if vals.ndim == 3 else 1)
    diff = np.where(mask, vals - I_t, 0.0)
    value = float(np.abs(diff).sum() / n)
    grad = np.sign(diff) / n
    return LossValue(value, {"recon": grad})


def depth_loss(depth_t: np.ndarray, depth_s_warped: np.ndarray, mask: np.ndarray) -> LossValue:
    """Masked mean L1 between the target depth and the warped source depth.

    Normalized by the mask's L1 norm so the value is independent of how many
    pixels survive occlusion and warping. The warped source depth is a
    pseudo-label; callers that train should ignore its gradient entry.
    """
    a = np.asarray(depth_t, dtype=np.float64)
    b = np.asarray(depth_s_warped, dtype=np.float64)
    m = np.asarray(mask, dtype=np.float64)
    if a.shape != b.shape or a.shape != m.shape:
        raise ValueError("depth_loss shapes differ")
    n = m.sum()
    if n == 0:
        raise EmptySupportError("depth loss mask has empty support")
    diff = a - b
    value = float((np.abs(diff) * m).sum() / n)
    g = np.sign(diff) * m / n
    return LossValue(value, {"depth_t": g, "depth_s_warped": -g})


def smoothness_loss(depth: np.ndarray, image: np.ndarray, normalize_depth: bool = False) -> LossValue:
    """Edge-aware smoothness: |dD| weighted by exp(-|dI|) of the gray image.

    Forward differences; both directional sums are divided by the full pixel
    count. normalize_depth divides the depth map by its mean first (off by
    default; raw depth gradients are scale-dependent).
    """
    D = np.asarray(depth, dtype=np.float64)
    I = np.asarray(image, dtype=np.float64)
    gray = I.mean(axis=2) if I.ndim == 3 else I
    if gray.shape != D.shape:
        raise ValueError("depth and image spatial shapes differ")
    H, W = D.shape
    n = H * W

    if normalize_depth:
        m = D.mean() + 1e-12
        Dw = D / m
    else:
        m = 1.0
        Dw = D

    gx = Dw[:, 1:] - Dw[:, :-1]
    gy = Dw[1:, :] - Dw[:-1, :]
    wx = np.exp(-np.abs(gray[:, 1:] - gray[:, :-1]))
    wy = np.exp(-np.abs(gray[1:, :] - gray[:-1, :]))
    value = float((np.abs(gx) * wx).sum() / n + (np.abs(gy) * wy).sum() / n)

    grad = np.zeros_like(D)
    sx = np.sign(gx) * wx / n
    sy = np.sign(gy) * wy / n
    grad[:, 1:] += sx
    grad[:, :-1] -= sx
    grad[1:, :] += sy
    grad[:-1, :] -= sy
    if normalize_depth:
        # Chain rule through Dw = D / mean(D).
        grad = grad / m - (grad * D).sum() / (m * m * n)
    return LossValue(value, {"depth": grad})


def semantic_consistency_loss(
    seg_target: np.ndarray,
    warped_prev: np.ndarray,
    warped_next: np.ndarray,
    mask: np.ndarray,
    per_source_masks: tuple | None = None,
) -> LossValue:
    """Cross-entropy between the target one-hot labels and both warped maps.

    Default form: both terms share `mask` and are normalized by its L1 norm.
    per_source_masks=(mask_prev, mask_next) switches to per-source masking
    with the normalizer summed over both terms.
    """
    s0 = np.asarray(seg_target, dtype=np.float64)
    sp = np.asarray(warped_prev, dtype=np.float64)
    sn = np.asarray(warped_next, dtype=np.float64)
    if s0.shape != sp.shape or s0.shape != sn.shape or s0.ndim != 3:
        raise ValueError("segmentation maps must share H x W x K")

    labels = np.argmax(s0, axis=-1)
    oh = np.zeros_like(s0)
    np.put_along_axis(oh, labels[..., None], 1.0, axis=-1)

    if per_source_masks is not None:
        mp = np.asarray(per_source_masks[0], dtype=np.float64)
        mn = np.asarray(per_source_masks[1], dtype=np.float64)
        norm = mp.sum() + mn.sum()
    else:
        mp = mn = np.asarray(mask, dtype=np.float64)
        norm = mp.sum()
    if norm == 0:
        raise EmptySupportError("semantic loss mask has empty support")

    cp = np.maximum(sp, LOG_EPS)
    cn = np.maximum(sn, LOG_EPS)
    term_p = -(oh * np.log(cp)).sum(axis=-1) * mp
    term_n = -(oh * np.log(cn)).sum(axis=-1) * mn
    value = float((term_p.sum() + term_n.sum()) / norm)

    gp = np.where(sp > LOG_EPS, -oh * mp[..., None] / cp / norm, 0.0)
    gn = np.where(sn > LOG_EPS, -oh * mn[..., None] / cn / norm, 0.0)
    return LossValue(value, {"warped_prev": gp, "warped_next": gn})


def total_loss(weights, components) -> LossValue:
    """Weighted sum of loss components; gradients accumulate linearly."""
    weights = list(weights)
    components = list(components)
    if len(weights) != len(components):
        raise ValueError("weights and components must pair up")
    value = 0.0
    grads: dict = {}
    for w, comp in zip(weights, components):
        value += w * comp.value
        for key, g in comp.grads.items():
            if key in grads:
                grads[key] = grads[key] + w * g
            else:
                grads[key] = w * g
    return LossValue(float(value), grads)
