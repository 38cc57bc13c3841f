"""Desk-scale training loop: per-pixel depth grids fit to a synthetic pair.

The toy model replaces the depth/pose networks: each frame gets an
unconstrained parameter grid mapped to depth through a bounded sigmoid,
and the relative pose is known. Plain fixed-step gradient descent; the
loop exercises every loss and gradient path in the library.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import fileio
from .augment import augmented_depth_target, depth_loss_mask, make_occlusion_mask
from .geometry import CameraIntrinsics, PoseSE3, pose_compose, pose_inverse, warp_field
from .losses import (
    LossWeights,
    depth_loss,
    photometric_loss,
    semantic_consistency_loss,
    smoothness_loss,
)
from .metrics import MetricsRecord, compute_metrics, write_metrics_csv
from .nmf import build_segmentations, extract_features, nmf_factorize
from .sampler import sample_bilinear_grad, synthesize_view
from .synth import Scene


@dataclass
class ToyModel:
    """Per-pixel depth parameters with a sigmoid-bounded depth mapping."""

    params: np.ndarray
    d_min: float = 1.0
    d_max: float = 150.0

    @classmethod
    def initialize(cls, height, width, seed=0, init_depth=None, noise=0.5,
                   d_min=1.0, d_max=150.0) -> "ToyModel":
        if init_depth is None:
            init_depth = 0.5 * (d_min + d_max)
        frac = np.clip((init_depth - d_min) / (d_max - d_min), 1e-6, 1 - 1e-6)
        base = np.log(frac / (1 - frac))
        rng = np.random.default_rng(seed)
        return cls(
            params=base + noise * rng.standard_normal((height, width)),
            d_min=d_min,
            d_max=d_max,
        )

    def depth(self) -> np.ndarray:
        s = 1.0 / (1.0 + np.exp(-self.params))
        return self.d_min + (self.d_max - self.d_min) * s

    def depth_param_grad(self) -> np.ndarray:
        """d depth / d params, elementwise."""
        s = 1.0 / (1.0 + np.exp(-self.params))
        return (self.d_max - self.d_min) * s * (1 - s)


@dataclass
class RunConfig:
    scene: Scene = field(default_factory=lambda: Scene(kind="plane"))
    image_size: int = 64
    # The depth term lives on the mm scale; with fixed-step descent its
    # weight must sit near the photometric gradient scale or it saturates
    # the sigmoid parameterization in a single step.
    weights: LossWeights = field(default_factory=lambda: LossWeights(depth=3e-3))
    nmf_k: int = 4
    mask_seed: int = 0
    augment: bool = False
    segmentation: bool = False
    learning_rate: float = 300.0
    steps: int = 1000
    seed: int = 0
    init_noise: float = 0.5
    source_offset_mm: float = 2.0
    # Fraction of steps before the masked depth term activates; early
    # pseudo-labels come from a still-random source grid and would dominate
    # the photometric signal (the depth loss lives on the mm scale).
    augment_warmup_frac: float = 0.5
    corrupt_occluded: float = 0.0
    d_min: float = 1.0
    d_max: float = 150.0
    eval_cap_mm: float = 150.0
    out_dir: str | None = None

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("step count must be at least 1")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be non-negative")
        if self.nmf_k < 1:
            raise ValueError("NMF factor K must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        if "scene" in d:
            d["scene"] = Scene.from_dict(d["scene"])
        if "weights" in d:
            d["weights"] = LossWeights(**d["weights"])
        return cls(**d)


@dataclass
class TrainReport:
    loss_curve: np.ndarray
    final_depth: np.ndarray
    gt_depth: np.ndarray
    metrics: MetricsRecord


def _photometric_branch(target_img, source_img, depth, K, pose):
    """Photometric loss of one warp direction plus its gradient w.r.t. depth."""
    warp = warp_field(depth, K, pose)
    recon = synthesize_view(source_img, warp)
    lv = photometric_loss(target_img, recon)
    _, grad_coords = sample_bilinear_grad(source_img, warp.coords, lv.grads["recon"])
    grad_depth = (grad_coords * warp.d_coords_d_depth).sum(axis=-1)
    return lv.value, grad_depth, warp


def _semantic_branch(seg_target, seg_prev, seg_next, depth, K, pose_prev, pose_next):
    warp_p = warp_field(depth, K, pose_prev)
    warp_n = warp_field(depth, K, pose_next)
    sp = synthesize_view(seg_prev, warp_p)
    sn = synthesize_view(seg_next, warp_n)
    mask = sp.valid & sn.valid
    lv = semantic_consistency_loss(seg_target, sp.values, sn.values, mask)
    grad_depth = np.zeros_like(depth)
    for warp, grid, key in (
        (warp_p, seg_prev, "warped_prev"),
        (warp_n, seg_next, "warped_next"),
    ):
        _, grad_coords = sample_bilinear_grad(grid, warp.coords, lv.grads[key])
        grad_depth += (grad_coords * warp.d_coords_d_depth).sum(axis=-1)
    return lv.value, grad_depth


def train_toy(config: RunConfig) -> TrainReport:
    """Fit per-pixel depth grids to a rendered pair; returns the loss curve
    and final-depth metrics against the analytic ground truth.

    Raises RuntimeError if the loss becomes non-finite.
    """
    size = config.image_size
    K = CameraIntrinsics(
        fx=float(size), fy=float(size), cx=(size - 1) / 2, cy=(size - 1) / 2,
        width=size, height=size,
    )
    from .synth import render_view

    b = config.source_offset_mm
    pose_t = PoseSE3.identity()
    pose_next = PoseSE3.from_translation((-b, 0.0, 0.0))  # camera center at +b
    pose_prev = PoseSE3.from_translation((b, 0.0, 0.0))

    image_t, gt_depth_t = render_view(config.scene, K, pose_t)
    image_next, _ = render_view(config.scene, K, pose_next)
    pose_t_to_next = pose_compose(pose_next, pose_inverse(pose_t))
    pose_next_to_t = pose_inverse(pose_t_to_next)

    w = config.weights
    model_t = ToyModel.initialize(
        size, size, seed=config.seed, noise=config.init_noise,
        d_min=config.d_min, d_max=config.d_max,
    )
    model_s = ToyModel.initialize(
        size, size, seed=config.seed + 1, noise=config.init_noise,
        d_min=config.d_min, d_max=config.d_max,
    )

    occ = None
    if config.augment or config.corrupt_occluded:
        occ = make_occlusion_mask(size, size, seed=config.mask_seed)
    if config.corrupt_occluded and occ is not None:
        model_t.params = model_t.params.copy()
        model_t.params[occ.occluded] += config.corrupt_occluded

    seg_target = seg_prev = seg_next = None
    pose_t_to_prev = None
    if config.segmentation:
        image_prev, _ = render_view(config.scene, K, pose_prev)
        pose_t_to_prev = pose_compose(pose_prev, pose_inverse(pose_t))
        feats = extract_features([image_prev, image_t, image_next], seed=config.seed)
        res = nmf_factorize(feats, K=config.nmf_k, seed=config.seed)
        segs = build_segmentations(res.P, 3, size, size)
        seg_prev, seg_target, seg_next = (s.probs for s in segs)

    curve = np.zeros(config.steps)
    for step in range(config.steps):
        depth_t = model_t.depth()
        depth_s = model_s.depth()

        value_t, grad_t, warp_t = _photometric_branch(
            image_t, image_next, depth_t, K, pose_t_to_next
        )
        value_s, grad_s, _ = _photometric_branch(
            image_next, image_t, depth_s, K, pose_next_to_t
        )
        sm_t = smoothness_loss(depth_t, image_t)
        sm_s = smoothness_loss(depth_s, image_next)

        total = w.photo * (value_t + value_s) + w.smooth * (sm_t.value + sm_s.value)
        grad_depth_t = w.photo * grad_t + w.smooth * sm_t.grads["depth"]
        grad_depth_s = w.photo * grad_s + w.smooth * sm_s.grads["depth"]

        if config.augment and step >= config.augment_warmup_frac * config.steps:
            # Pseudo-label: warped source depth, detached from both models.
            pseudo, pseudo_valid = augmented_depth_target(
                depth_t, depth_s, K, pose_t_to_next
            )
            m_t = depth_loss_mask(occ, pseudo_valid)
            dl = depth_loss(depth_t, pseudo, m_t)
            total += w.depth * dl.value
            grad_depth_t += w.depth * dl.grads["depth_t"]

        if config.segmentation:
            ss_value, ss_grad = _semantic_branch(
                seg_target, seg_prev, seg_next, depth_t, K,
                pose_t_to_prev, pose_t_to_next,
            )
            total += w.semantic * ss_value
            grad_depth_t += w.semantic * ss_grad

        if not np.isfinite(total):
            raise RuntimeError(f"training diverged at step {step}: loss={total}")
        curve[step] = total

        model_t.params = model_t.params - config.learning_rate * grad_depth_t * model_t.depth_param_grad()
        model_s.params = model_s.params - config.learning_rate * grad_depth_s * model_s.depth_param_grad()

    final_depth = model_t.depth()
    record = compute_metrics(final_depth, gt_depth_t, cap_mm=config.eval_cap_mm, median_scale=True)
    report = TrainReport(
        loss_curve=curve, final_depth=final_depth, gt_depth=gt_depth_t, metrics=record
    )

    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)
        fileio.write_pfm(os.path.join(config.out_dir, "depth_final.pfm"), final_depth)
        with open(os.path.join(config.out_dir, "loss_curve.csv.tmp"), "w") as f:
            f.write("step,loss\n")
            for i, v in enumerate(curve):
                f.write(f"{i},{v!r}\n")
        os.replace(
            os.path.join(config.out_dir, "loss_curve.csv.tmp"),
            os.path.join(config.out_dir, "loss_curve.csv"),
        )
        write_metrics_csv([("final", record)], os.path.join(config.out_dir, "metrics.csv"))
    return report
