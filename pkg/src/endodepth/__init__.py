"""Occlusion-aware self-supervised monocular depth estimation toolkit.

Differentiable view-synthesis warping, occlusion-mask augmentation,
NMF-based segmentation pseudo-labels, training losses, depth metrics, and
a synthetic-scene oracle, all in double-precision numpy.
"""

from .errors import EmptySupportError, SceneCoverageError
from .geometry import (
    CameraIntrinsics,
    PoseSE3,
    WarpField,
    backproject,
    pose_compose,
    pose_inverse,
    project,
    warp_field,
)
from .sampler import SampledGrid, sample_bilinear, sample_bilinear_grad, synthesize_view
from .losses import (
    LossValue,
    LossWeights,
    depth_loss,
    photometric_loss,
    semantic_consistency_loss,
    smoothness_loss,
    total_loss,
)
from .nmf import (
    FeatureMatrix,
    FilterBank,
    NMFResult,
    SegmentationMap,
    build_segmentations,
    extract_features,
    make_filter_bank,
    nmf_factorize,
    one_hot,
    orthogonality_defect,
)
from .augment import OcclusionMask, apply_mask, augmented_depth_target, make_occlusion_mask
from .metrics import MetricsRecord, clamp_depth, compute_metrics, write_metrics_csv
from .synth import ProceduralTexture, Scene, make_pair, render_view
from .train import RunConfig, ToyModel, TrainReport, train_toy

__version__ = "0.1.0"
