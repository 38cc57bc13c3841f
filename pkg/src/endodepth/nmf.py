"""Feature extraction, multiplicative-update NMF, and segmentation pseudo-labels.

Activations from a fixed seeded filter bank are stacked into a non-negative
matrix V of shape (N*H*W, C), factorized as V ~= P @ Q with Lee-Seung
multiplicative updates, and the rows of P are turned into per-pixel class
probabilities via a softmax. Q's rows act as C-dimensional cluster centers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter
from scipy.signal import convolve2d

# Guard added to the multiplicative-update denominators.
UPDATE_EPS = 1e-9


@dataclass(frozen=True)
class FilterBank:
    """Fixed convolution kernels used in place of a pretrained extractor."""

    kernels: np.ndarray  # (C, k, k), each unit L2 norm
    seed: int


def make_filter_bank(channels: int = 16, size: int = 5, seed: int = 0) -> FilterBank:
    rng = np.random.default_rng(seed)
    kernels = rng.standard_normal((channels, size, size))
    kernels -= kernels.mean(axis=(1, 2), keepdims=True)
    kernels /= np.linalg.norm(kernels, axis=(1, 2), keepdims=True)
    return FilterBank(kernels=kernels, seed=seed)


@dataclass
class FeatureMatrix:
    data: np.ndarray  # (N*H*W, C), non-negative
    n_views: int
    height: int
    width: int


@dataclass
class NMFResult:
    P: np.ndarray  # (rows, K)
    Q: np.ndarray  # (K, C)
    error_trace: np.ndarray  # Frobenius error after each iteration
    iterations_run: int


@dataclass
class SegmentationMap:
    probs: np.ndarray  # (H, W, K), rows sum to 1


POOL_SIZE = 7


def extract_features(images, bank: FilterBank | None = None, seed: int = 0) -> FeatureMatrix:
    """Convolve each image with the bank, ReLU, pool, and stack into (N*H*W, C).

    Multi-channel images are reduced to their channel mean before filtering.
    The 7x7 average pooling after the ReLU makes activations locally
    stationary, standing in for the large receptive fields of the deep
    features this extractor replaces.
    """
    if bank is None:
        bank = make_filter_bank(seed=seed)
    images = [np.asarray(im, dtype=np.float64) for im in images]
    if not images:
        raise ValueError("at least one image is required")
    shapes = {im.shape[:2] for im in images}
    if len(shapes) != 1:
        raise ValueError("all images must share H x W")
    H, W = images[0].shape[:2]

    blocks = []
    for im in images:
        gray = im.mean(axis=2) if im.ndim == 3 else im
        feats = np.stack(
            [convolve2d(gray, k, mode="same", boundary="fill") for k in bank.kernels],
            axis=-1,
        )
        feats = np.maximum(feats, 0.0)
        feats = np.stack(
            [uniform_filter(feats[..., c], size=POOL_SIZE, mode="nearest")
             for c in range(feats.shape[-1])],
            axis=-1,
        )
        # The sliding-sum filter can leave tiny negative round-off.
        blocks.append(np.maximum(feats, 0.0).reshape(H * W, -1))
    return FeatureMatrix(
        data=np.concatenate(blocks, axis=0), n_views=len(images), height=H, width=W
    )


def nmf_factorize(
    V, K: int, max_iters: int = 200, tol: float = 1e-5, seed: int = 0
) -> NMFResult:
    """Factorize V ~= P @ Q by Lee-Seung multiplicative updates.

    Starts from a seeded uniform-positive initialization and stops at
    max_iters or when the relative change of the Frobenius error falls
    below tol. The error trace is non-increasing (classic monotonicity of
    the multiplicative rule).
    """
    if isinstance(V, FeatureMatrix):
        V = V.data
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2:
        raise ValueError("V must be a matrix")
    if np.any(V < 0):
        raise ValueError("V must be non-negative")
    rows, cols = V.shape
    if not (1 <= K <= min(rows, cols)):
        raise ValueError(f"K={K} out of range for a {rows}x{cols} matrix")

    rng = np.random.default_rng(seed)
    # Uniform on (0, 1]: avoid exact zeros, which the updates cannot leave.
    P = 1.0 - rng.random((rows, K))
    Q = 1.0 - rng.random((K, cols))

    trace = []
    for _ in range(max_iters):
        P *= (V @ Q.T) / (P @ (Q @ Q.T) + UPDATE_EPS)
        Q *= (P.T @ V) / ((P.T @ P) @ Q + UPDATE_EPS)
        err = np.linalg.norm(V - P @ Q)
        trace.append(err)
        if len(trace) >= 2:
            prev = trace[-2]
            if abs(prev - err) / max(prev, 1e-30) < tol:
                break
    return NMFResult(P=P, Q=Q, error_trace=np.array(trace), iterations_run=len(trace))


def orthogonality_defect(Q: np.ndarray) -> float:
    """Diagnostic ||Q Q^T - I||_F; the updates do not enforce orthogonality."""
    Q = np.asarray(Q, dtype=np.float64)
    return float(np.linalg.norm(Q @ Q.T - np.eye(Q.shape[0])))


def build_segmentations(
    P: np.ndarray, n_views: int, height: int, width: int, temperature: float = 1.0
) -> list:
    """Split P into per-view blocks and softmax each row into probabilities."""
    P = np.asarray(P, dtype=np.float64)
    if P.shape[0] != n_views * height * width:
        raise ValueError("row count of P must equal n_views * height * width")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    maps = []
    for i in range(n_views):
        block = P[i * height * width : (i + 1) * height * width].reshape(
            height, width, -1
        )
        z = block / temperature
        z -= z.max(axis=-1, keepdims=True)
        e = np.exp(z)
        maps.append(SegmentationMap(probs=e / e.sum(axis=-1, keepdims=True)))
    return maps


def one_hot(seg: SegmentationMap) -> SegmentationMap:
    """Arg-max one-hot encoding; ties resolve to the lowest class index."""
    probs = np.asarray(seg.probs, dtype=np.float64)
    labels = np.argmax(probs, axis=-1)
    out = np.zeros_like(probs)
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return SegmentationMap(probs=out)
