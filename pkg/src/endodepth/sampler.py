"""Differentiable bilinear sampling with zero-fill border handling.

Out-of-bounds samples return value 0 and valid 0; there is no clamping or
reflection, so masked losses never see extrapolated values. At integer
lattice coordinates the interpolation cell to the right/below is used
(left cell at the top image boundary), which fixes the sub-gradient there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import WarpField


@dataclass
class SampledGrid:
    values: np.ndarray  # same trailing channel layout as the sampled grid
    valid: np.ndarray  # bool, shape of the coordinate grid


BOUND_EPS = 1e-6  # matches the warp-field border tolerance


def _cell_indices(coords, H, W):
    u = coords[..., 0]
    v = coords[..., 1]
    inb = (
        (u >= -BOUND_EPS)
        & (u <= W - 1 + BOUND_EPS)
        & (v >= -BOUND_EPS)
        & (v <= H - 1 + BOUND_EPS)
    )
    # Clip so border-tolerated coordinates keep their weights inside [0, 1].
    u = np.clip(u, 0, W - 1)
    v = np.clip(v, 0, H - 1)
    x0 = np.clip(np.floor(u), 0, max(W - 2, 0)).astype(np.intp)
    y0 = np.clip(np.floor(v), 0, max(H - 2, 0)).astype(np.intp)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    wx = np.where(inb, u - x0, 0.0)
    wy = np.where(inb, v - y0, 0.0)
    return inb, x0, y0, x1, y1, wx, wy


def sample_bilinear(grid: np.ndarray, coords: np.ndarray) -> SampledGrid:
    """Bilinearly interpolate grid (H x W or H x W x C) at coords (... x 2)."""
    g = np.asarray(grid, dtype=np.float64)
    if g.size == 0:
        raise ValueError("grid is empty")
    squeeze = g.ndim == 2
    if squeeze:
        g = g[..., None]
    H, W = g.shape[:2]
    inb, x0, y0, x1, y1, wx, wy = _cell_indices(np.asarray(coords, dtype=np.float64), H, W)
    wx = wx[..., None]
    wy = wy[..., None]
    vals = (1 - wy) * ((1 - wx) * g[y0, x0] + wx * g[y0, x1]) + wy * (
        (1 - wx) * g[y1, x0] + wx * g[y1, x1]
    )
    vals[~inb] = 0.0
    if squeeze:
        vals = vals[..., 0]
    return SampledGrid(values=vals, valid=inb)


def sample_bilinear_grad(grid: np.ndarray, coords: np.ndarray, upstream: np.ndarray):
    """Adjoints of sample_bilinear.

    Returns (grad_grid, grad_coords) for a scalar objective whose gradient
    with respect to the sampled values is `upstream`. Invalid sample points
    contribute zero to both.
    """
    g = np.asarray(grid, dtype=np.float64)
    squeeze = g.ndim == 2
    if squeeze:
        g = g[..., None]
    H, W = g.shape[:2]
    C = g.shape[2]
    up = np.asarray(upstream, dtype=np.float64)
    if squeeze and up.ndim == coords.ndim - 1:
        up = up[..., None]

    inb, x0, y0, x1, y1, wx, wy = _cell_indices(np.asarray(coords, dtype=np.float64), H, W)
    up = np.where(inb[..., None], up, 0.0)
    wxc = wx[..., None]
    wyc = wy[..., None]

    grad_grid = np.zeros_like(g)
    np.add.at(grad_grid, (y0, x0), (1 - wyc) * (1 - wxc) * up)
    np.add.at(grad_grid, (y0, x1), (1 - wyc) * wxc * up)
    np.add.at(grad_grid, (y1, x0), wyc * (1 - wxc) * up)
    np.add.at(grad_grid, (y1, x1), wyc * wxc * up)

    dx = (1 - wyc) * (g[y0, x1] - g[y0, x0]) + wyc * (g[y1, x1] - g[y1, x0])
    dy = (1 - wxc) * (g[y1, x0] - g[y0, x0]) + wxc * (g[y1, x1] - g[y0, x1])
    grad_coords = np.stack([(up * dx).sum(axis=-1), (up * dy).sum(axis=-1)], axis=-1)
    grad_coords[~inb] = 0.0

    if squeeze:
        grad_grid = grad_grid[..., 0]
    return grad_grid, grad_coords


def synthesize_view(source: np.ndarray, warp: WarpField) -> SampledGrid:
    """Reconstruct the target view by sampling the source at the warp coords."""
    s = sample_bilinear(source, warp.coords)
    s.valid = s.valid & warp.valid
    s.values[~s.valid] = 0.0
    return s
