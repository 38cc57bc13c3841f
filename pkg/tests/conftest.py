import numpy as np
import pytest

from endodepth.geometry import CameraIntrinsics


@pytest.fixture
def desk_intrinsics():
    """Default desk-scale camera: 64x64, fx = fy = 64, principal point centered."""
    return CameraIntrinsics(fx=64.0, fy=64.0, cx=31.5, cy=31.5, width=64, height=64)


@pytest.fixture
def pixel_grid():
    v, u = np.meshgrid(np.arange(64, dtype=float), np.arange(64, dtype=float), indexing="ij")
    return np.stack([u, v], axis=-1)
