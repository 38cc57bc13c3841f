import json

import numpy as np
import pytest

from endodepth.geometry import (
    CameraIntrinsics,
    PoseSE3,
    backproject,
    pose_compose,
    pose_inverse,
    project,
    warp_field,
)


def small_K():
    return CameraIntrinsics(fx=100.0, fy=100.0, cx=64.0, cy=64.0, width=128, height=128)


class TestBackproject:
    def test_principal_point_ray(self):
        K = small_K()
        np.testing.assert_allclose(backproject((64.0, 64.0), 3.7, K), [0, 0, 3.7])

    def test_hand_values(self):
        K = small_K()
        np.testing.assert_allclose(backproject((164.0, 64.0), 2.0, K), [2.0, 0.0, 2.0])
        np.testing.assert_allclose(backproject((14.0, 114.0), 5.0, K), [-2.5, 2.5, 5.0])

    def test_nonpositive_depth_rejected(self):
        with pytest.raises(ValueError):
            backproject((10.0, 10.0), 0.0, small_K())
        with pytest.raises(ValueError):
            backproject((10.0, 10.0), -1.0, small_K())


class TestProject:
    def test_axis_point(self):
        pixel, depth, valid = project((0.0, 0.0, 7.0), small_K())
        assert valid
        np.testing.assert_allclose(pixel, [64.0, 64.0])
        assert depth == 7.0

    def test_round_trip(self):
        K = small_K()
        rng = np.random.default_rng(0)
        for _ in range(50):
            p = rng.uniform(0, 127, 2)
            d = 10 ** rng.uniform(0, 4)
            pixel, depth, valid = project(backproject(p, d, K), K)
            assert valid
            np.testing.assert_allclose(pixel, p, atol=1e-9)
            np.testing.assert_allclose(depth, d, rtol=1e-12)

    def test_behind_camera_invalid(self):
        _, _, valid = project((1.0, 1.0, -2.0), small_K())
        assert not valid


class TestPose:
    def test_identity_neutral(self):
        a = PoseSE3.from_axis_angle((0.1, 0.2, -0.3), (1.0, 2.0, 3.0))
        out = pose_compose(PoseSE3.identity(), a)
        np.testing.assert_allclose(out.rotation, a.rotation)
        np.testing.assert_allclose(out.translation, a.translation)

    def test_inverse_round_trip(self):
        a = PoseSE3.from_axis_angle((0.4, -0.1, 0.2), (5.0, -3.0, 2.0))
        ident = pose_compose(a, pose_inverse(a))
        np.testing.assert_allclose(ident.rotation, np.eye(3), atol=1e-9)
        np.testing.assert_allclose(ident.translation, 0, atol=1e-9)

    def test_translations_commute(self):
        t1 = PoseSE3.from_translation((1.0, 2.0, 3.0))
        t2 = PoseSE3.from_translation((-0.5, 0.25, 4.0))
        np.testing.assert_allclose(
            pose_compose(t1, t2).translation, [0.5, 2.25, 7.0]
        )

    def test_invalid_rotation_rejected(self):
        with pytest.raises(ValueError):
            PoseSE3(np.eye(3) * 2.0, np.zeros(3))
        with pytest.raises(ValueError):
            # Orthonormal but determinant -1.
            PoseSE3(np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_apply_matches_matrix(self):
        a = PoseSE3.from_axis_angle((0.3, 0.1, 0.0), (1.0, 0.0, -2.0))
        pts = np.random.default_rng(1).uniform(-5, 5, (10, 3))
        homo = np.concatenate([pts, np.ones((10, 1))], axis=1)
        np.testing.assert_allclose(a.apply(pts), (homo @ a.matrix().T)[:, :3])


class TestWarpField:
    def test_identity_pose_is_pixel_grid(self, desk_intrinsics, pixel_grid):
        rng = np.random.default_rng(2)
        depth = rng.uniform(5, 120, (64, 64))
        w = warp_field(depth, desk_intrinsics, PoseSE3.identity())
        assert np.abs(w.coords - pixel_grid).max() < 1e-6
        assert w.valid.all()
        np.testing.assert_allclose(w.src_depth, depth)

    def test_lateral_translation_uniform_shift(self, desk_intrinsics, pixel_grid):
        z = 50.0
        depth = np.full((64, 64), z)
        w = warp_field(depth, desk_intrinsics, PoseSE3.from_translation((5.0, 0.0, 0.0)))
        shift = w.coords[..., 0] - pixel_grid[..., 0]
        np.testing.assert_allclose(shift, 64.0 * 5.0 / z, atol=1e-9)
        np.testing.assert_allclose(w.coords[..., 1], pixel_grid[..., 1], atol=1e-9)

    def test_axial_translation_depth(self, desk_intrinsics):
        z = 50.0
        depth = np.full((64, 64), z)
        w = warp_field(depth, desk_intrinsics, PoseSE3.from_translation((0.0, 0.0, -z / 2)))
        np.testing.assert_allclose(w.src_depth, z / 2, atol=1e-9)

    def test_depth_derivatives_match_finite_differences(self, desk_intrinsics):
        rng = np.random.default_rng(3)
        depth = rng.uniform(20, 100, (64, 64))
        pose = PoseSE3.from_axis_angle((0.02, -0.01, 0.03), (2.0, -1.0, 1.5))
        w = warp_field(depth, desk_intrinsics, pose)
        h = 1e-4 * depth
        wp = warp_field(depth + h, desk_intrinsics, pose)
        wm = warp_field(depth - h, desk_intrinsics, pose)
        num_coords = (wp.coords - wm.coords) / (2 * h)[..., None]
        num_src = (wp.src_depth - wm.src_depth) / (2 * h)
        scale = np.abs(w.d_coords_d_depth).max()
        assert np.abs(w.d_coords_d_depth - num_coords).max() / scale < 1e-4
        assert np.abs(w.d_src_depth_d_depth - num_src).max() < 1e-4 * max(
            np.abs(w.d_src_depth_d_depth).max(), 1.0
        )

    def test_scale_invariance(self, desk_intrinsics):
        rng = np.random.default_rng(4)
        depth = rng.uniform(20, 100, (64, 64))
        pose = PoseSE3.from_axis_angle((0.05, 0.0, -0.02), (3.0, 1.0, -2.0))
        s = 2.7
        scaled_pose = PoseSE3(pose.rotation, s * pose.translation)
        a = warp_field(depth, desk_intrinsics, pose)
        b = warp_field(s * depth, desk_intrinsics, scaled_pose)
        np.testing.assert_allclose(b.coords, a.coords, atol=1e-9)
        np.testing.assert_allclose(b.src_depth, s * a.src_depth, rtol=1e-12)

    def test_nonpositive_depth_rejected(self, desk_intrinsics):
        depth = np.full((64, 64), 10.0)
        depth[3, 3] = 0.0
        with pytest.raises(ValueError):
            warp_field(depth, desk_intrinsics, PoseSE3.identity())

    def test_dimension_mismatch_rejected(self, desk_intrinsics):
        with pytest.raises(ValueError):
            warp_field(np.full((32, 32), 10.0), desk_intrinsics, PoseSE3.identity())


class TestJsonInterfaces:
    def test_intrinsics_round_trip(self, tmp_path):
        K = small_K()
        path = tmp_path / "intrinsics.json"
        path.write_text(json.dumps(K.to_dict()))
        assert CameraIntrinsics.load_json(path) == K

    def test_pose_matrix_round_trip(self, tmp_path):
        pose = PoseSE3.from_axis_angle((0.2, 0.1, -0.3), (4.0, 5.0, 6.0))
        path = tmp_path / "pose.json"
        path.write_text(json.dumps(pose.matrix().tolist()))
        loaded = PoseSE3.load_json(path)
        np.testing.assert_allclose(loaded.rotation, pose.rotation)
        np.testing.assert_allclose(loaded.translation, pose.translation)

    def test_bad_bottom_row_rejected(self, tmp_path):
        M = np.eye(4)
        M[3, 0] = 0.5
        path = tmp_path / "pose.json"
        path.write_text(json.dumps(M.tolist()))
        with pytest.raises(ValueError):
            PoseSE3.load_json(path)
