import math

import numpy as np
import pytest

from lapfov.errors import (
    DegenerateBaseline,
    DimensionMismatch,
    DisparityOutOfRange,
    EmptyInput,
    EmptyMask,
    NonPositiveTruth,
    SequenceTooShort,
    TexturelessInput,
)
from lapfov.geometry import CameraIntrinsics, Pose, rot_z
from lapfov.images import DepthMap, DisparityMap, ImageBuffer, mask_from_bool
from lapfov.perception import (
    LossConfig,
    OptimizerSettings,
    depth_metrics,
    depth_to_disparity,
    disparity_to_depth,
    estimate_depth_map,
    hierarchical_pairs,
    load_pose_file,
    load_sequence,
    mask_centroid,
    median_depth_in_mask,
    photometric_loss,
    reconstruction_loss,
    save_pose_file,
    save_sequence,
    smoothness_loss,
    ssim,
    total_loss,
    total_loss_gradient,
    warp_image,
)
from lapfov.scene import Scene, ToolState, render

CFG = LossConfig()
K = CameraIntrinsics(260.0, 260.0, 160.0, 120.0, 320, 240)
TOOL_AWAY = ToolState(np.array([500.0, 500.0, 30.0]), np.array([0.0, 0.0, 1.0]))


def small_k(width=128, height=96):
    return CameraIntrinsics(104.0, 104.0, width / 2, height / 2, width, height)


class TestMaskObservations:
    def test_single_pixel(self):
        m = np.zeros((30, 30), dtype=bool)
        m[20, 10] = True  # (u=10, v=20)
        assert np.allclose(mask_centroid(mask_from_bool(m)), (10, 20))

    def test_symmetric_square(self):
        m = np.zeros((5, 5), dtype=bool)
        for u, v in ((0, 0), (2, 0), (0, 2), (2, 2)):
            m[v, u] = True
        assert np.allclose(mask_centroid(mask_from_bool(m)), (1, 1))

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(0)
        m = rng.uniform(size=(40, 50)) > 0.8
        m[0, 0] = True
        total, su, sv = 0, 0.0, 0.0
        for v in range(m.shape[0]):       # brute-force accumulation
            for u in range(m.shape[1]):
                if m[v, u]:
                    total += 1
                    su += u
                    sv += v
        assert np.allclose(mask_centroid(mask_from_bool(m)), (su / total, sv / total))

    def test_empty_mask(self):
        with pytest.raises(EmptyMask):
            mask_centroid(mask_from_bool(np.zeros((4, 4), dtype=bool)))

    def test_median_odd(self):
        depth = DepthMap(np.array([[5.0, 7.0], [100.0, 50.0]]))
        m = np.array([[True, True], [True, False]])
        assert median_depth_in_mask(depth, mask_from_bool(m)) == 7.0

    def test_median_even_lower_middle(self):
        depth = DepthMap(np.array([[4.0, 8.0]]))
        m = np.array([[True, True]])
        assert median_depth_in_mask(depth, mask_from_bool(m)) == 4.0

    def test_median_sort_oracle(self):
        rng = np.random.default_rng(1)
        vals = rng.uniform(2, 90, size=(20, 20))
        m = rng.uniform(size=(20, 20)) > 0.5
        m[3, 3] = True
        got = median_depth_in_mask(DepthMap(vals), mask_from_bool(m))
        expected = np.sort(vals[m])[(m.sum() - 1) // 2]
        assert got == expected


class TestDisparityDepth:
    def test_endpoints(self):
        d = disparity_to_depth(DisparityMap(np.array([[0.0, 1.0]])), CFG)
        assert np.allclose(d.values, (100.0, 1.0))

    def test_midpoint(self):
        d = disparity_to_depth(DisparityMap(np.array([[0.5]])), CFG)
        assert abs(d.values[0, 0] - 100.0 / 50.5) < 1e-9

    def test_strictly_decreasing_onto_range(self):
        disp = np.linspace(0, 1, 101)[None, :]
        depth = disparity_to_depth(DisparityMap(disp), CFG).values[0]
        assert np.all(np.diff(depth) < 0)
        assert depth[0] == 100.0 and depth[-1] == 1.0

    def test_inverse(self):
        rng = np.random.default_rng(2)
        depth = DepthMap(rng.uniform(1.5, 99.0, size=(6, 6)))
        back = disparity_to_depth(depth_to_disparity(depth, CFG), CFG)
        assert np.abs(back.values - depth.values).max() < 1e-9


class TestWarp:
    def test_identity_warp(self):
        rng = np.random.default_rng(3)
        src = ImageBuffer(rng.uniform(size=(40, 60)))
        depth = DepthMap(np.full((40, 60), 30.0))
        warped, valid = warp_image(src, depth, Pose(), small_k(60, 40))
        assert valid.all()
        assert np.abs(warped.data - src.data).max() < 1e-6

    def test_principal_point_fixed_under_z_translation(self):
        k = small_k(64, 48)
        rng = np.random.default_rng(4)
        src = ImageBuffer(rng.uniform(size=(48, 64)))
        depth = DepthMap(np.full((48, 64), 20.0))
        pose = Pose(np.eye(3), np.array([0.0, 0.0, -5.0]))  # target to src: push back
        warped, valid = warp_image(src, depth, pose, k)
        cy, cx = int(k.cy), int(k.cx)
        assert valid[cy, cx]
        assert abs(warped.data[cy, cx] - src.data[cy, cx]) < 1e-9

    def test_lateral_shift_matches_analytic(self):
        # fronto-parallel plane at Z, pure x baseline: uniform shift fx*b/Z
        from scipy.ndimage import shift as nd_shift

        z, b = 50.0, 2.0
        scene = Scene(plane_offset=z, tool=TOOL_AWAY)
        cam_m = Pose()
        cam_n = Pose(np.eye(3), np.array([b, 0.0, 0.0]))
        img_m, depth_m, _ = render(scene, cam_m, K)
        img_n, _, _ = render(scene, cam_n, K)
        rel = cam_n.inverse().matrix() @ cam_m.matrix()
        warped, valid = warp_image(img_n, depth_m, Pose(rel[:3, :3], rel[:3, 3]), K)
        px_shift = K.fx * b / z
        # warped(u) = I_n(u - s): a +s shift of img_n on the pixel grid
        oracle = nd_shift(img_n.gray(), (0.0, px_shift), order=1, mode="nearest")
        inner = np.zeros_like(valid)
        inner[5:-5, 5:-5] = True
        sel = valid & inner
        assert np.abs(warped.data[sel] - oracle[sel]).max() < 1e-9
        assert np.abs(warped.data[sel] - img_m.data[sel]).mean() < 0.02


class TestSsim:
    def test_self_similarity(self):
        rng = np.random.default_rng(5)
        img = ImageBuffer(rng.uniform(size=(20, 20)))
        assert np.abs(ssim(img, img) - 1.0).max() < 1e-12

    def test_equal_constants(self):
        a = ImageBuffer(np.full((10, 10), 0.5))
        assert np.abs(ssim(a, a) - 1.0).max() < 1e-12

    def test_constant_closed_form(self):
        a = ImageBuffer(np.full((12, 12), 0.2))
        b = ImageBuffer(np.full((12, 12), 0.8))
        c1 = 0.01**2
        expected = (2 * 0.2 * 0.8 + c1) / (0.2**2 + 0.8**2 + c1)
        got = ssim(a, b)
        assert np.abs(got - expected).max() < 1e-12
        assert abs(expected - 0.4707) < 1e-4

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            ssim(ImageBuffer(np.zeros((4, 4))), ImageBuffer(np.zeros((5, 4))))


class TestPhotometric:
    def test_zero_residual(self):
        rng = np.random.default_rng(6)
        img = ImageBuffer(rng.uniform(size=(16, 16)))
        valid = np.ones((16, 16), dtype=bool)
        assert photometric_loss(img, img, valid, CFG) < 1e-12

    def test_alpha_zero_is_mae(self):
        rng = np.random.default_rng(7)
        a = ImageBuffer(rng.uniform(size=(16, 16)))
        b = ImageBuffer(rng.uniform(size=(16, 16)))
        valid = rng.uniform(size=(16, 16)) > 0.3
        cfg = LossConfig(alpha=0.0)
        expected = np.abs(a.data - b.data)[valid].mean()
        assert abs(photometric_loss(a, b, valid, cfg) - expected) < 1e-12

    def test_alpha_one_constant_images(self):
        a = ImageBuffer(np.full((12, 12), 0.2))
        b = ImageBuffer(np.full((12, 12), 0.8))
        cfg = LossConfig(alpha=1.0)
        c1 = 0.01**2
        s = (2 * 0.2 * 0.8 + c1) / (0.2**2 + 0.8**2 + c1)
        expected = 0.5 * (1 - s)
        got = photometric_loss(a, b, np.ones((12, 12), dtype=bool), cfg)
        assert abs(got - expected) < 1e-12
        assert abs(expected - 0.2646) < 1e-4


class TestReconstruction:
    def make_pair(self, baseline=(2.0, 0.0, 0.0)):
        scene = Scene(plane_offset=50.0, tool=TOOL_AWAY)
        cam_m = Pose()
        cam_n = Pose(np.eye(3), np.asarray(baseline))
        img_m, depth_m, _ = render(scene, cam_m, K)
        img_n, depth_n, _ = render(scene, cam_n, K)
        return img_m, img_n, depth_m, depth_n, cam_m, cam_n

    def test_identity_pair(self):
        img_m, _, depth_m, _, cam_m, _ = self.make_pair()
        loss = reconstruction_loss(img_m, img_m, depth_m, depth_m, cam_m, cam_m, K, CFG)
        assert loss < 1e-5

    def test_ground_truth_low_and_perturbed_higher(self):
        img_m, img_n, depth_m, depth_n, cam_m, cam_n = self.make_pair()
        base = reconstruction_loss(img_m, img_n, depth_m, depth_n, cam_m, cam_n, K, CFG)
        assert base < 0.02
        bigger = DepthMap(np.clip(depth_m.values * 1.2, 1, 100))
        bigger_n = DepthMap(np.clip(depth_n.values * 1.2, 1, 100))
        worse = reconstruction_loss(img_m, img_n, bigger, bigger_n, cam_m, cam_n, K, CFG)
        assert worse > base

    def test_swap_symmetry(self):
        img_m, img_n, depth_m, depth_n, cam_m, cam_n = self.make_pair()
        ab = reconstruction_loss(img_m, img_n, depth_m, depth_n, cam_m, cam_n, K, CFG)
        ba = reconstruction_loss(img_n, img_m, depth_n, depth_m, cam_n, cam_m, K, CFG)
        assert abs(ab - ba) < 1e-12


class TestSmoothness:
    def test_constant_zero(self):
        d = np.full((10, 12), 0.3)
        img = ImageBuffer(np.random.default_rng(8).uniform(size=(10, 12)))
        assert smoothness_loss(d, img) == 0.0

    def test_unit_step_flat_image(self):
        h, w = 8, 10
        d = np.zeros((h, w))
        d[:, 5:] = 1.0  # unit step between columns 4 and 5
        img = ImageBuffer(np.full((h, w), 0.5))
        # each of the h step pixels contributes |1| * e^0; x-mean over h*(w-1)
        expected = h * 1.0 / (h * (w - 1))
        assert abs(smoothness_loss(d, img) - expected) < 1e-12

    def test_step_attenuated_by_image_edge(self):
        h, w = 8, 10
        d = np.zeros((h, w))
        d[:, 5:] = 1.0
        img = np.zeros((h, w))
        img[:, 5:] = 5.0  # coincident large edge (raw array input)
        expected = h * 1.0 * math.exp(-5.0) / (h * (w - 1))
        assert abs(smoothness_loss(d, img) - expected) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            smoothness_loss(np.zeros((4, 4)), ImageBuffer(np.zeros((5, 4))))


class TestTotalLoss:
    def make_pair(self, width=128, height=96, baseline=(1.5, 0.0, 0.0)):
        k = small_k(width, height)
        scene = Scene(plane_offset=50.0, tool=TOOL_AWAY)
        cam_m = Pose()
        cam_n = Pose(np.eye(3), np.asarray(baseline))
        img_m, depth_m, _ = render(scene, cam_m, k)
        img_n, depth_n, _ = render(scene, cam_n, k)
        return k, img_m, img_n, depth_m, depth_n, cam_m, cam_n

    def test_single_scale_reduces_to_reconstruction(self):
        k, img_m, img_n, depth_m, depth_n, cam_m, cam_n = self.make_pair()
        cfg = LossConfig(mu=1.0, lam=0.0, scales=(1.0,))
        disp = (depth_to_disparity(depth_m, cfg), depth_to_disparity(depth_n, cfg))
        total = total_loss((img_m, img_n), disp, (cam_m, cam_n), k, cfg)
        recon = reconstruction_loss(img_m, img_n, depth_m, depth_n, cam_m, cam_n, k, cfg)
        assert abs(total - recon) < 1e-9

    def test_perfect_depth_identity_pose_floor(self):
        k, img_m, _, depth_m, _, cam_m, _ = self.make_pair()
        disp = depth_to_disparity(depth_m, CFG)
        total = total_loss((img_m, img_m), (disp, disp), (cam_m, cam_m), k, CFG)
        from dataclasses import replace

        recon_only = total_loss(
            (img_m, img_m), (disp, disp), (cam_m, cam_m), k, replace(CFG, lam=0.0)
        )
        smooth_floor = total_loss(
            (img_m, img_m), (disp, disp), (cam_m, cam_m), k, replace(CFG, mu=0.0)
        )
        assert recon_only < 1e-9  # identity warp is exact
        assert abs(total - (recon_only + smooth_floor)) < 1e-12

    def test_gradient_matches_finite_differences(self):
        k, img_m, img_n, depth_m, depth_n, cam_m, cam_n = self.make_pair()
        disp_m = depth_to_disparity(depth_m, CFG)
        disp_n = depth_to_disparity(depth_n, CFG)
        gm, gn = total_loss_gradient(
            (img_m, img_n), (disp_m, disp_n), (cam_m, cam_n), k, CFG
        )
        rng = np.random.default_rng(9)
        eps = 1e-6
        checked = 0
        for _ in range(10):
            r = int(rng.integers(4, img_m.height - 4))
            c = int(rng.integers(4, img_m.width - 4))
            plus = disp_m.values.copy()
            minus = disp_m.values.copy()
            plus[r, c] += eps
            minus[r, c] -= eps
            lp = total_loss((img_m, img_n), (DisparityMap(plus), disp_n), (cam_m, cam_n), k, CFG)
            lm = total_loss((img_m, img_n), (DisparityMap(minus), disp_n), (cam_m, cam_n), k, CFG)
            fd = (lp - lm) / (2 * eps)
            denom = max(abs(fd), abs(gm[r, c]), 1e-9)
            assert abs(fd - gm[r, c]) / denom < 1e-3
            checked += 1
        assert checked == 10

    def test_minimized_at_ground_truth_among_perturbations(self):
        k, img_m, img_n, depth_m, depth_n, cam_m, cam_n = self.make_pair()
        disp_m = depth_to_disparity(depth_m, CFG)
        disp_n = depth_to_disparity(depth_n, CFG)
        base = total_loss((img_m, img_n), (disp_m, disp_n), (cam_m, cam_n), k, CFG)
        for factor in (0.8, 0.95, 1.05, 1.2):
            pm = DepthMap(np.clip(depth_m.values * factor, 1, 100))
            pn = DepthMap(np.clip(depth_n.values * factor, 1, 100))
            perturbed = total_loss(
                (img_m, img_n),
                (depth_to_disparity(pm, CFG), depth_to_disparity(pn, CFG)),
                (cam_m, cam_n), k, CFG,
            )
            assert perturbed > base


class TestHierarchicalPairs:
    def test_n2(self):
        assert hierarchical_pairs(2) == {(0, 1)}

    def test_n3(self):
        assert hierarchical_pairs(3) == {(0, 1), (1, 2), (0, 2)}

    def test_n5(self):
        assert hierarchical_pairs(5) == {
            (0, 1), (1, 2), (2, 3), (3, 4), (0, 2), (1, 3), (2, 4), (0, 4)
        }

    def test_exhaustive_enumeration_up_to_64(self):
        for n in range(2, 65):
            expected = set()
            level = 0
            while 2**level <= n - 1:
                gap = 2**level
                mod = 2 ** (level - 1) if level >= 1 else 1
                for m in range(n):
                    for other in (m - gap, m + gap):
                        if 0 <= other < n and m % mod == 0:
                            expected.add((min(m, other), max(m, other)))
                level += 1
            assert hierarchical_pairs(n) == expected, f"N={n}"

    def test_too_short(self):
        with pytest.raises(SequenceTooShort):
            hierarchical_pairs(1)


class TestEstimateDepth:
    def test_plane_median_within_5pct(self):
        k = small_k()
        scene = Scene(plane_offset=50.0, tool=TOOL_AWAY)
        cam_m = Pose()
        cam_n = Pose(np.eye(3), np.array([2.0, 0.0, 0.0]))
        img_m, _, _ = render(scene, cam_m, k)
        img_n, _, _ = render(scene, cam_n, k)
        est, final = estimate_depth_map(
            img_m, img_n, cam_m, cam_n, k, CFG, grid=(12, 16), nominal_depth=55.0
        )
        med = float(np.median(est.values))
        assert abs(med - 50.0) / 50.0 < 0.05

    def test_tool_median_within_10pct(self):
        k = small_k()
        tool = ToolState(np.array([0.0, 0.0, 30.0]), np.array([0.3, -0.2, 1.0]))
        scene = Scene(plane_offset=60.0, tool=tool)
        cam_m = Pose()
        cam_n = Pose(np.eye(3), np.array([2.0, 1.0, 0.0]))
        img_m, depth_m, mask_m = render(scene, cam_m, k)
        img_n, _, _ = render(scene, cam_n, k)
        # grid fine enough to resolve the small tool blob at this resolution
        est, _ = estimate_depth_map(
            img_m, img_n, cam_m, cam_n, k, CFG, grid=(24, 32),
            nominal_depth=math.sqrt(30.0 * 60.0),
        )
        med = median_depth_in_mask(est, mask_m)
        gt = median_depth_in_mask(depth_m, mask_m)
        assert abs(med - gt) / gt < 0.10

    def test_descent_from_ground_truth_init(self):
        # constant-depth plane: the constant nominal init IS the ground truth
        k = small_k(96, 72)
        scene = Scene(plane_offset=50.0, tool=TOOL_AWAY)
        cam_m = Pose()
        cam_n = Pose(np.eye(3), np.array([2.0, 0.0, 0.0]))
        img_m, depth_m, _ = render(scene, cam_m, k)
        img_n, depth_n, _ = render(scene, cam_n, k)
        disp_gt = depth_to_disparity(depth_m, CFG)
        start = total_loss(
            (img_m, img_n),
            (disp_gt, depth_to_disparity(depth_n, CFG)),
            (cam_m, cam_n), k, CFG,
        )
        _, final = estimate_depth_map(
            img_m, img_n, cam_m, cam_n, k, CFG, grid=(9, 12), nominal_depth=50.0,
            settings=OptimizerSettings(iterations=60),
        )
        assert final <= start + 1e-9

    def test_degenerate_baseline(self):
        k = small_k(64, 48)
        scene = Scene(plane_offset=50.0, tool=TOOL_AWAY)
        img, _, _ = render(scene, Pose(), k)
        near = Pose(np.eye(3), np.array([0.3, 0.0, 0.0]))
        with pytest.raises(DegenerateBaseline):
            estimate_depth_map(img, img, Pose(), near, k, CFG)

    def test_textureless_input(self):
        k = small_k(64, 48)
        flat = ImageBuffer(np.full((48, 64), 0.5))
        far = Pose(np.eye(3), np.array([2.0, 0.0, 0.0]))
        with pytest.raises(TexturelessInput):
            estimate_depth_map(flat, flat, Pose(), far, k, CFG)


class TestDepthMetrics:
    def test_exact(self):
        assert depth_metrics([10, 20], [10, 20]) == (0.0, 0.0)

    def test_uniform_scale(self):
        gt = np.array([5.0, 10.0, 20.0])
        abs_rel, _ = depth_metrics(gt * 1.1, gt)
        assert abs(abs_rel - 10.0) < 1e-9

    def test_hand_arithmetic(self):
        abs_rel, rmse = depth_metrics([11.0, 18.0], [10.0, 20.0])
        assert abs(abs_rel - 10.0) < 1e-9
        assert abs(rmse - math.sqrt((1 + 4) / 2)) < 1e-9

    def test_errors(self):
        with pytest.raises(EmptyInput):
            depth_metrics([], [])
        with pytest.raises(NonPositiveTruth):
            depth_metrics([1.0], [0.0])
        with pytest.raises(DimensionMismatch):
            depth_metrics([1.0, 2.0], [1.0])


class TestSequenceIO:
    def test_pose_file_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        from lapfov.geometry import rotation_exp

        poses = [
            Pose(rotation_exp(rng.normal(scale=0.4, size=3)), rng.normal(scale=20, size=3))
            for _ in range(7)
        ]
        path = tmp_path / "poses.txt"
        save_pose_file(path, poses)
        back = load_pose_file(path)
        assert len(back) == 7
        for a, b in zip(poses, back):
            assert np.abs(a.matrix() - b.matrix()).max() < 1e-12

    def test_sequence_round_trip(self, tmp_path):
        rng = np.random.default_rng(12)
        images = [ImageBuffer(rng.integers(0, 256, size=(8, 10)) / 255.0) for _ in range(3)]
        poses = [Pose(), Pose(np.eye(3), (1, 0, 0)), Pose(rot_z(0.1), (0, 1, 0))]
        save_sequence(tmp_path / "seq", images, poses)
        back_images, back_poses = load_sequence(tmp_path / "seq")
        assert len(back_images) == 3 and len(back_poses) == 3
        for a, b in zip(images, back_images):
            assert np.array_equal(np.rint(a.data * 255), np.rint(b.data * 255))
