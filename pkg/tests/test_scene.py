import numpy as np
import pytest

from lapfov.errors import CameraFacingAway
from lapfov.geometry import CameraIntrinsics, Pose, backproject, rot_x, rot_z
from lapfov.perception import mask_centroid, photometric_loss, warp_image
from lapfov.images import mask_to_bool
from lapfov.scene import (
    Scene,
    ToolState,
    TrajectoryScript,
    render,
    render_geometry,
    tool_at,
    value_noise,
)

K = CameraIntrinsics(260.0, 260.0, 160.0, 120.0, 320, 240)
TOOL_AWAY = ToolState(np.array([500.0, 500.0, 30.0]), np.array([0.0, 0.0, 1.0]))


def test_render_deterministic():
    scene = Scene()
    a = render(scene, Pose(), K)
    b = render(scene, Pose(), K)
    assert np.array_equal(a[0].data, b[0].data)
    assert np.array_equal(a[1].values, b[1].values)
    assert np.array_equal(a[2].data, b[2].data)


def test_texture_seed_changes_image():
    img1 = render(Scene(texture_seed=1, tool=TOOL_AWAY), Pose(), K)[0]
    img2 = render(Scene(texture_seed=2, tool=TOOL_AWAY), Pose(), K)[0]
    assert not np.array_equal(img1.data, img2.data)


def test_fronto_parallel_plane_constant_depth():
    scene = Scene(plane_offset=50.0, tool=TOOL_AWAY)
    _, depth, mask = render(scene, Pose(), K)
    assert depth.values.max() - depth.values.min() < 1e-6
    assert abs(depth.values[0, 0] - 50.0) < 1e-9
    assert mask.data.sum() == 0


def test_tool_on_axis_centroid():
    tool = ToolState(np.array([0.0, 0.0, 30.0]), np.array([0.0, 0.0, 1.0]))
    scene = Scene(plane_offset=60.0, tool=tool)
    _, _, mask = render(scene, Pose(), K)
    c = mask_centroid(mask)
    assert abs(c[0] - K.cx) <= 1.0
    assert abs(c[1] - K.cy) <= 1.0


def test_depth_satisfies_plane_equation():
    scene = Scene(plane_offset=55.0, tool=TOOL_AWAY)
    camera = Pose(rot_x(0.1) @ rot_z(0.3), np.array([2.0, -1.0, 3.0]))
    depth, tip_mask, tool_hit, _ = render_geometry(scene, camera, K)
    vs, us = np.meshgrid(np.arange(K.height), np.arange(K.width), indexing="ij")
    pts_cam = np.stack(
        [
            (us - K.cx) / K.fx * depth,
            (vs - K.cy) / K.fy * depth,
            depth,
        ],
        axis=-1,
    )
    pts_world = pts_cam @ camera.rotation.T + camera.translation
    residual = pts_world @ scene.plane_normal - scene.plane_offset
    assert np.abs(residual[~tool_hit]).max() < 1e-6


def test_mask_depth_smaller_than_plane():
    scene = Scene(plane_offset=50.0)
    camera = Pose()
    depth, tip_mask, _, _ = render_geometry(scene, camera, K)
    plane_depth = 50.0  # fronto-parallel
    assert tip_mask.sum() > 0
    assert np.all(depth[tip_mask] < plane_depth)


def test_pure_roll_pair_warp_oracle():
    scene = Scene(plane_offset=50.0, tool=TOOL_AWAY)
    cam_a = Pose()
    cam_b = Pose(rot_z(np.deg2rad(9.0)), np.zeros(3))
    img_a, depth_a, _ = render(scene, cam_a, K)
    img_b, _, _ = render(scene, cam_b, K)
    rel = cam_b.inverse().matrix() @ cam_a.matrix()
    warped, valid = warp_image(img_b, depth_a, Pose(rel[:3, :3], rel[:3, 3]), K)
    diff = np.abs(warped.data - img_a.data)[valid]
    assert diff.mean() < 0.02


def test_camera_facing_away():
    scene = Scene(tool=TOOL_AWAY)
    turned = Pose(rot_x(np.pi), np.zeros(3))  # looking away from the plane
    with pytest.raises(CameraFacingAway):
        render_geometry(scene, turned, K)


def test_value_noise_deterministic_and_bounded():
    xs, ys = np.meshgrid(np.linspace(0, 40, 50), np.linspace(-20, 20, 50))
    a = value_noise(xs, ys, seed=5)
    b = value_noise(xs, ys, seed=5)
    c = value_noise(xs, ys, seed=6)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.min() >= 0.0 and a.max() <= 1.0
    assert a.std() > 0.01  # textured, not flat


class TestTrajectories:
    def test_static(self):
        script = TrajectoryScript("static", {"position": (1.0, 2.0, 3.0)})
        for t in (0.0, 1.5, 99.0):
            assert np.allclose(tool_at(script, t).tip, (1, 2, 3))

    def test_spiral_parametric(self):
        script = TrajectoryScript(
            "spiral",
            {"center": (0.0, 0.0, 10.0), "pitch": 2.0, "rate": 0.5},
        )
        state = tool_at(script, 2.0)  # one full revolution, radius 2
        assert np.allclose(state.tip, (2.0, 0.0, 10.0), atol=1e-9)
        radius = np.linalg.norm(tool_at(script, 3.0).tip[:2])
        assert abs(radius - 2.0 * 1.5) < 1e-9

    def test_waypoint_midpoint(self):
        script = TrajectoryScript(
            "waypoints",
            {"waypoints": [(0.0, (0.0, 0.0, 10.0)), (2.0, (4.0, -2.0, 14.0))]},
        )
        mid = tool_at(script, 1.0)
        assert np.allclose(mid.tip, (2.0, -1.0, 12.0))
        assert np.allclose(tool_at(script, 5.0).tip, (4.0, -2.0, 14.0))

    def test_step(self):
        script = TrajectoryScript(
            "step", {"position": (0.0, 0.0, 10.0), "offset": (3.0, 0.0, 0.0), "step_time": 1.0}
        )
        assert np.allclose(tool_at(script, 0.5).tip, (0, 0, 10))
        assert np.allclose(tool_at(script, 1.0).tip, (3, 0, 10))

    def test_validation(self):
        with pytest.raises(ValueError):
            TrajectoryScript("wiggle", {})
        with pytest.raises(ValueError):
            TrajectoryScript("waypoints", {"waypoints": [(1.0, (0, 0, 0)), (1.0, (1, 1, 1))]})
        with pytest.raises(ValueError):
            tool_at(TrajectoryScript("static", {"position": (0, 0, 5)}), -1.0)


def test_tool_state_validation():
    with pytest.raises(ValueError):
        ToolState(np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        ToolState(np.zeros(3), np.array([0, 0, 1.0]), radius=-1)
    t = ToolState(np.zeros(3), np.array([0, 0, 2.0]))  # normalized
    assert abs(np.linalg.norm(t.shaft_dir) - 1.0) < 1e-12
