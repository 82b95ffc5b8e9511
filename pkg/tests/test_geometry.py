import numpy as np
import pytest

from lapfov.errors import DepthOutOfRange, NonPositiveDepth
from lapfov.geometry import (
    CameraIntrinsics,
    Pose,
    backproject,
    compose,
    project,
    rot_x,
    rot_y,
    rot_z,
    rotation_exp,
    rotation_log,
    skew,
    svd2x2,
)


def random_pose(rng):
    return Pose(rotation_exp(rng.normal(scale=0.8, size=3)), rng.normal(scale=30.0, size=3))


K = CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)


class TestCompose:
    def test_identity(self):
        rng = np.random.default_rng(1)
        t = random_pose(rng)
        out = compose(Pose.identity(), t)
        assert np.allclose(out.rotation, t.rotation)
        assert np.allclose(out.translation, t.translation)

    def test_inverse(self):
        rng = np.random.default_rng(2)
        t = random_pose(rng)
        out = compose(t, t.inverse())
        assert np.abs(out.rotation - np.eye(3)).max() < 1e-9
        assert np.abs(out.translation).max() < 1e-9

    def test_homogeneous_matrix_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a, b = random_pose(rng), random_pose(rng)
            expected = a.matrix() @ b.matrix()  # independent 4x4 oracle
            got = compose(a, b).matrix()
            assert np.abs(got - expected).max() < 1e-9

    def test_associative(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            a, b, c = (random_pose(rng) for _ in range(3))
            left = compose(compose(a, b), c)
            right = compose(a, compose(b, c))
            assert np.abs(left.matrix() - right.matrix()).max() < 1e-9

    def test_orthonormality_preserved(self):
        rng = np.random.default_rng(5)
        p = random_pose(rng)
        for _ in range(200):
            p = compose(p, random_pose(rng))
            drift = np.abs(p.rotation.T @ p.rotation - np.eye(3)).max()
            assert drift < 1e-9


class TestProject:
    def test_optical_axis(self):
        for z in (1.0, 17.0, 99.0):
            assert np.allclose(project(K, (0, 0, z)), (K.cx, K.cy))

    def test_direct_arithmetic(self):
        assert np.allclose(project(K, (10, 0, 100)), (370.0, 240.0))

    def test_round_trip(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            px = rng.uniform((0, 0), (K.width, K.height))
            depth = rng.uniform(1.0, 100.0)
            p = backproject(K, px, depth)
            assert np.abs(project(K, p) - px).max() < 1e-9
            assert abs(p[2] - depth) < 1e-12

    def test_nonpositive_depth(self):
        with pytest.raises(NonPositiveDepth):
            project(K, (1.0, 2.0, 0.0))
        with pytest.raises(NonPositiveDepth):
            project(K, (1.0, 2.0, -5.0))


class TestBackproject:
    def test_optical_axis(self):
        assert np.allclose(backproject(K, (K.cx, K.cy), 42.0), (0, 0, 42.0))

    def test_unit_normalized_x(self):
        d = 30.0
        assert np.allclose(backproject(K, (K.cx + K.fx, K.cy), d), (d, 0, d))

    def test_depth_out_of_range(self):
        with pytest.raises(DepthOutOfRange):
            backproject(K, (10, 10), 0.5)
        with pytest.raises(DepthOutOfRange):
            backproject(K, (10, 10), 101.0)


class TestSvd2x2:
    def test_identity(self):
        u, d, v = svd2x2(np.eye(2))
        assert np.allclose(d, (1, 1))
        assert np.allclose(u @ np.diag(d) @ v.T, np.eye(2))

    def test_diagonal(self):
        _, d, _ = svd2x2(np.diag((3.0, 2.0)))
        assert np.allclose(d, (3.0, 2.0))

    def test_polar_decomposition_oracle(self):
        theta = np.deg2rad(30.0)
        r = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        a = r @ np.diag((1.2, 0.8))
        u, d, v = svd2x2(a)
        assert np.abs(u @ np.diag(d) @ v.T - a).max() < 1e-10
        assert np.abs(u @ v.T - r).max() < 1e-10

    def test_reconstruction_residual_bulk(self):
        rng = np.random.default_rng(7)
        for i in range(10_000):
            a = rng.normal(size=(2, 2))
            if i % 10 == 0:  # inject near-singular cases
                a[1] = a[0] * (1 + 1e-12)
            u, d, v = svd2x2(a)
            assert np.abs(u @ np.diag(d) @ v.T - a).max() < 1e-10
            assert d[0] >= d[1] >= 0
            assert np.abs(u @ u.T - np.eye(2)).max() < 1e-12
            assert np.abs(v @ v.T - np.eye(2)).max() < 1e-12


class TestSkew:
    def test_zero(self):
        assert np.all(skew((0, 0, 0)) == 0)

    def test_definition(self):
        expected = np.array([[0, -0.1, 0], [0.1, 0, 0], [0, 0, 0]])
        assert np.allclose(skew((0, 0, 0.1)), expected)

    def test_cross_product_identity(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            v, w = rng.normal(size=3), rng.normal(size=3)
            assert np.allclose(skew(v) @ w, np.cross(v, w))
            assert np.allclose(skew(v), -skew(v).T)


class TestRotationHelpers:
    def test_exp_log_round_trip(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            w = rng.normal(scale=1.2, size=3)
            r = rotation_exp(w)
            # log returns the principal vector; compare in SO(3)
            assert np.abs(rotation_exp(rotation_log(r)) - r).max() < 1e-8

    def test_log_principal_vector(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            w = rng.normal(size=3)
            w *= rng.uniform(0.0, 3.1) / np.linalg.norm(w)  # keep |w| < pi
            assert np.abs(rotation_log(rotation_exp(w)) - w).max() < 1e-7

    def test_elementary_rotations(self):
        a = 0.3
        assert np.allclose(rot_z(a) @ rot_z(-a), np.eye(3))
        assert np.allclose(rot_x(a)[:, 0], (1, 0, 0))
        assert np.allclose(rot_y(a)[:, 1], (0, 1, 0))


class TestIntrinsics:
    def test_validation(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(-1, 1, 0, 0, 10, 10)
        with pytest.raises(ValueError):
            CameraIntrinsics(1, 1, 20, 0, 10, 10)

    def test_matrix_inverse(self):
        assert np.allclose(K.matrix() @ K.inverse_matrix(), np.eye(3))

    def test_scaled(self):
        half = K.scaled(0.5)
        assert half.width == 320 and half.height == 240
        assert half.fx == 250.0 and half.cx == 160.0
