"""Rigid-body poses, pinhole camera model, and small-matrix numerics.

Conventions: millimeters for translation, radians for angles. Camera frame
is +z forward, +x right, +y down (pixel v grows downward). A Pose maps
points from its own frame into the parent frame: p_parent = R @ p + t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveDepth, DepthOutOfRange

ORTHONORMALITY_TOL = 1e-9


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3)
    return a


def orthonormality_drift(rotation: np.ndarray) -> float:
    """Max-abs entry of R^T R - I."""
    return float(np.abs(rotation.T @ rotation - np.eye(3)).max())


def renormalize_rotation(rotation: np.ndarray) -> np.ndarray:
    """Project a near-rotation onto SO(3) (polar projection via SVD)."""
    u, _, vt = np.linalg.svd(rotation)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


@dataclass(frozen=True)
class Pose:
    """Rigid transform: rotation (3x3, det +1) plus translation in mm."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3).copy()
        t = _as_vec3(self.translation).copy()
        if orthonormality_drift(r) > ORTHONORMALITY_TOL:
            r = renormalize_rotation(r)
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Apply to one 3-vector or an (N,3) array of points."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous form."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def as_row(self) -> np.ndarray:
        """Row-major 3x4 [R|t] flattened to 12 numbers (trace/pose-file layout)."""
        return np.hstack([self.rotation, self.translation[:, None]]).reshape(12)


def compose(a: Pose, b: Pose) -> Pose:
    """a ∘ b: apply b first, then a. Rotation renormalized on drift."""
    r = a.rotation @ b.rotation
    t = a.rotation @ b.translation + a.translation
    return Pose(r, t)  # Pose.__post_init__ renormalizes if drift > tol


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=float)


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=float)


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=float)


def skew(v) -> np.ndarray:
    """Antisymmetric matrix with skew(v) @ w == cross(v, w)."""
    x, y, z = _as_vec3(v)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_exp(omega) -> np.ndarray:
    """Rodrigues: rotation matrix for a rotation-vector omega (rad)."""
    w = _as_vec3(omega)
    angle = np.linalg.norm(w)
    if angle < 1e-12:
        return np.eye(3) + skew(w)
    axis = w / angle
    k = skew(axis)
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def rotation_log(r: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of a rotation matrix."""
    cos_angle = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    angle = np.arccos(cos_angle)
    if angle < 1e-9:
        # First-order: R ≈ I + skew(w)
        return 0.5 * np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    if np.pi - angle < 1e-6:
        # Near pi the antisymmetric part degenerates; use the symmetric part.
        m = (r + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(m), 0.0))
        # fix signs from off-diagonals
        if axis[0] >= axis[1] and axis[0] >= axis[2]:
            axis[1] = m[0, 1] / axis[0] if axis[0] > 0 else axis[1]
            axis[2] = m[0, 2] / axis[0] if axis[0] > 0 else axis[2]
        elif axis[1] >= axis[2]:
            axis[0] = m[0, 1] / axis[1]
            axis[2] = m[1, 2] / axis[1]
        else:
            axis[0] = m[0, 2] / axis[2]
            axis[1] = m[1, 2] / axis[2]
        axis = axis / np.linalg.norm(axis)
        return angle * axis
    w = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    return angle / (2.0 * np.sin(angle)) * w


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixel units."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside image")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1]], dtype=float
        )

    def inverse_matrix(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0, -self.cx / self.fx],
                [0, 1.0 / self.fy, -self.cy / self.fy],
                [0, 0, 1],
            ],
            dtype=float,
        )

    def scaled(self, factor: float) -> "CameraIntrinsics":
        """Intrinsics for an image resized by `factor` (e.g. 0.5 per pyramid level)."""
        return CameraIntrinsics(
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=self.cx * factor,
            cy=self.cy * factor,
            width=max(1, int(round(self.width * factor))),
            height=max(1, int(round(self.height * factor))),
        )

    def contains(self, px) -> bool:
        u, v = float(px[0]), float(px[1])
        return 0 <= u < self.width and 0 <= v < self.height


def project(k: CameraIntrinsics, point) -> np.ndarray:
    """Project a camera-frame 3D point (mm) to pixel coordinates.

    Raises NonPositiveDepth when z <= 0.
    """
    p = _as_vec3(point)
    if p[2] <= 0:
        raise NonPositiveDepth(f"point depth {p[2]:.6g} <= 0")
    return np.array([k.fx * p[0] / p[2] + k.cx, k.fy * p[1] / p[2] + k.cy])


def backproject(k: CameraIntrinsics, pixel, depth: float,
                d_min: float = 1.0, d_max: float = 100.0) -> np.ndarray:
    """Camera-frame 3D point at `depth` mm along the ray through `pixel`."""
    if not (d_min <= depth <= d_max):
        raise DepthOutOfRange(f"depth {depth} outside [{d_min}, {d_max}]")
    u, v = float(pixel[0]), float(pixel[1])
    return depth * np.array([(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0])


def svd2x2(a: np.ndarray):
    """SVD of a real 2x2 matrix: a = U @ diag(d) @ V.T.

    U, V orthogonal; d nonnegative, descending. Rank-deficient input allowed.
    """
    a = np.asarray(a, dtype=float).reshape(2, 2)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite entries")
    u, d, vt = np.linalg.svd(a)
    return u, d, vt.T
