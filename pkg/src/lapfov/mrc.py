"""Minimize Rotation Constraint: quantify the visual misorientation between
the current view and the natural line-of-sight reference through a local
affine map, split off its rotational component by SVD, and search the axial
camera rotation that cancels it.

The affine map is derived analytically from the plane-induced homography
between the two views, for the fronto-parallel plane at the anchor's depth,
linearized at the anchor pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateHomography, ReflectionDetected, SingularAffine
from .geometry import CameraIntrinsics, Pose, rot_z, svd2x2

GRID_STEP_RAD = np.deg2rad(1.0)
REFINE_TOL_RAD = 1e-4


@dataclass(frozen=True)
class AffineMap:
    """2x2 distortion matrix plus 2-vector pixel displacement."""

    a: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(2, 2))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(2))


@dataclass(frozen=True)
class NlsReference:
    """Reference (setup-time) camera pose and its nominal plane depth in mm."""

    pose: Pose
    plane_depth: float = 50.0


def _homographies(reference: NlsReference, current: Pose, thetas: np.ndarray,
                  k: CameraIntrinsics, depth: float):
    """Batched plane-induced homographies from the theta-rotated current view
    to the reference view, for the plane z = depth in the current frame
    (axial rotation leaves that plane invariant)."""
    n = thetas.size
    cos = np.cos(thetas)
    sin = np.sin(thetas)
    rz = np.zeros((n, 3, 3))
    rz[:, 0, 0] = cos
    rz[:, 0, 1] = -sin
    rz[:, 1, 0] = sin
    rz[:, 1, 1] = cos
    rz[:, 2, 2] = 1.0

    rel = reference.pose.inverse().matrix() @ current.matrix()
    r_rel = rel[:3, :3]
    t_rel = rel[:3, 3]
    # points on the plane satisfy e3 . X' = depth in the rotated current frame
    m = r_rel[None] @ rz + np.outer(t_rel, np.array([0.0, 0.0, 1.0]))[None] / depth
    km = k.matrix()
    kinv = k.inverse_matrix()
    return km[None] @ m @ kinv[None], rz, rel


def _affine_at(h: np.ndarray, px: np.ndarray):
    """Local 2x2 Jacobian of the homography pixel map at px, plus the affine
    offset making the map exact at px. Returns (a, t, mapped pixel, w)."""
    u, v = px
    p = np.array([u, v, 1.0])
    f = h @ p
    w = f[..., 2]
    mapped = f[..., :2] / w[..., None]
    # d(fـi/w)/d(u,v) via quotient rule
    a = np.empty(h.shape[:-2] + (2, 2))
    for i in range(2):
        for j in range(2):
            a[..., i, j] = (h[..., i, j] * w - f[..., i] * h[..., 2, j]) / (w * w)
    t = mapped - np.einsum("...ij,j->...i", a, np.array([u, v]))
    return a, t, mapped, w


def estimate_affine(reference: NlsReference, current: Pose, theta: float,
                    k: CameraIntrinsics, anchor_px,
                    anchor_depth: float | None = None) -> AffineMap:
    """Affine map (distortion + displacement) of the theta-rotated current
    view relative to the reference view, linearized at the anchor pixel."""
    depth = reference.plane_depth if anchor_depth is None else float(anchor_depth)
    if depth <= 0:
        raise DegenerateHomography("anchor depth must be positive")
    px = np.asarray(anchor_px, dtype=float).reshape(2)
    h, rz, rel = _homographies(reference, current, np.array([theta]), k, depth)

    # anchor's 3D point must sit in front of both cameras
    x_cur = depth * k.inverse_matrix() @ np.array([px[0], px[1], 1.0])
    x_ref = rel[:3, :3] @ x_cur + rel[:3, 3]
    if x_ref[2] <= 1e-9:
        raise DegenerateHomography("anchor plane behind the reference camera")

    # anchor pixel as seen in the theta-rotated view (same 3D point)
    x_rot = rz[0].T @ x_cur
    px_rot = np.array([k.fx * x_rot[0] / x_rot[2] + k.cx,
                       k.fy * x_rot[1] / x_rot[2] + k.cy])

    a, t, _, w = _affine_at(h[0], px_rot)
    if abs(w) < 1e-12:
        raise DegenerateHomography("anchor maps to infinity")
    return AffineMap(a, t)


def misorientation_angle(affine: AffineMap) -> float:
    """Rotational component phi of the distortion matrix: A = R(phi) (V D V^T).

    Positive phi is counter-clockwise in pixel coordinates.
    """
    det = float(np.linalg.det(affine.a))
    if abs(det) < 1e-12:
        raise SingularAffine(f"det(A) = {det:.3g}")
    if det < 0:
        raise ReflectionDetected("distortion matrix contains a reflection")
    u, _, v = svd2x2(affine.a)
    r = u @ v.T
    return float(np.arctan2(r[1, 0], r[0, 0]))


def _phi_batch(reference: NlsReference, current: Pose, thetas: np.ndarray,
               k: CameraIntrinsics, anchor_px, depth: float) -> np.ndarray:
    """|phi| over a batch of axial rotations (vectorized grid search)."""
    px = np.asarray(anchor_px, dtype=float).reshape(2)
    h, rz, rel = _homographies(reference, current, thetas, k, depth)
    x_cur = depth * k.inverse_matrix() @ np.array([px[0], px[1], 1.0])
    x_ref = rel[:3, :3] @ x_cur + rel[:3, 3]
    if x_ref[2] <= 1e-9:
        raise DegenerateHomography("anchor plane behind the reference camera")

    x_rot = np.einsum("nji,j->ni", rz, x_cur)  # rz^T @ x_cur
    pxs = np.stack([k.fx * x_rot[:, 0] / x_rot[:, 2] + k.cx,
                    k.fy * x_rot[:, 1] / x_rot[:, 2] + k.cy], axis=1)

    p = np.concatenate([pxs, np.ones((thetas.size, 1))], axis=1)
    f = np.einsum("nij,nj->ni", h, p)
    w = f[:, 2]
    a = np.empty((thetas.size, 2, 2))
    for i in range(2):
        for j in range(2):
            a[:, i, j] = (h[:, i, j] * w - f[:, i] * h[:, 2, j]) / (w * w)

    u, _, vt = np.linalg.svd(a)
    r = u @ vt
    dets = np.linalg.det(a)
    phi = np.arctan2(r[:, 1, 0], r[:, 0, 0])
    phi = np.where(dets > 0, phi, np.pi)  # reflections treated as worst-case
    return np.abs(phi)


def solve_theta_star(reference: NlsReference, current: Pose, k: CameraIntrinsics,
                     anchor_px, anchor_depth: float | None = None) -> float:
    """Axial rotation minimizing |phi|: 1-degree grid over [-pi, pi) followed
    by golden-section refinement to 1e-4 rad.
    """
    depth = reference.plane_depth if anchor_depth is None else float(anchor_depth)
    thetas = np.arange(-np.pi, np.pi, GRID_STEP_RAD)
    costs = _phi_batch(reference, current, thetas, k, anchor_px, depth)
    best = int(np.argmin(costs))  # first minimum = smallest theta on ties
    grid_theta = float(thetas[best])
    grid_cost = float(costs[best])

    def cost(theta: float) -> float:
        return float(_phi_batch(reference, current, np.array([theta]), k,
                                anchor_px, depth)[0])

    lo = grid_theta - GRID_STEP_RAD
    hi = grid_theta + GRID_STEP_RAD
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - inv_phi * (hi - lo)
    x2 = lo + inv_phi * (hi - lo)
    f1, f2 = cost(x1), cost(x2)
    while hi - lo > REFINE_TOL_RAD:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - inv_phi * (hi - lo)
            f1 = cost(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + inv_phi * (hi - lo)
            f2 = cost(x2)
    theta_star = 0.5 * (lo + hi)
    if cost(theta_star) <= grid_cost:
        return theta_star
    return grid_theta


def phi_curve(reference: NlsReference, current: Pose, k: CameraIntrinsics,
              anchor_px, anchor_depth: float | None = None,
              step_deg: float = 1.0) -> np.ndarray:
    """(theta, |phi|) samples over [-pi, pi) for diagnostic dumps."""
    depth = reference.plane_depth if anchor_depth is None else float(anchor_depth)
    thetas = np.arange(-np.pi, np.pi, np.deg2rad(step_deg))
    costs = _phi_batch(reference, current, thetas, k, anchor_px, depth)
    return np.stack([thetas, costs], axis=1)


def dump_phi_curve(path, reference: NlsReference, current: Pose,
                   k: CameraIntrinsics, anchor_px,
                   anchor_depth: float | None = None) -> None:
    curve = phi_curve(reference, current, k, anchor_px, anchor_depth)
    with open(path, "w") as f:
        f.write("# theta_rad abs_phi_rad\n")
        for theta, phi in curve:
            f.write(f"{float(theta)!r} {float(phi)!r}\n")
