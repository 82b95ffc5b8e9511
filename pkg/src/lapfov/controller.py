"""Null-space laparoscope controller under a remote-center-of-motion
constraint: 2D tip tracking as the primary task, depth and axial
misorientation corrections through the null space, RCM deviation feedback,
end-effector twist conversion, Lyapunov monitoring, and motion limits.

Actuation convention: the 4-vector task command is q = [v_insert, wx, wy, wz]
in the RCM frame (origin at the trocar, axes aligned with the camera). The
insertion/rotation geometry Jacobian is J_d = [e3 | skew(t_c)] with t_c the
camera position in the RCM frame; the integrator below applies the angular
command as a rigid rotation about the trocar with angular velocity
diag(-1,-1,1) @ w, which realizes exactly the camera translation J_d @ q
predicts while preserving the trocar on the shaft. (The transverse sign flip
resolves the convention ambiguity of the published law; it is what makes the
closed loop contract rather than diverge.)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveDepth
from .geometry import CameraIntrinsics, Pose, rotation_exp, skew

PINV_CUTOFF = 1e-8
ANGULAR_SIGN = np.array([-1.0, -1.0, 1.0])


@dataclass(frozen=True)
class RcmState:
    """Trocar point, RCM frame (origin at trocar, camera-aligned axes), and
    the camera/end-effector offsets expressed in that frame."""

    trocar: np.ndarray
    rcm_frame: Pose
    t_c: np.ndarray  # camera position in the RCM frame
    t_e: np.ndarray  # end-effector position in the RCM frame

    @staticmethod
    def from_camera(camera: Pose, trocar, hand_eye: Pose | None = None) -> "RcmState":
        """Build the RCM state for a camera pose and fixed trocar point.

        hand_eye is the end-effector-to-camera transform; identity means the
        end-effector frame coincides with the camera frame.
        """
        trocar = np.asarray(trocar, dtype=float).reshape(3)
        rcm_frame = Pose(camera.rotation, trocar)
        t_c = camera.rotation.T @ (camera.translation - trocar)
        if hand_eye is None:
            t_e = t_c.copy()
        else:
            effector = camera.matrix() @ np.linalg.inv(hand_eye.matrix())
            t_e = camera.rotation.T @ (effector[:3, 3] - trocar)
        return RcmState(trocar, rcm_frame, t_c, t_e)


@dataclass(frozen=True)
class ControlGains:
    """Feedback gains; defaults follow the reported tuning."""

    ks: np.ndarray = field(default_factory=lambda: np.array([3e-3, 1.0, 1.0, 1.0]))
    kr: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5]))
    k_theta: float = 1.0
    k_d: float = 0.1

    def __post_init__(self):
        ks = np.asarray(self.ks, dtype=float).reshape(4)
        kr = np.asarray(self.kr, dtype=float).reshape(2)
        if np.any(ks <= 0) or np.any(kr <= 0) or self.k_theta <= 0 or self.k_d <= 0:
            raise ValueError("all gains must be positive")
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "kr", kr)


@dataclass(frozen=True)
class TaskErrors:
    """Complete error state: tip-vs-target pixels, depth mm, RCM deviation
    mm (shaft-frame x/y), and the MRC angle in rad."""

    e_p: np.ndarray
    e_d: float
    e_r: np.ndarray
    theta_star: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "e_p", np.asarray(self.e_p, dtype=float).reshape(2))
        object.__setattr__(self, "e_r", np.asarray(self.e_r, dtype=float).reshape(2))

    @staticmethod
    def zero() -> "TaskErrors":
        return TaskErrors(np.zeros(2), 0.0, np.zeros(2), 0.0)


@dataclass(frozen=True)
class ControlCommand:
    """6D twist: linear mm/s, angular rad/s, in the RCM or base frame."""

    linear: np.ndarray
    angular: np.ndarray
    frame: str = "rcm"
    ill_conditioned: bool = False

    def __post_init__(self):
        object.__setattr__(self, "linear", np.asarray(self.linear, dtype=float).reshape(3))
        object.__setattr__(self, "angular", np.asarray(self.angular, dtype=float).reshape(3))

    @staticmethod
    def zero(frame: str = "rcm", ill_conditioned: bool = False) -> "ControlCommand":
        return ControlCommand(np.zeros(3), np.zeros(3), frame, ill_conditioned)


@dataclass(frozen=True)
class TaskJacobians:
    j_d: np.ndarray   # 3x4: camera linear velocity from q
    j_e: np.ndarray   # 3x4: angular selector
    j_de: np.ndarray  # 6x4: stacked
    j_fov: np.ndarray  # 2x4: pixel velocity from q


def image_jacobian(p_t, d_tool: float, k: CameraIntrinsics) -> np.ndarray:
    """Linear-velocity block of the point-feature interaction matrix, in
    pixel units, evaluated at tip pixel p_t and depth d_tool."""
    if d_tool <= 0:
        raise NonPositiveDepth(f"d_tool = {d_tool}")
    u, v = float(p_t[0]), float(p_t[1])
    x = (u - k.cx) / k.fx
    y = (v - k.cy) / k.fy
    z = d_tool
    return np.array(
        [
            [-k.fx / z, 0.0, k.fx * x / z],
            [0.0, -k.fy / z, k.fy * y / z],
        ]
    )


def task_jacobians(rcm: RcmState, p_t, d_tool: float, k: CameraIntrinsics) -> TaskJacobians:
    j_d = np.zeros((3, 4))
    j_d[:, 0] = np.array([0.0, 0.0, 1.0])
    j_d[:, 1:] = skew(rcm.t_c)
    j_e = np.zeros((3, 4))
    j_e[:, 1:] = np.eye(3)
    j_de = np.vstack([j_d, j_e])
    j_fov = image_jacobian(p_t, d_tool, k) @ j_d
    return TaskJacobians(j_d, j_e, j_de, j_fov)


def rcm_error(rcm: RcmState, camera: Pose) -> np.ndarray:
    """Perpendicular deviation of the shaft from the trocar, expressed in the
    shaft (camera) frame x/y."""
    rel = camera.rotation.T @ (camera.translation - rcm.trocar)
    return rel[:2].copy()


def pinv_cutoff(m: np.ndarray, cutoff: float = PINV_CUTOFF) -> np.ndarray:
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return vt.T @ np.diag(inv) @ u.T


def null_space_law(errors: TaskErrors, jac: TaskJacobians,
                   gains: ControlGains) -> ControlCommand:
    """Primary 2D tracking with depth/misorientation corrections projected
    into the task null space; in-plane RCM velocity from -Kr e_r.

    Returns a zero command flagged ill_conditioned when the 2D-task Jacobian
    loses rank (smaller singular value below the pseudo-inverse cutoff).
    """
    singulars = np.linalg.svd(jac.j_fov, compute_uv=False)
    if singulars.min() < PINV_CUTOFF:
        return ControlCommand.zero(ill_conditioned=True)

    j_fov_pinv = pinv_cutoff(jac.j_fov)
    j_de_pinv = pinv_cutoff(jac.j_de)
    null_proj = np.eye(4) - j_fov_pinv @ jac.j_fov

    v_c = -gains.k_d * errors.e_d          # desired camera z velocity
    w_c = -gains.k_theta * errors.theta_star  # desired axial rate
    secondary = np.array([0.0, 0.0, v_c, 0.0, 0.0, w_c])

    q = -np.diag(gains.ks) @ (j_fov_pinv @ errors.e_p) - null_proj @ (j_de_pinv @ secondary)

    linear = np.array([-gains.kr[0] * errors.e_r[0],
                       -gains.kr[1] * errors.e_r[1],
                       q[0]])
    return ControlCommand(linear, q[1:4], frame="rcm")


def to_end_effector(cmd: ControlCommand, rcm: RcmState) -> ControlCommand:
    """RCM-frame twist to base-frame end-effector twist:
    [v_e; w_e] = blockdiag(R_r, R_r) @ [[I, -skew(t_e)], [0, I]] @ [v_r; w_r].
    """
    v = cmd.linear - skew(rcm.t_e) @ cmd.angular
    w = cmd.angular
    r = rcm.rcm_frame.rotation
    return ControlCommand(r @ v, r @ w, frame="base",
                          ill_conditioned=cmd.ill_conditioned)


def from_end_effector(cmd: ControlCommand, rcm: RcmState) -> ControlCommand:
    """Inverse of to_end_effector (the transform is a linear bijection)."""
    r = rcm.rcm_frame.rotation
    v = r.T @ cmd.linear
    w = r.T @ cmd.angular
    return ControlCommand(v + skew(rcm.t_e) @ w, w, frame="rcm",
                          ill_conditioned=cmd.ill_conditioned)


def lyapunov(errors: TaskErrors) -> float:
    """V = (|e_r|^2 + |e_p|^2 + e_d^2) / 2 — the stability monitor."""
    return 0.5 * float(
        errors.e_r @ errors.e_r + errors.e_p @ errors.e_p + errors.e_d**2
    )


def apply_limits(cmd: ControlCommand, max_linear: float, max_angular: float) -> ControlCommand:
    """Uniformly scale the whole twist down when either norm exceeds its limit."""
    if max_linear <= 0 or max_angular <= 0:
        raise ValueError("limits must be positive")
    lin_norm = float(np.linalg.norm(cmd.linear))
    ang_norm = float(np.linalg.norm(cmd.angular))
    scale = 1.0
    if lin_norm > max_linear:
        scale = min(scale, max_linear / lin_norm)
    if ang_norm > max_angular:
        scale = min(scale, max_angular / ang_norm)
    if scale >= 1.0:
        return cmd
    return ControlCommand(cmd.linear * scale, cmd.angular * scale, cmd.frame,
                          cmd.ill_conditioned)


def integrate_camera(camera: Pose, trocar, cmd: ControlCommand, dt: float) -> Pose:
    """Advance the camera pose by an RCM-frame twist over dt.

    Linear part translates the scope rigidly (expressed in the camera-aligned
    RCM frame); the angular part rotates the scope about the trocar with
    angular velocity diag(-1,-1,1) @ w, see module docstring.
    """
    if cmd.frame != "rcm":
        raise ValueError("integrate_camera expects an RCM-frame command")
    trocar = np.asarray(trocar, dtype=float).reshape(3)
    omega_phys = ANGULAR_SIGN * cmd.angular
    omega_base = camera.rotation @ omega_phys
    delta_rot = rotation_exp(omega_base * dt)
    rotation = delta_rot @ camera.rotation
    translation = trocar + delta_rot @ (camera.translation - trocar) \
        + camera.rotation @ (cmd.linear * dt)
    return Pose(rotation, translation)
