"""Synthetic abdomen world: a textured background plane plus a cylindrical
tool, rendered through the pinhole model by per-pixel ray casting.

Rendering is a pure function of (scene, camera pose, intrinsics): identical
inputs give bit-identical images, depth maps, and tool masks. Depth maps hold
metric z-depth in the camera frame. The tool mask marks pixels where the
cylinder is the nearest hit within the tip region (front `tip_length` mm of
the shaft).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CameraFacingAway
from .geometry import CameraIntrinsics, Pose
from .images import DepthMap, ImageBuffer, D_MIN_DEFAULT, D_MAX_DEFAULT

TIP_LENGTH_MM = 10.0


# ---------------------------------------------------------------------------
# Procedural texture: hash-based multi-octave value noise. Seeded and
# lattice-hashed so any (x, y) query is deterministic without stored assets.

_M1 = np.uint64(0x9E3779B97F4A7C15)
_M2 = np.uint64(0xC2B2AE3D27D4EB4F)
_M3 = np.uint64(0xD6E8FEB86659FD93)
_MIX = np.uint64(0xFF51AFD7ED558CCD)


def _hash01(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic lattice hash -> floats in [0,1)."""
    seed_mix = np.uint64((seed * 0xD6E8FEB86659FD93) & 0xFFFFFFFFFFFFFFFF)
    h = (
        ix.astype(np.int64).astype(np.uint64) * _M1
        ^ iy.astype(np.int64).astype(np.uint64) * _M2
        ^ seed_mix
    )
    h ^= h >> np.uint64(33)
    h *= _MIX
    h ^= h >> np.uint64(29)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def value_noise(x: np.ndarray, y: np.ndarray, seed: int,
                scale: float = 4.0, octaves: int = 4) -> np.ndarray:
    """Multi-octave value noise in [0,1]; `scale` is the base feature size (mm)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(x)
    amp_total = 0.0
    amp = 1.0
    freq = 1.0 / scale
    for octave in range(octaves):
        fx = x * freq
        fy = y * freq
        ix = np.floor(fx)
        iy = np.floor(fy)
        tx = fx - ix
        ty = fy - iy
        # smoothstep blend
        sx = tx * tx * (3.0 - 2.0 * tx)
        sy = ty * ty * (3.0 - 2.0 * ty)
        oseed = seed * 1013 + octave * 7919
        v00 = _hash01(ix, iy, oseed)
        v10 = _hash01(ix + 1, iy, oseed)
        v01 = _hash01(ix, iy + 1, oseed)
        v11 = _hash01(ix + 1, iy + 1, oseed)
        top = v00 + sx * (v10 - v00)
        bot = v01 + sx * (v11 - v01)
        out += amp * (top + sy * (bot - top))
        amp_total += amp
        amp *= 0.5
        freq *= 2.0
    return out / amp_total


# ---------------------------------------------------------------------------
# World description


@dataclass(frozen=True)
class ToolState:
    """Cylindrical tool: tip point, unit shaft direction, radius (mm).

    The shaft extends from the tip along +shaft_dir.
    """

    tip: np.ndarray
    shaft_dir: np.ndarray
    radius: float = 2.5

    def __post_init__(self):
        tip = np.asarray(self.tip, dtype=float).reshape(3).copy()
        d = np.asarray(self.shaft_dir, dtype=float).reshape(3).copy()
        n = np.linalg.norm(d)
        if abs(n - 1.0) > 1e-9:
            if n == 0:
                raise ValueError("shaft_dir must be nonzero")
            d = d / n
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        tip.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "tip", tip)
        object.__setattr__(self, "shaft_dir", d)


@dataclass(frozen=True)
class Scene:
    """Textured background plane (n·p = d_plane), tool, and trocar point."""

    plane_normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    plane_offset: float = 50.0
    tool: ToolState = field(
        default_factory=lambda: ToolState(np.array([0.0, 0.0, 30.0]), np.array([0.6, -0.35, 0.9]))
    )
    trocar: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -100.0]))
    texture_seed: int = 7
    texture_scale: float = 5.0
    tool_length: float = 80.0
    tip_length: float = TIP_LENGTH_MM
    d_min: float = D_MIN_DEFAULT
    d_max: float = D_MAX_DEFAULT

    def __post_init__(self):
        n = np.asarray(self.plane_normal, dtype=float).reshape(3).copy()
        n /= np.linalg.norm(n)
        n.flags.writeable = False
        t = np.asarray(self.trocar, dtype=float).reshape(3).copy()
        t.flags.writeable = False
        object.__setattr__(self, "plane_normal", n)
        object.__setattr__(self, "trocar", t)

    def with_tool(self, tool: ToolState) -> "Scene":
        return replace(self, tool=tool)

    def plane_axes(self) -> tuple[np.ndarray, np.ndarray]:
        """Two orthonormal in-plane axes for texture coordinates."""
        n = self.plane_normal
        helper = np.array([1.0, 0.0, 0.0])
        if abs(n[0]) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        a1 = np.cross(n, helper)
        a1 /= np.linalg.norm(a1)
        a2 = np.cross(n, a1)
        return a1, a2


# ---------------------------------------------------------------------------
# Ray casting

_NO_HIT = np.inf


_DIR_CACHE: dict = {}


def _camera_frame_dirs(k: CameraIntrinsics) -> np.ndarray:
    key = (k.fx, k.fy, k.cx, k.cy, k.width, k.height)
    cached = _DIR_CACHE.get(key)
    if cached is None:
        us, vs = np.meshgrid(np.arange(k.width, dtype=float),
                             np.arange(k.height, dtype=float))
        dx = (us - k.cx) / k.fx
        dy = (vs - k.cy) / k.fy
        cached = np.stack([dx, dy, np.ones_like(dx)], axis=-1)
        cached.flags.writeable = False
        if len(_DIR_CACHE) > 8:
            _DIR_CACHE.clear()
        _DIR_CACHE[key] = cached
    return cached


def _ray_dirs(camera: Pose, k: CameraIntrinsics):
    """World-frame ray directions with camera-frame z component 1.

    With unit z component, the ray parameter equals camera z-depth.
    """
    return _camera_frame_dirs(k) @ camera.rotation.T


def _intersect_plane(scene: Scene, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    n = scene.plane_normal
    denom = dirs @ n
    num = scene.plane_offset - origin @ n
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(np.abs(denom) > 1e-12, num / denom, _NO_HIT)
    return np.where(s > 1e-9, s, _NO_HIT)


def _intersect_tool_flat(scene: Scene, origin: np.ndarray, dirs: np.ndarray):
    """Nearest hit on the capped cylinder for flattened (N,3) ray directions;
    returns (s, axial coordinate)."""
    tool = scene.tool
    a = tool.tip
    u = tool.shaft_dir
    r2 = tool.radius**2
    length = scene.tool_length

    oc = origin - a
    d_dot_u = dirs @ u
    oc_dot_u = float(oc @ u)
    m = dirs - d_dot_u[:, None] * u[None, :]
    q = oc - oc_dot_u * u

    aa = np.einsum("ij,ij->i", m, m)
    bb = 2.0 * (m @ q)
    cc = float(q @ q) - r2
    disc = bb * bb - 4.0 * aa * cc

    s_best = np.full(dirs.shape[0], _NO_HIT)
    h_best = np.zeros(dirs.shape[0])

    ok = (disc >= 0) & (aa > 1e-14)
    if np.any(ok):
        sqrt_disc = np.sqrt(disc[ok])
        aa_ok = aa[ok]
        bb_ok = bb[ok]
        d_dot_ok = d_dot_u[ok]
        s_ok = np.full(ok.sum(), _NO_HIT)
        h_ok = np.zeros(ok.sum())
        for sign in (-1.0, 1.0):  # near root first
            s = (-bb_ok + sign * sqrt_disc) / (2.0 * aa_ok)
            h = oc_dot_u + s * d_dot_ok
            valid = (s > 1e-9) & (h >= 0.0) & (h <= length) & (s < s_ok)
            s_ok[valid] = s[valid]
            h_ok[valid] = h[valid]
        s_best[ok] = s_ok
        h_best[ok] = h_ok

    # End-cap disks at axial 0 (tip face) and `length`
    cap_ok = np.abs(d_dot_u) > 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        for h_cap in (0.0, length):
            s = np.where(cap_ok, (h_cap - oc_dot_u) / d_dot_u, _NO_HIT)
            maybe = (s > 1e-9) & (s < s_best)
            if np.any(maybe):
                p_rel = oc[None, :] + s[maybe, None] * dirs[maybe]
                radial = p_rel - (h_cap * u)[None, :]
                rad2 = np.einsum("ij,ij->i", radial, radial)
                hit = rad2 <= r2
                idx = np.nonzero(maybe)[0][hit]
                s_best[idx] = s[idx]
                h_best[idx] = h_cap

    return s_best, h_best


def _tool_pixel_bbox(scene: Scene, camera: Pose, k: CameraIntrinsics):
    """Conservative pixel bounding box of the cylinder, or None when it cannot
    appear on screen. Falls back to the full image near the camera plane."""
    tool = scene.tool
    ends = [tool.tip, tool.tip + scene.tool_length * tool.shaft_dir]
    full = (0, k.height, 0, k.width)
    lo_u, hi_u, lo_v, hi_v = np.inf, -np.inf, np.inf, -np.inf
    max_rad = 0.0
    for end in ends:
        p_cam = camera.rotation.T @ (end - camera.translation)
        z = p_cam[2]
        if z <= tool.radius + 0.5:
            return full if z > -scene.tool_length else None
        u = k.fx * p_cam[0] / z + k.cx
        v = k.fy * p_cam[1] / z + k.cy
        rad = max(k.fx, k.fy) * tool.radius / (z - tool.radius)
        max_rad = max(max_rad, rad)
        lo_u, hi_u = min(lo_u, u), max(hi_u, u)
        lo_v, hi_v = min(lo_v, v), max(hi_v, v)
    pad = max_rad + 2.0
    row0 = int(max(0, np.floor(lo_v - pad)))
    row1 = int(min(k.height, np.ceil(hi_v + pad) + 1))
    col0 = int(max(0, np.floor(lo_u - pad)))
    col1 = int(min(k.width, np.ceil(hi_u + pad) + 1))
    if row0 >= row1 or col0 >= col1:
        return None
    return row0, row1, col0, col1


def _intersect_tool(scene: Scene, origin: np.ndarray, dirs: np.ndarray,
                    camera: Pose | None = None, k: CameraIntrinsics | None = None):
    """Nearest hit on the capped cylinder; returns (s, axial coordinate).

    When camera/intrinsics are supplied, work is restricted to the tool's
    conservative screen bounding box.
    """
    shape = dirs.shape[:2]
    if camera is not None and k is not None:
        bbox = _tool_pixel_bbox(scene, camera, k)
        if bbox is None:
            return np.full(shape, _NO_HIT), np.zeros(shape)
        row0, row1, col0, col1 = bbox
        crop = dirs[row0:row1, col0:col1].reshape(-1, 3)
        s_flat, h_flat = _intersect_tool_flat(scene, origin, crop)
        s = np.full(shape, _NO_HIT)
        h = np.zeros(shape)
        s[row0:row1, col0:col1] = s_flat.reshape(row1 - row0, col1 - col0)
        h[row0:row1, col0:col1] = h_flat.reshape(row1 - row0, col1 - col0)
        return s, h
    s_flat, h_flat = _intersect_tool_flat(scene, origin, dirs.reshape(-1, 3))
    return s_flat.reshape(shape), h_flat.reshape(shape)


def _shade_plane(scene: Scene, points: np.ndarray) -> np.ndarray:
    a1, a2 = scene.plane_axes()
    tex = value_noise(points @ a1, points @ a2, scene.texture_seed,
                      scale=scene.texture_scale)
    return 0.35 + 0.60 * tex


def _shade_tool(scene: Scene, points: np.ndarray, axial: np.ndarray) -> np.ndarray:
    tool = scene.tool
    rel = points - tool.tip
    radial = rel - axial[..., None] * tool.shaft_dir
    a1, a2 = _perp_axes(tool.shaft_dir)
    angle = np.arctan2(radial @ a2, radial @ a1)
    tex = value_noise(axial, angle * tool.radius, scene.texture_seed + 101,
                      scale=max(1.5, scene.texture_scale / 2.0), octaves=3)
    return 0.12 + 0.42 * tex


def _perp_axes(u: np.ndarray):
    helper = np.array([1.0, 0.0, 0.0])
    if abs(u[0]) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    a1 = np.cross(u, helper)
    a1 /= np.linalg.norm(a1)
    a2 = np.cross(u, a1)
    return a1, a2


def render_geometry(scene: Scene, camera: Pose, k: CameraIntrinsics):
    """Depth map and tip mask only (no shading); the fast path for control loops.

    Returns (depth values (h,w), tip mask bool (h,w), tool-hit bool, axial coords).
    """
    axis_dir = camera.rotation[:, 2]
    denom = float(axis_dir @ scene.plane_normal)
    if abs(denom) < 1e-12:
        raise CameraFacingAway("optical axis parallel to background plane")
    s_axis = (scene.plane_offset - float(camera.translation @ scene.plane_normal)) / denom
    if s_axis <= 0:
        raise CameraFacingAway("background plane behind the camera")

    dirs = _ray_dirs(camera, k)
    origin = camera.translation
    s_plane = _intersect_plane(scene, origin, dirs)
    s_tool, h_tool = _intersect_tool(scene, origin, dirs, camera, k)

    tool_nearest = s_tool < s_plane
    depth = np.where(tool_nearest, s_tool, s_plane)
    if np.any(~np.isfinite(depth)):
        # rays that miss everything (plane edge-on); clamp to far limit
        depth = np.where(np.isfinite(depth), depth, scene.d_max)
    depth = np.clip(depth, scene.d_min, scene.d_max)
    tip_mask = tool_nearest & (h_tool <= scene.tip_length)
    return depth, tip_mask, tool_nearest, h_tool


def render(scene: Scene, camera: Pose, k: CameraIntrinsics):
    """Full render: (ImageBuffer, DepthMap, tip mask as binary ImageBuffer)."""
    depth, tip_mask, tool_nearest, h_tool = render_geometry(scene, camera, k)
    dirs = _ray_dirs(camera, k)
    points = camera.translation[None, None, :] + depth[..., None] * dirs

    img = _shade_plane(scene, points)
    if np.any(tool_nearest):
        tool_shade = _shade_tool(scene, points, h_tool)
        img = np.where(tool_nearest, tool_shade, img)
    img = np.clip(img, 0.0, 1.0)

    return (
        ImageBuffer(img),
        DepthMap(depth, scene.d_min, scene.d_max),
        ImageBuffer(tip_mask.astype(float)),
    )


# ---------------------------------------------------------------------------
# Scripted trajectories


@dataclass(frozen=True)
class TrajectoryScript:
    """Deterministic tool motion: static, step, spiral, or waypoint list.

    Parameters by kind:
      static    position
      step      position, offset, step_time
      spiral    center, pitch (mm/rev), rate (rev/s), axis1, axis2, phase
      waypoints waypoints: [(t, [x,y,z]), ...] with linear interpolation
    Common: shaft_dir, radius.
    """

    kind: str
    params: dict
    shaft_dir: tuple = (0.6, -0.35, 0.9)
    radius: float = 2.5

    def __post_init__(self):
        if self.kind not in ("static", "step", "spiral", "waypoints"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.kind == "waypoints":
            wps = self.params["waypoints"]
            if len(wps) < 1:
                raise ValueError("waypoint list empty")
            times = [float(t) for t, _ in wps]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError("waypoint times must be strictly increasing")


def tool_at(script: TrajectoryScript, t: float) -> ToolState:
    """Tool state at time t >= 0."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    p = script.params
    if script.kind == "static":
        pos = np.asarray(p["position"], dtype=float)
    elif script.kind == "step":
        pos = np.asarray(p["position"], dtype=float)
        if t >= float(p["step_time"]):
            pos = pos + np.asarray(p["offset"], dtype=float)
    elif script.kind == "spiral":
        center = np.asarray(p["center"], dtype=float)
        pitch = float(p["pitch"])
        rate = float(p["rate"])
        phase = float(p.get("phase", 0.0))
        radius0 = float(p.get("radius0", 0.0))
        a1 = np.asarray(p.get("axis1", (1.0, 0.0, 0.0)), dtype=float)
        a2 = np.asarray(p.get("axis2", (0.0, 1.0, 0.0)), dtype=float)
        revs = rate * t
        radius = radius0 + pitch * revs
        angle = 2.0 * np.pi * revs + phase
        pos = center + radius * (np.cos(angle) * a1 + np.sin(angle) * a2)
    else:  # waypoints
        wps = [(float(wt), np.asarray(wp, dtype=float)) for wt, wp in p["waypoints"]]
        if t <= wps[0][0]:
            pos = wps[0][1]
        elif t >= wps[-1][0]:
            pos = wps[-1][1]
        else:
            for (t0, p0), (t1, p1) in zip(wps, wps[1:]):
                if t0 <= t <= t1:
                    frac = (t - t0) / (t1 - t0)
                    pos = p0 + frac * (p1 - p0)
                    break
    return ToolState(pos, np.asarray(script.shaft_dir, dtype=float), script.radius)
