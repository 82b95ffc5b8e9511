"""Tool-tip perception: 2D localization from masks and scale-aware depth
recovery by direct minimization of the photometric reconstruction objective.

The loss stack (disparity-to-depth, pose-based warping, SSIM + L1 photometric
term, edge-aware smoothness, multi-scale sum) runs on torch tensors so the
coarse-grid optimizer gets exact gradients; all public functions take and
return numpy-backed types.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .errors import (
    DegenerateBaseline,
    DimensionMismatch,
    DisparityOutOfRange,
    EmptyInput,
    EmptyMask,
    NonPositiveTruth,
    NoValidPixels,
    SequenceTooShort,
    TexturelessInput,
)
from .geometry import CameraIntrinsics, Pose
from .images import DepthMap, DisparityMap, ImageBuffer, mask_to_bool

_DTYPE = torch.float64

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


@dataclass(frozen=True)
class LossConfig:
    """Weights and ranges of the depth objective."""

    alpha: float = 0.85           # SSIM weight inside the photometric term
    mu: float = 0.8               # reconstruction weight
    lam: float = 0.2              # smoothness weight
    scales: tuple = (1.0, 0.5, 0.25, 0.125)
    d_min: float = 1.0
    d_max: float = 100.0

    def __post_init__(self):
        if not (0 <= self.alpha <= 1 and 0 <= self.mu <= 1 and 0 <= self.lam <= 1):
            raise ValueError("alpha, mu, lam must lie in [0,1]")
        if not self.d_min < self.d_max:
            raise ValueError("d_min must be < d_max")
        if len(self.scales) == 0 or any(not (0 < s <= 1) for s in self.scales):
            raise ValueError("scales must be nonempty with entries in (0,1]")


@dataclass(frozen=True)
class ToolObservation:
    """Tool tip pixel, scale-aware tip depth (mm), and timestamp (s)."""

    tip_px: np.ndarray
    d_tool: float
    timestamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "tip_px", np.asarray(self.tip_px, dtype=float).reshape(2))


# ---------------------------------------------------------------------------
# Mask-derived observations


def mask_centroid(mask: ImageBuffer) -> np.ndarray:
    """Center of mass (u, v) of the set pixels of a binary mask."""
    m = mask_to_bool(mask)
    vs, us = np.nonzero(m)
    if us.size == 0:
        raise EmptyMask("mask has no set pixels")
    return np.array([us.mean(), vs.mean()])


def median_depth_in_mask(depth: DepthMap, mask: ImageBuffer) -> float:
    """Median depth over masked pixels (lower middle for even counts)."""
    m = mask_to_bool(mask)
    if m.shape != depth.values.shape:
        raise DimensionMismatch("mask and depth shapes differ")
    vals = depth.values[m]
    if vals.size == 0:
        raise EmptyMask("mask has no set pixels")
    mid = (vals.size - 1) // 2
    return float(np.partition(vals, mid)[mid])


def observe_tool(depth: DepthMap, mask: ImageBuffer, timestamp: float = 0.0) -> ToolObservation:
    return ToolObservation(mask_centroid(mask), median_depth_in_mask(depth, mask), timestamp)


# ---------------------------------------------------------------------------
# Disparity <-> depth


def _disp_to_depth_values(disp, d_min: float, d_max: float):
    return d_min * d_max / (d_min + (d_max - d_min) * disp)


def disparity_to_depth(disp: DisparityMap, cfg: LossConfig) -> DepthMap:
    v = disp.values
    if v.min() < 0 or v.max() > 1:
        raise DisparityOutOfRange("disparity outside [0,1]")
    return DepthMap(_disp_to_depth_values(v, cfg.d_min, cfg.d_max), cfg.d_min, cfg.d_max)


def depth_to_disparity(depth: DepthMap, cfg: LossConfig) -> DisparityMap:
    """Inverse of the disparity-to-depth map (exact on [d_min, d_max])."""
    d = depth.values
    disp = cfg.d_min * (cfg.d_max - d) / (d * (cfg.d_max - cfg.d_min))
    return DisparityMap(np.clip(disp, 0.0, 1.0))


# ---------------------------------------------------------------------------
# Torch core


def _to_t(a: np.ndarray) -> torch.Tensor:
    return torch.as_tensor(np.array(a, dtype=float), dtype=_DTYPE)


_TGRID_CACHE: dict = {}


def _pixel_grid_t(h: int, w: int):
    key = (h, w)
    cached = _TGRID_CACHE.get(key)
    if cached is None:
        vs, us = torch.meshgrid(
            torch.arange(h, dtype=_DTYPE), torch.arange(w, dtype=_DTYPE), indexing="ij"
        )
        cached = (us, vs)
        if len(_TGRID_CACHE) > 16:
            _TGRID_CACHE.clear()
        _TGRID_CACHE[key] = cached
    return cached


def _bilinear_sample(src: torch.Tensor, u: torch.Tensor, v: torch.Tensor):
    """Sample src (H,W) at float positions; returns (values, in-bounds mask)."""
    h, w = src.shape
    inb = (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)
    uc = u.clamp(0, w - 1)
    vc = v.clamp(0, h - 1)
    u0 = uc.floor().clamp(0, w - 2)
    v0 = vc.floor().clamp(0, h - 2)
    fu = uc - u0
    fv = vc - v0
    u0 = u0.long()
    v0 = v0.long()
    flat = src.reshape(-1)
    idx = v0 * w + u0
    s00 = flat[idx]
    s10 = flat[idx + 1]
    s01 = flat[idx + w]
    s11 = flat[idx + w + 1]
    top = s00 + fu * (s10 - s00)
    bot = s01 + fu * (s11 - s01)
    return top + fv * (bot - top), inb


def _warp_t(src: torch.Tensor, depth: torch.Tensor, rot: torch.Tensor,
            trans: torch.Tensor, k: CameraIntrinsics):
    """Backward warp: sample src at the reprojection of each target pixel."""
    us, vs = _pixel_grid_t(*depth.shape)
    x = (us - k.cx) / k.fx * depth
    y = (vs - k.cy) / k.fy * depth
    z = depth
    xp = rot[0, 0] * x + rot[0, 1] * y + rot[0, 2] * z + trans[0]
    yp = rot[1, 0] * x + rot[1, 1] * y + rot[1, 2] * z + trans[1]
    zp = rot[2, 0] * x + rot[2, 1] * y + rot[2, 2] * z + trans[2]
    in_front = zp > 1e-6
    zp_safe = torch.where(in_front, zp, torch.ones_like(zp))
    up = k.fx * xp / zp_safe + k.cx
    vp = k.fy * yp / zp_safe + k.cy
    sampled, inb = _bilinear_sample(src, up, vp)
    valid = in_front & inb
    return sampled, valid


# -- batched two-view pipeline (both warp directions in one graph) ----------


def _warp_batch(src2: torch.Tensor, depth2: torch.Tensor, rot2: torch.Tensor,
                tr2: torch.Tensor, k: CameraIntrinsics):
    """Warp a (2,H,W) source stack into its paired target views.

    Index i samples src2[i] at positions computed from depth2[i] under the
    relative pose (rot2[i], tr2[i]): target-frame to source-frame.
    """
    b, h, w = depth2.shape
    us, vs = _pixel_grid_t(h, w)
    x = (us - k.cx) / k.fx * depth2
    y = (vs - k.cy) / k.fy * depth2
    z = depth2
    r = rot2[:, :, :, None, None]
    t = tr2[:, :, None, None]
    xp = r[:, 0, 0] * x + r[:, 0, 1] * y + r[:, 0, 2] * z + t[:, 0]
    yp = r[:, 1, 0] * x + r[:, 1, 1] * y + r[:, 1, 2] * z + t[:, 1]
    zp = r[:, 2, 0] * x + r[:, 2, 1] * y + r[:, 2, 2] * z + t[:, 2]
    in_front = zp > 1e-6
    zp_safe = torch.where(in_front, zp, torch.ones_like(zp))
    up = k.fx * xp / zp_safe + k.cx
    vp = k.fy * yp / zp_safe + k.cy

    inb = (up >= 0) & (up <= w - 1) & (vp >= 0) & (vp <= h - 1)
    uc = up.clamp(0, w - 1)
    vc = vp.clamp(0, h - 1)
    u0 = uc.floor().clamp(0, w - 2)
    v0 = vc.floor().clamp(0, h - 2)
    fu = uc - u0
    fv = vc - v0
    idx = (v0 * w + u0).long().reshape(b, -1)
    flat = src2.reshape(b, -1)
    s00 = torch.gather(flat, 1, idx).reshape(b, h, w)
    s10 = torch.gather(flat, 1, idx + 1).reshape(b, h, w)
    s01 = torch.gather(flat, 1, idx + w).reshape(b, h, w)
    s11 = torch.gather(flat, 1, idx + w + 1).reshape(b, h, w)
    top = s00 + fu * (s10 - s00)
    bot = s01 + fu * (s11 - s01)
    return top + fv * (bot - top), in_front & inb


def _ssim_batch(a2: torch.Tensor, b2: torch.Tensor) -> torch.Tensor:
    x = F.pad(a2[:, None], (1, 1, 1, 1), mode="reflect")
    y = F.pad(b2[:, None], (1, 1, 1, 1), mode="reflect")

    def pool(t):
        return F.avg_pool2d(t, 3, stride=1)

    mu_x = pool(x)
    mu_y = pool(y)
    sigma_x = pool(x * x) - mu_x * mu_x
    sigma_y = pool(y * y) - mu_y * mu_y
    sigma_xy = pool(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + SSIM_C1) * (2 * sigma_xy + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (sigma_x + sigma_y + SSIM_C2)
    return (num / den)[:, 0].clamp(-1, 1)


def _photometric_batch(img2: torch.Tensor, warped2: torch.Tensor,
                       valid2: torch.Tensor, alpha: float) -> torch.Tensor:
    """Sum over the two views of the per-view masked photometric mean."""
    counts = valid2.reshape(2, -1).sum(dim=1)
    if bool((counts == 0).any()):
        raise NoValidPixels("no valid pixels to compare")
    per_pixel = alpha / 2.0 * (1.0 - _ssim_batch(img2, warped2)) \
        + (1.0 - alpha) * (img2 - warped2).abs()
    masked = torch.where(valid2, per_pixel, torch.zeros_like(per_pixel))
    return (masked.reshape(2, -1).sum(dim=1) / counts).sum()


def _smoothness_batch(d2: torch.Tensor, i2: torch.Tensor) -> torch.Tensor:
    dx_d = (d2[:, :, 1:] - d2[:, :, :-1]).abs()
    dy_d = (d2[:, 1:, :] - d2[:, :-1, :]).abs()
    dx_i = (i2[:, :, 1:] - i2[:, :, :-1]).abs()
    dy_i = (i2[:, 1:, :] - i2[:, :-1, :]).abs()
    return ((dx_d * torch.exp(-dx_i)).reshape(2, -1).mean(dim=1)
            + (dy_d * torch.exp(-dy_i)).reshape(2, -1).mean(dim=1)).sum()


def _down2_batch(t2: torch.Tensor) -> torch.Tensor:
    b, h, w = t2.shape
    t2 = t2[:, : h - h % 2, : w - w % 2]
    return F.avg_pool2d(t2[:, None], 2)[:, 0]


def _scale_levels(cfg: LossConfig):
    levels = []
    for s in cfg.scales:
        level = math.log2(1.0 / s)
        if abs(level - round(level)) > 1e-9:
            raise ValueError(f"scale {s} is not a power-of-two fraction")
        levels.append(int(round(level)))
    return levels


def _image_pyramid(img2: torch.Tensor, cfg: LossConfig):
    levels = max(_scale_levels(cfg))
    pyramid = [img2]
    for _ in range(levels):
        pyramid.append(_down2_batch(pyramid[-1]))
    return pyramid


def _relative_stack(pose_m: Pose, pose_n: Pose):
    """Rotations/translations for warping target m from n and target n from m."""
    r_mn, t_mn = _relative(pose_n, pose_m)
    r_nm, t_nm = _relative(pose_m, pose_n)
    return torch.stack([r_mn, r_nm]), torch.stack([t_mn, t_nm])


def _total_from_pyramids(img_pyr, disp2: torch.Tensor, rot2, tr2,
                         k: CameraIntrinsics, cfg: LossConfig) -> torch.Tensor:
    """Multi-scale objective given a precomputed image pyramid and the (2,H,W)
    full-resolution disparity stack."""
    total = None
    disp_level = disp2
    current_level = 0
    schedule = sorted(zip(cfg.scales, _scale_levels(cfg)), key=lambda p: p[1])
    for scale, level in schedule:
        while current_level < level:
            disp_level = _down2_batch(disp_level)
            current_level += 1
        img2 = img_pyr[level]
        ks = k.scaled(scale)
        depth2 = _disp_to_depth_values(disp_level, cfg.d_min, cfg.d_max)
        warped2, valid2 = _warp_batch(img2[[1, 0]], depth2, rot2, tr2, ks)
        l_re = _photometric_batch(img2, warped2, valid2, cfg.alpha)
        l_s = _smoothness_batch(disp_level, img2)
        term = cfg.mu * l_re + cfg.lam * l_s
        total = term if total is None else total + term
    return total


def _ssim_t(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Per-pixel SSIM with 3x3 average pooling (reflection-padded)."""
    x = a[None, None]
    y = b[None, None]
    x = F.pad(x, (1, 1, 1, 1), mode="reflect")
    y = F.pad(y, (1, 1, 1, 1), mode="reflect")

    def pool(t):
        return F.avg_pool2d(t, 3, stride=1)

    mu_x = pool(x)
    mu_y = pool(y)
    sigma_x = pool(x * x) - mu_x * mu_x
    sigma_y = pool(y * y) - mu_y * mu_y
    sigma_xy = pool(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + SSIM_C1) * (2 * sigma_xy + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (sigma_x + sigma_y + SSIM_C2)
    return (num / den)[0, 0].clamp(-1, 1)


def _photometric_t(img: torch.Tensor, warped: torch.Tensor,
                   valid: torch.Tensor, alpha: float) -> torch.Tensor:
    if not bool(valid.any()):
        raise NoValidPixels("no valid pixels to compare")
    per_pixel = alpha / 2.0 * (1.0 - _ssim_t(img, warped)) + (1.0 - alpha) * (img - warped).abs()
    return per_pixel[valid].mean()


def _smoothness_t(d: torch.Tensor, img: torch.Tensor) -> torch.Tensor:
    dx_d = (d[:, 1:] - d[:, :-1]).abs()
    dy_d = (d[1:, :] - d[:-1, :]).abs()
    dx_i = (img[:, 1:] - img[:, :-1]).abs()
    dy_i = (img[1:, :] - img[:-1, :]).abs()
    return (dx_d * torch.exp(-dx_i)).mean() + (dy_d * torch.exp(-dy_i)).mean()


def _relative(src_pose: Pose, target_pose: Pose):
    """(R, t) mapping target-frame coordinates into src-frame coordinates."""
    rel = src_pose.inverse().matrix() @ target_pose.matrix()
    return _to_t(rel[:3, :3]), _to_t(rel[:3, 3])


def _recon_t(i_m, i_n, depth_m, depth_n, pose_m: Pose, pose_n: Pose,
             k: CameraIntrinsics, alpha: float) -> torch.Tensor:
    r_mn, t_mn = _relative(pose_n, pose_m)  # m pixels -> n frame
    r_nm, t_nm = _relative(pose_m, pose_n)  # n pixels -> m frame
    warped_m, valid_m = _warp_t(i_n, depth_m, r_mn, t_mn, k)
    warped_n, valid_n = _warp_t(i_m, depth_n, r_nm, t_nm, k)
    return _photometric_t(i_m, warped_m, valid_m, alpha) + _photometric_t(
        i_n, warped_n, valid_n, alpha
    )


def _total_t(i_m, i_n, disp_m, disp_n, pose_m: Pose, pose_n: Pose,
             k: CameraIntrinsics, cfg: LossConfig) -> torch.Tensor:
    img_pyr = _image_pyramid(torch.stack([i_m, i_n]), cfg)
    rot2, tr2 = _relative_stack(pose_m, pose_n)
    return _total_from_pyramids(img_pyr, torch.stack([disp_m, disp_n]),
                                rot2, tr2, k, cfg)


# ---------------------------------------------------------------------------
# Public numpy-facing operations


def warp_image(src: ImageBuffer, depth_of_target: DepthMap,
               pose_target_to_src: Pose, k: CameraIntrinsics):
    """Warp src into the target view given the target's depth.

    pose_target_to_src maps target-frame coordinates to src-frame coordinates.
    Returns (warped ImageBuffer, validity bool array); invalid pixels are 0.
    """
    src_t = _to_t(src.gray())
    depth_t = _to_t(depth_of_target.values)
    rot = _to_t(pose_target_to_src.rotation)
    trans = _to_t(pose_target_to_src.translation)
    warped, valid = _warp_t(src_t, depth_t, rot, trans, k)
    w = warped.numpy()
    v = valid.numpy()
    return ImageBuffer(np.clip(np.where(v, w, 0.0), 0, 1)), v


def ssim(a: ImageBuffer, b: ImageBuffer) -> np.ndarray:
    if (a.height, a.width) != (b.height, b.width):
        raise DimensionMismatch("image sizes differ")
    return _ssim_t(_to_t(a.gray()), _to_t(b.gray())).numpy()


def photometric_loss(img: ImageBuffer, warped: ImageBuffer, validity,
                     cfg: LossConfig) -> float:
    if (img.height, img.width) != (warped.height, warped.width):
        raise DimensionMismatch("image sizes differ")
    valid = torch.as_tensor(np.asarray(validity, dtype=bool))
    return float(_photometric_t(_to_t(img.gray()), _to_t(warped.gray()), valid, cfg.alpha))


def reconstruction_loss(i_m: ImageBuffer, i_n: ImageBuffer, d_m: DepthMap,
                        d_n: DepthMap, pose_m: Pose, pose_n: Pose,
                        k: CameraIntrinsics, cfg: LossConfig) -> float:
    return float(
        _recon_t(
            _to_t(i_m.gray()), _to_t(i_n.gray()),
            _to_t(d_m.values), _to_t(d_n.values),
            pose_m, pose_n, k, cfg.alpha,
        )
    )


def smoothness_loss(d, img) -> float:
    """Edge-aware smoothness: |dx D| e^-|dx I| + |dy D| e^-|dy I| averaged with
    forward differences. `d` and `img` accept the grid types or raw arrays."""
    vals = d.values if hasattr(d, "values") else np.asarray(d, dtype=float)
    img_vals = img.gray() if isinstance(img, ImageBuffer) else np.asarray(img, dtype=float)
    if vals.shape != img_vals.shape:
        raise DimensionMismatch("grid and image sizes differ")
    return float(_smoothness_t(_to_t(vals), _to_t(img_vals)))


def total_loss(pair, disparities, poses, k: CameraIntrinsics, cfg: LossConfig) -> float:
    """Multi-scale objective for an image pair with per-image disparities."""
    i_m, i_n = pair
    disp_m, disp_n = disparities
    pose_m, pose_n = poses
    return float(
        _total_t(
            _to_t(i_m.gray()), _to_t(i_n.gray()),
            _to_t(disp_m.values), _to_t(disp_n.values),
            pose_m, pose_n, k, cfg,
        )
    )


def total_loss_gradient(pair, disparities, poses, k: CameraIntrinsics, cfg: LossConfig):
    """Gradient of total_loss w.r.t. both full-resolution disparity maps."""
    i_m, i_n = pair
    disp_m, disp_n = disparities
    pose_m, pose_n = poses
    dm = _to_t(disp_m.values).requires_grad_(True)
    dn = _to_t(disp_n.values).requires_grad_(True)
    loss = _total_t(_to_t(i_m.gray()), _to_t(i_n.gray()), dm, dn, pose_m, pose_n, k, cfg)
    gm, gn = torch.autograd.grad(loss, (dm, dn))
    return gm.numpy(), gn.numpy()


def hierarchical_pairs(n: int) -> set:
    """Index pairs of the hierarchical sampling scheme, as unordered (m < n).

    Level l pairs frames 2^l apart subject to m mod 2^(l-1) == 0; at level 0
    the modulus condition is vacuous.
    """
    if n < 2:
        raise SequenceTooShort(f"need at least 2 frames, got {n}")
    levels = int(math.floor(math.log2(n - 1))) if n > 2 else 0
    pairs = set()
    for level in range(levels + 1):
        gap = 2**level
        mod = 2 ** (level - 1) if level >= 1 else 1
        for m in range(n):
            for other in (m - gap, m + gap):
                if 0 <= other < n and m % mod == 0:
                    pairs.add((min(m, other), max(m, other)))
    return pairs


def image_gradient_energy(img: ImageBuffer) -> float:
    g = img.gray()
    gx = np.diff(g, axis=1)
    gy = np.diff(g, axis=0)
    return float((gx**2).mean() + (gy**2).mean())


@dataclass(frozen=True)
class OptimizerSettings:
    """Fixed schedule of the direct depth optimizer (deterministic runs)."""

    iterations: int = 400
    learning_rate: float = 0.05
    momentum: float = 0.9
    grid_shape: tuple = (30, 40)  # rows, cols of the coarse disparity grid


def estimate_depth_map(i_m: ImageBuffer, i_n: ImageBuffer, pose_m: Pose,
                       pose_n: Pose, k: CameraIntrinsics, cfg: LossConfig,
                       grid: tuple | None = None,
                       nominal_depth: float | None = None,
                       settings: OptimizerSettings = OptimizerSettings()):
    """Direct depth recovery: momentum gradient descent on coarse disparity
    grids (bilinearly upsampled to full resolution inside the objective).

    Returns (DepthMap for i_m, final total loss).
    """
    baseline = float(np.linalg.norm(pose_m.translation - pose_n.translation))
    if baseline <= 0.5:
        raise DegenerateBaseline(f"baseline {baseline:.3g} mm <= 0.5 mm")
    for img in (i_m, i_n):
        if image_gradient_energy(img) < 1e-4:
            raise TexturelessInput("image gradient energy below 1e-4")

    gh, gw = grid if grid is not None else settings.grid_shape
    h, w = i_m.height, i_m.width
    if nominal_depth is None:
        nominal_depth = math.sqrt(cfg.d_min * cfg.d_max)
    disp0 = cfg.d_min * (cfg.d_max - nominal_depth) / (nominal_depth * (cfg.d_max - cfg.d_min))
    disp0 = min(max(disp0, 0.0), 1.0)

    img_pyr = _image_pyramid(torch.stack([_to_t(i_m.gray()), _to_t(i_n.gray())]), cfg)
    rot2, tr2 = _relative_stack(pose_m, pose_n)
    grid_t = torch.full((2, gh, gw), disp0, dtype=_DTYPE, requires_grad=True)
    velocity = torch.zeros_like(grid_t)

    def upsample(g):
        return F.interpolate(g[:, None], size=(h, w), mode="bilinear",
                             align_corners=True)[:, 0]

    # fixed-step momentum orbits the minimum; keep the best iterate seen
    best_loss = math.inf
    best_grid = grid_t.detach().clone()
    for _ in range(settings.iterations):
        loss = _total_from_pyramids(img_pyr, upsample(grid_t), rot2, tr2, k, cfg)
        (gradient,) = torch.autograd.grad(loss, grid_t)
        with torch.no_grad():
            value = float(loss)
            if value < best_loss:
                best_loss = value
                best_grid = grid_t.detach().clone()
            velocity = settings.momentum * velocity - settings.learning_rate * gradient
            grid_t += velocity
            grid_t.clamp_(0.0, 1.0)

    with torch.no_grad():
        final = _total_from_pyramids(img_pyr, upsample(grid_t), rot2, tr2, k, cfg)
        if float(final) < best_loss:
            best_loss = float(final)
            best_grid = grid_t.detach().clone()
        disp_full = upsample(best_grid)[0].clamp(0.0, 1.0).numpy()
    depth = _disp_to_depth_values(disp_full, cfg.d_min, cfg.d_max)
    return DepthMap(depth, cfg.d_min, cfg.d_max), best_loss


# ---------------------------------------------------------------------------
# Pose-annotated sequence ingestion: a directory of PGM frames plus a pose
# file with one line per frame, 12 numbers (row-major 3x4 [R|t], t in mm).

POSE_FILE_NAME = "poses.txt"


def save_pose_file(path, poses) -> None:
    with open(path, "w") as f:
        for pose in poses:
            f.write(" ".join(repr(float(x)) for x in pose.as_row()) + "\n")


def load_pose_file(path) -> list:
    poses = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            nums = [float(x) for x in line.split()]
            if len(nums) != 12:
                raise ValueError(f"pose line needs 12 numbers, got {len(nums)}")
            m = np.array(nums).reshape(3, 4)
            poses.append(Pose(m[:, :3], m[:, 3]))
    return poses


def save_sequence(directory, images, poses) -> None:
    from pathlib import Path

    from .images import save_pnm

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if len(images) != len(poses):
        raise DimensionMismatch("image/pose counts differ")
    for i, img in enumerate(images):
        save_pnm(directory / f"frame_{i:04d}.pgm", img)
    save_pose_file(directory / POSE_FILE_NAME, poses)


def load_sequence(directory):
    """Returns (images, poses) for a frame directory; frames sorted by name."""
    from pathlib import Path

    from .images import load_pnm

    directory = Path(directory)
    poses = load_pose_file(directory / POSE_FILE_NAME)
    frames = sorted(directory.glob("frame_*.pgm"))
    if len(frames) != len(poses):
        raise DimensionMismatch(
            f"{len(frames)} frames but {len(poses)} poses in {directory}"
        )
    return [load_pnm(p) for p in frames], poses


def depth_metrics(estimated, truth):
    """(Abs Rel in percent, RMSE in mm) of depth estimates vs ground truth."""
    est = np.asarray(estimated, dtype=float).reshape(-1)
    gt = np.asarray(truth, dtype=float).reshape(-1)
    if est.size == 0 or gt.size == 0:
        raise EmptyInput("empty depth arrays")
    if est.size != gt.size:
        raise DimensionMismatch("length mismatch")
    if np.any(gt <= 0):
        raise NonPositiveTruth("ground-truth depths must be positive")
    abs_rel = float(np.mean(np.abs(est - gt) / gt) * 100.0)
    rmse = float(np.sqrt(np.mean((est - gt) ** 2)))
    return abs_rel, rmse
