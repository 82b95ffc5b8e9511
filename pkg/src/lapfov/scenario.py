"""Deterministic closed-loop simulation: scene rendering, tool perception,
view-target generation, MRC, and the null-space controller stepped together;
plus the depth-estimation evaluation sweep.

The world frame equals the initial camera frame; the trocar sits behind the
camera on its initial optical axis unless configured otherwise.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import controller as ctl
from .errors import EmptyMask, InvariantViolation, LapfovError
from .geometry import CameraIntrinsics, Pose, rotation_log
from .images import DepthMap, ImageBuffer
from .mrc import NlsReference, _phi_batch, solve_theta_star
from .perception import (
    LossConfig,
    OptimizerSettings,
    estimate_depth_map,
    mask_centroid,
    median_depth_in_mask,
)
from .scene import Scene, ToolState, TrajectoryScript, render, render_geometry, tool_at
from .viewgen import Heatmap, ViewGenConfig, build_heatmap, reward_map, select_target, target_depth

RCM_ABORT_MM = 5.0
DRAG_RATE_MM_S = 50.0


@dataclass(frozen=True)
class HeatmapSpec:
    """Where the domain-knowledge heatmap comes from.

    kinds: gaussian (center fractions + sigma fraction), uniform,
    file (HMAP grid), points (tracked-point text file + sigma px).
    """

    kind: str = "gaussian"
    center: tuple = (0.5, 0.5)
    sigma_frac: float = 0.10
    path: str | None = None
    sigma_px: float = 0.0

    def build(self, width: int, height: int) -> Heatmap:
        if self.kind == "gaussian":
            cu = self.center[0] * (width - 1)
            cv = self.center[1] * (height - 1)
            sigma = max(1e-6, self.sigma_frac * math.hypot(width, height))
            us = np.arange(width, dtype=float)
            vs = np.arange(height, dtype=float)
            uu, vv = np.meshgrid(us, vs)
            vals = np.exp(-((uu - cu) ** 2 + (vv - cv) ** 2) / (2.0 * sigma**2))
            return Heatmap(vals / vals.max())
        if self.kind == "uniform":
            return Heatmap(np.ones((height, width)))
        if self.kind == "file":
            return Heatmap.load(self.path)
        if self.kind == "points":
            from .viewgen import load_tracked_points

            pts = load_tracked_points(self.path)
            return build_heatmap(pts, (width, height), self.sigma_px)
        raise ValueError(f"unknown heatmap kind {self.kind!r}")


@dataclass(frozen=True)
class PerceptionConfig:
    """oracle reads ground truth; noisy perturbs it; optimized runs the
    photometric depth optimizer on a rendered pair every `optimize_every`
    steps."""

    mode: str = "oracle"
    pixel_sigma: float = 2.0
    depth_rel_sigma: float = 0.08
    optimize_every: int = 25
    optimize_baseline: tuple = (1.0, 0.0, 0.0)
    grid: tuple = (30, 40)

    def __post_init__(self):
        if self.mode not in ("oracle", "noisy", "optimized"):
            raise ValueError(f"unknown perception mode {self.mode!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    intrinsics: CameraIntrinsics = field(
        default_factory=lambda: CameraIntrinsics(260.0, 260.0, 160.0, 120.0, 320, 240)
    )
    scene: Scene = field(default_factory=Scene)
    trajectory: TrajectoryScript = field(
        default_factory=lambda: TrajectoryScript("static", {"position": (0.0, 0.0, 14.0)},
                                                 shaft_dir=(0.0, 0.0, 1.0))
    )
    gains: ctl.ControlGains = field(default_factory=ctl.ControlGains)
    viewgen: ViewGenConfig = field(default_factory=lambda: ViewGenConfig.for_image(320, 240))
    heatmap: HeatmapSpec = field(default_factory=HeatmapSpec)
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    duration: float = 10.0
    dt: float = 0.01
    mrc: bool = False
    seed: int = 0
    max_linear: float = 50.0
    max_angular: float = 1.0
    # freeze the view target at its first value: pure setpoint regulation,
    # the setting under which the Lyapunov argument applies
    hold_target: bool = False

    def __post_init__(self):
        if self.dt <= 0 or self.duration < self.dt:
            raise ValueError("need dt > 0 and duration >= dt")


@dataclass(frozen=True)
class StepRecord:
    t: float
    e_p: np.ndarray
    e_d: float
    e_r: np.ndarray
    theta_star: float
    lyapunov: float
    command: np.ndarray      # vx vy vz wx wy wz (RCM frame)
    pose_row: np.ndarray     # row-major 3x4 [R|t]
    misorientation: float    # external roll vs NLS (rad)
    phi_zero: float          # |phi| before MRC correction
    phi_star: float          # |phi| at theta*
    d_tool: float
    tip_px: np.ndarray
    target_px: np.ndarray
    flags: str = ""


CSV_COLUMNS = (
    ["t", "e_p_x", "e_p_y", "e_d", "e_r_x", "e_r_y", "theta_star", "V"]
    + ["cmd_vx", "cmd_vy", "cmd_vz", "cmd_wx", "cmd_wy", "cmd_wz"]
    + [f"pose_{i}" for i in range(12)]
    + ["misorientation", "phi_zero", "phi_star", "d_tool",
       "tip_u", "tip_v", "target_u", "target_v", "flags"]
)


@dataclass
class RunTrace:
    name: str
    seed: int
    dt: float
    records: list = field(default_factory=list)

    def summary(self) -> dict:
        recs = self.records
        n = len(recs)
        tail = recs[int(math.ceil(0.7 * n)):] if n else []
        ep_norm = [float(np.linalg.norm(r.e_p)) for r in recs]
        v_seq = [r.lyapunov for r in recs]
        floor = v_seq[0] * 1e-3 if v_seq else 0.0
        v_violations = sum(
            1 for a, b in zip(v_seq, v_seq[1:]) if b >= a and a > floor
        )
        settle_time = None
        for i in range(n):
            if all(e < 5.0 for e in ep_norm[i:]):
                settle_time = recs[i].t
                break
        return {
            "steps": n,
            "duration": recs[-1].t + self.dt if recs else 0.0,
            "seed": self.seed,
            "max_rcm_error_mm": max((float(np.linalg.norm(r.e_r)) for r in recs), default=0.0),
            "settled_max_e_p_px": max((float(np.linalg.norm(r.e_p)) for r in tail), default=0.0),
            "settled_max_e_d_mm": max((abs(r.e_d) for r in tail), default=0.0),
            "peak_misorientation_deg": max(
                (abs(math.degrees(r.misorientation)) for r in recs), default=0.0
            ),
            "lyapunov_violations_above_floor": v_violations,
            "settle_time_s": settle_time,
            "final_e_p_px": ep_norm[-1] if recs else 0.0,
            "final_e_d_mm": recs[-1].e_d if recs else 0.0,
        }

    def to_csv(self, path) -> None:
        def fmt(x) -> str:
            return repr(float(x))

        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_COLUMNS)
            for r in self.records:
                row = (
                    [fmt(r.t)]
                    + [fmt(x) for x in r.e_p]
                    + [fmt(r.e_d)]
                    + [fmt(x) for x in r.e_r]
                    + [fmt(r.theta_star), fmt(r.lyapunov)]
                    + [fmt(x) for x in r.command]
                    + [fmt(x) for x in r.pose_row]
                    + [fmt(r.misorientation), fmt(r.phi_zero), fmt(r.phi_star),
                       fmt(r.d_tool)]
                    + [fmt(x) for x in r.tip_px]
                    + [fmt(x) for x in r.target_px]
                    + [r.flags]
                )
                writer.writerow(row)

    def summary_text(self) -> str:
        lines = [f"scenario: {self.name}"]
        for key, val in self.summary().items():
            lines.append(f"{key}: {val}")
        return "\n".join(lines) + "\n"


def misorientation_of(camera: Pose, reference) -> float:
    """External misorientation metric: z component of the rotation vector of
    the reference-to-camera relative rotation (rad)."""
    ref_pose = reference.pose if isinstance(reference, NlsReference) else reference
    return float(rotation_log(ref_pose.rotation.T @ camera.rotation)[2])


class SimulationLoop:
    """Owns the closed-loop state; step() advances one control period.

    Deterministic given the config seed. The tool follows the scripted
    trajectory unless a drag target is set (live sessions), in which case it
    approaches the target at a bounded rate.
    """

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.k = config.intrinsics
        self.rng = np.random.default_rng(config.seed)
        self.camera = Pose()
        self.heatmap = config.heatmap.build(self.k.width, self.k.height)
        tool0 = tool_at(config.trajectory, 0.0)
        self.scene = config.scene.with_tool(tool0)
        self.tool_position = tool0.tip.copy()
        self.reference = NlsReference(self.camera, config.scene.plane_offset)
        self.t = 0.0
        self.step_index = 0
        self.drag_target: np.ndarray | None = None
        self.paused = False
        self.mrc_enabled = config.mrc
        self.gains = config.gains
        self._held_depth: float | None = None
        self._last_obs: tuple | None = None
        self._held_target: np.ndarray | None = None

    # -- live-session inputs ------------------------------------------------

    def set_drag_target(self, world_point) -> None:
        self.drag_target = np.asarray(world_point, dtype=float).reshape(3)

    def drag_pixel_to_world(self, px) -> np.ndarray:
        """A drag on the image: keep the tool at its current camera depth."""
        if self._last_obs is not None:
            depth = self._last_obs[1]
        else:
            rel = self.camera.rotation.T @ (self.tool_position - self.camera.translation)
            depth = float(rel[2])
        u, v = float(px[0]), float(px[1])
        ray = np.array([(u - self.k.cx) / self.k.fx, (v - self.k.cy) / self.k.fy, 1.0])
        return self.camera.transform(ray * depth)

    def clear_drag(self) -> None:
        self.drag_target = None

    # -- stepping -----------------------------------------------------------

    def _advance_tool(self) -> ToolState:
        traj = self.config.trajectory
        if self.drag_target is None:
            state = tool_at(traj, self.t)
            self.tool_position = state.tip.copy()
            return state
        delta = self.drag_target - self.tool_position
        dist = float(np.linalg.norm(delta))
        max_step = DRAG_RATE_MM_S * self.config.dt
        if dist > max_step:
            self.tool_position = self.tool_position + delta / dist * max_step
        else:
            self.tool_position = self.drag_target.copy()
        return ToolState(self.tool_position,
                         np.asarray(traj.shaft_dir, dtype=float), traj.radius)

    def _observe(self, depth_vals: np.ndarray, tip_mask: np.ndarray):
        mode = self.config.perception
        vs, us = np.nonzero(tip_mask)
        if us.size == 0:
            raise EmptyMask("tool tip not visible")
        p_t = np.array([us.mean(), vs.mean()])
        masked = depth_vals[tip_mask]
        mid = (masked.size - 1) // 2
        d_true = float(np.partition(masked, mid)[mid])

        if mode.mode == "oracle":
            return p_t, d_true
        if mode.mode == "noisy":
            p = p_t + self.rng.normal(0.0, mode.pixel_sigma, 2)
            p[0] = min(max(p[0], 0.0), self.k.width - 1)
            p[1] = min(max(p[1], 0.0), self.k.height - 1)
            d = d_true * (1.0 + self.rng.normal(0.0, mode.depth_rel_sigma))
            d = min(max(d, self.config.loss.d_min), self.config.loss.d_max)
            return p, d
        # optimized: run the photometric optimizer periodically, hold between
        if self._held_depth is None or self.step_index % mode.optimize_every == 0:
            cam_m = self.camera
            cam_n = Pose(
                self.camera.rotation,
                self.camera.translation + self.camera.rotation @ np.asarray(
                    mode.optimize_baseline, dtype=float),
            )
            img_m, _, mask_m = render(self.scene, cam_m, self.k)
            img_n, _, _ = render(self.scene, cam_n, self.k)
            est, _ = estimate_depth_map(
                img_m, img_n, cam_m, cam_n, self.k, self.config.loss,
                grid=mode.grid,
                nominal_depth=math.sqrt(max(d_true, 2.0) * self.config.scene.plane_offset),
            )
            self._held_depth = median_depth_in_mask(est, mask_m)
        return p_t, self._held_depth

    def step(self) -> StepRecord:
        cfg = self.config
        tool = self._advance_tool()
        self.scene = self.scene.with_tool(tool)

        depth_vals, tip_mask, _, _ = render_geometry(self.scene, self.camera, self.k)

        flags = ""
        try:
            p_t, d_tool = self._observe(depth_vals, tip_mask)
            self._last_obs = (p_t, d_tool)
        except EmptyMask:
            flags = "empty_mask"
            if self._last_obs is None:
                raise InvariantViolation("tool never visible")
            p_t, d_tool = self._last_obs

        if cfg.hold_target and self._held_target is not None:
            target = self._held_target
        else:
            reward = reward_map(self.heatmap, p_t, cfg.viewgen)
            target = select_target(reward, p_t, cfg.viewgen)
            if cfg.hold_target:
                self._held_target = target
        _, e_d = target_depth(d_tool, cfg.viewgen)
        e_p = p_t - target

        theta_star = 0.0
        phi_zero = 0.0
        phi_star = 0.0
        if self.mrc_enabled:
            theta_star = solve_theta_star(self.reference, self.camera, self.k,
                                          p_t, anchor_depth=d_tool)
            phi_zero = float(_phi_batch(self.reference, self.camera,
                                        np.array([0.0]), self.k, p_t, d_tool)[0])
            phi_star = float(_phi_batch(self.reference, self.camera,
                                        np.array([theta_star]), self.k, p_t, d_tool)[0])

        rcm = ctl.RcmState.from_camera(self.camera, cfg.scene.trocar)
        e_r = ctl.rcm_error(rcm, self.camera)
        errors = ctl.TaskErrors(e_p, e_d, e_r, theta_star)
        jac = ctl.task_jacobians(rcm, p_t, d_tool, self.k)
        if flags == "empty_mask":
            cmd = ctl.ControlCommand.zero()
        else:
            cmd = ctl.null_space_law(errors, jac, self.gains)
            if cmd.ill_conditioned:
                flags = "ill_conditioned"
        cmd = ctl.apply_limits(cmd, cfg.max_linear, cfg.max_angular)

        record = StepRecord(
            t=self.t,
            e_p=e_p,
            e_d=e_d,
            e_r=e_r,
            theta_star=theta_star,
            lyapunov=ctl.lyapunov(errors),
            command=np.hstack([cmd.linear, cmd.angular]),
            pose_row=self.camera.as_row(),
            misorientation=misorientation_of(self.camera, self.reference),
            phi_zero=phi_zero,
            phi_star=phi_star,
            d_tool=d_tool,
            tip_px=p_t,
            target_px=target,
            flags=flags,
        )

        self.camera = ctl.integrate_camera(self.camera, cfg.scene.trocar, cmd, cfg.dt)
        if float(np.linalg.norm(ctl.rcm_error(
                ctl.RcmState.from_camera(self.camera, cfg.scene.trocar), self.camera))) > RCM_ABORT_MM:
            raise InvariantViolation("RCM deviation exceeded abort threshold")

        self.t += cfg.dt
        self.step_index += 1
        return record


def run(config: ScenarioConfig) -> RunTrace:
    """Execute a scenario to completion; deterministic given the seed."""
    loop = SimulationLoop(config)
    trace = RunTrace(config.name, config.seed, config.dt)
    steps = int(round(config.duration / config.dt))
    for _ in range(steps):
        trace.records.append(loop.step())
    return trace


# ---------------------------------------------------------------------------
# Depth-estimation evaluation sweep


@dataclass(frozen=True)
class DepthEvalConfig:
    """Sweep settings; the evaluation scene runs at reduced resolution so the
    400-iteration optimizer stays within the time budget on small machines."""

    intrinsics: CameraIntrinsics = field(
        default_factory=lambda: CameraIntrinsics(130.0, 130.0, 80.0, 60.0, 160, 120)
    )
    loss: LossConfig = field(default_factory=LossConfig)
    bands: tuple = ((4.0, 8.0), (8.0, 12.0), (12.0, 16.0))
    placements_per_band: int = 2
    plane_offset: float = 30.0
    baseline: tuple = (0.8, 0.4, 0.0)
    tool_radius: float = 2.5
    texture_seed: int = 11
    grid: tuple = (15, 20)
    settings: OptimizerSettings = field(default_factory=OptimizerSettings)
    seed: int = 3


@dataclass(frozen=True)
class DepthBandRow:
    band: tuple
    abs_rel_pct: float
    rmse_mm: float
    seconds_per_frame: float
    pixels: int
    placements: int
    flag: str = ""


def depth_eval(cfg: DepthEvalConfig) -> list:
    """Table of per-band tool-depth accuracy of the direct optimizer.

    Follows the physical evaluation protocol: per placement, the tool depth is
    the median estimated depth over the tip mask, compared against the ground
    truth median of the same region; Abs Rel / RMSE aggregate placements per
    band, plus an overall row.
    """
    from .perception import depth_metrics

    rng = np.random.default_rng(cfg.seed)
    rows = []
    all_est: list = []
    all_gt: list = []
    total_time = 0.0
    total_placements = 0

    def masked_median(values: np.ndarray, mask: np.ndarray) -> float:
        vals = values[mask]
        mid = (vals.size - 1) // 2
        return float(np.partition(vals, mid)[mid])

    for band in cfg.bands:
        lo, hi = band
        est_vals: list = []
        gt_vals: list = []
        band_time = 0.0
        band_pixels = 0
        placements = 0
        for i in range(cfg.placements_per_band):
            z = lo + (i + 0.5) / cfg.placements_per_band * (hi - lo)
            if z <= cfg.loss.d_min:
                continue
            lateral = rng.uniform(-0.08, 0.08, 2) * z
            tool = ToolState(
                np.array([lateral[0], lateral[1], z]),
                np.array([0.35, -0.2, 1.0]),
                cfg.tool_radius,
            )
            scene = Scene(
                plane_offset=cfg.plane_offset,
                tool=tool,
                texture_seed=cfg.texture_seed + i,
                trocar=np.array([0.0, 0.0, -100.0]),
            )
            cam_m = Pose()
            cam_n = Pose(np.eye(3), np.asarray(cfg.baseline, dtype=float))
            img_m, depth_m, mask_m = render(scene, cam_m, cfg.intrinsics)
            img_n, _, _ = render(scene, cam_n, cfg.intrinsics)
            mask = mask_m.gray() > 0.5
            if mask.sum() == 0:
                continue
            nominal = math.sqrt(0.5 * (lo + hi) * cfg.plane_offset)
            start = time.perf_counter()
            est, _ = estimate_depth_map(
                img_m, img_n, cam_m, cam_n, cfg.intrinsics, cfg.loss,
                grid=cfg.grid, nominal_depth=nominal, settings=cfg.settings,
            )
            band_time += time.perf_counter() - start
            est_vals.append(masked_median(est.values, mask))
            gt_vals.append(masked_median(depth_m.values, mask))
            band_pixels += int(mask.sum())
            placements += 1
        if placements == 0:
            rows.append(DepthBandRow(band, float("nan"), float("nan"), 0.0, 0, 0,
                                     flag="empty-band"))
            continue
        abs_rel, rmse = depth_metrics(est_vals, gt_vals)
        rows.append(DepthBandRow(band, abs_rel, rmse, band_time / placements,
                                 band_pixels, placements))
        all_est.extend(est_vals)
        all_gt.extend(gt_vals)
        total_time += band_time
        total_placements += placements

    if all_est:
        abs_rel, rmse = depth_metrics(all_est, all_gt)
        overall_band = (cfg.bands[0][0], cfg.bands[-1][1])
        rows.append(DepthBandRow(overall_band, abs_rel, rmse,
                                 total_time / max(total_placements, 1),
                                 sum(r.pixels for r in rows if not r.flag),
                                 total_placements))
    return rows


def depth_eval_text(rows) -> str:
    lines = ["band_lo_mm band_hi_mm abs_rel_pct rmse_mm sec_per_frame pixels placements flag"]
    for r in rows:
        lines.append(
            f"{r.band[0]:g} {r.band[1]:g} {r.abs_rel_pct:.4f} {r.rmse_mm:.4f} "
            f"{r.seconds_per_frame:.3f} {r.pixels} {r.placements} {r.flag or '-'}"
        )
    return "\n".join(lines) + "\n"
