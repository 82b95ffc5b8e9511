"""Scenario configuration files: YAML with nested sections.

Every key has a default matching the reported parameter values where one
exists; a config file only overrides what it names. See README for the full
schema.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from . import controller as ctl
from .errors import ConfigError
from .geometry import CameraIntrinsics
from .perception import LossConfig, OptimizerSettings
from .scenario import (
    DepthEvalConfig,
    HeatmapSpec,
    PerceptionConfig,
    ScenarioConfig,
)
from .scene import Scene, TrajectoryScript, tool_at
from .viewgen import ViewGenConfig


def _section(data: dict, name: str) -> dict:
    sec = data.get(name, {})
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return sec


def _intrinsics_from(sec: dict) -> CameraIntrinsics:
    try:
        return CameraIntrinsics(
            fx=float(sec.get("fx", 260.0)),
            fy=float(sec.get("fy", 260.0)),
            cx=float(sec.get("cx", 160.0)),
            cy=float(sec.get("cy", 120.0)),
            width=int(sec.get("width", 320)),
            height=int(sec.get("height", 240)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad intrinsics: {exc}") from exc


def _trajectory_from(sec: dict) -> TrajectoryScript:
    kind = sec.get("kind", "static")
    shaft_dir = tuple(sec.get("shaft_dir", (0.0, 0.0, 1.0)))
    radius = float(sec.get("radius", 2.5))
    params = {k: v for k, v in sec.items() if k not in ("kind", "shaft_dir", "radius")}
    if kind == "static":
        params.setdefault("position", (0.0, 0.0, 14.0))
    if kind == "waypoints" and "waypoints" in params:
        params["waypoints"] = [(float(t), tuple(p)) for t, p in params["waypoints"]]
    try:
        return TrajectoryScript(kind, params, shaft_dir=shaft_dir, radius=radius)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad trajectory: {exc}") from exc


def _scene_from(sec: dict, trajectory: TrajectoryScript) -> Scene:
    try:
        tool0 = tool_at(trajectory, 0.0)
        return Scene(
            plane_normal=np.asarray(sec.get("plane_normal", (0.0, 0.0, 1.0)), dtype=float),
            plane_offset=float(sec.get("plane_offset", 50.0)),
            tool=tool0,
            trocar=np.asarray(sec.get("trocar", (0.0, 0.0, -100.0)), dtype=float),
            texture_seed=int(sec.get("texture_seed", 7)),
            texture_scale=float(sec.get("texture_scale", 5.0)),
            tool_length=float(sec.get("tool_length", 80.0)),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad scene: {exc}") from exc


def _gains_from(sec: dict) -> ctl.ControlGains:
    try:
        return ctl.ControlGains(
            ks=np.asarray(sec.get("ks", (3e-3, 1.0, 1.0, 1.0)), dtype=float),
            kr=np.asarray(sec.get("kr", (0.5, 0.5)), dtype=float),
            k_theta=float(sec.get("k_theta", 1.0)),
            k_d=float(sec.get("k_d", 0.1)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad gains: {exc}") from exc


def _viewgen_from(sec: dict, k: CameraIntrinsics) -> ViewGenConfig:
    try:
        kw = {}
        if "w1" in sec:
            kw["w1"] = float(sec["w1"])
        if "w2" in sec:
            kw["w2"] = float(sec["w2"])
        if "percentile" in sec:
            kw["percentile"] = float(sec["percentile"])
        if "depth_interval" in sec:
            kw["depth_interval"] = tuple(float(x) for x in sec["depth_interval"])
        return ViewGenConfig.for_image(k.width, k.height, **kw)
    except ValueError as exc:
        raise ConfigError(f"bad viewgen: {exc}") from exc


def _heatmap_from(sec: dict, base_dir: Path) -> HeatmapSpec:
    kind = sec.get("kind", "gaussian")
    path = sec.get("path")
    if path is not None:
        path = str((base_dir / path) if not Path(path).is_absolute() else Path(path))
    try:
        return HeatmapSpec(
            kind=kind,
            center=tuple(sec.get("center", (0.5, 0.5))),
            sigma_frac=float(sec.get("sigma_frac", 0.10)),
            path=path,
            sigma_px=float(sec.get("sigma_px", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad heatmap: {exc}") from exc


def _perception_from(sec: dict) -> PerceptionConfig:
    try:
        return PerceptionConfig(
            mode=sec.get("mode", "oracle"),
            pixel_sigma=float(sec.get("pixel_sigma", 2.0)),
            depth_rel_sigma=float(sec.get("depth_rel_sigma", 0.08)),
            optimize_every=int(sec.get("optimize_every", 25)),
            optimize_baseline=tuple(sec.get("optimize_baseline", (1.0, 0.0, 0.0))),
            grid=tuple(sec.get("grid", (30, 40))),
        )
    except ValueError as exc:
        raise ConfigError(f"bad perception: {exc}") from exc


def scenario_from_dict(data: dict, base_dir: Path = Path(".")) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    k = _intrinsics_from(_section(data, "camera"))
    trajectory = _trajectory_from(_section(data, "trajectory"))
    limits = _section(data, "limits")
    try:
        return ScenarioConfig(
            name=str(data.get("name", "scenario")),
            intrinsics=k,
            scene=_scene_from(_section(data, "scene"), trajectory),
            trajectory=trajectory,
            gains=_gains_from(_section(data, "gains")),
            viewgen=_viewgen_from(_section(data, "viewgen"), k),
            heatmap=_heatmap_from(_section(data, "heatmap"), base_dir),
            perception=_perception_from(_section(data, "perception")),
            loss=LossConfig(),
            duration=float(data.get("duration", 10.0)),
            dt=float(data.get("dt", 0.01)),
            mrc=bool(data.get("mrc", False)),
            seed=int(data.get("seed", 0)),
            max_linear=float(limits.get("max_linear", 50.0)),
            max_angular=float(limits.get("max_angular", 1.0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path, seed_override: int | None = None) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    cfg = scenario_from_dict(data, base_dir=path.parent)
    if seed_override is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=seed_override)
    return cfg


def depth_eval_from_dict(data: dict) -> DepthEvalConfig:
    sec = _section(data, "depth_eval")
    k_sec = sec.get("camera", {})
    kw = {}
    if k_sec:
        kw["intrinsics"] = _intrinsics_from(k_sec)
    if "bands" in sec:
        kw["bands"] = tuple(tuple(float(x) for x in b) for b in sec["bands"])
    for key in ("placements_per_band", "texture_seed", "seed"):
        if key in sec:
            kw[key] = int(sec[key])
    for key in ("plane_offset", "tool_radius"):
        if key in sec:
            kw[key] = float(sec[key])
    if "baseline" in sec:
        kw["baseline"] = tuple(float(x) for x in sec["baseline"])
    if "grid" in sec:
        kw["grid"] = tuple(int(x) for x in sec["grid"])
    if "iterations" in sec or "learning_rate" in sec or "momentum" in sec:
        kw["settings"] = OptimizerSettings(
            iterations=int(sec.get("iterations", 400)),
            learning_rate=float(sec.get("learning_rate", 0.05)),
            momentum=float(sec.get("momentum", 0.9)),
        )
    try:
        return DepthEvalConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad depth_eval section: {exc}") from exc


def load_depth_eval(path, seed_override: int | None = None) -> DepthEvalConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    cfg = depth_eval_from_dict(data)
    if seed_override is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=seed_override)
    return cfg
