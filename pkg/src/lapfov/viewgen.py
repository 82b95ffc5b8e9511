"""Domain-knowledge heatmap and the optimal 2D/depth view-target generator.

The heatmap encodes where experts keep the tool tip; the target generator
trades off heatmap value against moving cost and clamps the tool depth into
a preferred working interval.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve

from .errors import EmptyCandidateSet, NoPointsInBounds
from .images import ImageBuffer, load_heatmap_grid, save_heatmap_grid


@dataclass(frozen=True)
class Heatmap:
    """Nonnegative preference weights over image pixels, indexed [v, u]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        if v.ndim != 2:
            raise ValueError("heatmap must be 2D")
        if not np.all(np.isfinite(v)) or v.min() < 0:
            raise ValueError("heatmap values must be finite and >= 0")
        if v.max() <= 0:
            raise ValueError("heatmap needs at least one positive value")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def save(self, path) -> None:
        save_heatmap_grid(path, self.values)

    @staticmethod
    def load(path) -> "Heatmap":
        return Heatmap(load_heatmap_grid(path))

    def to_image(self) -> ImageBuffer:
        return ImageBuffer(self.values / self.values.max())


@dataclass(frozen=True)
class ViewGenConfig:
    """Reward weights, percentile cut, and preferred depth interval (mm)."""

    w1: float = 1.0
    w2: float = -1.0 / 400.0  # negative: distance is a moving cost
    percentile: float = 0.95
    depth_interval: tuple = (8.0, 12.0)

    def __post_init__(self):
        if self.w1 <= 0:
            raise ValueError("w1 must be positive")
        if self.w2 >= 0:
            raise ValueError("w2 must be negative (moving cost)")
        if not 0 < self.percentile < 1:
            raise ValueError("percentile must lie in (0,1)")
        lo, hi = self.depth_interval
        if not 0 < lo < hi:
            raise ValueError("bad depth interval")

    @staticmethod
    def for_image(width: int, height: int, **kw) -> "ViewGenConfig":
        """Defaults with the moving-cost weight scaled to the image diagonal."""
        diag = float(np.hypot(width, height))
        kw.setdefault("w2", -1.0 / diag)
        return ViewGenConfig(**kw)


@dataclass(frozen=True)
class ViewTarget:
    target_px: np.ndarray
    d_target: float

    def __post_init__(self):
        object.__setattr__(self, "target_px", np.asarray(self.target_px, dtype=float).reshape(2))


def build_heatmap(points, size, sigma: float = 0.0) -> Heatmap:
    """Histogram of tracked tip points smoothed by a truncated Gaussian.

    `points` is a sequence of (u, v) pixel pairs; `size` is (width, height).
    Out-of-bounds points are dropped. The kernel radius is ceil(3*sigma);
    the result is normalized to peak 1.
    """
    width, height = int(size[0]), int(size[1])
    pts = np.asarray(list(points), dtype=float).reshape(-1, 2)
    hist = np.zeros((height, width))
    kept = 0
    for u, v in pts:
        iu = int(round(u))
        iv = int(round(v))
        if 0 <= iu < width and 0 <= iv < height:
            hist[iv, iu] += 1.0
            kept += 1
    if kept == 0:
        raise NoPointsInBounds("no tracked points fall inside the image")
    if sigma > 0:
        radius = int(np.ceil(3.0 * sigma))
        xs = np.arange(-radius, radius + 1, dtype=float)
        kernel1d = np.exp(-(xs**2) / (2.0 * sigma**2))
        hist = convolve(hist, kernel1d[None, :], mode="constant", cval=0.0)
        hist = convolve(hist, kernel1d[:, None], mode="constant", cval=0.0)
    return Heatmap(hist / hist.max())


def load_tracked_points(path) -> np.ndarray:
    """Read a 'u v' per-line text file of tracked tip pixels."""
    pts = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            u, v = line.split()[:2]
            pts.append((float(u), float(v)))
    return np.asarray(pts, dtype=float).reshape(-1, 2)


def synthesize_tracked_points(size, n: int, seed: int, modes=None) -> np.ndarray:
    """Gaussian-mixture stand-in for tracked surgical-tool points."""
    width, height = int(size[0]), int(size[1])
    rng = np.random.default_rng(seed)
    if modes is None:
        modes = [((0.55 * width, 0.45 * height), 0.08 * (width + height))]
    pts = []
    for i in range(n):
        (cx, cy), s = modes[i % len(modes)]
        pts.append((rng.normal(cx, s), rng.normal(cy, s)))
    pts = np.asarray(pts)
    pts[:, 0] = np.clip(pts[:, 0], 0, width - 1)
    pts[:, 1] = np.clip(pts[:, 1], 0, height - 1)
    return pts


_GRID_CACHE: dict = {}


def _pixel_grid(width: int, height: int):
    key = (width, height)
    cached = _GRID_CACHE.get(key)
    if cached is None:
        uu, vv = np.meshgrid(np.arange(width, dtype=float),
                             np.arange(height, dtype=float))
        cached = (uu, vv)
        if len(_GRID_CACHE) > 8:
            _GRID_CACHE.clear()
        _GRID_CACHE[key] = cached
    return cached


def reward_map(dm: Heatmap, p_t, cfg: ViewGenConfig) -> np.ndarray:
    """Per-pixel reward: w1 * heatmap + w2 * pixel distance to the tip."""
    p = np.asarray(p_t, dtype=float).reshape(2)
    if not (0 <= p[0] < dm.width and 0 <= p[1] < dm.height):
        raise ValueError("tip pixel outside image bounds")
    uu, vv = _pixel_grid(dm.width, dm.height)
    dist = np.hypot(uu - p[0], vv - p[1])
    return cfg.w1 * dm.values + cfg.w2 * dist


def _nearest_rank_percentile(values: np.ndarray, q: float) -> float:
    """Nearest-rank percentile: value at ceil(q*N) in the ascending order."""
    flat = values.reshape(-1)
    rank = int(np.ceil(q * flat.size))
    rank = min(max(rank, 1), flat.size)
    return float(np.partition(flat, rank - 1)[rank - 1])


def select_target(reward: np.ndarray, p_t, cfg: ViewGenConfig) -> np.ndarray:
    """Closest pixel to the tip among those with reward above the percentile
    threshold; ties broken by smallest row-major index.

    When the tip already lies in the above-threshold set (its containing
    pixel qualifies), the target is the tip itself: the distance-0 minimizer,
    which is what keeps the camera still over an already-good view. A
    constant reward field (empty strict-threshold set) also falls back to
    the tip.
    """
    r = np.asarray(reward, dtype=float)
    if r.size == 0:
        raise EmptyCandidateSet("empty reward field")
    p = np.asarray(p_t, dtype=float).reshape(2)
    threshold = _nearest_rank_percentile(r, cfg.percentile)
    h, w = r.shape
    pu = min(max(int(round(p[0])), 0), w - 1)
    pv = min(max(int(round(p[1])), 0), h - 1)
    if r[pv, pu] > threshold:
        return p.copy()
    vs, us = np.nonzero(r > threshold)
    if us.size == 0:
        return p.copy()
    dist2 = (us - p[0]) ** 2 + (vs - p[1]) ** 2
    best = int(np.argmin(dist2))  # np.argmin takes the first (row-major) minimum
    return np.array([float(us[best]), float(vs[best])])


def target_depth(d_tool: float, cfg: ViewGenConfig):
    """Clamp the tool depth into the preferred interval; returns (d_target, e_d)."""
    lo, hi = cfg.depth_interval
    d_target = min(max(d_tool, lo), hi)
    return d_target, d_tool - d_target


def view_target(dm: Heatmap, p_t, d_tool: float, cfg: ViewGenConfig) -> ViewTarget:
    r = reward_map(dm, p_t, cfg)
    tgt = select_target(r, p_t, cfg)
    d_target, _ = target_depth(d_tool, cfg)
    return ViewTarget(tgt, d_target)
