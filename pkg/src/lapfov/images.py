"""Dense pixel grids (intensity, depth, disparity) and their file formats.

Images serialize as plain PGM (P2/P5, one channel) or PPM (P3/P6, three
channels) with maxval 255. Float grids (depth, heatmaps) use a small headered
binary format: 4-byte magic, u32 width, u32 height (little endian), then
row-major little-endian float32 values.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

D_MIN_DEFAULT = 1.0
D_MAX_DEFAULT = 100.0

DEPTH_MAGIC = b"DPTH"
HEATMAP_MAGIC = b"HMAP"


@dataclass(frozen=True)
class ImageBuffer:
    """Per-pixel values in [0,1]; data shape (h, w) or (h, w, 3)."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        if d.ndim == 3 and d.shape[2] == 1:
            d = d[:, :, 0]
        if d.ndim not in (2, 3) or (d.ndim == 3 and d.shape[2] != 3):
            raise ValueError(f"bad image shape {d.shape}")
        if not np.all(np.isfinite(d)) or d.min() < 0 or d.max() > 1:
            raise ValueError("image samples must be finite and within [0,1]")
        d = d.copy()
        d.flags.writeable = False
        object.__setattr__(self, "data", d)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    def gray(self) -> np.ndarray:
        """(h, w) float array; channel mean for color images."""
        return self.data if self.channels == 1 else self.data.mean(axis=2)


@dataclass(frozen=True)
class DepthMap:
    """Metric depth in mm along the camera z axis."""

    values: np.ndarray
    d_min: float = D_MIN_DEFAULT
    d_max: float = D_MAX_DEFAULT

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        if v.ndim != 2:
            raise ValueError("depth map must be 2D")
        if not np.all(np.isfinite(v)):
            raise ValueError("depth map must be finite")
        if v.min() < self.d_min - 1e-9 or v.max() > self.d_max + 1e-9:
            raise ValueError(
                f"depths [{v.min():.3g}, {v.max():.3g}] outside "
                f"[{self.d_min}, {self.d_max}]"
            )
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class DisparityMap:
    """Dimensionless inverse-depth parameterization in [0,1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        if v.ndim != 2:
            raise ValueError("disparity map must be 2D")
        if not np.all(np.isfinite(v)) or v.min() < 0 or v.max() > 1:
            raise ValueError("disparity values must lie in [0,1]")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def _quantize(data: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(data * 255.0), 0, 255).astype(np.uint8)


def save_pnm(path, image: ImageBuffer, binary: bool = True) -> None:
    """Write PGM (1 channel) or PPM (3 channels), maxval 255."""
    q = _quantize(image.data)
    h, w = q.shape[0], q.shape[1]
    if image.channels == 1:
        magic = "P5" if binary else "P2"
    else:
        magic = "P6" if binary else "P3"
    header = f"{magic}\n{w} {h}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        if binary:
            f.write(q.tobytes())
        else:
            flat = q.reshape(-1)
            lines = []
            for i in range(0, flat.size, 16):
                lines.append(" ".join(str(x) for x in flat[i : i + 16]))
            f.write(("\n".join(lines) + "\n").encode("ascii"))


def _read_pnm_tokens(raw: bytes, count: int, offset: int):
    """ASCII token scanner honoring PNM '#' comments."""
    tokens = []
    i = offset
    n = len(raw)
    while len(tokens) < count and i < n:
        c = raw[i : i + 1]
        if c == b"#":
            while i < n and raw[i : i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and not raw[j : j + 1].isspace() and raw[j : j + 1] != b"#":
                j += 1
            tokens.append(raw[i:j])
            i = j
    return tokens, i


def load_pnm(path) -> ImageBuffer:
    with open(path, "rb") as f:
        raw = f.read()
    magic = raw[:2].decode("ascii", errors="replace")
    if magic not in ("P2", "P3", "P5", "P6"):
        raise ValueError(f"unsupported PNM magic {magic!r}")
    header, pos = _read_pnm_tokens(raw, 3, 2)
    w, h, maxval = (int(t) for t in header)
    channels = 3 if magic in ("P3", "P6") else 1
    n = w * h * channels
    if magic in ("P5", "P6"):
        data = np.frombuffer(raw[pos + 1 : pos + 1 + n], dtype=np.uint8).astype(float)
    else:
        tokens, _ = _read_pnm_tokens(raw, n, pos)
        data = np.array([int(t) for t in tokens], dtype=float)
    data = data.reshape((h, w) if channels == 1 else (h, w, channels))
    return ImageBuffer(data / float(maxval))


def _save_float_grid(path, values: np.ndarray, magic: bytes) -> None:
    v = np.asarray(values, dtype=np.float32)
    h, w = v.shape
    with open(path, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<II", w, h))
        f.write(v.astype("<f4").tobytes())


def _load_float_grid(path, magic: bytes) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != magic:
        raise ValueError(f"bad magic {raw[:4]!r}, expected {magic!r}")
    w, h = struct.unpack("<II", raw[4:12])
    vals = np.frombuffer(raw[12 : 12 + 4 * w * h], dtype="<f4")
    if vals.size != w * h:
        raise ValueError("truncated float grid")
    return vals.reshape(h, w).astype(float)


def save_depth(path, depth: DepthMap) -> None:
    _save_float_grid(path, depth.values, DEPTH_MAGIC)


def load_depth(path, d_min: float = D_MIN_DEFAULT, d_max: float = D_MAX_DEFAULT) -> DepthMap:
    return DepthMap(_load_float_grid(path, DEPTH_MAGIC), d_min, d_max)


def save_heatmap_grid(path, values: np.ndarray) -> None:
    _save_float_grid(path, values, HEATMAP_MAGIC)


def load_heatmap_grid(path) -> np.ndarray:
    return _load_float_grid(path, HEATMAP_MAGIC)


def mask_from_bool(mask: np.ndarray) -> ImageBuffer:
    return ImageBuffer(np.asarray(mask, dtype=bool).astype(float))


def mask_to_bool(mask: ImageBuffer) -> np.ndarray:
    return mask.gray() > 0.5
