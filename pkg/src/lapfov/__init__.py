"""Automated laparoscope field-of-view control at desk scale: synthetic
scene, photometric scale-aware depth, expert-preference view targets, MRC
misorientation correction, and an RCM null-space controller in one loop."""

__version__ = "0.1.0"

from .geometry import CameraIntrinsics, Pose, backproject, compose, project, skew, svd2x2
from .images import DepthMap, DisparityMap, ImageBuffer

__all__ = [
    "CameraIntrinsics",
    "Pose",
    "backproject",
    "compose",
    "project",
    "skew",
    "svd2x2",
    "DepthMap",
    "DisparityMap",
    "ImageBuffer",
    "__version__",
]
