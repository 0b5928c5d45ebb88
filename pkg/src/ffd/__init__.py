"""FFD: multiscale blob detection on an undecimated cubic-spline scale-space."""
from ._backend import BACKEND
from .detector import DetectorParams, Keypoint, detect
from .pyramid import ScaleSpace, build_scale_space

__all__ = ["BACKEND", "DetectorParams", "Keypoint", "ScaleSpace", "build_scale_space", "detect"]
__version__ = "0.1.0"
