"""Blob detection on the fine scale-space.

Stage I finds strict 3x3x3 extrema on the interior fine levels, refines them
with a quadratic Taylor fit and drops low-contrast ones. Stage II keeps only
blobs whose Hessian anisotropy marks them as conjunctions (near-isotropic or
saddle-like) rather than edges.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .pyramid import DEFAULT_SIGMA0, ScaleSpace, atrous_kernel, as_image, build_scale_space

log = logging.getLogger(__name__)

SINGULAR_DET = 1e-12
DEGENERATE_TRACE = 1e-12


@dataclass(frozen=True)
class DetectorParams:
    n: int = 3
    sigma0: float = DEFAULT_SIGMA0
    tau_lc: float = 0.05
    tau_plus: float = 0.7
    tau_minus: float = 1.5
    max_keypoints: int = 10000
    max_relocalizations: int = 5

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if self.tau_lc < 0:
            raise ValueError("tau_lc must be >= 0")
        if not 0 <= self.tau_plus < self.tau_minus:
            raise ValueError("need 0 <= tau_plus < tau_minus")
        if self.max_keypoints < 0 or self.max_relocalizations < 0:
            raise ValueError("caps must be non-negative")


@dataclass(frozen=True)
class Candidate:
    x: int
    y: int
    level: int
    value: float
    polarity: int  # +1 maximum, -1 minimum


@dataclass(frozen=True)
class StructureTensor:
    jxx: float
    jyy: float
    jxy: float

    @property
    def det(self) -> float:
        return self.jxx * self.jyy - self.jxy * self.jxy

    @property
    def trace(self) -> float:
        return self.jxx + self.jyy

    def eigenvalues(self) -> tuple[float, float]:
        """(smaller, larger); always real for a symmetric 2x2."""
        half_tr = 0.5 * self.trace
        root = 0.5 * np.hypot(self.jyy - self.jxx, 2.0 * self.jxy)
        return half_tr - root, half_tr + root


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    sigma: float
    level: int
    response: float
    cm: float
    offset: tuple[float, float, float] = field(default=(0.0, 0.0, 0.0))


def level_margin(level: int) -> int:
    """Border band skipped on fine level ``level``: half-width of the widest
    a-trous kernel feeding it, plus one for the derivative stencil."""
    return atrous_kernel(level + 1).radius + 1


def detection_levels(space: ScaleSpace) -> range:
    """Interior fine levels; the outermost two only serve as scale neighbours."""
    return range(1, len(space.fine) - 1)


def find_extrema(space: ScaleSpace) -> list[Candidate]:
    if len(space.fine) < 3:
        raise ValueError("extrema search needs at least 3 fine levels")
    stack = space.fine_stack
    levels = list(detection_levels(space))
    rows = _backend.find_extrema(stack, levels, [level_margin(k) for k in levels])
    return [Candidate(x=int(x), y=int(y), level=int(k), value=float(stack[k, y, x]),
                      polarity=int(p)) for k, y, x, p in rows]


def _derivatives(stack, k, y, x):
    """Central-difference gradient and Hessian in (x, y, level)."""
    c = stack[k, y, x]
    g = np.array([
        0.5 * (stack[k, y, x + 1] - stack[k, y, x - 1]),
        0.5 * (stack[k, y + 1, x] - stack[k, y - 1, x]),
        0.5 * (stack[k + 1, y, x] - stack[k - 1, y, x]),
    ])
    dxx = stack[k, y, x + 1] - 2 * c + stack[k, y, x - 1]
    dyy = stack[k, y + 1, x] - 2 * c + stack[k, y - 1, x]
    dss = stack[k + 1, y, x] - 2 * c + stack[k - 1, y, x]
    dxy = 0.25 * (stack[k, y + 1, x + 1] - stack[k, y + 1, x - 1]
                  - stack[k, y - 1, x + 1] + stack[k, y - 1, x - 1])
    dxs = 0.25 * (stack[k + 1, y, x + 1] - stack[k + 1, y, x - 1]
                  - stack[k - 1, y, x + 1] + stack[k - 1, y, x - 1])
    dys = 0.25 * (stack[k + 1, y + 1, x] - stack[k + 1, y - 1, x]
                  - stack[k - 1, y + 1, x] + stack[k - 1, y - 1, x])
    hess = np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])
    return g, hess


def contrast_value(value: float, gradient, offset) -> float:
    """Interpolated response at the refined location."""
    return float(value + 0.5 * np.dot(gradient, offset))


def structure_tensor(space: ScaleSpace, x: int, y: int, level: int) -> StructureTensor:
    """Second spatial derivatives of fine level ``level`` at an interior pixel."""
    d = space.fine[level]
    h, w = d.shape
    if not (0 < x < w - 1 and 0 < y < h - 1):
        raise ValueError(f"({x}, {y}) is not an interior pixel")
    c = d[y, x]
    jxx = d[y, x + 1] - 2 * c + d[y, x - 1]
    jyy = d[y + 1, x] - 2 * c + d[y - 1, x]
    jxy = 0.25 * (d[y + 1, x + 1] - d[y + 1, x - 1] - d[y - 1, x + 1] + d[y - 1, x - 1])
    return StructureTensor(float(jxx), float(jyy), float(jxy))


def anisotropy(t: StructureTensor) -> float | None:
    """``1 - 4 det/tr**2``: ~0 at conjunctions, ~1 on edges, >1 at saddles.

    Returns None for a vanishing trace, where the ratio is undefined.
    """
    tr = t.trace
    if abs(tr) < DEGENERATE_TRACE:
        return None
    return 1.0 - 4.0 * t.det / (tr * tr)


def refine(candidate: Candidate, space: ScaleSpace,
           params: DetectorParams) -> Keypoint | None:
    """Subpixel/subscale refinement plus contrast and anisotropy tests.

    Returns None when the candidate drifts out of the detectable region,
    fails to converge within ``params.max_relocalizations`` moves, has a
    singular Hessian, low contrast or an edge-like anisotropy.
    """
    stack = space.fine_stack
    levels = detection_levels(space)
    _, h, w = stack.shape
    x, y, k = candidate.x, candidate.y, candidate.level

    for attempt in range(params.max_relocalizations + 1):
        g, hess = _derivatives(stack, k, y, x)
        if abs(np.linalg.det(hess)) < SINGULAR_DET:
            return None
        offset = -np.linalg.solve(hess, g)
        if np.all(np.abs(offset) < 0.5):
            break
        if attempt == params.max_relocalizations:
            return None
        x += int(np.round(offset[0]))
        y += int(np.round(offset[1]))
        k += int(np.round(offset[2]))
        if k not in levels:
            return None
        m = level_margin(k)
        if not (m <= x < w - m and m <= y < h - m):
            return None

    response = contrast_value(stack[k, y, x], g, offset)
    if abs(response) < params.tau_lc:
        return None

    cm = anisotropy(structure_tensor(space, x, y, k))
    if cm is None or not (cm < params.tau_plus or cm > params.tau_minus):
        return None

    return Keypoint(
        x=float(x + offset[0]),
        y=float(y + offset[1]),
        sigma=space.fine_sigma(k + offset[2]),
        level=k,
        response=response,
        cm=float(cm),
        offset=(float(offset[0]), float(offset[1]), float(offset[2])),
    )


def detect_in_space(space: ScaleSpace, params: DetectorParams) -> list[Keypoint]:
    candidates = find_extrema(space)
    keypoints = []
    for cand in candidates:
        kp = refine(cand, space, params)
        if kp is not None:
            keypoints.append(kp)
    log.debug("%d candidates -> %d keypoints", len(candidates), len(keypoints))
    # relocalization can land two candidates on the same extremum
    unique = {}
    for kp in keypoints:
        unique.setdefault((kp.level, kp.x, kp.y), kp)
    keypoints = sorted(unique.values(), key=lambda kp: (-abs(kp.response), kp.level, kp.y, kp.x))
    return keypoints[:params.max_keypoints]


def detect(image, params: DetectorParams | None = None) -> list[Keypoint]:
    """Full pipeline on a [0, 1] grayscale image, strongest first."""
    params = params or DetectorParams()
    img = as_image(image, check_range=True)
    space = build_scale_space(img, params.n, params.sigma0)
    return detect_in_space(space, params)
