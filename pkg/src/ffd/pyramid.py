"""Undecimated cubic-spline scale-space.

The input is presmoothed with a small Gaussian, then repeatedly blurred with
the a-trous B3-spline bank to give ``n + 3`` coarse levels; adjacent coarse
levels are differenced into ``n + 2`` fine (DoG-like) levels. Nothing is
ever decimated, so every level has the input's shape.

Images are plain 2D float64 numpy arrays with luminance in [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from . import _backend

# Reference presmoothing taps for sigma0 = 0.6 (they sum to 0.999932).
H0_TAPS = (0.002566, 0.1655, 0.6638, 0.1655, 0.002566)
B3_TAPS = (1 / 16, 4 / 16, 6 / 16, 4 / 16, 1 / 16)
# Effective widths of H_1..H_4 = h1, h2*h1, h3*h2*h1, ...; deeper levels double.
SPLINE_SIGMAS = (1.05, 2.32, 4.75, 9.5)
DEFAULT_SIGMA0 = 0.6
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class Kernel1D:
    """Odd-length symmetric filter. ``stride_origin`` is the a-trous level j
    the kernel was built for (0 for the presmoother)."""

    taps: np.ndarray
    stride_origin: int = 0

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or len(taps) % 2 == 0:
            raise ValueError("kernel taps must be a 1D odd-length vector")
        if not np.allclose(taps, taps[::-1], rtol=0, atol=1e-15):
            raise ValueError("kernel taps must be symmetric")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    def __len__(self):
        return len(self.taps)

    @property
    def radius(self) -> int:
        return len(self.taps) // 2

    def compact(self) -> tuple[np.ndarray, int]:
        """Non-zero taps and their spacing, i.e. undo zero insertion."""
        nz = np.flatnonzero(self.taps)
        if len(nz) <= 1:
            return self.taps.copy(), 1
        step = reduce(math.gcd, (int(i) for i in np.diff(nz)))
        r = self.radius
        if r % step:
            return self.taps.copy(), 1
        return np.ascontiguousarray(self.taps[::step]), step


@dataclass
class ScaleSpace:
    coarse: list[np.ndarray]
    fine: list[np.ndarray]
    sigmas: list[float]
    n: int
    _stack: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.coarse[0].shape

    @property
    def fine_stack(self) -> np.ndarray:
        """Fine levels as one C-contiguous ``(n + 2, h, w)`` array."""
        if self._stack is None:
            self._stack = np.ascontiguousarray(np.stack(self.fine))
        return self._stack

    def fine_sigma(self, level: float) -> float:
        """Effective width of a (possibly fractional) fine level.

        Fine level k pairs coarse levels k and k + 1; its width is the inner
        coarse width, interpolated geometrically between levels.
        """
        k = min(max(int(math.floor(level)), 0), len(self.sigmas) - 2)
        frac = level - k
        lo, hi = self.sigmas[k], self.sigmas[k + 1]
        return lo * (hi / lo) ** frac


def as_image(image, *, check_range: bool = False) -> np.ndarray:
    """Validate and convert to a C-contiguous 2D float64 array."""
    img = np.ascontiguousarray(image, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    if check_range and (img.min() < 0.0 or img.max() > 1.0):
        raise ValueError("image luminance must lie in [0, 1]")
    return img


def to_grayscale(rgb_image) -> np.ndarray:
    """Rec. 601 luma of an 8-bit ``(h, w, 3)`` image, scaled to [0, 1]."""
    rgb = np.asarray(rgb_image)
    if rgb.ndim != 3 or rgb.shape[2] < 3 or rgb.shape[0] == 0 or rgb.shape[1] == 0:
        raise ValueError(f"expected a non-empty (h, w, 3) image, got shape {rgb.shape}")
    rgb = rgb[..., :3].astype(np.float64)
    gray = rgb @ np.asarray(LUMA_WEIGHTS) / 255.0
    return np.clip(gray, 0.0, 1.0)


def presmooth_kernel(sigma0: float = DEFAULT_SIGMA0) -> Kernel1D:
    """h0: the reference 5-tap filter for sigma0 = 0.6, renormalized to unit sum.

    Other widths get a sampled, normalized Gaussian (the reference taps are
    exactly that for 0.6, rounded).
    """
    if not sigma0 > 0:
        raise ValueError("sigma0 must be positive")
    if sigma0 == DEFAULT_SIGMA0:
        taps = np.asarray(H0_TAPS)
    else:
        r = max(2, int(math.ceil(3.0 * sigma0)))
        x = np.arange(-r, r + 1, dtype=np.float64)
        taps = np.exp(-x * x / (2.0 * sigma0 * sigma0))
    return Kernel1D(taps / taps.sum(), stride_origin=0)


def atrous_kernel(j: int) -> Kernel1D:
    """B3-spline filter h^(j): ``[1, 4, 6, 4, 1]/16`` with ``2**(j-1) - 1``
    zeros inserted between adjacent taps."""
    if j < 1:
        raise ValueError(f"a-trous level must be >= 1, got {j}")
    step = 1 << (j - 1)
    taps = np.zeros(4 * step + 1)
    taps[::step] = B3_TAPS
    return Kernel1D(taps, stride_origin=j)


def separable_convolve(image, kernel: Kernel1D) -> np.ndarray:
    """Horizontal then vertical pass with mirrored borders (edge sample not
    repeated). Zero taps of dilated kernels are skipped."""
    img = as_image(image)
    if len(kernel) > 2 * min(img.shape):
        raise ValueError(
            f"kernel of length {len(kernel)} too long for image of shape {img.shape}")
    taps, step = kernel.compact()
    return _backend.separable_convolve(img, taps, step)


def cubic_spline(v):
    """B3 spline scaling function; support (-2, 2), value 2/3 at 0."""
    v = np.asarray(v, dtype=np.float64)
    out = (np.abs(v - 2) ** 3 - 4 * np.abs(v - 1) ** 3 + 6 * np.abs(v) ** 3
           - 4 * np.abs(v + 1) ** 3 + np.abs(v + 2) ** 3) / 12.0
    # the five cubes cancel exactly outside the support, up to rounding
    out = np.where(np.abs(v) < 2.0, out, 0.0)
    return out if out.ndim else float(out)


def wavelet_fn(u):
    """Wavelet from the two-scale difference: ``2*phi(2u) - phi(u)``."""
    return 2.0 * cubic_spline(2.0 * np.asarray(u, dtype=np.float64)) - cubic_spline(u)


def kernel_sigmas(count: int) -> list[float]:
    """Tabulated widths of H_1..H_count, doubling past the table."""
    sig = list(SPLINE_SIGMAS[:count])
    while len(sig) < count:
        sig.append(2.0 * sig[-1])
    return sig


def discrete_sigma(j: int) -> float:
    """Standard deviation of the composite tap vector H_j (= sqrt((4**j - 1)/3))."""
    composite = reduce(np.convolve, (atrous_kernel(i).taps for i in range(1, j + 1)))
    x = np.arange(len(composite)) - len(composite) // 2
    return float(np.sqrt(np.sum(composite * x * x)))


def scale_ratio_vector(sigma0: float, sigmas) -> list[float]:
    """Ratios between consecutive coarse-level widths.

    Level 0 has width ``sigma0``, level i has ``sqrt(sigma0**2 + sigmas[i-1]**2)``.
    """
    sigmas = [float(s) for s in sigmas]
    if len(sigmas) < 1 or any(s <= 0 for s in sigmas) or sigma0 <= 0:
        raise ValueError("widths must be positive")
    if any(b <= a for a, b in zip(sigmas, sigmas[1:])):
        raise ValueError("sigmas must be strictly ascending")
    widths = [sigma0] + [math.hypot(sigma0, s) for s in sigmas]
    return [b / a for a, b in zip(widths, widths[1:])]


def build_scale_space(image, n: int = 3, sigma0: float = DEFAULT_SIGMA0) -> ScaleSpace:
    if n < 1:
        raise ValueError(f"number of scales must be >= 1, got {n}")
    img = as_image(image)
    widest = atrous_kernel(n + 2)
    if len(widest) > 2 * min(img.shape):
        raise ValueError(
            f"image of shape {img.shape} too small for {n} scales "
            f"(needs min side >= {widest.radius + 1})")

    coarse = [separable_convolve(img, presmooth_kernel(sigma0))]
    for j in range(1, n + 3):
        coarse.append(separable_convolve(coarse[-1], atrous_kernel(j)))
    fine = [a - b for a, b in zip(coarse, coarse[1:])]
    sigmas = [sigma0] + [math.hypot(sigma0, s) for s in kernel_sigmas(n + 2)]
    return ScaleSpace(coarse=coarse, fine=fine, sigmas=sigmas, n=n)
