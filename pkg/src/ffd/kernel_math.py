"""Continuous-domain kernels and the golden-parameter derivation.

Pointwise Gaussian, scale-normalized LoG and DoG kernels, their excitatory
regions, the exact LoG/DoG amplitude factor, and the superimposition
constraint that fixes the smoothness for a given blurring ratio.

All functions accept scalars or numpy arrays for the spatial coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

MU_MIN = 1.0 + 1e-12
SQRT1_2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class KernelSpec:
    """Width ``sigma`` (px) and blurring ratio ``mu`` of a DoG kernel."""

    sigma: float
    mu: float

    def __post_init__(self):
        _check_sigma(self.sigma)
        _check_mu(self.mu)


@dataclass(frozen=True)
class ConstraintResult:
    margin: float
    satisfied: bool
    omega_d: float


def _check_sigma(sigma):
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")


def _check_mu(mu):
    if not mu > MU_MIN:
        raise ValueError(f"blurring ratio must exceed 1, got {mu!r}")


def gaussian2d(x, y, sigma):
    """Isotropic unit-mass 2D Gaussian of width ``sigma``."""
    _check_sigma(sigma)
    r2 = np.square(x) + np.square(y)
    return np.exp(-r2 / (2.0 * sigma * sigma)) / (2.0 * math.pi * sigma * sigma)


def log_normalized(x, y, sigma):
    """Scale-normalized Laplacian of Gaussian, ``sigma**2 * lap(G_sigma)``."""
    _check_sigma(sigma)
    q = (np.square(x) + np.square(y)) / (2.0 * sigma * sigma)
    return (q - 1.0) * np.exp(-q) / (math.pi * sigma * sigma)


def dog(x, y, spec: KernelSpec):
    """``G_{mu*sigma} - G_sigma`` evaluated at (x, y)."""
    return gaussian2d(x, y, spec.mu * spec.sigma) - gaussian2d(x, y, spec.sigma)


def gaussian1d(x, sigma):
    _check_sigma(sigma)
    return np.exp(-np.square(x) / (2.0 * sigma * sigma)) / (math.sqrt(2.0 * math.pi) * sigma)


def dog1d(x, spec: KernelSpec):
    """1D DoG from unit-mass 1D Gaussians.

    Its Fourier transform equals the 2D DoG spectrum along any radial line,
    which a slice of the 2D kernel does not (the slice weights the two
    Gaussians by 1/sigma).
    """
    return gaussian1d(x, spec.mu * spec.sigma) - gaussian1d(x, spec.sigma)


def excitatory_width_log(sigma_l):
    _check_sigma(sigma_l)
    return 2.0 * math.sqrt(2.0) * sigma_l


def _ratio_term(mu):
    return math.sqrt(math.log(mu) / (mu * mu - 1.0))


def excitatory_width_dog(spec: KernelSpec) -> float:
    """Distance between the two zero-crossings of the DoG central lobe."""
    return 4.0 * spec.mu * spec.sigma * _ratio_term(spec.mu)


def sigma_log_equivalent(spec: KernelSpec) -> float:
    """Width of the scale-normalized LoG sharing the DoG's zero-crossings."""
    return spec.mu * spec.sigma * math.sqrt(2.0) * _ratio_term(spec.mu)


def eta(mu: float) -> float:
    """Exact factor between scale-normalized LoG and DoG: ``1/ln(mu)``.

    It does not depend on sigma; for ``mu`` near 1 it reduces to the
    classic ``1/(mu - 1)`` approximation.
    """
    _check_mu(mu)
    return 1.0 / math.log(mu)


def zero_crossing_error(omega_d: float, d: float) -> float:
    """Displacement of each edge's zero-crossing when two edges are ``d`` apart.

    Returns 0 outside the superimposition regime (``d >= omega_d``).
    """
    if d >= omega_d:
        return 0.0
    return (omega_d - d) / 2.0


def superimposition_check(lam: float, mu: float) -> ConstraintResult:
    """Evaluate the worst-case zero-crossing constraint for ``sigma = lam*mu``.

    The margin is the worst-case error for two edges one pixel apart minus
    the tolerable ``1/sqrt(2)``; the constraint holds when it is <= 0.
    """
    _check_sigma(lam)
    _check_mu(mu)
    omega_d = 4.0 * lam * mu * mu * _ratio_term(mu)
    margin = (omega_d - 1.0) / 2.0 - SQRT1_2
    return ConstraintResult(margin=margin, satisfied=margin <= 0.0, omega_d=omega_d)


def solve_golden_lambda(mu: float) -> float:
    """Largest ``lam`` satisfying the superimposition constraint at ``mu``.

    The margin is linear (hence monotone) in ``lam``, so bisection on
    [1e-6, 10] always converges.
    """
    _check_mu(mu)
    f = lambda lam: superimposition_check(lam, mu).margin  # noqa: E731
    lam = bisect(f, 1e-6, 10.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    assert abs(f(lam)) < 1e-10
    return lam


def golden_sigma(mu: float = 2.0) -> float:
    return solve_golden_lambda(mu) * mu


def half_power_bandwidth(spec: KernelSpec, n_samples: int = 4096, span: float = 16.0,
                         n_fft: int = 1 << 18) -> float:
    """-3 dB bandwidth (rad/px) of the sampled DoG's radial spectrum.

    The 1D DoG is sampled at ``n_samples`` points over ``+-span*mu*sigma``,
    zero-padded to ``n_fft`` and the half-power crossings on both flanks of
    the magnitude peak are located by linear interpolation.
    """
    half = span * spec.mu * spec.sigma
    r = np.linspace(-half, half, n_samples)
    step = r[1] - r[0]
    mag = np.abs(np.fft.rfft(dog1d(r, spec), n=n_fft))
    omega = 2.0 * math.pi * np.fft.rfftfreq(n_fft, d=step)
    peak = int(np.argmax(mag))
    level = mag[peak] / math.sqrt(2.0)

    i = peak
    while i > 0 and mag[i - 1] >= level:
        i -= 1
    if i == 0:
        lo = omega[0]
    else:
        lo = np.interp(level, [mag[i - 1], mag[i]], [omega[i - 1], omega[i]])
    j = peak
    while j < len(mag) - 1 and mag[j + 1] >= level:
        j += 1
    hi = np.interp(level, [mag[j + 1], mag[j]], [omega[j + 1], omega[j]])
    return float(hi - lo)


def bandwidth_ratio(mu: float, sigma: float = 1.0, mu_ref: float = 1.0 + 1e-10) -> float:
    """Half-power bandwidth at ``mu`` relative to the near-unity ratio ``mu_ref``."""
    return (half_power_bandwidth(KernelSpec(sigma, mu))
            / half_power_bandwidth(KernelSpec(sigma, mu_ref)))
