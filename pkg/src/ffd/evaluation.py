"""Desk-scale evaluation: synthetic images, homographies, repeatability,
robustness sweeps, per-level keypoint histograms, kernel tables and timing."""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .detector import DetectorParams, detect
from .kernel_math import (KernelSpec, dog1d, excitatory_width_dog, solve_golden_lambda,
                          superimposition_check, zero_crossing_error)
from .pyramid import (DEFAULT_SIGMA0, Kernel1D, as_image, atrous_kernel, build_scale_space,
                      kernel_sigmas, presmooth_kernel, scale_ratio_vector, separable_convolve)

NOISE_STDS = (0.01, 0.05, 0.1, 0.2)
BLUR_SIZES = (3, 5, 7, 9, 11, 13)
GOLDEN_MU = 2.0
GOLDEN_LAMBDA = 0.3135


class Homography:
    """3x3 projective map, normalized so that ``h[2, 2] == 1``."""

    def __init__(self, h):
        h = np.asarray(h, dtype=np.float64).reshape(3, 3)
        if abs(np.linalg.det(h)) <= 1e-12 or abs(h[2, 2]) <= 1e-15:
            raise ValueError("homography must be invertible with h33 != 0")
        self.h = h / h[2, 2]

    def __matmul__(self, other: Homography) -> Homography:
        return Homography(self.h @ other.h)

    def inverse(self) -> Homography:
        return Homography(np.linalg.inv(self.h))

    def __repr__(self):
        return f"Homography({self.h.tolist()!r})"

    @classmethod
    def identity(cls):
        return cls(np.eye(3))

    @classmethod
    def translation(cls, tx, ty):
        return cls([[1, 0, tx], [0, 1, ty], [0, 0, 1]])

    @classmethod
    def rotation(cls, degrees, center=(0.0, 0.0)):
        a = math.radians(degrees)
        c, s = math.cos(a), math.sin(a)
        cx, cy = center
        rot = cls([[c, -s, 0], [s, c, 0], [0, 0, 1]])
        return cls.translation(cx, cy) @ rot @ cls.translation(-cx, -cy)

    @classmethod
    def from_text(cls, text: str):
        """Nine whitespace-separated numbers, row-major; ``#`` lines ignored."""
        values = []
        for line in text.splitlines():
            line = line.split("#", 1)[0]
            values.extend(float(v) for v in line.split())
        if len(values) != 9:
            raise ValueError(f"homography needs 9 values, got {len(values)}")
        return cls(values)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_text(fh.read())


@dataclass(frozen=True)
class RepeatabilityReport:
    score: float
    matched: int
    total_a: int
    total_b: int
    epsilon: float
    convention: str = "classic: matched / min(valid_a, valid_b)"


def project_point(x: float, y: float, h: Homography):
    """Map (x, y) through ``h``; None when it goes to infinity."""
    m = h.h
    den = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(den) < 1e-12:
        return None
    return ((m[0, 0] * x + m[0, 1] * y + m[0, 2]) / den,
            (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / den)


def _project_many(pts: np.ndarray, h: Homography) -> np.ndarray:
    ph = np.column_stack([pts, np.ones(len(pts))]) @ h.h.T
    with np.errstate(divide="ignore", invalid="ignore"):
        out = ph[:, :2] / ph[:, 2:3]
    out[np.abs(ph[:, 2]) < 1e-12] = np.inf
    return out


def warp_image(image, h: Homography, shape=None) -> tuple[np.ndarray, np.ndarray]:
    """Warp ``image`` by ``h`` (source -> destination), bilinear.

    Returns the warped image and a boolean validity mask; destination pixels
    whose preimage falls outside the source are 0 and invalid.
    """
    img = as_image(image)
    h_out, w_out = shape or img.shape
    yy, xx = np.mgrid[0:h_out, 0:w_out].astype(np.float64)
    src = _project_many(np.column_stack([xx.ravel(), yy.ravel()]), h.inverse())
    sx = src[:, 0].reshape(h_out, w_out)
    sy = src[:, 1].reshape(h_out, w_out)
    tol = 1e-9
    valid = ((sx >= -tol) & (sx <= img.shape[1] - 1 + tol)
             & (sy >= -tol) & (sy <= img.shape[0] - 1 + tol))
    sx = np.where(valid, sx, 0.0)
    sy = np.where(valid, sy, 0.0)
    out = ndimage.map_coordinates(img, [sy, sx], order=1, mode="nearest")
    out[~valid] = 0.0
    return out, valid


def _points(kps) -> np.ndarray:
    if len(kps) == 0:
        return np.empty((0, 2))
    if isinstance(kps, np.ndarray):
        return np.asarray(kps, dtype=np.float64).reshape(-1, 2)
    return np.array([(k.x, k.y) for k in kps], dtype=np.float64)


def _inside(pts: np.ndarray, mask: np.ndarray) -> np.ndarray:
    h, w = mask.shape
    xi = np.round(pts[:, 0])
    yi = np.round(pts[:, 1])
    ok = np.isfinite(xi) & np.isfinite(yi) & (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    ok[ok] = mask[yi[ok].astype(int), xi[ok].astype(int)]
    return ok


def repeatability(kps_a, kps_b, h: Homography, epsilon: float = 2.0,
                  valid_b=None, valid_a=None) -> RepeatabilityReport:
    """Fraction of keypoints re-detected under ``h`` (A's frame -> B's frame).

    A's keypoints are projected into B and dropped if they leave ``valid_b``
    (a boolean mask, or a ``(h, w)`` shape). When ``valid_a`` is given, B's
    keypoints whose preimage leaves it are dropped as well. Matches are
    one-to-one, greedily in ascending distance, within ``epsilon`` px.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    pa = _project_many(_points(kps_a), h)
    pb = _points(kps_b)
    if valid_b is not None:
        mask_b = valid_b if isinstance(valid_b, np.ndarray) else np.ones(valid_b, bool)
        pa = pa[_inside(pa, mask_b)]
    if valid_a is not None and len(pb):
        mask_a = valid_a if isinstance(valid_a, np.ndarray) else np.ones(valid_a, bool)
        pb = pb[_inside(_project_many(pb, h.inverse()), mask_a)]
    na, nb = len(pa), len(pb)
    if na == 0 or nb == 0:
        return RepeatabilityReport(0.0, 0, na, nb, epsilon)

    dist = np.hypot(pa[:, None, 0] - pb[None, :, 0], pa[:, None, 1] - pb[None, :, 1])
    ia, ib = np.nonzero(dist <= epsilon)
    order = np.lexsort((ib, ia, dist[ia, ib]))
    used_a = np.zeros(na, bool)
    used_b = np.zeros(nb, bool)
    matched = 0
    for i, j in zip(ia[order], ib[order]):
        if not used_a[i] and not used_b[j]:
            used_a[i] = used_b[j] = True
            matched += 1
    return RepeatabilityReport(matched / min(na, nb), matched, na, nb, epsilon)


def add_white_gaussian_noise(image, std: float, seed: int = 0) -> np.ndarray:
    if std < 0:
        raise ValueError("noise std must be >= 0")
    img = as_image(image)
    if std == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    return np.clip(img + rng.normal(0.0, std, img.shape), 0.0, 1.0)


def box_blur(image, ksize: int) -> np.ndarray:
    """Normalized ``ksize x ksize`` averaging filter, mirrored borders."""
    if ksize % 2 == 0 or not 3 <= ksize <= 13:
        raise ValueError(f"box size must be odd and within 3..13, got {ksize}")
    return separable_convolve(image, Kernel1D(np.full(ksize, 1.0 / ksize)))


def make_synthetic(kind: str, width: int = 256, height: int = 256, *, d: int = 8,
                   cell: int = 32, seed: int = 0) -> np.ndarray:
    """Deterministic test images.

    ``step_edge``: 0 left of column ``width // 2``, 1 from it on.
    ``two_edges``: bright vertical band ``d`` px wide, centred.
    ``checkerboard``: ``cell``-px squares; corners on multiples of ``cell``.
    ``random_texture``: smoothed white noise with random blobs, stretched to [0, 1].
    """
    if width < 32 or height < 32:
        raise ValueError("synthetic images must be at least 32x32")
    yy, xx = np.mgrid[0:height, 0:width]
    if kind == "step_edge":
        return (xx >= width // 2).astype(np.float64)
    if kind == "two_edges":
        if not 1 <= d < width:
            raise ValueError("band width d must lie in [1, width)")
        c0 = width // 2 - d // 2
        return ((xx >= c0) & (xx < c0 + d)).astype(np.float64)
    if kind == "checkerboard":
        if cell < 1:
            raise ValueError("cell must be positive")
        return (((xx // cell) + (yy // cell)) % 2).astype(np.float64)
    if kind == "random_texture":
        return _random_texture(width, height, seed)
    raise ValueError(f"unknown synthetic kind {kind!r}")


def _random_texture(width, height, seed):
    rng = np.random.default_rng(seed)
    img = ndimage.gaussian_filter(rng.standard_normal((height, width)), 2.0, mode="reflect")
    img /= img.std()
    # sparse isolated blobs give well-separated, stable extrema
    n_blobs = width * height // 400
    ys = rng.uniform(0, height, n_blobs)
    xs = rng.uniform(0, width, n_blobs)
    radii = rng.uniform(1.5, 4.0, n_blobs)
    signs = rng.choice([-1.0, 1.0], n_blobs)
    yy, xx = np.mgrid[0:height, 0:width]
    for y, x, r, s in zip(ys, xs, radii, signs):
        y0, y1 = max(int(y - 4 * r), 0), min(int(y + 4 * r) + 1, height)
        x0, x1 = max(int(x - 4 * r), 0), min(int(x + 4 * r) + 1, width)
        patch = np.exp(-((yy[y0:y1, x0:x1] - y) ** 2 + (xx[y0:y1, x0:x1] - x) ** 2) / (2 * r * r))
        img[y0:y1, x0:x1] += 3.0 * s * patch
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo)


def level1_kernel(sigma0: float = DEFAULT_SIGMA0) -> KernelSpec:
    """Continuous DoG matching the first fine level (coarse 0 minus coarse 1)."""
    return KernelSpec(sigma0, scale_ratio_vector(sigma0, kernel_sigmas(1))[0])


def zero_crossings(profile) -> np.ndarray:
    """Sub-sample sign changes of a 1D profile, skipping runs of exact zeros."""
    p = np.asarray(profile, dtype=np.float64)
    nz = np.flatnonzero(p)
    out = []
    for a, b in zip(nz, nz[1:]):
        if p[a] * p[b] < 0:
            out.append(a + (b - a) * p[a] / (p[a] - p[b]))
    return np.asarray(out)


def superimposition_experiment(d: int, size: int = 64, sigma0: float = DEFAULT_SIGMA0) -> float:
    """Mean zero-crossing displacement of a ``d``-px band's two edges on the
    first fine level, in px. Each true edge lies half-way between pixels."""
    if d < 1:
        raise ValueError("edge distance must be >= 1")
    width = max(size, 4 * d + 32)
    img = make_synthetic("two_edges", width, 32, d=d)
    c0 = separable_convolve(img, presmooth_kernel(sigma0))
    c1 = separable_convolve(c0, atrous_kernel(1))
    crossings = zero_crossings((c0 - c1)[16])
    left = width // 2 - d // 2 - 0.5
    right = left + d
    disp = []
    for edge in (left, right):
        disp.append(np.min(np.abs(crossings - edge)))
    return float(np.mean(disp))


def superimposition_prediction(d: float, sigma0: float = DEFAULT_SIGMA0) -> float:
    return zero_crossing_error(excitatory_width_dog(level1_kernel(sigma0)), d)


def scale_distribution(keypoints) -> dict[int, float]:
    """Fraction of keypoints per originating fine level."""
    if not keypoints:
        return {}
    levels, counts = np.unique([k.level for k in keypoints], return_counts=True)
    total = counts.sum()
    return {int(lv): float(c / total) for lv, c in zip(levels, counts)}


def robustness_sweep(image, kind: str, values=None, seeds=range(5), epsilon: float = 2.0,
                     params: DetectorParams | None = None, workers: int = 1) -> list[dict]:
    """Repeatability of detections on ``image`` against a degraded copy.

    ``kind`` is ``"noise"`` (values are WGN stds, one trial per seed) or
    ``"blur"`` (values are box sizes; deterministic, a single trial).
    Trials are independent and may run on ``workers`` threads; row order
    does not depend on it.
    """
    params = params or DetectorParams()
    img = as_image(image, check_range=True)
    if kind == "noise":
        trials = [{"std": std, "seed": seed} for std in (values or NOISE_STDS) for seed in seeds]
        degrade = lambda t: add_white_gaussian_noise(img, t["std"], t["seed"])  # noqa: E731
    elif kind == "blur":
        trials = [{"ksize": k} for k in (values or BLUR_SIZES)]
        degrade = lambda t: box_blur(img, t["ksize"])  # noqa: E731
    else:
        raise ValueError(f"unknown sweep kind {kind!r}")

    ref = detect(img, params)
    ident = Homography.identity()

    def run(trial):
        rep = repeatability(ref, detect(degrade(trial), params), ident, epsilon,
                            valid_b=img.shape)
        return {**trial, "repeatability": rep.score, "matched": rep.matched,
                "n_ref": rep.total_a, "n": rep.total_b}

    if workers == 1:
        return [run(t) for t in trials]
    with ThreadPoolExecutor(max_workers=workers or None) as pool:
        return list(pool.map(run, trials))


def median_by(rows, key: str) -> dict[float, float]:
    out = {}
    for v in dict.fromkeys(r[key] for r in rows):
        out[v] = float(np.median([r["repeatability"] for r in rows if r[key] == v]))
    return out


def rows_to_csv(rows) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def timing_scaling(sizes, repeats: int = 5, n: int = 3) -> list[tuple[int, float]]:
    """Median wall time (ms) of ``build_scale_space`` per ``(w, h)`` size."""
    out = []
    for w, h in sizes:
        img = np.random.default_rng(0).random((h, w))
        build_scale_space(img, n)  # warm-up
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            build_scale_space(img, n)
            times.append((time.perf_counter() - t0) * 1e3)
        out.append((w * h, float(np.median(times))))
    return out


def kernel_analysis_csv(mu_values, lambda_grid, include_golden: bool = True) -> str:
    """Superimposition margin over a (mu, lambda) grid.

    Columns ``mu,lambda,margin,satisfied``. The golden point
    (mu=2, lambda=0.3135) is appended when absent.
    """
    mu_values = [float(m) for m in mu_values]
    lambda_grid = [float(v) for v in lambda_grid]
    if not mu_values or not lambda_grid:
        raise ValueError("grids must be non-empty")
    pairs = [(m, lam) for m in mu_values for lam in lambda_grid]
    if include_golden and (GOLDEN_MU, GOLDEN_LAMBDA) not in pairs:
        pairs.append((GOLDEN_MU, GOLDEN_LAMBDA))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["mu", "lambda", "margin", "satisfied"])
    for m, lam in pairs:
        res = superimposition_check(lam, m)
        writer.writerow([f"{m:.6g}", f"{lam:.6g}", f"{res.margin:.9f}", int(res.satisfied)])
    return buf.getvalue()


def dog_profiles_csv(mu_values, sigma: float | None = None, radius: float = 8.0,
                     step: float = 0.05) -> str:
    """Sampled 1D DoG profiles per mu; sigma defaults to the golden one per mu."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["mu", "sigma", "x", "dog"])
    xs = np.arange(-radius, radius + step / 2, step)
    for m in mu_values:
        s = sigma if sigma is not None else solve_golden_lambda(m) * m
        for x, v in zip(xs, dog1d(xs, KernelSpec(s, m))):
            writer.writerow([f"{m:.6g}", f"{s:.6g}", f"{x:.4f}", f"{v:.9g}"])
    return buf.getvalue()
