import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ffd.detector import (Candidate, DetectorParams, StructureTensor, anisotropy,
                          contrast_value, detect, detect_in_space, detection_levels,
                          find_extrema, level_margin, refine, structure_tensor)
from ffd.evaluation import make_synthetic
from ffd.pyramid import ScaleSpace, build_scale_space

H, W = 48, 48


def space_from(fine):
    """ScaleSpace wrapping a hand-made fine stack (coarse levels are unused)."""
    fine = [np.asarray(f, dtype=np.float64) for f in fine]
    coarse = [np.zeros_like(fine[0]) for _ in range(len(fine) + 1)]
    sigmas = [0.6 * 2.0 ** j for j in range(len(fine) + 1)]
    return ScaleSpace(coarse=coarse, fine=fine, sigmas=sigmas, n=len(fine) - 2)


def bump_stack(x0, y0, s0=2.0, amp=1.0, width=2.0, levels=5):
    yy, xx = np.mgrid[0:H, 0:W].astype(float)
    spatial = np.exp(-((xx - x0) ** 2 + (yy - y0) ** 2) / (2 * width ** 2))
    return [amp * spatial * math.exp(-((k - s0) ** 2) / 2) for k in range(levels)]


def quadratic_stack(x0, y0, s0, amp=1.0, curvature=0.01, levels=5):
    yy, xx = np.mgrid[0:H, 0:W].astype(float)
    return [amp - curvature * ((xx - x0) ** 2 + (yy - y0) ** 2 + (k - s0) ** 2)
            for k in range(levels)]


class TestParams:
    def test_defaults(self):
        p = DetectorParams()
        assert (p.n, p.sigma0, p.tau_lc, p.tau_plus, p.tau_minus, p.max_keypoints,
                p.max_relocalizations) == (3, 0.6, 0.05, 0.7, 1.5, 10000, 5)

    @pytest.mark.parametrize("kwargs", [{"n": 0}, {"tau_lc": -1}, {"tau_plus": 2.0},
                                        {"tau_plus": -0.1}, {"sigma0": 0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            DetectorParams(**kwargs)


class TestExtrema:
    def test_single_impulse(self, backend):
        fine = [np.zeros((H, W)) for _ in range(5)]
        yy, xx = np.mgrid[0:H, 0:W]
        fine[2] = np.exp(-((xx - 24) ** 2 + (yy - 20) ** 2) / 4.0)
        cands = find_extrema(space_from(fine))
        assert len(cands) == 1
        c = cands[0]
        assert (c.x, c.y, c.level, c.polarity) == (24, 20, 2, 1)
        assert c.value == pytest.approx(1.0)

    def test_minimum(self, backend):
        fine = [-f for f in bump_stack(20, 25)]
        cands = find_extrema(space_from(fine))
        assert [(c.x, c.y, c.level, c.polarity) for c in cands] == [(20, 25, 2, -1)]

    def test_constant(self, backend):
        assert find_extrema(space_from([np.full((H, W), 0.3)] * 5)) == []

    def test_plateau(self, backend):
        fine = [np.zeros((H, W)) for _ in range(5)]
        fine[2][20, 20] = fine[2][20, 21] = 1.0
        assert find_extrema(space_from(fine)) == []

    def test_levels_and_margins(self, backend):
        sp = space_from([np.zeros((H, W))] * 5)
        assert list(detection_levels(sp)) == [1, 2, 3]
        assert [level_margin(k) for k in (1, 2, 3)] == [5, 9, 17]

    def test_outer_levels_never_host(self, backend):
        fine = [np.zeros((H, W)) for _ in range(5)]
        yy, xx = np.mgrid[0:H, 0:W]
        fine[0] = np.exp(-((xx - 24) ** 2 + (yy - 24) ** 2) / 4.0)
        assert find_extrema(space_from(fine)) == []

    def test_too_few_levels(self):
        with pytest.raises(ValueError):
            find_extrema(space_from([np.zeros((H, W))] * 2))

    def test_row_major_order(self, backend, rng):
        sp = build_scale_space(rng.random((96, 96)), 3)
        cands = find_extrema(sp)
        keys = [(c.level, c.y, c.x) for c in cands]
        assert keys == sorted(keys)


class TestRefine:
    params = DetectorParams(tau_lc=0.0)

    def test_centred_quadratic(self):
        sp = space_from(quadratic_stack(24, 24, 2))
        kp = refine(Candidate(24, 24, 2, 1.0, 1), sp, self.params)
        assert kp.offset == pytest.approx((0, 0, 0), abs=1e-12)
        assert (kp.x, kp.y) == (24.0, 24.0)
        assert kp.sigma == pytest.approx(sp.sigmas[2])

    def test_subpixel_quadratic_exact(self):
        sp = space_from(quadratic_stack(24.3, 23.8, 2.2))
        kp = refine(Candidate(24, 24, 2, 1.0, 1), sp, self.params)
        assert kp.x == pytest.approx(24.3, abs=1e-6)
        assert kp.y == pytest.approx(23.8, abs=1e-6)
        assert kp.offset[2] == pytest.approx(0.2, abs=1e-6)
        assert kp.sigma == pytest.approx(sp.sigmas[2] * (sp.sigmas[3] / sp.sigmas[2]) ** 0.2)

    def test_relocalization(self):
        x0, y0 = 20.9, 24.0
        sp = space_from(bump_stack(x0, y0))
        # brute-force oracle: grid search of the continuous bump
        grid = np.arange(19.0, 23.0, 1e-3)
        oracle = grid[np.argmax(np.exp(-((grid - x0) ** 2) / 8.0))]
        cand = Candidate(20, 24, 2, float(sp.fine[2][24, 20]), 1)
        first = -np.linalg.solve(*reversed(_grad_hess(sp, 20, 24, 2)))
        assert abs(first[0]) >= 0.5
        kp = refine(cand, sp, self.params)
        assert kp is not None
        assert kp.x == pytest.approx(oracle, abs=0.05)
        assert kp.y == pytest.approx(y0, abs=0.05)
        assert all(abs(o) < 0.5 for o in kp.offset)

    def test_single_shot_mode_discards(self):
        sp = space_from(bump_stack(20.9, 24.0))
        cand = Candidate(20, 24, 2, float(sp.fine[2][24, 20]), 1)
        assert refine(cand, sp, DetectorParams(tau_lc=0.0, max_relocalizations=0)) is None

    def test_singular_hessian(self):
        sp = space_from([np.full((H, W), 0.5)] * 5)
        assert refine(Candidate(24, 24, 2, 0.5, 1), sp, self.params) is None

    def test_low_contrast_rejected(self):
        sp = space_from(bump_stack(24, 24, amp=0.01))
        cand = Candidate(24, 24, 2, 0.01, 1)
        assert refine(cand, sp, DetectorParams()) is None

    def test_contrast_accepted(self):
        sp = space_from(bump_stack(24, 24, amp=0.2))
        kp = refine(Candidate(24, 24, 2, 0.2, 1), sp, DetectorParams())
        assert kp is not None
        assert kp.response == pytest.approx(0.2, abs=1e-9)
        assert kp.cm == pytest.approx(0.0, abs=1e-12)

    def test_contrast_value(self):
        assert contrast_value(0.3, [1.0, 2.0, 3.0], [0.0, 0.0, 0.0]) == 0.3
        assert contrast_value(0.3, [1.0, 0.0, 0.0], [0.2, 0.0, 0.0]) == pytest.approx(0.4)


def _grad_hess(sp, x, y, k):
    from ffd.detector import _derivatives
    return _derivatives(sp.fine_stack, k, y, x)


class TestStructureTensor:
    def grid_space(self, f):
        yy, xx = np.mgrid[0:H, 0:W].astype(float)
        level = f(xx - 24, yy - 24)
        return space_from([level] * 3)

    def test_paraboloid(self):
        t = structure_tensor(self.grid_space(lambda x, y: x ** 2 + y ** 2), 24, 24, 1)
        assert (t.jxx, t.jyy, t.jxy) == pytest.approx((2, 2, 0), abs=1e-12)

    def test_cross(self):
        t = structure_tensor(self.grid_space(lambda x, y: x * y), 24, 24, 1)
        assert (t.jxx, t.jyy, t.jxy) == pytest.approx((0, 0, 1), abs=1e-12)

    def test_rotated_saddle(self):
        c = s = math.sqrt(0.5)

        def saddle(x, y):
            u, v = c * x + s * y, -s * x + c * y
            return u ** 2 - v ** 2

        t = structure_tensor(self.grid_space(saddle), 24, 24, 1)
        assert (t.jxx, t.jyy, t.jxy) == pytest.approx((0, 0, 2), abs=1e-9)

    def test_border(self):
        with pytest.raises(ValueError):
            structure_tensor(self.grid_space(lambda x, y: x), 0, 10, 1)


class TestAnisotropy:
    def test_isotropic(self):
        assert anisotropy(StructureTensor(2, 2, 0)) == 0.0

    def test_edge_like(self):
        assert anisotropy(StructureTensor(10, 0.1, 0)) == pytest.approx(1 - 4 / 102.01, abs=1e-12)
        assert anisotropy(StructureTensor(10, 0.1, 0)) == pytest.approx(0.9608, abs=1e-4)

    def test_saddle(self):
        t = StructureTensor(1, 1, 2)
        assert t.det == -3 and t.trace == 2
        assert anisotropy(t) == pytest.approx(4.0)

    def test_degenerate(self):
        assert anisotropy(StructureTensor(1.0, -1.0, 0.3)) is None

    @settings(max_examples=300, deadline=None)
    @given(st.floats(-100, 100), st.floats(-100, 100), st.floats(-100, 100))
    def test_eigen_form(self, a, b, c):
        t = StructureTensor(a, b, c)
        cm = anisotropy(t)
        if cm is None or abs(t.trace) < 1e-6:
            return
        assert cm >= -1e-12
        l0, l1 = t.eigenvalues()
        if t.det >= 0:
            assert cm <= 1 + 1e-12
            assert cm == pytest.approx(((l1 - l0) / (l1 + l0)) ** 2, rel=1e-9, abs=1e-9)
        else:
            assert cm >= 1.0
            assert l0 <= 0 <= l1

    @given(st.floats(0.1, 10), st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
    def test_scale_invariant(self, a, jxx, jyy, jxy):
        t = StructureTensor(jxx, jyy, jxy)
        s = StructureTensor(a * jxx, a * jyy, a * jxy)
        if anisotropy(t) is None or abs(t.trace) < 1e-3:
            return
        assert anisotropy(s) == pytest.approx(anisotropy(t), rel=1e-9)


def check_invariants(kps, params=DetectorParams()):
    for kp in kps:
        assert all(abs(o) < 0.5 for o in kp.offset)
        assert abs(kp.response) >= params.tau_lc
        assert kp.cm < params.tau_plus or kp.cm > params.tau_minus
        assert kp.cm >= 0
        assert kp.level in range(1, params.n + 1)


class TestDetect:
    def test_constant(self, backend):
        assert detect(np.full((96, 96), 0.4)) == []

    def test_range_checked(self):
        with pytest.raises(ValueError):
            detect(np.full((96, 96), 1.5))

    def test_too_small(self):
        with pytest.raises(ValueError):
            detect(np.zeros((24, 24)))

    def test_straight_edge(self, backend):
        kps = detect(make_synthetic("step_edge", 128, 128))
        assert kps == []

    def test_blobs(self, backend):
        yy, xx = np.mgrid[0:128, 0:128].astype(float)
        img = np.zeros((128, 128))
        centres = [(40, 40), (90, 40), (40, 90), (88, 86)]
        for cx, cy in centres:
            img += 0.8 * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * 2.5 ** 2))
        kps = detect(img)
        check_invariants(kps)
        for cx, cy in centres:
            d = min(math.hypot(k.x - cx, k.y - cy) for k in kps)
            assert d < 0.5

    def test_invariants_on_texture(self, backend):
        kps = detect(make_synthetic("random_texture", 160, 160, seed=4))
        assert len(kps) > 50
        check_invariants(kps)
        resp = [abs(k.response) for k in kps]
        assert resp == sorted(resp, reverse=True)

    def test_cap(self):
        img = make_synthetic("random_texture", 128, 128, seed=2)
        kps = detect(img, DetectorParams(max_keypoints=10))
        assert kps == detect(img)[:10]

    def test_deterministic(self):
        img = make_synthetic("random_texture", 128, 128, seed=9)
        assert detect(img) == detect(img)

    def test_backends_identical(self, monkeypatch):
        from conftest import BACKENDS
        from ffd import _backend
        img = make_synthetic("random_texture", 128, 128, seed=5)
        results = []
        for impl in BACKENDS.values():
            monkeypatch.setattr(_backend, "separable_convolve", impl.separable_convolve)
            monkeypatch.setattr(_backend, "find_extrema", impl.find_extrema)
            results.append([(k.level, round(k.x, 9), round(k.y, 9)) for k in detect(img)])
        assert all(r == results[0] for r in results)

    def test_intensity_shift(self):
        img = 0.9 * make_synthetic("random_texture", 128, 128, seed=6)
        a, b = detect(img), detect(img + 0.1)
        assert len(a) == len(b)
        for p, q in zip(a, b):
            assert p.level == q.level
            assert (p.x, p.y, p.response, p.cm) == pytest.approx((q.x, q.y, q.response, q.cm),
                                                                 abs=1e-9)

    def test_contrast_monotone(self):
        img = 0.6 * make_synthetic("random_texture", 128, 128, seed=8)
        base = {(k.level, round(k.x, 6), round(k.y, 6)) for k in detect(img)}
        scaled = {(k.level, round(k.x, 6), round(k.y, 6)) for k in detect(1.5 * img)}
        assert base <= scaled
        assert len(scaled) > len(base)

    def test_single_shot_is_subset(self):
        img = make_synthetic("random_texture", 128, 128, seed=3)
        sp = build_scale_space(img)
        one = {(k.level, k.x, k.y) for k in detect_in_space(sp, DetectorParams(max_relocalizations=0))}
        many = {(k.level, k.x, k.y) for k in detect_in_space(sp, DetectorParams())}
        assert one <= many


def test_checkerboard_corner_neighbourhoods():
    """A symmetric X-junction has zero response at its centre, so keypoints
    ring each checkerboard corner on its diagonals, all at one distance."""
    kps = detect(make_synthetic("checkerboard", 256, 256, cell=32))
    pts = np.array([(k.x, k.y) for k in kps])
    dists = []
    for i in range(1, 8):
        for j in range(1, 8):
            cx, cy = 32 * i - 0.5, 32 * j - 0.5
            d = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)
            near = pts[d < 5] - (cx, cy)
            assert len(near) >= 3
            np.testing.assert_allclose(np.abs(near[:, 0]), np.abs(near[:, 1]), atol=1e-6)
            dists.append(d.min())
    assert np.ptp(dists) < 1e-6
