"""The compiled core and the numpy fallback must agree."""
import numpy as np
import pytest

from ffd import _backend, _fallback

_core = pytest.importorskip("ffd._core")


def test_selected_backend():
    assert _backend.BACKEND in ("cython", "python")


@pytest.mark.parametrize("shape", [(33, 33), (64, 48), (17, 100)])
@pytest.mark.parametrize("step", [1, 2, 4])
def test_convolve_agree(shape, step, rng):
    img = rng.random(shape)
    taps = np.array([1, 4, 6, 4, 1]) / 16
    a = _core.separable_convolve(img, taps, step)
    b = _fallback.separable_convolve(img, taps, step)
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_extrema_agree(rng):
    stack = rng.random((5, 40, 50))
    stack[2, 10:12, 10] = 2.0  # plateau: no candidate
    a = _core.find_extrema(stack, [1, 2, 3], [2, 3, 5])
    b = _fallback.find_extrema(stack, [1, 2, 3], [2, 3, 5])
    np.testing.assert_array_equal(a, b)
    assert len(a) > 0


def test_extrema_level_check():
    with pytest.raises(ValueError):
        _core.find_extrema(np.zeros((3, 10, 10)), [2], [1])
    with pytest.raises(ValueError):
        _fallback.find_extrema(np.zeros((3, 10, 10)), [0], [1])
