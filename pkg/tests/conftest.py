import sys
import numpy as np
import pytest

from ffd import _backend, _fallback

try:
    from ffd import _core
except ImportError:  # extension not built
    _core = None

BACKENDS = {"python": _fallback}
if _core is not None:
    BACKENDS["cython"] = _core


@pytest.fixture(params=sorted(BACKENDS))
def backend(request, monkeypatch):
    """Run the test once per available compute backend."""
    impl = BACKENDS[request.param]
    monkeypatch.setattr(_backend, "separable_convolve", impl.separable_convolve)
    monkeypatch.setattr(_backend, "find_extrema", impl.find_extrema)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
