"""Select the compiled core if it was built, else the numpy fallback.

Set ``FFD_BACKEND=python`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("FFD_BACKEND", "").lower() not in ("python", "numpy"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

separable_convolve = _impl.separable_convolve
find_extrema = _impl.find_extrema
