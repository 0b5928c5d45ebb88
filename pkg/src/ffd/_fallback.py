"""Pure numpy versions of the compiled kernels in ``_core.pyx``."""
import numpy as np


def separable_convolve(image, taps, step):
    image = np.ascontiguousarray(image, dtype=np.float64)
    taps = np.asarray(taps, dtype=np.float64)
    r = (len(taps) // 2) * step
    h, w = image.shape

    padded = np.pad(image, ((0, 0), (r, r)), mode="reflect")
    tmp = np.zeros_like(image)
    for t, c in enumerate(taps):
        off = t * step
        tmp += c * padded[:, off:off + w]

    padded = np.pad(tmp, ((r, r), (0, 0)), mode="reflect")
    out = np.zeros_like(image)
    for t, c in enumerate(taps):
        off = t * step
        out += c * padded[off:off + h, :]
    return out


_OFFSETS = [(dk, dy, dx)
            for dk in (-1, 0, 1) for dy in (-1, 0, 1) for dx in (-1, 0, 1)
            if (dk, dy, dx) != (0, 0, 0)]


def find_extrema(stack, levels, margins):
    stack = np.asarray(stack, dtype=np.float64)
    _, h, w = stack.shape
    rows = []
    for k, m in zip(levels, margins):
        if k < 1 or k + 1 >= stack.shape[0]:
            raise ValueError("extrema level needs a scale neighbour on both sides")
        if h - 2 * m <= 0 or w - 2 * m <= 0:
            continue
        centre = stack[k, m:h - m, m:w - m]
        is_max = np.ones(centre.shape, dtype=bool)
        is_min = np.ones(centre.shape, dtype=bool)
        for dk, dy, dx in _OFFSETS:
            nb = stack[k + dk, m + dy:h - m + dy, m + dx:w - m + dx]
            is_max &= centre > nb
            is_min &= centre < nb
        ys, xs = np.nonzero(is_max | is_min)
        pol = np.where(is_max[ys, xs], 1, -1)
        rows.append(np.column_stack([np.full_like(ys, k), ys + m, xs + m, pol]))
    if not rows:
        return np.empty((0, 4), dtype=np.int64)
    return np.concatenate(rows).astype(np.int64)
