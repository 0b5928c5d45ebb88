# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: dilated separable convolution and 3x3x3 extrema scan.

Both must agree with :mod:`ffd._fallback` to rounding error.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _mirror(Py_ssize_t i, Py_ssize_t n) noexcept nogil:
    # reflection without repeating the edge sample; caller guarantees |offset| < n
    if i < 0:
        return -i
    if i >= n:
        return 2 * (n - 1) - i
    return i


def separable_convolve(const double[:, ::1] image, const double[::1] taps, Py_ssize_t step):
    """Convolve rows then columns with ``taps`` spaced ``step`` pixels apart."""
    cdef Py_ssize_t h = image.shape[0], w = image.shape[1]
    cdef Py_ssize_t nt = taps.shape[0], r = nt // 2
    cdef Py_ssize_t i, j, t, off, jj
    cdef double acc, c
    tmp_arr = np.empty((h, w), dtype=np.float64)
    out_arr = np.zeros((h, w), dtype=np.float64)
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[:, ::1] out = out_arr
    cdef const double[:, ::1] src = image

    with nogil:
        for i in range(h):
            # interior columns skip the mirror lookup
            for j in range(w):
                acc = 0.0
                if j - r * step >= 0 and j + r * step < w:
                    for t in range(nt):
                        acc = acc + taps[t] * src[i, j + (t - r) * step]
                else:
                    for t in range(nt):
                        jj = _mirror(j + (t - r) * step, w)
                        acc = acc + taps[t] * src[i, jj]
                tmp[i, j] = acc
        for i in range(h):
            for t in range(nt):
                c = taps[t]
                off = _mirror(i + (t - r) * step, h)
                for j in range(w):
                    out[i, j] = out[i, j] + c * tmp[off, j]
    return out_arr


def find_extrema(const double[:, :, ::1] stack, levels, margins):
    """Strict 26-neighbour extrema on the given levels.

    Returns an ``(n, 4)`` int64 array of ``(level, y, x, polarity)`` rows in
    level-major, row-major order; polarity is +1 for maxima and -1 for minima.
    """
    cdef Py_ssize_t h = stack.shape[1], w = stack.shape[2]
    cdef Py_ssize_t k, y, x, m, dk, dy, dx
    cdef double v, u
    cdef bint is_max, is_min
    found = []
    for k, m in zip(levels, margins):
        if k < 1 or k + 1 >= stack.shape[0]:
            raise ValueError("extrema level needs a scale neighbour on both sides")
        for y in range(m, h - m):
            for x in range(m, w - m):
                v = stack[k, y, x]
                is_max = True
                is_min = True
                for dk in range(-1, 2):
                    for dy in range(-1, 2):
                        for dx in range(-1, 2):
                            if dk == 0 and dy == 0 and dx == 0:
                                continue
                            u = stack[k + dk, y + dy, x + dx]
                            if u >= v:
                                is_max = False
                            if u <= v:
                                is_min = False
                        if not (is_max or is_min):
                            break
                    if not (is_max or is_min):
                        break
                if is_max:
                    found.append((k, y, x, 1))
                elif is_min:
                    found.append((k, y, x, -1))
    if not found:
        return np.empty((0, 4), dtype=np.int64)
    return np.asarray(found, dtype=np.int64)
