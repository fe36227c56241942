# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled projector kernels.

Same sampling as ``_kernels_py``: bilinear weights at points along each
ray, evaluated on the fly instead of through a stored sparse matrix.
Loops run without the GIL so callers may split angles across threads.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, floor, ceil, sqrt

BACKEND = "cython"

cnp.import_array()


cdef inline int _pad(int n) nogil:
    return <int>ceil((sqrt(2.0) - 1.0) * n / 2.0)


cdef void _project_angle(const double[:, :, ::1] vol, double angle, double offset,
                         double[:, ::1] out) noexcept nogil:
    cdef int n = vol.shape[0]
    cdef int pad = _pad(n)
    cdef int length = n + 2 * pad
    cdef double c = (n - 1) / 2.0
    cdef double ca = cos(angle), sa = sin(angle)
    cdef int i, k, j, i1, i3
    cdef double u, s, r1, r3, a, b, w00, w01, w10, w11, f1, f3
    for i in range(n):
        u = i - (c + offset)
        for k in range(length):
            s = k - (c + pad)
            r1 = c + u * ca + s * sa
            r3 = c - u * sa + s * ca
            f1 = floor(r1)
            f3 = floor(r3)
            i1 = <int>f1
            i3 = <int>f3
            if i1 < -1 or i1 >= n or i3 < -1 or i3 >= n:
                continue
            a = r1 - f1
            b = r3 - f3
            w00 = (1 - a) * (1 - b)
            w01 = a * (1 - b)
            w10 = (1 - a) * b
            w11 = a * b
            if i3 >= 0:
                if i1 >= 0 and w00 != 0:
                    for j in range(n):
                        out[i, j] += w00 * vol[i3, i1, j]
                if i1 + 1 < n and w01 != 0:
                    for j in range(n):
                        out[i, j] += w01 * vol[i3, i1 + 1, j]
            if i3 + 1 < n:
                if i1 >= 0 and w10 != 0:
                    for j in range(n):
                        out[i, j] += w10 * vol[i3 + 1, i1, j]
                if i1 + 1 < n and w11 != 0:
                    for j in range(n):
                        out[i, j] += w11 * vol[i3 + 1, i1 + 1, j]


cdef void _backproject_angle(const double[:, ::1] proj, double angle, double offset,
                             double[:, :, ::1] vol) noexcept nogil:
    cdef int n = vol.shape[0]
    cdef int pad = _pad(n)
    cdef int length = n + 2 * pad
    cdef double c = (n - 1) / 2.0
    cdef double ca = cos(angle), sa = sin(angle)
    cdef int i, k, j, i1, i3
    cdef double u, s, r1, r3, a, b, w00, w01, w10, w11, f1, f3
    for i in range(n):
        u = i - (c + offset)
        for k in range(length):
            s = k - (c + pad)
            r1 = c + u * ca + s * sa
            r3 = c - u * sa + s * ca
            f1 = floor(r1)
            f3 = floor(r3)
            i1 = <int>f1
            i3 = <int>f3
            if i1 < -1 or i1 >= n or i3 < -1 or i3 >= n:
                continue
            a = r1 - f1
            b = r3 - f3
            w00 = (1 - a) * (1 - b)
            w01 = a * (1 - b)
            w10 = (1 - a) * b
            w11 = a * b
            if i3 >= 0:
                if i1 >= 0 and w00 != 0:
                    for j in range(n):
                        vol[i3, i1, j] += w00 * proj[i, j]
                if i1 + 1 < n and w01 != 0:
                    for j in range(n):
                        vol[i3, i1 + 1, j] += w01 * proj[i, j]
            if i3 + 1 < n:
                if i1 >= 0 and w10 != 0:
                    for j in range(n):
                        vol[i3 + 1, i1, j] += w10 * proj[i, j]
                if i1 + 1 < n and w11 != 0:
                    for j in range(n):
                        vol[i3 + 1, i1 + 1, j] += w11 * proj[i, j]


def project_stack(vol_t, angles, double axis_offset):
    """vol_t is (r3, r1, r2); returns (M, x1, x2) line sums."""
    cdef const double[:, :, ::1] v = np.ascontiguousarray(vol_t, dtype=np.float64)
    cdef double[::1] ang = np.ascontiguousarray(angles, dtype=np.float64)
    cdef int n = v.shape[0]
    cdef Py_ssize_t m = ang.shape[0], t
    out = np.zeros((m, n, n), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    with nogil:
        for t in range(m):
            _project_angle(v, ang[t], axis_offset, o[t])
    return out


def backproject_stack(proj_t, angles, double axis_offset):
    """proj_t is (M, x1, x2); returns the un-normalised (r3, r1, r2) smear."""
    cdef const double[:, :, ::1] p = np.ascontiguousarray(proj_t, dtype=np.float64)
    cdef double[::1] ang = np.ascontiguousarray(angles, dtype=np.float64)
    cdef int n = p.shape[1]
    cdef Py_ssize_t m = ang.shape[0], t
    out = np.zeros((n, n, n), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    with nogil:
        for t in range(m):
            _backproject_angle(p[t], ang[t], axis_offset, o)
    return out
