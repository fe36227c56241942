"""Pure numpy/scipy projector kernels.

Each viewing angle is a sparse (n_detector x n*n) matrix of bilinear
weights acting on one (r3, r1) slice; the r2 axis rides along as columns.
"""
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from ._geometry import sample_points

BACKEND = "python"


def _angle_matrix(n, angle, axis_offset):
    r1, r3 = sample_points(n, angle, axis_offset)
    f1 = np.floor(r1)
    f3 = np.floor(r3)
    a = r1 - f1
    b = r3 - f3
    f1 = f1.astype(np.int64)
    f3 = f3.astype(np.int64)
    det = np.broadcast_to(np.arange(n)[:, None], r1.shape)
    rows, cols, vals = [], [], []
    for d3, d1, w in (
        (0, 0, (1 - a) * (1 - b)),
        (0, 1, a * (1 - b)),
        (1, 0, (1 - a) * b),
        (1, 1, a * b),
    ):
        i3 = f3 + d3
        i1 = f1 + d1
        ok = (i3 >= 0) & (i3 < n) & (i1 >= 0) & (i1 < n) & (w != 0)
        rows.append(det[ok])
        cols.append(i3[ok] * n + i1[ok])
        vals.append(w[ok])
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n * n),
    )


@lru_cache(maxsize=8)
def system_matrix(n, angles, axis_offset):
    """Stacked (M*n, n*n) CSR matrix for a tuple of angles."""
    return sp.vstack([_angle_matrix(n, a, axis_offset) for a in angles], format="csr")


def project_stack(vol_t, angles, axis_offset):
    """vol_t is (r3, r1, r2); returns (M, x1, x2) line sums."""
    n = vol_t.shape[0]
    W = system_matrix(n, tuple(float(a) for a in angles), float(axis_offset))
    out = W @ vol_t.reshape(n * n, n)
    return out.reshape(len(angles), n, n)


def backproject_stack(proj_t, angles, axis_offset):
    """proj_t is (M, x1, x2); returns the un-normalised (r3, r1, r2) smear."""
    m, n, _ = proj_t.shape
    W = system_matrix(n, tuple(float(a) for a in angles), float(axis_offset))
    out = W.T @ proj_t.reshape(m * n, n)
    return np.asarray(out).reshape(n, n, n)
