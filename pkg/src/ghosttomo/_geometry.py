"""Ray sampling geometry shared by both projector backends."""
import math

import numpy as np


def ray_padding(n: int) -> int:
    # enough extra samples per side that a ray crosses the whole rotated square
    return int(math.ceil((math.sqrt(2.0) - 1.0) * n / 2.0))


def sample_points(n: int, angle: float, axis_offset: float):
    """Return (r1, r3) sample coordinates, shape (n_detector, n_samples).

    Detector pixel ``i`` sits at ``u = i - (c + axis_offset)`` from the
    projected rotation axis and ray sample ``k`` at ``s = k - c - pad`` along
    the beam, where ``c = (n - 1) / 2`` is the slice centre.
    """
    c = (n - 1) / 2.0
    pad = ray_padding(n)
    u = np.arange(n, dtype=np.float64) - (c + axis_offset)
    s = np.arange(n + 2 * pad, dtype=np.float64) - (c + pad)
    cos, sin = math.cos(angle), math.sin(angle)
    r1 = c + u[:, None] * cos + s[None, :] * sin
    r3 = c - u[:, None] * sin + s[None, :] * cos
    return r1, r3
