"""Parallel-beam projection, back-projection and filtered back-projection.

Each fixed-r2 slice of the volume is rotated by the azimuthal angle about
the r2 axis and summed along the beam. Rotation is realised by bilinear
sampling at points along every ray, so :func:`back_project` is the exact
transpose of :func:`project_all` (divided by the number of angles).

The compiled kernels in ``_kernels`` are used when importable; otherwise
the sparse-matrix kernels in ``_kernels_py`` are. Set
``GHOSTTOMO_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels_py
from .errors import ConfigurationError, ShapeError
from .volume import Volume

try:
    if os.environ.get("GHOSTTOMO_BACKEND", "").lower() == "python":
        raise ImportError("python backend requested")
    from . import _kernels as _default_kernels
except ImportError:
    _default_kernels = _kernels_py

BACKEND = _default_kernels.BACKEND


def get_kernels(backend: str | None = None):
    if backend is None:
        return _default_kernels
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {backend!r}")


def nyquist_angle_count(n: int) -> int:
    """Number of azimuthal views needed for Nyquist angular sampling, ceil(pi n / 2)."""
    return int(math.ceil(math.pi * n / 2.0))


@dataclass
class AngleSet:
    angles: np.ndarray
    axis_offset: float = 0.5

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=np.float64).ravel()
        if self.angles.size == 0:
            raise ConfigurationError("angle set is empty")
        if np.any(self.angles < 0) or np.any(self.angles >= np.pi):
            raise ConfigurationError("angles must lie in [0, pi)")
        if np.any(np.diff(self.angles) <= 0):
            raise ConfigurationError("angles must be strictly increasing")

    @classmethod
    def uniform(cls, m: int, axis_offset: float = 0.5) -> "AngleSet":
        """``m`` angles evenly spaced over pi radians, starting at 0."""
        if m < 1:
            raise ConfigurationError("need at least one angle")
        return cls(np.arange(m) * np.pi / m, axis_offset)

    def __len__(self):
        return self.angles.size

    def with_offset(self, axis_offset: float) -> "AngleSet":
        return AngleSet(self.angles.copy(), axis_offset)

    def to_dict(self) -> dict:
        return {"angles": self.angles.tolist(), "axis_offset": self.axis_offset}


@dataclass
class ProjectionImage:
    """Projected attenuation at one angle, indexed ``data[x2, x1]``."""

    data: np.ndarray
    angle: float


def _as_array(vol) -> np.ndarray:
    data = vol.data if isinstance(vol, Volume) else np.asarray(vol, dtype=np.float64)
    if data.ndim != 3 or len(set(data.shape)) != 1:
        raise ShapeError(f"expected an n x n x n volume, got {data.shape}")
    return data


def _chunks(m, workers):
    bounds = np.linspace(0, m, min(workers, m) + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def project_all(vol, angles, axis_offset: float = 0.0, workers: int = 1,
                backend: str | None = None) -> np.ndarray:
    """Project ``vol`` at every angle; returns shape (M, n, n) as [angle, x2, x1]."""
    data = _as_array(vol)
    if isinstance(angles, AngleSet):
        axis_offset = angles.axis_offset
        angles = angles.angles
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    kern = get_kernels(backend)
    vol_t = np.ascontiguousarray(data.transpose(0, 2, 1))  # (r3, r1, r2)
    if workers <= 1 or len(angles) == 1:
        out = kern.project_stack(vol_t, angles, axis_offset)
    else:
        parts = _chunks(len(angles), workers)
        with ThreadPoolExecutor(len(parts)) as pool:
            results = list(pool.map(lambda s: kern.project_stack(vol_t, angles[s], axis_offset), parts))
        out = np.concatenate(results, axis=0)
    return np.ascontiguousarray(out.transpose(0, 2, 1))


def project(vol, angle: float, axis_offset: float = 0.0, backend: str | None = None) -> ProjectionImage:
    return ProjectionImage(project_all(vol, [angle], axis_offset, backend=backend)[0], float(angle))


def back_project(projs, angles, n: int | None = None, axis_offset: float = 0.0,
                 workers: int = 1, backend: str | None = None) -> np.ndarray:
    """Adjoint of :func:`project_all`, divided by the number of angles.

    ``projs`` has shape (M, n, n) in [angle, x2, x1] order. Returns an
    (r3, r2, r1) array; it is not wrapped in :class:`Volume` because
    back-projected residuals may be negative.

    With this normalisation ``<P v, p> = M <v, P* p>``.
    """
    if isinstance(angles, AngleSet):
        axis_offset = angles.axis_offset
        angles = angles.angles
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    projs = np.asarray(projs, dtype=np.float64)
    if projs.ndim == 2:
        projs = projs[None]
    if projs.ndim != 3 or projs.shape[1] != projs.shape[2]:
        raise ShapeError(f"projections must be (M, n, n), got {projs.shape}")
    if projs.shape[0] != len(angles):
        raise ShapeError(f"{projs.shape[0]} projections for {len(angles)} angles")
    if n is not None and projs.shape[1] != n:
        raise ShapeError(f"projections are {projs.shape[1]} wide, volume n={n}")
    kern = get_kernels(backend)
    proj_t = np.ascontiguousarray(projs.transpose(0, 2, 1))  # (M, x1, x2)
    if workers <= 1 or len(angles) == 1:
        acc = kern.backproject_stack(proj_t, angles, axis_offset)
    else:
        parts = _chunks(len(angles), workers)
        with ThreadPoolExecutor(len(parts)) as pool:
            results = list(pool.map(
                lambda s: kern.backproject_stack(proj_t[s], angles[s], axis_offset), parts))
        acc = np.sum(results, axis=0)
    return np.ascontiguousarray(acc.transpose(0, 2, 1)) / len(angles)


def ramp_filter(projs: np.ndarray) -> np.ndarray:
    """Ram-Lak filter along x1, zero-padded to twice the width.

    Uses the band-limited spatial kernel h[0] = 1/4, h[k odd] = -1/(pi k)^2
    so the DC response is correct on a finite grid.
    """
    projs = np.asarray(projs, dtype=np.float64)
    n = projs.shape[-1]
    size = 2 * n
    k = np.fft.fftfreq(size) * size  # integer lags with wrap-around
    h = np.zeros(size)
    h[0] = 0.25
    odd = (np.abs(k) % 2) == 1
    h[odd] = -1.0 / (np.pi * k[odd]) ** 2
    H = np.real(np.fft.rfft(h))
    spec = np.fft.rfft(projs, n=size, axis=-1) * H
    return np.fft.irfft(spec, n=size, axis=-1)[..., :n]


def fbp(projs, angles, axis_offset: float = 0.0, workers: int = 1,
        backend: str | None = None) -> np.ndarray:
    """Filtered back-projection over angles spanning pi radians."""
    projs = np.asarray(projs, dtype=np.float64)
    if projs.ndim == 2:
        projs = projs[None]
    filtered = ramp_filter(projs)
    return np.pi * back_project(filtered, angles, axis_offset=axis_offset,
                                workers=workers, backend=backend)
