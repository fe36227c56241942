"""Voxelised attenuation volumes and the three-sphere phantom.

Arrays are indexed ``data[r3, r2, r1]`` so that a C-order dump is
r3-major, then r2, then r1, and ``data[18]`` is the r3 = 18 slice.
The rotation axis of the projector is r2.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ShapeError

# (r1, r2, r3) centres for a 64^3 grid; every sphere cuts the r3 = 18 slice
# through its equator.
DEFAULT_CENTERS_64 = ((20.0, 22.0, 18.0), (42.0, 30.0, 18.0), (30.0, 44.0, 18.0))


@dataclass
class Volume:
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or len(set(self.data.shape)) != 1:
            raise ShapeError(f"volume must be n x n x n, got shape {self.data.shape}")
        if np.any(self.data < 0):
            raise ConfigurationError("attenuation values must be non-negative")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    def slice_r3(self, index: int) -> np.ndarray:
        return self.data[index]

    def total(self) -> float:
        return float(self.data.sum())


def default_centers(n: int) -> list[tuple[float, float, float]]:
    """Default sphere centres scaled from the 64^3 layout."""
    scale = n / 64.0
    return [tuple(float(round(c * scale)) for c in centre) for centre in DEFAULT_CENTERS_64]


@dataclass
class SpherePhantomSpec:
    n: int = 64
    sphere_diameter: float = 12.0
    attenuation: float = 1.0
    centers: list = field(default=None)

    def __post_init__(self):
        if self.centers is None:
            self.centers = default_centers(self.n)
        self.centers = [tuple(float(v) for v in c) for c in self.centers]

    def validate(self):
        if self.n < 1:
            raise ConfigurationError(f"n must be positive, got {self.n}")
        if self.sphere_diameter <= 0:
            raise ConfigurationError("sphere_diameter must be positive")
        if self.attenuation < 0:
            raise ConfigurationError("attenuation must be non-negative")
        radius = self.sphere_diameter / 2.0
        for idx, centre in enumerate(self.centers):
            if len(centre) != 3:
                raise ConfigurationError(f"sphere {idx}: centre needs three coordinates")
            # voxel centres span [0, n-1]; the sphere must not reach past them
            lo = min(centre) - radius
            hi = max(centre) + radius
            if lo < -0.5 or hi > self.n - 0.5:
                raise ConfigurationError(
                    f"sphere {idx} at {centre} with diameter {self.sphere_diameter} "
                    f"extends outside the {self.n}^3 grid"
                )
        for (i, a), (j, b) in itertools.combinations(enumerate(self.centers), 2):
            dist = float(np.linalg.norm(np.subtract(a, b)))
            if dist <= self.sphere_diameter:
                raise ConfigurationError(
                    f"spheres {i} and {j} overlap (centre distance {dist:.3f} "
                    f"<= diameter {self.sphere_diameter})"
                )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "sphere_diameter": self.sphere_diameter,
            "attenuation": self.attenuation,
            "centers": [list(c) for c in self.centers],
        }


def build_phantom(spec: SpherePhantomSpec | None = None) -> Volume:
    """Voxelise the spheres described by ``spec``.

    A voxel takes the value ``spec.attenuation`` when its centre lies
    strictly inside a sphere and 0 otherwise.
    """
    spec = spec or SpherePhantomSpec()
    spec.validate()
    n = spec.n
    r3, r2, r1 = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    inside = np.zeros((n, n, n), dtype=bool)
    radius2 = (spec.sphere_diameter / 2.0) ** 2
    for c1, c2, c3 in spec.centers:
        inside |= (r1 - c1) ** 2 + (r2 - c2) ** 2 + (r3 - c3) ** 2 < radius2
    return Volume(np.where(inside, spec.attenuation, 0.0))


def sphere_volume(diameter: float) -> float:
    return 4.0 / 3.0 * np.pi * (diameter / 2.0) ** 3
