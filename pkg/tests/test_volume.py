import math

import numpy as np
import pytest

from ghosttomo.errors import ConfigurationError, ShapeError
from ghosttomo.volume import SpherePhantomSpec, Volume, build_phantom, default_centers, sphere_volume


def test_phantom_shape_and_values(phantom):
    assert phantom.data.shape == (64, 64, 64)
    assert set(np.unique(phantom.data)) <= {0.0, 1.0}


def test_phantom_mass_close_to_three_spheres(phantom):
    expected = 3 * sphere_volume(12)
    assert abs(phantom.total() - expected) / expected < 0.05


def test_slice_18_cuts_three_discs(phantom):
    from scipy import ndimage

    _, count = ndimage.label(phantom.slice_r3(18) > 0)
    assert count == 3


def test_default_centers_scale():
    c64 = np.array(default_centers(64))
    c32 = np.array(default_centers(32))
    assert np.allclose(c32, c64 * 0.5, atol=0.5)


def test_spec_roundtrip_and_validation():
    spec = SpherePhantomSpec(n=32, sphere_diameter=6)
    assert SpherePhantomSpec(**spec.to_dict()).to_dict() == spec.to_dict()
    with pytest.raises(ConfigurationError):
        build_phantom(SpherePhantomSpec(n=0))
    with pytest.raises(ConfigurationError):
        build_phantom(SpherePhantomSpec(n=16, sphere_diameter=-1))


def test_attenuation_scales_data():
    a = build_phantom(SpherePhantomSpec(n=16, sphere_diameter=3))
    b = build_phantom(SpherePhantomSpec(n=16, sphere_diameter=3, attenuation=2.5))
    assert np.allclose(b.data, 2.5 * a.data)


def test_volume_rejects_non_cubic():
    with pytest.raises(ShapeError):
        Volume(np.zeros((4, 4, 5)))


def test_sphere_volume():
    assert math.isclose(sphere_volume(2), 4 / 3 * math.pi)
