import json

import numpy as np
import pytest

from ghosttomo import io
from ghosttomo.buckets import mask_campaign, random_campaign, run_campaign
from ghosttomo.errors import ConfigurationError, ShapeError
from ghosttomo.masks import frt_mask, mura_mask, random_mask
from ghosttomo.projector import AngleSet
from ghosttomo.volume import SpherePhantomSpec, build_phantom


def test_raw_roundtrip(tmp_path, rng):
    a = rng.random((4, 5, 6)).astype(np.float32)
    path = io.write_raw(tmp_path / "v.raw", a, meta={"note": "x"})
    assert path.stat().st_size == a.size * 4
    assert np.array_equal(io.read_raw(path), a)
    meta = io.read_raw_meta(path)
    assert meta["shape"] == [4, 5, 6] and meta["axes"] == "r3,r2,r1" and meta["note"] == "x"


def test_raw_little_endian(tmp_path):
    io.write_raw(tmp_path / "v.raw", np.array([1.0]))
    assert (tmp_path / "v.raw").read_bytes() == np.array([1.0], "<f4").tobytes()


def test_raw_errors(tmp_path):
    np.zeros(5, np.float32).tofile(tmp_path / "bare.raw")
    with pytest.raises(ConfigurationError):
        io.read_raw(tmp_path / "bare.raw")
    with pytest.raises(ShapeError):
        io.read_raw(tmp_path / "bare.raw", shape=(2, 2))
    assert io.read_raw(tmp_path / "bare.raw", shape=(5,)).shape == (5,)


@pytest.mark.parametrize("mask", [mura_mask(11), frt_mask(7), random_mask(9, 3)])
def test_pgm_roundtrip(tmp_path, mask):
    path = io.write_pgm(tmp_path / "m.pgm", mask)
    assert path.read_bytes().startswith(b"P5\n")
    back = io.read_pgm(path)
    assert np.array_equal(back.data, mask.data)
    assert back.kind == mask.kind and back.seed_or_prime == mask.seed_or_prime


def test_png(tmp_path, rng):
    from PIL import Image

    io.write_png(tmp_path / "a.png", rng.random((8, 8)))
    io.write_png(tmp_path / "flat.png", np.ones((4, 4)))
    with Image.open(tmp_path / "a.png") as im:
        arr = np.array(im)
    assert arr.shape == (8, 8) and arr.max() == 255 and arr.min() == 0


@pytest.fixture(scope="module")
def tiny():
    return build_phantom(SpherePhantomSpec(n=11, sphere_diameter=2))


@pytest.mark.parametrize("model", ["attenuation", "transmission"])
def test_bucket_roundtrip_iid(tmp_path, tiny, model):
    bs = run_campaign(tiny, random_campaign(AngleSet.uniform(3), 11, 7, 5, model=model))
    io.write_buckets(tmp_path / "b.csv", bs)
    back = io.read_buckets(tmp_path / "b.csv")
    assert np.array_equal(back.values, bs.values)
    assert back.campaign.digest() == bs.campaign.digest()
    assert back.model == model
    header = json.loads((tmp_path / "b.json").read_text())
    assert header["per_angle"] == 7


def test_bucket_roundtrip_shift_ensemble(tmp_path, tiny):
    camp = mask_campaign(AngleSet.uniform(2), frt_mask(11), 9, "different", seed=1)
    bs = run_campaign(tiny, camp)
    io.write_buckets(tmp_path / "b.csv", bs)
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "j,angle_index,shift_dy1,shift_dy2,value"
    back = io.read_buckets(tmp_path / "b.csv")
    assert back.campaign.digest() == camp.digest()


def test_bucket_digest_mismatch_detected(tmp_path, tiny):
    bs = run_campaign(tiny, random_campaign(AngleSet.uniform(2), 11, 4, 0))
    io.write_buckets(tmp_path / "b.csv", bs)
    header = json.loads((tmp_path / "b.json").read_text())
    header["patterns"][0]["seed"] += 1
    (tmp_path / "b.json").write_text(json.dumps(header))
    with pytest.raises(ConfigurationError):
        io.read_buckets(tmp_path / "b.csv")
