"""File formats: raw float32 arrays, PGM masks, bucket CSV, PNG previews.

Every raw array ``x.raw`` has a sidecar ``x.raw.json`` recording shape,
dtype and axis order.  Masks are 8-bit PGM files holding 0 or 1 with a
``.json`` sidecar.  Bucket tables are CSV with a ``.json`` header that
is enough to regenerate every pattern.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .buckets import BucketSet, Campaign, pattern_set_from_meta
from .errors import ConfigurationError, ShapeError
from .masks import Mask
from .projector import AngleSet


def _sidecar(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_raw(path, array, axes: str = "r3,r2,r1", meta: dict | None = None) -> Path:
    """Dump ``array`` as little-endian float32 in C order."""
    arr = np.ascontiguousarray(np.asarray(array, dtype="<f4"))
    path = Path(path)
    arr.tofile(path)
    info = {"shape": list(arr.shape), "dtype": "float32", "byte_order": "little",
            "order": "C", "axes": axes, **(meta or {})}
    _sidecar(path).write_text(json.dumps(info, indent=2))
    return path


def read_raw(path, shape=None) -> np.ndarray:
    path = Path(path)
    side = _sidecar(path)
    if shape is None:
        if not side.exists():
            raise ConfigurationError(f"{path} has no sidecar; pass shape explicitly")
        shape = json.loads(side.read_text())["shape"]
    data = np.fromfile(path, dtype="<f4")
    if data.size != int(np.prod(shape)):
        raise ShapeError(f"{path} holds {data.size} values, expected shape {shape}")
    return data.reshape(shape).astype(np.float64)


def read_raw_meta(path) -> dict:
    side = _sidecar(path)
    return json.loads(side.read_text()) if side.exists() else {}


def write_pgm(path, mask: Mask) -> Path:
    """Binary PGM with one byte per pixel, values 0 or 1 (maxval 1)."""
    path = Path(path)
    data = np.asarray(mask.data, dtype=np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n1\n".encode("ascii"))
        fh.write(data.tobytes())
    path.with_suffix(".json").write_text(json.dumps(mask.to_dict(), indent=2))
    return path


def read_pgm(path) -> Mask:
    path = Path(path)
    with Image.open(path) as im:
        data = np.array(im)
    data = (data > 0).astype(np.uint8)
    side = path.with_suffix(".json")
    meta = json.loads(side.read_text()) if side.exists() else {"kind": "random"}
    return Mask(data, meta.get("kind", "random"), meta.get("seed_or_prime"))


def write_png(path, image, lo=None, hi=None) -> Path:
    """8-bit greyscale preview, linearly scaled between ``lo`` and ``hi``."""
    img = np.asarray(image, dtype=np.float64)
    lo = float(img.min()) if lo is None else lo
    hi = float(img.max()) if hi is None else hi
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    Image.fromarray(np.clip(np.rint((img - lo) * scale), 0, 255).astype(np.uint8)).save(path)
    return Path(path)


def write_buckets(path, buckets: BucketSet) -> Path:
    """CSV ``j, angle_index, shift_dy1, shift_dy2, value`` plus JSON header.

    Shift columns are -1 for independent random patterns.
    """
    path = Path(path)
    camp = buckets.campaign
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "angle_index", "shift_dy1", "shift_dy2", "value"])
        j = 0
        for a, row in enumerate(buckets.values):
            shifts = camp.patterns[a].shifts
            for k, v in enumerate(row):
                # shifts are stored (d2, d1); columns follow (dy1, dy2)
                d1, d2 = (shifts[k][1], shifts[k][0]) if shifts is not None else (-1, -1)
                w.writerow([j, a, d1, d2, repr(float(v))])
                j += 1
    header = {
        "model": camp.model,
        "angles": camp.angle_set.to_dict(),
        "per_angle": camp.n_buckets,
        "patterns": [p.meta for p in camp.patterns],
        "campaign": camp.digest(),
        "provenance": buckets.provenance,
    }
    path.with_suffix(".json").write_text(json.dumps(header, indent=2, default=str))
    return path


def read_buckets(path) -> BucketSet:
    """Load a bucket table and regenerate its patterns from the header."""
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    ang = header["angles"]
    angle_set = AngleSet(np.asarray(ang["angles"]), ang["axis_offset"])
    m, per = len(angle_set), int(header["per_angle"])
    values = np.empty((m, per))
    shifts = [[None] * per for _ in range(m)]
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            a, j = int(rec["angle_index"]), int(rec["j"]) % per
            values[a, j] = float(rec["value"])
            shifts[a][j] = (int(rec["shift_dy2"]), int(rec["shift_dy1"]))
    patterns = []
    cache = {}
    for a, meta in enumerate(header["patterns"]):
        sh = None if meta.get("kind") == "iid" else shifts[a]
        key = json.dumps([meta, sh], sort_keys=True)
        if key not in cache:
            cache[key] = pattern_set_from_meta(meta, sh)
        patterns.append(cache[key])
    camp = Campaign(angle_set, patterns, header["model"])
    if camp.digest() != header.get("campaign", camp.digest()):
        raise ConfigurationError("regenerated patterns do not match the recorded campaign digest")
    return BucketSet(values, camp, header.get("provenance", {}))
