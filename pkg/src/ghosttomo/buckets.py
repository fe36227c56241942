"""Bucket measurements from projections and illumination patterns.

Patterns are binary, so a :class:`PatternSet` keeps them bit-packed and
expands one angle's worth at a time.  A 90-angle, 4000-pattern campaign
at 64 x 64 then needs about 180 MB instead of several GB.
"""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, ParameterError, ShapeError
from .masks import Mask, ShiftEnsemble
from .projector import AngleSet, project_all

MODELS = ("attenuation", "transmission")


class PatternSet:
    """An ordered set of binary n x n illumination patterns.

    Build with :meth:`random`, :meth:`from_ensemble` or :meth:`from_array`.
    """

    def __init__(self, bits: np.ndarray, n: int, count: int, meta: dict | None = None,
                 shifts=None):
        self._bits = bits
        self.n = int(n)
        self.count = int(count)
        self.meta = dict(meta or {})
        # (d2, d1) per pattern for shift ensembles, None otherwise
        self.shifts = shifts

    @classmethod
    def from_array(cls, patterns, meta=None, shifts=None) -> "PatternSet":
        patterns = np.asarray(patterns)
        if patterns.ndim != 3 or patterns.shape[1] != patterns.shape[2]:
            raise ShapeError(f"patterns must be (count, n, n), got {patterns.shape}")
        if not np.all((patterns == 0) | (patterns == 1)):
            raise ParameterError("patterns must be binary")
        count, n = patterns.shape[0], patterns.shape[1]
        bits = np.packbits(patterns.reshape(count, n * n).astype(bool), axis=1)
        return cls(bits, n, count, meta or {"kind": "array"}, shifts)

    @classmethod
    def random(cls, n: int, count: int, seed: int, mean: float = 0.5, chunk: int = 512) -> "PatternSet":
        """``count`` independent Bernoulli(mean) masks from ``default_rng(seed)``."""
        if not 0.0 < mean <= 1.0:
            raise ParameterError(f"mean must lie in (0, 1], got {mean}")
        if count < 0 or n < 1:
            raise ParameterError("need n >= 1 and count >= 0")
        rng = np.random.default_rng(seed)
        rows = []
        for start in range(0, count, chunk):
            k = min(chunk, count - start)
            rows.append(np.packbits(rng.random((k, n * n)) < mean, axis=1))
        bits = np.concatenate(rows) if rows else np.zeros((0, (n * n + 7) // 8), np.uint8)
        return cls(bits, n, count, {"kind": "iid", "n": int(n), "count": int(count),
                                    "seed": int(seed), "mean": float(mean)})

    @classmethod
    def from_ensemble(cls, ens: ShiftEnsemble) -> "PatternSet":
        meta = {"kind": ens.base.kind, "n": ens.n, "seed_or_prime": ens.base.seed_or_prime}
        return cls.from_array(ens.patterns(), meta, shifts=list(ens.shifts))

    def __len__(self):
        return self.count

    def dense(self, dtype=np.float64) -> np.ndarray:
        """Patterns as a ``(count, n*n)`` matrix."""
        flat = np.unpackbits(self._bits, axis=1, count=self.n * self.n)
        return flat.astype(dtype, copy=False)

    def pattern(self, j: int) -> np.ndarray:
        row = np.unpackbits(self._bits[j], count=self.n * self.n)
        return row.reshape(self.n, self.n)

    def subset(self, count: int) -> "PatternSet":
        if count > self.count:
            raise ParameterError(f"only {self.count} patterns available")
        shifts = None if self.shifts is None else self.shifts[:count]
        return PatternSet(self._bits[:count], self.n, count, self.meta, shifts)

    @cached_property
    def mean_pattern(self) -> np.ndarray:
        """Per-pixel mean over the set, flattened."""
        return self.dense().mean(axis=0)

    @cached_property
    def variance(self) -> float:
        """Spatially averaged per-pixel variance across patterns."""
        m = self.mean_pattern
        return float(np.mean(m - m * m))

    def digest(self) -> str:
        h = hashlib.sha256(self._bits.tobytes())
        h.update(f"{self.n}:{self.count}".encode())
        return h.hexdigest()[:16]


def _check_pair(pattern, proj):
    pattern = np.asarray(pattern, dtype=np.float64)
    proj = np.asarray(getattr(proj, "data", proj), dtype=np.float64)
    if pattern.shape != proj.shape:
        raise ShapeError(f"pattern {pattern.shape} and projection {proj.shape} differ")
    return pattern, proj


def bucket_attenuation(pattern, proj) -> float:
    """Weak-absorption bucket: the inner product of pattern and projection."""
    pattern, proj = _check_pair(pattern, proj)
    return float(np.sum(pattern * proj))


def bucket_transmission(pattern, proj) -> float:
    """Transmitted bucket ``sum I exp(-A)``."""
    pattern, proj = _check_pair(pattern, proj)
    return float(np.sum(pattern * np.exp(-proj)))


def angle_buckets(patterns: PatternSet, proj: np.ndarray, model: str = "attenuation") -> np.ndarray:
    """Every bucket of one angle at once."""
    proj = np.asarray(proj, dtype=np.float64)
    if proj.shape != (patterns.n, patterns.n):
        raise ShapeError(f"projection {proj.shape} does not match {patterns.n}x{patterns.n} patterns")
    field_ = proj if model == "attenuation" else np.exp(-proj)
    return patterns.dense() @ field_.ravel()


@dataclass
class BucketRecord:
    value: float
    angle_index: int
    mask_ref: tuple
    model: str = "attenuation"
    # reserved for a photon-noise model; always None
    noise: object = None


@dataclass
class Campaign:
    """Acquisition plan: one pattern set per angle, possibly shared."""
    angle_set: AngleSet
    patterns: list
    model: str = "attenuation"

    def __post_init__(self):
        if isinstance(self.patterns, PatternSet):
            self.patterns = [self.patterns] * len(self.angle_set)
        self.patterns = list(self.patterns)
        if len(self.patterns) != len(self.angle_set):
            raise ConfigurationError(
                f"{len(self.patterns)} pattern sets for {len(self.angle_set)} angles")
        if self.model not in MODELS:
            raise ConfigurationError(f"unknown bucket model {self.model!r}")
        counts = {p.count for p in self.patterns}
        if len(counts) != 1:
            raise ConfigurationError("every angle needs the same number of patterns")
        if len({p.n for p in self.patterns}) != 1:
            raise ConfigurationError("pattern sizes differ between angles")

    @property
    def m(self) -> int:
        return len(self.angle_set)

    @property
    def n_buckets(self) -> int:
        return self.patterns[0].count

    @property
    def total(self) -> int:
        return self.m * self.n_buckets

    def digest(self) -> str:
        payload = {
            "angles": self.angle_set.to_dict(),
            "model": self.model,
            "patterns": [p.digest() for p in self.patterns],
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class BucketSet:
    """Measured buckets of a campaign, ``values[angle, j]``."""
    values: np.ndarray
    campaign: Campaign
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.campaign.m, self.campaign.n_buckets):
            raise ShapeError(
                f"bucket array {self.values.shape} does not match campaign "
                f"({self.campaign.m}, {self.campaign.n_buckets})")

    def __len__(self):
        return self.values.size

    @property
    def model(self) -> str:
        return self.campaign.model

    def records(self):
        """BucketRecords in angle-major order."""
        for a, row in enumerate(self.values):
            pats = self.campaign.patterns[a]
            for j, v in enumerate(row):
                ref = (pats.digest(), j if pats.shifts is None else pats.shifts[j])
                yield BucketRecord(float(v), a, ref, self.model)

    def attenuation_values(self) -> np.ndarray:
        """Buckets in attenuation form; transmission data use ``sum I - B``."""
        if self.model == "attenuation":
            return self.values
        sums = np.stack([p.dense().sum(axis=1) for p in self.campaign.patterns])
        return sums - self.values


def run_campaign(vol, campaign: Campaign, workers: int = 1) -> BucketSet:
    """Project ``vol`` once per angle, then evaluate all buckets."""
    projs = project_all(vol, campaign.angle_set, workers=workers)
    if projs.shape[1:] != (campaign.patterns[0].n,) * 2:
        raise ShapeError(
            f"projections are {projs.shape[1:]} but patterns are {campaign.patterns[0].n}^2")

    def one(a):
        return angle_buckets(campaign.patterns[a], projs[a], campaign.model)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(one, range(campaign.m)))
    else:
        rows = [one(a) for a in range(campaign.m)]
    prov = {"campaign": campaign.digest(), "patterns": [p.meta for p in campaign.patterns[:1]]}
    return BucketSet(np.stack(rows), campaign, prov)


def random_campaign(angle_set: AngleSet, n: int, per_angle: int, seed: int,
                    model: str = "attenuation", mean: float = 0.5) -> Campaign:
    """Fresh random patterns for every angle, seeded ``(seed, angle index)``."""
    seeds = np.random.SeedSequence(seed).spawn(len(angle_set))
    sets = [PatternSet.random(n, per_angle, int(s.generate_state(1)[0]), mean) for s in seeds]
    return Campaign(angle_set, sets, model)


def mask_campaign(angle_set: AngleSet, mask: Mask, per_angle: int, policy: str = "different",
                  seed: int = 0, model: str = "attenuation") -> Campaign:
    """Shift-ensemble campaign for a single scanning mask.

    ``same`` reuses one random shift list at every angle; ``different``
    draws an independent list per angle.
    """
    from .masks import shift_ensemble

    if policy == "same":
        ens = shift_ensemble(mask, per_angle, "random", seed)
        shared = PatternSet.from_ensemble(ens)
        sets = [shared] * len(angle_set)
    elif policy == "different":
        seeds = np.random.SeedSequence(seed).spawn(len(angle_set))
        sets = [PatternSet.from_ensemble(
            shift_ensemble(mask, per_angle, "random", int(s.generate_state(1)[0])))
            for s in seeds]
    else:
        raise ParameterError(f"unknown shift policy {policy!r}")
    return Campaign(angle_set, sets, model)


def pattern_set_from_meta(meta: dict, shifts=None) -> PatternSet:
    """Rebuild a pattern set from its ``meta`` record (and shift list)."""
    from .masks import make_mask

    kind = meta.get("kind")
    if kind == "iid":
        return PatternSet.random(meta["n"], meta["count"], meta["seed"], meta.get("mean", 0.5))
    if kind in ("random", "mura", "frt"):
        if shifts is None:
            raise ConfigurationError("shift-ensemble patterns need their shift list")
        base = make_mask(kind, meta["n"], seed=meta.get("seed_or_prime") or 0)
        return PatternSet.from_ensemble(ShiftEnsemble(base, shifts))
    raise ConfigurationError(f"cannot rebuild patterns of kind {kind!r}")
