"""Reconstruction and bucket-fit metrics."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NormalizationError, ParameterError, ShapeError

SCHEMA_VERSION = 1

# expected bucket of a mean-0.5 mask on the default phantom:
# 0.5 * (three spheres of diameter 12)
DEFAULT_BUCKET_NORMALIZER = 0.5 * 3 * (4.0 / 3.0) * math.pi * 6**3


@dataclass
class MetricReport:
    mad: float | None = None
    rmse_buckets: float | None = None
    max_value_used_for_normalization: float | None = None

    def __post_init__(self):
        for name in ("mad", "rmse_buckets"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ParameterError(f"{name} must be non-negative")

    def to_dict(self):
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def mad(estimate, truth) -> float:
    """Mean absolute deviation after scaling both arrays by ``1 / max(truth)``.

    Joint scaling keeps a biased estimate's error visible.
    """
    est = np.asarray(estimate, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    if est.shape != tru.shape:
        raise ShapeError(f"shape mismatch {est.shape} vs {tru.shape}")
    peak = np.max(tru) if tru.size else 0.0
    if peak <= 0:
        raise NormalizationError("truth has no positive maximum to normalise by")
    return float(np.mean(np.abs(est - tru)) / peak)


def bucket_rmse(estimated, measured, normalizer: float = DEFAULT_BUCKET_NORMALIZER) -> float:
    est = np.asarray(estimated, dtype=np.float64).ravel()
    meas = np.asarray(measured, dtype=np.float64).ravel()
    if est.shape != meas.shape:
        raise ShapeError(f"{est.size} estimated buckets vs {meas.size} measured")
    if not normalizer > 0:
        raise ParameterError("normalizer must be positive")
    return float(np.sqrt(np.mean((est - meas) ** 2)) / normalizer)


def expected_bucket(mask_mean: float, projected_mass: float) -> float:
    """Normaliser for a general campaign: mask mean times projected mass."""
    return float(mask_mean * projected_mass)


def report(estimate=None, truth=None, estimated_buckets=None, measured_buckets=None,
           normalizer: float = DEFAULT_BUCKET_NORMALIZER) -> MetricReport:
    out = MetricReport()
    if estimate is not None and truth is not None:
        out.mad = mad(estimate, truth)
        out.max_value_used_for_normalization = float(np.max(truth))
    if estimated_buckets is not None and measured_buckets is not None:
        out.rmse_buckets = bucket_rmse(estimated_buckets, measured_buckets, normalizer)
    return out


def write_curve_csv(path, values, header=("iteration", "value")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, v in enumerate(values, start=1):
            w.writerow([i, repr(float(v))])
