"""Scripted studies: dose fractionation, ring artifacts, mask classes.

Every study is driven by an :class:`ExperimentSpec` and is fully
determined by it, including seeds.  Outputs go to a directory named by
the ExperimentSpec digest so that a changed configuration never overwrites an
older result.
"""
from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import ghost2d, ghost3d, io
from .buckets import PatternSet, mask_campaign, random_campaign, run_campaign, angle_buckets
from .errors import CapacityError, ConfigurationError
from .ghost2d import BucketOperator, SolverConfig, make_priors
from .masks import autocorrelate, make_mask, shift_ensemble
from .metrics import MetricReport, bucket_rmse, expected_bucket, mad
from .projector import AngleSet, project_all
from .volume import SpherePhantomSpec, build_phantom

STUDIES = ("dose", "ring", "masks", "methods2d", "tomography")
DEFAULT_SPLITS = ((90, 333), (30, 1000), (10, 3000), (7, 4000))
DEFAULT_MASK_COUNTS = (3481, 2610, 1740, 870)


@dataclass
class ExperimentSpec:
    name: str
    study: str
    phantom: dict = field(default_factory=dict)
    angles: int | None = None
    per_angle: int | None = None
    budget: int | None = None
    splits: list = field(default_factory=list)
    mask: dict = field(default_factory=lambda: {"kind": "random"})
    policy: str = "different"
    chain: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0])
    slice_index: int = 18
    output_dir: str | None = None

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ConfigurationError(f"unknown study {self.study!r}; choose from {STUDIES}")
        if self.policy not in ("same", "different"):
            raise ConfigurationError(f"unknown shift policy {self.policy!r}")
        self.splits = [tuple(int(v) for v in s) for s in self.splits]
        if self.budget is not None:
            if self.angles and self.per_angle and self.angles * self.per_angle != self.budget:
                raise ConfigurationError(
                    f"M*N = {self.angles * self.per_angle} differs from budget J = {self.budget}")
            for m, n in self.splits:
                # integer splits cannot always hit J exactly (90 * 333 = 29970)
                if not 0.9 * self.budget <= m * n <= self.budget:
                    raise ConfigurationError(f"split ({m}, {n}) does not use budget {self.budget}")

    def phantom_spec(self) -> SpherePhantomSpec:
        return SpherePhantomSpec(**self.phantom)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("output_dir")
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            return cls(**json.load(fh))


@dataclass
class Row:
    """One cell of a result table."""
    label: dict
    report: MetricReport
    extra: dict = field(default_factory=dict)

    def flat(self) -> dict:
        out = dict(self.label)
        out.update({k: v for k, v in self.report.to_dict().items() if k != "schema_version"})
        out.update(self.extra)
        return out


# -- helpers ------------------------------------------------------------------

def _chain_direct(buckets, chain):
    return ghost3d.direct_xc_sirt(
        buckets,
        iterations=chain.get("iterations", 10),
        relax=chain.get("relax", 1.5),
        clamp=chain.get("clamp", True),
        mean_correction=chain.get("mean_correction", True),
        normalizer=chain.get("normalizer", ghost3d.DEFAULT_BUCKET_NORMALIZER),
        check_divergence=chain.get("check_divergence", True),
    )


def _chain_two_step(buckets, chain):
    cfg = SolverConfig(chain.get("alpha", 0.025), chain.get("gi_iterations", 10),
                       make_priors(chain.get("priors", ())),
                       mean_correction=chain.get("mean_correction", True),
                       check_divergence=chain.get("check_divergence", False))
    tomo_priors = make_priors(chain.get("tomo_priors", ())) or None
    return ghost3d.two_step(
        buckets, chain.get("gi_method", "ixc"), cfg, chain.get("tomo", "fbp"),
        chain.get("tomo_iterations", 10), chain.get("relax", 1.5), chain.get("clamp", True),
        tomo_priors, chain.get("gi_init", "zero"),
        normalizer=chain.get("normalizer", ghost3d.DEFAULT_BUCKET_NORMALIZER))


def run_chain(buckets, chain: dict):
    """Run the reconstruction named by ``chain['method']``."""
    method = chain.get("method", "direct")
    if method == "direct":
        return _chain_direct(buckets, chain)
    if method == "two-step":
        return _chain_two_step(buckets, chain)
    raise ConfigurationError(f"unknown reconstruction chain {method!r}")


def _campaign(angle_set, n, per_angle, mask: dict, policy: str, seed: int):
    kind = mask.get("kind", "random")
    if kind == "iid":
        return random_campaign(angle_set, n, per_angle, seed, mean=mask.get("mean", 0.5))
    base = make_mask(kind, n, seed=mask.get("seed", seed), mean=mask.get("mean", 0.5))
    if per_angle > n * n:
        raise CapacityError(
            f"{per_angle} buckets per angle exceed the {n * n} distinct shifts of a "
            f"{n}x{n} mask")
    return mask_campaign(angle_set, base, per_angle, policy, seed)


# -- studies -------------------------------------------------------------------

def run_dose_fractionation(budget: int = 30000, splits=DEFAULT_SPLITS, seed: int = 0,
                           chain: dict | None = None, phantom: SpherePhantomSpec | None = None,
                           mask: dict | None = None, slice_index: int = 18) -> list:
    """Reconstruct at each (M, N) split of a fixed bucket budget.

    Returns one :class:`Row` per split with slice MAD and bucket RMSE.
    """
    chain = {"method": "direct", "iterations": 100, **(chain or {})}
    mask = mask or {"kind": "iid"}
    for m, n_b in splits:
        if m * n_b > budget:
            raise ConfigurationError(f"split ({m}, {n_b}) exceeds budget {budget}")
    vol = build_phantom(phantom)
    if not 0 <= slice_index < vol.n:
        raise ConfigurationError(f"slice index {slice_index} outside the {vol.n}^3 volume")
    truth = vol.data[slice_index]
    rows = []
    for m, n_b in splits:
        t0 = time.perf_counter()
        camp = _campaign(AngleSet.uniform(m), vol.n, n_b, mask, "different", seed)
        buckets = run_campaign(vol, camp)
        res = run_chain(buckets, chain)
        rep = MetricReport(mad(res.data[slice_index], truth), res.rmse, float(truth.max()))
        rows.append(Row({"M": m, "N": n_b, "seed": seed}, rep,
                        {"seconds": round(time.perf_counter() - t0, 2),
                         "slice": res.data[slice_index]}))
    return rows


def ring_metric(residual_slice: np.ndarray, center=None, radius=None) -> float:
    """Energy of the azimuthal mean of a residual, per pixel.

    The slice is binned by integer distance from the rotation axis and
    replaced by its ring averages; the mean square of that ring image
    over the disc of ``radius`` is returned.
    """
    res = np.asarray(residual_slice, dtype=np.float64)
    h, w = res.shape
    cy, cx = ((h - 1) / 2.0, (w - 1) / 2.0) if center is None else center
    radius = min(h, w) / 2.0 if radius is None else radius
    yy, xx = np.mgrid[0:h, 0:w]
    r = np.hypot(yy - cy, xx - cx)
    inside = r <= radius
    bins = np.rint(r[inside]).astype(int)
    sums = np.bincount(bins, weights=res[inside])
    counts = np.bincount(bins)
    ring_mean = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    return float(np.mean(ring_mean[bins] ** 2))


def axial_slice(data: np.ndarray, index: int | None = None) -> np.ndarray:
    """Slice perpendicular to the rotation axis, indexed [r3, r1]."""
    n = data.shape[1]
    return data[:, n // 2 if index is None else index, :]


def run_ring_artifact_study(kind: str = "frt", m: int = 90, per_angle: int = 1740,
                            policies=("same", "different"), seed: int = 0,
                            chain: dict | None = None, p: int = 59,
                            phantom: SpherePhantomSpec | None = None, ring_slice=None) -> dict:
    """Same versus different mask shifts per angle.

    Returns ``{policy: (TomogramResult, ring metric)}`` plus the phantom
    under key ``"truth"``.
    """
    chain = chain or {"method": "two-step", "gi_method": "xc", "tomo": "fbp"}
    vol = build_phantom(phantom or SpherePhantomSpec(n=p))
    if per_angle > vol.n ** 2:
        raise CapacityError(f"{per_angle} shifts exceed the {vol.n ** 2} available")
    base = make_mask(kind, vol.n, seed=seed)
    angle_set = AngleSet.uniform(m)
    truth = axial_slice(vol.data, ring_slice)
    out = {"truth": vol}
    for policy in policies:
        camp = mask_campaign(angle_set, base, per_angle, policy, seed)
        res = run_chain(run_campaign(vol, camp), chain)
        out[policy] = (res, ring_metric(axial_slice(res.data, ring_slice) - truth))
    return out


def ghost_estimate(buckets_row, patterns: PatternSet) -> np.ndarray:
    """Correlation estimate in attenuation units with the mean restored."""
    op = BucketOperator(patterns)
    return op.update(buckets_row, 1.0, True).reshape(op.n, op.n)


def run_mask_comparison(kinds=("random", "mura", "frt"), p: int = 59,
                        counts=DEFAULT_MASK_COUNTS, seed: int = 0,
                        phantom: SpherePhantomSpec | None = None) -> list:
    """Correlation images of the 0 degree projection for each mask class.

    Each class scans a single p x p mask over randomly chosen distinct
    shifts.  Rows carry the MAD and the mask's autocorrelation report.
    """
    vol = build_phantom(phantom or SpherePhantomSpec(n=p))
    proj = project_all(vol, [0.0], 0.0)[0]
    rows = []
    for kind in kinds:
        base = make_mask(kind, p, seed=seed)
        rep = autocorrelate(base).to_dict()
        for count in counts:
            ens = shift_ensemble(base, count, "random", seed)
            pats = PatternSet.from_ensemble(ens)
            est = ghost_estimate(angle_buckets(pats, proj), pats)
            rows.append(Row({"kind": kind, "count": count, "seed": seed},
                            MetricReport(mad(est, proj), None, float(proj.max())),
                            {"offpeak_range": rep["offpeak_range"], "raw_peak": rep["raw_peak"],
                             "image": est}))
    return rows


def run_method_comparison(bucket_counts=(1000, 4000), seed: int = 0, n: int = 64,
                          ixc_alpha=None, cs_iterations: int = 1000) -> list:
    """XC, IXC, CG-XC and CS-IXC on the 0 degree projection."""
    vol = build_phantom(SpherePhantomSpec(n=n))
    proj = project_all(vol, [0.0], 0.0)[0]
    alphas = ixc_alpha or {1000: 0.025, 4000: 0.25}
    rows = []
    for count in bucket_counts:
        pats = PatternSet.random(n, count, seed)
        b = angle_buckets(pats, proj)
        op = BucketOperator(pats)
        alpha = alphas.get(count, 0.25)
        runs = {
            "xc": ghost2d.xc(b, op),
            "ixc": ghost2d.ixc(b, op, SolverConfig(alpha, 10)),
            "cg": ghost2d.cg_xc(b, op, 10),
        }
        for prior in ("image", "gradient", "fourier"):
            cfg = SolverConfig(0.01, cs_iterations, make_priors([prior]), check_divergence=False)
            runs[f"cs-{prior}"] = ghost2d.cs_ixc(b, op, cfg)
        for name, img in runs.items():
            rows.append(Row({"method": name, "J": count, "seed": seed},
                            MetricReport(mad(img.data, proj), None, float(proj.max())),
                            {"image": img.data}))
    return rows


def run_tomography_comparison(m: int = 90, per_angle=(1000,), seed: int = 0,
                              direct: dict | None = None, two_step: dict | None = None) -> list:
    """Direct XC-SIRT versus the two-step pipeline at each bucket count."""
    direct = {"method": "direct", "iterations": 10, "clamp": False, **(direct or {})}
    two_step = {"method": "two-step", "gi_method": "ixc", "alpha": 0.025, "gi_iterations": 10,
                "gi_init": "xc", "tomo": "fbp_then_sirt", "tomo_iterations": 10,
                "clamp": False, **(two_step or {})}
    vol = build_phantom()
    truth = vol.data[18]
    rows = []
    for n_b in per_angle:
        buckets = run_campaign(vol, random_campaign(AngleSet.uniform(m), vol.n, n_b, seed))
        for name, chain in (("direct", direct), ("two-step", two_step)):
            res = run_chain(buckets, chain)
            rows.append(Row({"chain": name, "M": m, "N": n_b, "seed": seed},
                            MetricReport(mad(res.data[18], truth), res.rmse, float(truth.max())),
                            {"slice": res.data[18]}))
    return rows


# -- driver ----------------------------------------------------------------------

def run_experiment(spec: ExperimentSpec, out_root=None) -> Path | list:
    """Run ``spec`` for every seed; write outputs when a directory is given."""
    rows = []
    ch = spec.chain
    for seed in spec.seeds:
        if spec.study == "dose":
            rows += run_dose_fractionation(spec.budget or 30000, spec.splits or DEFAULT_SPLITS,
                                           seed, ch, spec.phantom_spec(), spec.mask,
                                           spec.slice_index)
        elif spec.study == "ring":
            out = run_ring_artifact_study(spec.mask.get("kind", "frt"), spec.angles or 90,
                                          spec.per_angle or 1740, seed=seed, chain=ch or None,
                                          p=spec.phantom.get("n", 59),
                                          phantom=spec.phantom_spec())
            for policy in ("same", "different"):
                res, metric = out[policy]
                rows.append(Row({"policy": policy, "seed": seed}, MetricReport(rmse_buckets=res.rmse),
                                {"ring_metric": metric, "slice": axial_slice(res.data)}))
        elif spec.study == "masks":
            rows += run_mask_comparison(p=spec.phantom.get("n", 59), seed=seed,
                                        phantom=spec.phantom_spec())
        elif spec.study == "methods2d":
            rows += run_method_comparison(seed=seed, n=spec.phantom.get("n", 64))
        else:
            rows += run_tomography_comparison(spec.angles or 90, (spec.per_angle or 1000,), seed)
    root = out_root or spec.output_dir
    if root is None:
        return rows
    return write_outputs(spec, rows, root)


IMAGE_KEYS = ("slice", "image")


def write_outputs(spec: ExperimentSpec, rows: list, root) -> Path:
    """Spec, CSV table, JSON reports, PNG images and a Markdown summary."""
    out = Path(root) / f"{spec.name}-{spec.digest()}"
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "spec.json", "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True, default=list)
    flat = []
    for i, row in enumerate(rows):
        d = row.flat()
        for key in IMAGE_KEYS:
            img = d.pop(key, None)
            if img is not None:
                name = f"row{i:03d}_{key}.png"
                io.write_png(out / name, img)
                d["png"] = name
        flat.append(d)
    cols = list(dict.fromkeys(k for d in flat for k in d))
    with open(out / "table.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        w.writerows(flat)
    with open(out / "metrics.json", "w") as fh:
        json.dump(flat, fh, indent=2, default=float)
    lines = [f"# {spec.name}", "", f"Study: {spec.study}. Spec digest `{spec.digest()}`.", "",
             "| " + " | ".join(c for c in cols if c != "png") + " |",
             "|" + "---|" * len([c for c in cols if c != "png"])]
    for d in flat:
        lines.append("| " + " | ".join(_fmt(d.get(c)) for c in cols if c != "png") + " |")
    pngs = [d["png"] for d in flat if "png" in d]
    if pngs:
        lines += ["", "## Images", ""] + [f"![{p}]({p})" for p in pngs]
    (out / "summary.md").write_text("\n".join(lines) + "\n")
    return out


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return "" if v is None else str(v)
