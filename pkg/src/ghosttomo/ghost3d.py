"""Tomography from ghost data: two-step pipelines and direct XC-SIRT.

Reconstructions use the projector with ``recon_offset`` (default 0),
independent of the axis offset the data were simulated with.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import ghost2d
from .buckets import BucketSet
from .errors import DivergenceError, DomainError, GeometryError, ParameterError, ShapeError
from .ghost2d import BucketOperator, SolverConfig, apply_priors, make_priors
from .metrics import DEFAULT_BUCKET_NORMALIZER, bucket_rmse
from .projector import AngleSet, back_project, fbp, project_all
from .volume import Volume

GI_METHODS = ("xc", "ixc", "cg", "cs")
TOMO_METHODS = ("fbp", "sirt", "fbp_then_sirt")


@dataclass
class TomogramResult:
    """Reconstructed attenuation; ``data`` may hold small negative values."""
    data: np.ndarray
    method: str
    iterations: dict = field(default_factory=dict)
    rmse: float | None = None
    residuals: list = field(default_factory=list)

    @property
    def volume(self) -> Volume:
        return Volume(np.maximum(self.data, 0.0))

    def slice_r3(self, index: int = 18) -> np.ndarray:
        return self.data[index]


# dense float32 pattern matrices are kept in memory up to this size
CACHE_BYTES = 768 * 2**20


def _operators(patterns, dtype=np.float32, cache_bytes=CACHE_BYTES):
    """Callable ``a -> BucketOperator`` that caches when the budget allows."""
    unique = {id(p): p for p in patterns}
    size = sum(p.count * p.n * p.n for p in unique.values()) * np.dtype(dtype).itemsize
    if size <= cache_bytes:
        ops = {k: BucketOperator(p, dtype) for k, p in unique.items()}
        return lambda a: ops[id(patterns[a])]
    return lambda a: BucketOperator(patterns[a], dtype)


def _angles_of(angles):
    if isinstance(angles, AngleSet):
        return angles.angles
    return np.atleast_1d(np.asarray(angles, dtype=np.float64))


def cylinder_support(n: int) -> np.ndarray:
    """Voxels inside the cylinder of radius n/2 about the rotation axis."""
    c = (n - 1) / 2.0
    r = np.arange(n) - c
    disc = (r[:, None] ** 2 + r[None, :] ** 2) <= (n / 2.0) ** 2   # (r3, r1)
    return np.broadcast_to(disc[:, None, :], (n, n, n)).astype(np.float64)


@lru_cache(maxsize=8)
def _sirt_weights(n: int, angles: tuple, offset: float, support: str):
    """Row (per-ray) and column (per-voxel) normalisations for SIRT."""
    ang = np.asarray(angles)
    sup = cylinder_support(n) if support == "cylinder" else np.ones((n, n, n))
    lengths = project_all(sup, ang, offset)
    row = np.where(lengths > 1e-6, 1.0 / np.maximum(lengths, 1e-6), 0.0)
    hits = back_project(np.ones((len(ang), n, n)), ang, axis_offset=offset)
    col = sup / np.maximum(hits, 1e-6)
    return row, col


class _Sirt:
    """Weighted SIRT step ``x + relax * Cw P*(R res)`` on a fixed geometry."""

    def __init__(self, n, angles, offset=0.0, support="cylinder", workers=1):
        if support not in ("cylinder", "none"):
            raise ParameterError(f"unknown support {support!r}")
        self.n = n
        self.angles = np.asarray(angles, dtype=np.float64)
        self.offset = offset
        self.workers = workers
        self.row, self.col = _sirt_weights(n, tuple(self.angles.tolist()), float(offset), support)

    def project(self, x):
        return project_all(x, self.angles, self.offset, workers=self.workers)

    def step(self, residual_images, relax=1.0):
        bp = back_project(self.row * residual_images, self.angles,
                          axis_offset=self.offset, workers=self.workers)
        return relax * self.col * bp


def sirt(projs, angles, iterations: int = 32, relax: float = 1.5, clamp: bool = True,
         support: str = "cylinder", init=None, priors=None, recon_offset: float = 0.0,
         workers: int = 1) -> TomogramResult:
    """Simultaneous iterative reconstruction from projection images.

    Parameters
    ----------
    projs : ndarray, shape (M, n, n)
    relax : float
        Relaxation on the row/column-normalised update.
    clamp : bool
        Clip negative voxels after every update.
    priors : dict, optional
        Volume-domain priors from :func:`ghost2d.make_priors`, applied
        after each update.
    """
    projs = np.asarray(projs, dtype=np.float64)
    ang = _angles_of(angles)
    if projs.ndim != 3 or projs.shape[0] != len(ang):
        raise ShapeError(f"projections {projs.shape} do not match {len(ang)} angles")
    if iterations < 1:
        raise ParameterError("iterations must be >= 1")
    n = projs.shape[1]
    op = _Sirt(n, ang, recon_offset, support, workers)
    if init is None:
        x = np.zeros((n, n, n))
    else:
        # voxels outside the support are never updated, so start them at zero
        x = np.array(getattr(init, "data", init), dtype=np.float64) * (op.col > 0)
    log = []
    for _ in range(iterations):
        res = projs - op.project(x)
        log.append(float(np.sqrt(np.mean(res * res))))
        x = x + op.step(res, relax)
        if priors:
            x = apply_priors(x, priors)
        if clamp:
            np.maximum(x, 0.0, out=x)
    return TomogramResult(x, "sirt", {"sirt": iterations}, None, log)


def tomo_step(projs, angles, method: str = "fbp", iterations: int = 10, relax: float = 1.5,
              clamp: bool = True, priors=None, recon_offset: float = 0.0, workers: int = 1):
    """Tomographic stage of the two-step pipeline."""
    if method not in TOMO_METHODS:
        raise ParameterError(f"unknown tomography method {method!r}")
    ang = _angles_of(angles)
    if method == "fbp":
        x = fbp(projs, ang, axis_offset=recon_offset, workers=workers)
        return TomogramResult(x, "fbp", {"fbp": 1})
    init = None
    if method == "fbp_then_sirt":
        init = fbp(projs, ang, axis_offset=recon_offset, workers=workers)
        if clamp:
            init = np.maximum(init, 0.0)
    res = sirt(projs, ang, iterations, relax, clamp, init=init, priors=priors,
               recon_offset=recon_offset, workers=workers)
    res.method = method
    return res


def ghost_projections(buckets: BucketSet, gi_method: str = "ixc", cfg: SolverConfig | None = None,
                      init: str = "zero", workers: int = 1) -> np.ndarray:
    """Per-angle 2D ghost images, shape (M, n, n)."""
    if gi_method not in GI_METHODS:
        raise ParameterError(f"unknown ghost-imaging method {gi_method!r}")
    cfg = cfg or SolverConfig()
    values = buckets.attenuation_values()

    def one(a):
        op = BucketOperator(buckets.campaign.patterns[a])
        b = values[a]
        if gi_method == "xc":
            # scaled to attenuation units, unlike the raw 2D correlation
            return op.update(b, 1.0, cfg.mean_correction).reshape(op.n, op.n)
        if gi_method == "cg":
            return ghost2d.cg_xc(b, op, cfg.iterations, cfg.mean_correction).data
        start = ghost2d.xc(b, op).data / op.sigma2 if init == "xc" else None
        if gi_method == "cs":
            return ghost2d.cs_ixc(b, op, cfg, start).data
        return ghost2d.ixc(b, op, cfg, start).data

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return np.stack(list(pool.map(one, range(buckets.campaign.m))))
    return np.stack([one(a) for a in range(buckets.campaign.m)])


def predicted_buckets(buckets: BucketSet, x, recon_offset: float = 0.0, workers: int = 1):
    """Attenuation buckets of volume ``x`` under the campaign's patterns."""
    ang = buckets.campaign.angle_set.angles
    projs = project_all(x, ang, recon_offset, workers=workers)
    op = _operators(buckets.campaign.patterns)
    return np.stack([op(a).forward(projs[a]) for a in range(buckets.campaign.m)])


def two_step(buckets: BucketSet, gi_method: str = "ixc", cfg: SolverConfig | None = None,
             tomo: str = "fbp", tomo_iterations: int = 10, relax: float = 1.5,
             clamp: bool = True, tomo_priors=None, gi_init: str = "zero",
             recon_offset: float = 0.0, normalizer: float = DEFAULT_BUCKET_NORMALIZER,
             workers: int = 1) -> TomogramResult:
    """Ghost images per angle, then FBP or SIRT on the image stack."""
    if buckets.campaign.m < 2:
        raise GeometryError("two-step tomography needs at least two angles")
    cfg = cfg or SolverConfig()
    images = ghost_projections(buckets, gi_method, cfg, gi_init, workers)
    res = tomo_step(images, buckets.campaign.angle_set.angles, tomo, tomo_iterations, relax,
                    clamp, tomo_priors, recon_offset, workers)
    est = predicted_buckets(buckets, res.data, recon_offset, workers)
    res.rmse = bucket_rmse(est, buckets.attenuation_values(), normalizer)
    gi_its = 0 if gi_method == "xc" else cfg.iterations
    res.iterations = {gi_method: gi_its, **res.iterations}
    res.method = f"{gi_method}+{res.method}"
    return res


def _estimate(op: BucketOperator, b) -> np.ndarray:
    """Linear image estimate with the mean bucket restored."""
    return op.update(b, 1.0, True)


def direct_residual_nonweak(buckets: BucketSet, x, recon_offset: float = 0.0,
                            workers: int = 1) -> np.ndarray:
    """Attenuation residual images from transmission buckets.

    For every angle the correlation estimates ``E`` of the measured and
    of the predicted transmission buckets are compared in log space:
    ``log E[C* exp(-P x)] - log E[B]``.  Positive where attenuation is
    underestimated.

    Raises
    ------
    DomainError
        If either estimate is not strictly positive at some pixel.
    """
    if buckets.model != "transmission":
        raise ParameterError("non-weak residual needs transmission-model buckets")
    ang = buckets.campaign.angle_set.angles
    projs = project_all(np.asarray(getattr(x, "data", x), dtype=np.float64), ang,
                        recon_offset, workers=workers)
    out = np.empty_like(projs)
    for a, pats in enumerate(buckets.campaign.patterns):
        op = BucketOperator(pats)
        measured = _estimate(op, buckets.values[a])
        predicted = _estimate(op, op.forward(np.exp(-projs[a])))
        for name, est in (("measured", measured), ("predicted", predicted)):
            bad = np.flatnonzero(est <= 0)
            if bad.size:
                pix = divmod(int(bad[0]), op.n)
                raise DomainError(
                    f"{name} transmission estimate is not positive at pixel {pix} of angle {a}; "
                    f"use more buckets or a weaker absorber", angle_index=a, pixel=pix)
        out[a] = (np.log(predicted) - np.log(measured)).reshape(op.n, op.n)
    return out


def direct_xc_sirt(buckets: BucketSet, iterations: int = 10, relax: float = 1.5,
                   clamp: bool = True, mean_correction: bool = True,
                   inner_xc_iterations: int = 1, support: str = "cylinder", init=None,
                   recon_offset: float = 0.0, normalizer: float = DEFAULT_BUCKET_NORMALIZER,
                   check_divergence: bool = True, workers: int = 1) -> TomogramResult:
    """One-step tomography from buckets.

    Every iteration correlates each angle's bucket residual with its
    patterns, scales by ``1 / sigma^2`` and back-projects all of them in
    one SIRT update.  ``relax`` is the per-measurement step, i.e. the
    conventional ``beta`` times J.

    Parameters
    ----------
    inner_xc_iterations : int
        Extra IXC refinements of each residual image before
        back-projection.  Each one costs another pass over the patterns.
    clamp : bool
        Clip negative voxels after every update.  Off reproduces plain
        Landweber behaviour.
    """
    if iterations < 1:
        raise ParameterError("iterations must be >= 1")
    if inner_xc_iterations < 1:
        raise ParameterError("inner_xc_iterations must be >= 1")
    camp = buckets.campaign
    ang = camp.angle_set.angles
    n = camp.patterns[0].n
    op3 = _Sirt(n, ang, recon_offset, support, workers)
    nonweak = buckets.model == "transmission"
    values = buckets.attenuation_values()
    x = np.zeros((n, n, n)) if init is None else np.array(getattr(init, "data", init), dtype=np.float64)
    if x.shape != (n, n, n):
        raise ShapeError(f"initial volume {x.shape} does not match n={n}")

    get_op = _operators(camp.patterns)

    def predict(projs):
        return np.stack([get_op(a).forward(projs[a]) for a in range(camp.m)])

    def residual_images(resid):
        imgs = np.empty((camp.m, n, n))
        for a in range(camp.m):
            op = get_op(a)
            r = resid[a]
            delta = op.update(r, relax, mean_correction)
            for _ in range(inner_xc_iterations - 1):
                delta = delta + op.update(r - op.forward(delta), relax, mean_correction)
            imgs[a] = delta.reshape(n, n)
        return imgs

    est = predict(op3.project(x))
    log = []
    for k in range(1, iterations + 1):
        if nonweak:
            imgs = relax * direct_residual_nonweak(buckets, x, recon_offset, workers)
        else:
            imgs = residual_images(values - est)
        x = x + op3.step(imgs)
        if clamp:
            np.maximum(x, 0.0, out=x)
        est = predict(op3.project(x))
        log.append(bucket_rmse(est, values, normalizer))
        if check_divergence and ghost2d._watch(log):
            raise DivergenceError(
                f"bucket residual grew for 5 consecutive iterations (iteration {k}); "
                f"use a smaller relaxation than {relax}", iteration=k, residuals=log)
    return TomogramResult(x, "direct-xc-sirt", {"direct": iterations}, log[-1], log)
