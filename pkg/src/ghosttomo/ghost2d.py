"""Ghost-image recovery of one projection from bucket values.

All solvers work in projected attenuation.  With patterns ``I_j`` and
buckets ``B_j`` the correlation operator is

    C[r](x) = (1/N) sum_j (r_j - mean(r)) I_j(x)

and its adjoint maps an image T to the buckets ``<I_j | T>``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .buckets import PatternSet
from .errors import DivergenceError, EmptyDataError, ParameterError, ShapeError, SolverError

PRIOR_ORDER = ("image", "gradient", "fourier")


# -- sparsity priors ---------------------------------------------------------

def soft_threshold(v, lam):
    """``sign(v) * max(|v| - lam, 0)``."""
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def tv_step(u: np.ndarray, weight: float, eps: float = 1e-8) -> np.ndarray:
    """One explicit descent step on isotropic total variation.

    Works on arrays of any dimension with periodic forward differences.
    """
    u = np.asarray(u, dtype=np.float64)
    grads = [np.roll(u, -1, axis=a) - u for a in range(u.ndim)]
    mag = np.sqrt(sum(g * g for g in grads) + eps)
    div = np.zeros_like(u)
    for a, g in enumerate(grads):
        q = g / mag
        div += q - np.roll(q, 1, axis=a)
    return u + weight * div


def fourier_cutoff(u: np.ndarray, kappa: float) -> np.ndarray:
    """Remove every frequency above ``kappa`` times Nyquist along any axis.

    The pass band is a square (cube in 3D), so ``kappa = 1`` is the
    identity and the operator is idempotent.
    """
    if not 0.0 < kappa <= 1.0:
        raise ParameterError(f"kappa must be in (0, 1] of Nyquist, got {kappa}")
    u = np.asarray(u, dtype=np.float64)
    if kappa == 1.0:
        return u.copy()
    keep = np.ones(u.shape, dtype=bool)
    for a, size in enumerate(u.shape):
        f = np.abs(np.fft.fftfreq(size))
        shape = [1] * u.ndim
        shape[a] = size
        keep &= (f <= kappa * 0.5 + 1e-12).reshape(shape)
    return np.real(np.fft.ifftn(np.fft.fftn(u) * keep))


@dataclass
class ImagePrior:
    """Non-negative soft threshold at ``rel`` times the current maximum."""
    rel: float = 1e-3
    nonnegative: bool = True

    def apply(self, u):
        lam = self.rel * float(np.max(np.abs(u)))
        if self.nonnegative:
            return np.maximum(u - lam, 0.0)
        return soft_threshold(u, lam)


@dataclass
class GradientPrior:
    """``steps`` TV descent steps of size ``rel`` times the current maximum."""
    rel: float = 5e-4
    steps: int = 1

    def apply(self, u):
        w = self.rel * float(np.max(np.abs(u)))
        for _ in range(self.steps):
            u = tv_step(u, w)
        return u


@dataclass
class FourierPrior:
    kappa: float = 0.3

    def apply(self, u):
        return fourier_cutoff(u, self.kappa)


def make_priors(names=(), image_rel=1e-3, tv_rel=5e-4, tv_steps=1, kappa=0.3) -> dict:
    table = {
        "image": lambda: ImagePrior(image_rel),
        "gradient": lambda: GradientPrior(tv_rel, tv_steps),
        "fourier": lambda: FourierPrior(kappa),
    }
    out = {}
    for name in names:
        if name not in table:
            raise ParameterError(f"unknown prior {name!r}; choose from {PRIOR_ORDER}")
        out[name] = table[name]()
    return out


def apply_priors(u, priors: dict):
    for name in PRIOR_ORDER:
        if name in priors:
            u = priors[name].apply(u)
    return u


# -- configuration and results ----------------------------------------------

@dataclass
class SolverConfig:
    alpha: float = 0.25
    iterations: int = 10
    priors: dict = field(default_factory=dict)
    # restore the mean bucket each update; the correlation step alone cannot
    mean_correction: bool = False
    check_divergence: bool = True

    def __post_init__(self):
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha}")
        if self.iterations < 1:
            raise ParameterError(f"iterations must be >= 1, got {self.iterations}")
        if isinstance(self.priors, (list, tuple, set)):
            self.priors = make_priors(self.priors)
        for name in self.priors:
            if name not in PRIOR_ORDER:
                raise ParameterError(f"unknown prior {name!r}")


@dataclass
class GhostImage:
    data: np.ndarray
    method: str
    iterations: int = 0
    residuals: list = field(default_factory=list)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] != self.data.shape[1]:
            raise ShapeError(f"ghost image must be n x n, got {self.data.shape}")


# -- the bucket operator ------------------------------------------------------

class BucketOperator:
    """Dense view of one angle's patterns with the correlation algebra."""

    def __init__(self, patterns, dtype=np.float64):
        if not isinstance(patterns, PatternSet):
            arr = np.asarray(patterns)
            patterns = PatternSet.from_array(arr) if np.all((arr == 0) | (arr == 1)) \
                else _FloatPatterns(arr)
        self.patterns = patterns
        self.n = patterns.n
        self.dtype = dtype
        self.matrix = patterns.dense(dtype)
        self.count = self.matrix.shape[0]
        if isinstance(patterns, PatternSet):
            self.mean_pattern = patterns.mean_pattern
            self.sigma2 = patterns.variance
        else:
            self.mean_pattern = self.matrix.mean(axis=0, dtype=np.float64)
            self.sigma2 = float(np.mean(self.matrix.var(axis=0, dtype=np.float64)))
        if self.sigma2 <= 0:
            # identical patterns: the correlation is zero anyway
            self.sigma2 = 1.0
        self._mp_norm2 = float(self.mean_pattern @ self.mean_pattern)

    def forward(self, image) -> np.ndarray:
        v = np.asarray(image, dtype=self.dtype).ravel()
        return (self.matrix @ v).astype(np.float64)

    def correlate(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        return ((r - r.mean()).astype(self.dtype) @ self.matrix).astype(np.float64) / self.count

    def update(self, r, relax: float, mean_correction: bool = True) -> np.ndarray:
        """Flat update image ``relax * C[r] / sigma^2`` (+ mean-bucket term).

        With ``mean_correction`` the component along the mean pattern is
        replaced so that the update alone restores the mean bucket.
        """
        u = self.correlate(r) / self.sigma2
        if not mean_correction or self._mp_norm2 == 0:
            return relax * u
        mp = self.mean_pattern
        u = u - (mp @ u) / self._mp_norm2 * mp
        return relax * u + float(np.mean(r)) / self._mp_norm2 * mp


class _FloatPatterns:
    """Grey-level patterns; only used for algebraic tests."""

    def __init__(self, arr):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ShapeError(f"patterns must be (count, n, n), got {arr.shape}")
        self.n = arr.shape[1]
        self.count = arr.shape[0]
        self._flat = arr.reshape(self.count, -1)

    def dense(self, dtype=np.float64):
        return self._flat.astype(dtype, copy=False)


def _prepare(buckets, patterns):
    op = patterns if isinstance(patterns, BucketOperator) else BucketOperator(patterns)
    b = np.asarray(buckets, dtype=np.float64).ravel()
    if b.size < 1:
        raise EmptyDataError("no bucket values supplied")
    if b.size != op.count:
        raise ShapeError(f"{b.size} buckets but {op.count} patterns")
    return b, op


def _rms(r):
    return float(np.sqrt(np.mean(r * r)))


def _watch(log, patience=5):
    """True once the last ``patience`` steps all increased."""
    if len(log) <= patience:
        return False
    tail = log[-patience - 1:]
    return all(b > a * (1 + 1e-12) for a, b in zip(tail, tail[1:]))


# -- solvers ----------------------------------------------------------------

def xc(buckets, patterns) -> GhostImage:
    """Correlation estimate ``(1/N) sum_j (B_j - mean B) I_j``."""
    b, op = _prepare(buckets, patterns)
    return GhostImage(op.correlate(b).reshape(op.n, op.n), "xc", 0)


def ixc(buckets, patterns, cfg: SolverConfig | None = None, init=None) -> GhostImage:
    """Iterative correlation (Landweber) refinement with step ``alpha / sigma^2``.

    Raises
    ------
    DivergenceError
        When the bucket residual grows for five consecutive iterations.
    """
    cfg = cfg or SolverConfig()
    b, op = _prepare(buckets, patterns)
    t = np.zeros(op.n * op.n) if init is None else \
        np.array(getattr(init, "data", init), dtype=np.float64).ravel()
    if t.size != op.n * op.n:
        raise ShapeError(f"initial image has {t.size} pixels, expected {op.n * op.n}")
    r = b - op.forward(t)
    log = []
    for k in range(1, cfg.iterations + 1):
        t = t + op.update(r, cfg.alpha, cfg.mean_correction)
        if cfg.priors:
            t = apply_priors(t.reshape(op.n, op.n), cfg.priors).ravel()
        r = b - op.forward(t)
        log.append(_rms(r))
        if cfg.check_divergence and _watch(log):
            raise DivergenceError(
                f"bucket residual grew for 5 consecutive iterations (iteration {k}); "
                f"reduce alpha below {cfg.alpha}", iteration=k, residuals=log)
    method = "cs" if cfg.priors else "ixc"
    return GhostImage(t.reshape(op.n, op.n), method, cfg.iterations, log)


def cs_ixc(buckets, patterns, cfg: SolverConfig, init=None) -> GhostImage:
    """IXC with sparsity priors applied after every update."""
    if not cfg.priors:
        raise ParameterError("cs_ixc needs at least one prior")
    return ixc(buckets, patterns, cfg, init)


def cg_xc(buckets, patterns, iterations: int = 10, mean_correction: bool = False) -> GhostImage:
    """Conjugate-residual solve of the mean-subtracted normal equations.

    Minimises ``||A^T (b - A x)||`` over growing Krylov spaces, so the
    logged normal-equation residual never increases.  ``A`` holds the
    mean-subtracted patterns and ``b`` the mean-subtracted buckets.
    """
    if iterations < 1:
        raise ParameterError("iterations must be >= 1")
    b, op = _prepare(buckets, patterns)
    a = op.matrix
    mp = op.mean_pattern

    def normal(v):
        w = a @ v - mp @ v          # (I - 1 mp^T) v
        w = w - w.mean()
        return (w @ a - w.sum() * mp)

    bc = b - b.mean()
    x = np.zeros(op.n * op.n)
    r = bc @ a - bc.sum() * mp
    hr = normal(r)
    p, hp = r.copy(), hr.copy()
    rhr = float(r @ hr)
    log = [float(np.linalg.norm(r))]
    scale = log[0]
    for k in range(1, iterations + 1):
        if log[-1] <= 1e-13 * max(scale, 1.0):
            break
        hp2 = float(hp @ hp)
        if hp2 <= 0 or rhr <= 0:
            raise SolverError(f"zero-curvature search direction at iteration {k}", iteration=k)
        step = rhr / hp2
        x += step * p
        r -= step * hp
        hr = normal(r)
        rhr_new = float(r @ hr)
        beta = rhr_new / rhr
        rhr = rhr_new
        p = r + beta * p
        hp = hr + beta * hp
        log.append(float(np.linalg.norm(r)))
    if mean_correction and op._mp_norm2 > 0:
        x += float(np.mean(b - op.forward(x))) / op._mp_norm2 * mp
    return GhostImage(x.reshape(op.n, op.n), "cg", len(log) - 1, log[1:])
