"""Illumination masks: random binary, MURA and finite-Radon perfect arrays.

Masks are square binary arrays indexed ``[y2, y1]``.  All shifts and
correlations are cyclic.  A shift ``(d2, d1)`` moves mask content by
``d2`` rows and ``d1`` columns (``np.roll`` semantics).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ParameterError, ShapeError

KINDS = ("random", "mura", "frt")


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    k = 3
    while k * k <= p:
        if p % k == 0:
            return False
        k += 2
    return True


def _require_prime(p):
    if int(p) != p or not is_prime(int(p)):
        raise ParameterError(f"size must be prime, got {p}")
    return int(p)


def quadratic_character(p: int) -> np.ndarray:
    """Legendre symbol table ``chi[i]`` for i in [0, p).

    ``chi[0] = 0``, +1 for non-zero quadratic residues, -1 otherwise.
    """
    p = _require_prime(p)
    chi = -np.ones(p, dtype=np.int64)
    chi[(np.arange(1, p) ** 2) % p] = 1
    chi[0] = 0
    return chi


@dataclass
class Mask:
    data: np.ndarray
    kind: str
    seed_or_prime: int | None = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ShapeError(f"mask must be square, got shape {data.shape}")
        if not np.all((data == 0) | (data == 1)):
            raise ParameterError("mask values must be 0 or 1")
        if self.kind not in KINDS:
            raise ParameterError(f"unknown mask kind {self.kind!r}")
        if self.kind in ("mura", "frt"):
            _require_prime(data.shape[0])
        self.data = data.astype(np.uint8)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def mean(self) -> float:
        return float(self.data.mean())

    def shifted(self, shift) -> np.ndarray:
        return np.roll(self.data, tuple(int(s) for s in shift), axis=(0, 1))

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "seed_or_prime": self.seed_or_prime}


def random_mask(n: int, seed: int, mean: float = 0.5) -> Mask:
    """I.i.d. Bernoulli(mean) binary mask drawn with ``numpy.random.default_rng(seed)``."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not 0.0 < mean <= 1.0:
        raise ParameterError(f"mean must lie in (0, 1], got {mean}")
    rng = np.random.default_rng(seed)
    return Mask((rng.random((n, n)) < mean).astype(np.uint8), "random", seed)


def mura_mask(p: int) -> Mask:
    """Modified uniformly redundant array of prime side ``p``.

    Row 0 is closed, column 0 (below row 0) is open, and every other
    entry is open when the quadratic characters of its row and column
    indices agree.
    """
    p = _require_prime(p)
    chi = quadratic_character(p)
    a = (np.outer(chi, chi) == 1).astype(np.uint8)
    a[1:, 0] = 1
    a[0, :] = 0
    return Mask(a, "mura", p)


def discrete_line(p: int, m: int, t: int = 0) -> np.ndarray:
    """Boolean indicator of the FRT line ``(m, t)`` on a p x p grid.

    For ``m < p`` the line holds the points ``(x, (t + m x) mod p)``;
    ``m = p`` is the perpendicular family ``(t, y)``.
    """
    line = np.zeros((p, p), dtype=bool)
    x = np.arange(p)
    if m < p:
        line[x, (t + m * x) % p] = True
    else:
        line[t % p, :] = True
    return line


def frt(image: np.ndarray) -> np.ndarray:
    """Finite Radon transform of a prime-sized square array.

    Returns ``(p + 1, p)`` bins; row ``m`` sums the image along the
    lines of :func:`discrete_line`.
    """
    image = np.asarray(image)
    p = image.shape[0]
    if image.shape != (p, p):
        raise ShapeError(f"frt needs a square array, got {image.shape}")
    _require_prime(p)
    x = np.arange(p)[:, None]
    t = np.arange(p)[None, :]
    bins = np.empty((p + 1, p), dtype=np.result_type(image.dtype, np.int64))
    for m in range(p):
        bins[m] = image[x, (t + m * x) % p].sum(axis=0)
    bins[p] = image.sum(axis=1)
    return bins


def frt_mask(p: int, directions=None) -> Mask:
    """Binary perfect array built from discrete lines through the origin.

    The union of any ``(p + 1) / 2`` of the ``p + 1`` FRT lines through
    the origin, with the origin itself removed, has a cyclic
    autocorrelation that takes only two values off the origin, one
    apart.  Equivalently each of its FRT projections is a constant plus a
    single spike, the ideal 1D periodic sequence.

    Parameters
    ----------
    p : int
        Prime side length.
    directions : sequence of int, optional
        The ``(p + 1) / 2`` line slopes (0..p) to use.  By default a slope
        is used when the quadratic character of the norm of its direction
        vector is +1, which gives a balanced, symmetric array.
    """
    p = _require_prime(p)
    if p == 2:
        raise ParameterError("frt_mask needs an odd prime")
    k = (p + 1) // 2
    if directions is None:
        chi = quadratic_character(p)
        nonres = int(np.nonzero(chi == -1)[0][0])
        # direction (1, m) has norm 1 - r m^2 in GF(p^2) = GF(p)[sqrt(r)]
        norms = [(1 - nonres * m * m) % p for m in range(p)] + [(-nonres) % p]
        directions = [m for m in range(p + 1) if chi[norms[m]] == 1]
    directions = sorted(set(int(m) for m in directions))
    if len(directions) != k or not all(0 <= m <= p for m in directions):
        raise ParameterError(f"need {k} distinct slopes in [0, {p}], got {directions}")
    a = np.zeros((p, p), dtype=bool)
    for m in directions:
        a |= discrete_line(p, m)
    a[0, 0] = False
    return Mask(a.astype(np.uint8), "frt", p)


def make_mask(kind: str, n: int, seed: int = 0, mean: float = 0.5) -> Mask:
    if kind == "random":
        return random_mask(n, seed, mean)
    if kind == "mura":
        return mura_mask(n)
    if kind == "frt":
        return frt_mask(n)
    raise ParameterError(f"unknown mask kind {kind!r}")


@dataclass
class ShiftEnsemble:
    base: Mask
    shifts: list = field(default_factory=list)

    def __post_init__(self):
        n = self.base.n
        self.shifts = [(int(a), int(b)) for a, b in self.shifts]
        if len(self.shifts) > n * n:
            raise CapacityError(_capacity_message(len(self.shifts), n))
        if len(set(self.shifts)) != len(self.shifts):
            raise ParameterError("shifts must be distinct")
        for s in self.shifts:
            if not (0 <= s[0] < n and 0 <= s[1] < n):
                raise ParameterError(f"shift {s} outside [0, {n})")

    def __len__(self):
        return len(self.shifts)

    @property
    def n(self) -> int:
        return self.base.n

    def pattern(self, j: int) -> np.ndarray:
        return self.base.shifted(self.shifts[j])

    def patterns(self) -> np.ndarray:
        """All shifted patterns stacked as ``(count, n, n)`` uint8."""
        return np.stack([self.pattern(j) for j in range(len(self))]) if self.shifts \
            else np.zeros((0, self.n, self.n), dtype=np.uint8)


def _capacity_message(count, n):
    return (
        f"{count} shifts requested but a {n}x{n} mask has only {n * n} distinct cyclic "
        f"shifts; a physical scanning mask needs at least (MN)_max + {n * n} elements"
    )


def shift_ensemble(base: Mask, count: int, selection: str = "sequential", seed=None) -> ShiftEnsemble:
    """Distinct cyclic shifts of ``base``.

    ``sequential`` enumerates shifts in row-major order; ``random`` draws
    them uniformly without replacement from ``default_rng(seed)``.
    """
    n = base.n
    if count < 0:
        raise ParameterError("count must be non-negative")
    if count > n * n:
        raise CapacityError(_capacity_message(count, n))
    if selection == "sequential":
        flat = np.arange(count)
    elif selection == "random":
        flat = np.random.default_rng(seed).choice(n * n, size=count, replace=False)
    else:
        raise ParameterError(f"unknown selection {selection!r}")
    return ShiftEnsemble(base, [(int(f // n), int(f % n)) for f in flat])


def cyclic_autocorrelation(a: np.ndarray) -> np.ndarray:
    """Full periodic autocorrelation ``R[d] = sum_x a[x] a[x + d]``."""
    a = np.asarray(a, dtype=np.float64)
    f = np.fft.fft2(a)
    return np.real(np.fft.ifft2(f * np.conj(f)))


def cyclic_crosscorrelation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``C[d] = sum_x roll(a, d)[x] * b[x]`` for every cyclic shift d."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    # roll(a, d)[x] = a[x - d]
    return np.real(np.fft.ifft2(np.fft.fft2(b) * np.conj(np.fft.fft2(a))))


@dataclass
class AutocorrReport:
    raw_peak: float
    offpeak_min: float
    offpeak_max: float
    offpeak_range: float
    mean: float
    variance: float

    def to_dict(self):
        return {k: float(v) for k, v in self.__dict__.items()}


def autocorrelate(mask) -> AutocorrReport:
    """Raw (not mean-subtracted) cyclic autocorrelation summary."""
    data = mask.data if isinstance(mask, Mask) else np.asarray(mask)
    r = cyclic_autocorrelation(data)
    if np.issubdtype(data.dtype, np.integer) or data.dtype == bool:
        r = np.rint(r)
    off = r.ravel()[1:]
    if off.size == 0:
        off = r.ravel()
    lo, hi = float(off.min()), float(off.max())
    return AutocorrReport(
        raw_peak=float(r[0, 0]),
        offpeak_min=lo,
        offpeak_max=hi,
        offpeak_range=hi - lo,
        mean=float(data.mean()),
        variance=float(data.var()),
    )
