import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ghosttomo.errors import CapacityError, ParameterError, ShapeError
from ghosttomo.masks import (Mask, ShiftEnsemble, autocorrelate, cyclic_autocorrelation,
                             cyclic_crosscorrelation, discrete_line, frt, frt_mask, is_prime,
                             make_mask, mura_mask, quadratic_character, random_mask,
                             shift_ensemble)

PRIMES = [5, 7, 11, 13, 17, 29, 59]


def test_mura_5_table():
    expected = np.array([
        [0, 0, 0, 0, 0],
        [1, 1, 0, 0, 1],
        [1, 0, 1, 1, 0],
        [1, 0, 1, 1, 0],
        [1, 1, 0, 0, 1],
    ])
    assert np.array_equal(mura_mask(5).data, expected)


def test_quadratic_character_59():
    chi = quadratic_character(59)
    assert chi[0] == 0 and chi[1] == 1 and chi[2] == -1
    assert np.sum(chi == 1) == 29


@pytest.mark.parametrize("p", PRIMES)
@pytest.mark.parametrize("builder", [mura_mask, frt_mask])
def test_coded_masks_two_valued_autocorrelation(p, builder):
    rep = autocorrelate(builder(p))
    assert rep.offpeak_range <= 1
    assert abs(rep.raw_peak - p * p / 2) <= p


def test_59_reports():
    for m in (mura_mask(59), frt_mask(59)):
        rep = autocorrelate(m)
        assert rep.raw_peak == 1740
        assert (rep.offpeak_min, rep.offpeak_max) == (869, 870)


def test_frt_mask_equals_mura_at_5_and_differs_at_59():
    assert np.array_equal(frt_mask(5).data, mura_mask(5).data)
    assert np.sum(frt_mask(59).data != mura_mask(59).data) > 0


@pytest.mark.parametrize("p", [7, 11, 13])
def test_frt_projections_constant_plus_spike(p):
    bins = frt(frt_mask(p).data)
    for row in bins:
        vals = np.sort(np.unique(row))
        assert len(vals) <= 2
        if len(vals) == 2:
            assert np.sum(row == vals[1]) == 1 or np.sum(row == vals[0]) == 1


def test_frt_conserves_sum(rng):
    img = rng.integers(0, 5, (7, 7))
    bins = frt(img)
    assert np.all(bins.sum(axis=1) == img.sum())


def test_discrete_lines_through_origin_meet_only_there():
    p = 11
    lines = [discrete_line(p, m) for m in range(p + 1)]
    for i in range(p + 1):
        assert lines[i].sum() == p and lines[i][0, 0]
        for j in range(i):
            assert np.sum(lines[i] & lines[j]) == 1


def test_frt_mask_custom_directions():
    m = frt_mask(7, directions=[0, 1, 2, 3])
    assert autocorrelate(m).offpeak_range <= 1
    with pytest.raises(ParameterError):
        frt_mask(7, directions=[0, 1])


def test_random_mask_offpeak_range_large():
    ranges = [autocorrelate(random_mask(59, s)).offpeak_range for s in range(20)]
    assert min(ranges) >= 50


def test_random_mask_mean_and_determinism():
    a, b = random_mask(64, 3), random_mask(64, 3)
    assert np.array_equal(a.data, b.data)
    assert abs(a.mean - 0.5) < 0.03
    assert abs(random_mask(64, 3, mean=0.2).mean - 0.2) < 0.03
    with pytest.raises(ParameterError):
        random_mask(8, 0, mean=0.0)


def test_non_prime_rejected():
    assert not is_prime(1) and not is_prime(57) and is_prime(59)
    for kind in ("mura", "frt"):
        with pytest.raises(ParameterError):
            make_mask(kind, 64)


def test_mask_validation():
    with pytest.raises(ShapeError):
        Mask(np.zeros((3, 4)), "random")
    with pytest.raises(ParameterError):
        Mask(np.full((3, 3), 2), "random")


def test_sequential_shifts():
    ens = shift_ensemble(mura_mask(5), 3)
    assert ens.shifts == [(0, 0), (0, 1), (0, 2)]
    assert np.array_equal(ens.pattern(1), np.roll(mura_mask(5).data, 1, axis=1))


def test_random_shifts_distinct_and_seeded():
    a = shift_ensemble(mura_mask(11), 50, "random", seed=4)
    b = shift_ensemble(mura_mask(11), 50, "random", seed=4)
    assert a.shifts == b.shifts and len(set(a.shifts)) == 50


def test_capacity():
    base = mura_mask(5)
    assert len(shift_ensemble(base, 25)) == 25
    with pytest.raises(CapacityError, match=r"\(MN\)_max"):
        shift_ensemble(base, 26)
    with pytest.raises(ParameterError):
        ShiftEnsemble(base, [(0, 0), (0, 0)])


def test_crosscorrelation_brute_force(rng):
    a, b = rng.random((8, 8)), rng.random((8, 8))
    c = cyclic_crosscorrelation(a, b)
    for d0 in range(8):
        for d1 in range(8):
            assert np.isclose(c[d0, d1], np.sum(np.roll(a, (d0, d1), axis=(0, 1)) * b))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), s0=st.integers(0, 6), s1=st.integers(0, 6))
def test_autocorrelation_shift_invariant(seed, s0, s1):
    a = np.random.default_rng(seed).integers(0, 2, (7, 7))
    r = cyclic_autocorrelation(a)
    r2 = cyclic_autocorrelation(np.roll(a, (s0, s1), axis=(0, 1)))
    assert np.allclose(r, r2)
    assert np.isclose(r[0, 0], a.sum())
    # symmetric: R[d] = R[-d]
    assert np.allclose(r, np.roll(r[::-1, ::-1], 1, axis=(0, 1)))


@pytest.mark.parametrize("builder", [mura_mask, frt_mask])
def test_full_ensemble_gram_nearly_orthogonal(builder):
    ens = shift_ensemble(builder(11), 121)
    g = ens.patterns().reshape(121, -1).astype(float)
    g -= g.mean(axis=0)
    gram = g @ g.T
    off = gram[~np.eye(121, dtype=bool)]
    # mean-subtracted shifts of a perfect array are equally correlated
    assert np.ptp(off) <= 1 + 1e-9
    assert np.min(np.diag(gram)) > 20 * np.max(np.abs(off))
