import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fockdyn import classical as cl
from fockdyn.errors import BudgetExceeded, SliceError


# --- helpers ---------------------------------------------------------------

def trig_samples(v, xs):
    """Evaluate a Fourier-mode vector on grid points."""
    out = np.zeros(len(xs), dtype=complex)
    for mode, c in v.items():
        out += complex(c) * np.exp(2j * np.pi * mode.m * xs)
    return out


coeff = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)
fourier = st.integers(-6, 6).filter(bool).map(cl.Fourier)
fvec = st.dictionaries(fourier, coeff, min_size=1, max_size=4).map(cl.SparseModeVector)


# --- modes and vectors -----------------------------------------------------

def test_mode_validation():
    with pytest.raises(ValueError):
        cl.Fourier(0)
    with pytest.raises(ValueError):
        cl.Torus(0, 0)
    with pytest.raises(ValueError):
        cl.Interval(1, cl.tower_height(1))
    with pytest.raises(ValueError):
        cl.ShiftCell(0, 0)


def test_sparse_vector_drops_zeros_and_compares():
    v = cl.SparseModeVector({cl.Fourier(1): 1, cl.Fourier(2): 0})
    assert list(v.keys()) == [cl.Fourier(1)]
    assert v - v == cl.SparseModeVector()
    assert 2 * v == v + v


@given(fvec, fvec, coeff)
def test_correlation_is_sesquilinear(x, y, c):
    rot = cl.rotation_koopman("golden")
    lhs = rot.correlation(3, c * x, y)
    assert abs(lhs - c * rot.correlation(3, x, y)) < 1e-9
    rhs = rot.correlation(3, x, c * y)
    assert abs(rhs - np.conj(c) * rot.correlation(3, x, y)) < 1e-9


# --- rotation --------------------------------------------------------------

def test_golden_angle_digits():
    a = cl.Angle.parse("golden")
    assert not a.exact
    assert abs(float(a.turns) - (math.sqrt(5) - 1) / 2) < 1e-15


def test_rational_angle_is_periodic():
    rot = cl.rotation_koopman(Fraction(2, 7))
    e = cl.SparseModeVector({cl.Fourier(3): 1})
    assert rot.apply(7, e) == e
    assert rot.angle.is_integer_multiple(7)
    assert not rot.angle.is_integer_multiple(3)


@given(fvec, fvec, st.integers(-50, 50))
@settings(max_examples=40)
def test_rotation_matches_grid_oracle(x, y, k):
    # u f = f o T^{-1}, T x = x - theta; trig polys of degree < 32 are integrated exactly on 64 points
    rot = cl.rotation_koopman("golden")
    theta = float(rot.angle.turns)
    xs = np.arange(64) / 64
    lhs = np.mean(trig_samples(x, xs + k * theta) * np.conj(trig_samples(y, xs)))
    assert abs(rot.correlation(k, x, y) - lhs) < 1e-9
    sweep = rot.correlation_sweep([k], x, y)[0]
    assert abs(sweep - lhs) < 1e-9


def test_large_k_phase_reduced_exactly():
    rot = cl.rotation_koopman("golden")
    k = 10**12
    frac = float(rot.angle.frac(k))
    assert 0 <= frac < 1
    assert abs(rot.angle.phase(k) - np.exp(2j * np.pi * frac)) < 1e-12


# --- cat map ---------------------------------------------------------------

def test_catmap_lattice_action_by_sampling():
    M = np.array([[2, 1], [1, 1]])
    cat = cl.catmap_koopman(M.tolist())
    rng = np.random.default_rng(0)
    pts = rng.random((50, 2))
    Minv = np.linalg.inv(M)
    for v in [(1, 0), (0, 1), (2, -3)]:
        _, w = cat.image(cl.Torus(*v), 1)
        # e_v(T^{-1} x) with T x = M x
        lhs = np.exp(2j * np.pi * (pts @ Minv.T) @ np.array(v))
        rhs = np.exp(2j * np.pi * pts @ np.array([w.m, w.n]))
        assert np.allclose(lhs, rhs)


def test_catmap_rejects_non_unimodular():
    with pytest.raises(ValueError):
        cl.catmap_koopman([[2, 0], [0, 1]])


@given(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3))
@settings(max_examples=60)
def test_escape_bound_is_exact(a, b, c, d):
    if (a, b) == (0, 0) or (c, d) == (0, 0):
        return
    cat = cl.catmap_koopman([[2, 1], [1, 1]])
    v, w = cl.Torus(a, b), cl.Torus(c, d)
    k0 = cat.escape_bound(v, w)
    hits = [k for k in range(0, k0 + 100) if cat.image(v, k)[1] == w]
    assert all(k < k0 for k in hits)
    if k0 > 0:
        assert hits[-1] == k0 - 1


def test_non_hyperbolic_has_no_escape_bound():
    assert cl.catmap_koopman([[1, 1], [0, 1]]).escape_bound(cl.Torus(1, 0), cl.Torus(1, 0)) is None


# --- shift -----------------------------------------------------------------

def test_shift_moves_positions():
    sh = cl.shift_koopman(3)
    v = cl.SparseModeVector({cl.ShiftCell(0, 2): 1j})
    assert sh.apply(5, v) == cl.SparseModeVector({cl.ShiftCell(5, 2): 1j})
    assert sh.correlation(5, v, sh.apply(5, v)) == 1
    assert sh.correlation(4, v, sh.apply(5, v)) == 0
    with pytest.raises(SliceError):
        sh.check_mode(cl.ShiftCell(0, 3))


# --- Chacon ----------------------------------------------------------------

def test_tower_heights():
    assert [cl.tower_height(n) for n in range(5)] == [1, 4, 13, 40, 121]
    for n in range(6):
        unused = Fraction(1, 3) - sum((cl.level_width(m) for m in range(1, n + 1)), Fraction(0))
        assert cl.tower_height(n) * cl.level_width(n) + unused == 1
        assert len(cl.chacon_level_positions(n)) == cl.tower_height(n)


@pytest.mark.parametrize("n", [0, 1, 2, 3, 4])
def test_stage_map_is_a_measure_preserving_tower(n):
    T = cl.chacon_stage(n)
    T.validate()
    los = cl.chacon_level_positions(n)
    w = cl.level_width(n)
    for j in range(len(los) - 1):
        assert T(los[j]) == los[j + 1]
        assert T(los[j] + w / 2) == los[j + 1] + w / 2
    assert T(los[-1]) is None
    # undefined on the top level and on the spacer stock not yet used
    unused = Fraction(1, 3) - sum((cl.level_width(m) for m in range(1, n + 1)), Fraction(0))
    assert T.residual == w + unused


def test_stage_csv_round_trip():
    T = cl.chacon_stage(3)
    assert cl.PiecewiseTranslationMap.from_csv(T.to_csv()) == T


def test_stage_budget():
    with pytest.raises(BudgetExceeded):
        cl.chacon_stage(5, max_stage=4)
    with pytest.raises(BudgetExceeded):
        cl.chacon_koopman(50)


def test_chacon_frozen_overlaps():
    base = cl.level_vector([(0, 0)])
    assert [cl.chacon_raw_overlap(k, base, base) for k in (1, 4, 13, 40)] == [
        Fraction(1, 3),
        Fraction(4, 9),
        Fraction(13, 27),
        Fraction(40, 81),
    ]
    A = cl.level_vector([(1, 0)])
    assert [cl.chacon_raw_overlap(cl.tower_height(n), A, A) for n in range(1, 5)] == [Fraction(1, 9)] * 4


level = st.tuples(st.integers(0, 2), st.integers(0, 39)).filter(lambda t: t[1] < cl.tower_height(t[0]))


@given(st.lists(level, min_size=1, max_size=3, unique=True), st.lists(level, min_size=1, max_size=3, unique=True), st.integers(0, 60))
@settings(max_examples=60, deadline=None)
def test_chacon_overlap_matches_tower_refinement(a_levels, b_levels, k):
    # independent exact route: push level indicators up a deep tower and intersect
    A, B = cl.level_vector(a_levels), cl.level_vector(b_levels)
    deep = cl.chacon_koopman(6)
    fa = deep.refine(A, 6)
    top = max(m.level for m in fa.keys())
    if top + k >= cl.tower_height(6):
        return
    fb = deep.refine(B, 6)
    pushed = deep.apply(k, fa)
    expected = sum(cl.level_width(6) * c * fb.get(m) for m, c in pushed.items())
    assert cl.chacon_raw_overlap(k, A, B) == expected


@pytest.mark.parametrize("k", [1, 2, 5, 13, 40])
def test_chacon_overlap_matches_sampling(k):
    exact = float(cl.chacon_raw_overlap(k, cl.level_vector([(1, 0)]), cl.level_vector([(1, 2)])))
    sampled = cl.chacon_sampled_overlap(k, [(1, 0)], [(1, 2)], n_points=20000)
    assert abs(exact - sampled) < 1e-3


def test_chacon_centered_correlation_and_sweep():
    K = cl.chacon_koopman(4)
    A = cl.level_vector([(1, 0)])
    ks = [1, 4, 13, 100]
    sweep = K.correlation_sweep(ks, A, A)
    for k, s in zip(ks, sweep):
        assert abs(complex(K.correlation(k, A, A)) - s) < 1e-12
    assert K.correlation(0, A, A) == cl.level_width(1) - cl.level_width(1) ** 2


def test_chacon_apply_leaving_tower():
    K = cl.chacon_koopman(2)
    with pytest.raises(SliceError):
        K.apply(cl.tower_height(2), cl.level_vector([(2, 0)]))


def test_system_description_round_trip():
    for sysm in [cl.rotation_koopman(Fraction(1, 5)), cl.catmap_koopman([[2, 1], [1, 1]]), cl.shift_koopman(2), cl.chacon_koopman(3)]:
        again = cl.system_from_description(sysm.describe())
        assert again.describe() == sysm.describe()
