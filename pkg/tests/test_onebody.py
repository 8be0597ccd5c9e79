import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fockdyn import classical as cl
from fockdyn.errors import SliceError
from fockdyn.onebody import (
    DeformationGroup,
    DeformedVector,
    OneBodySpace,
    TensorVector,
    block_weight,
    commutator_residual,
    invariance_residual,
    invariant_vector,
    norm_comparison_bound,
    rotation_pair,
    rotation_pair_residual,
    tensor_apply,
    tensor_norm,
)

GROUP = DeformationGroup.powers(Fraction(1, 2), 2)
rot_space = OneBodySpace(cl.rotation_koopman("golden"), GROUP)

lam_st = st.sampled_from(GROUP.values)
triple = st.tuples(st.integers(-4, 4).filter(bool).map(cl.Fourier), lam_st, st.sampled_from([1, -1]))
coeff = st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)
dvec = st.dictionaries(triple, coeff, min_size=1, max_size=5).map(DeformedVector)


@given(st.fractions(min_value=Fraction(1, 100), max_value=100))
def test_block_weights_average_to_one(lam):
    # w(l) + w(1/l) = 2, so (1,0) and (0,1) keep unit norm on every block
    assert block_weight(lam) + block_weight(1 / lam) == 2
    assert block_weight(1) == 1


def test_group_kinds():
    assert DeformationGroup.trivial().values == (1,)
    assert set(GROUP.values) == {Fraction(1, 4), Fraction(1, 2), 1, 2, 4}
    r = DeformationGroup.rationals_generated((2, 3), 1)
    assert all(r.contains(1 / v) for v in r.values)
    assert DeformationGroup.rationals([Fraction(2)]).values == (Fraction(1, 2), 1, 2)
    with pytest.raises(ValueError):
        DeformationGroup.rationals([Fraction(-2)])
    with pytest.raises(ValueError):
        DeformationGroup.powers(2, 1)
    for g in (GROUP, r, DeformationGroup.trivial()):
        assert DeformationGroup.from_dict(g.to_dict()) == g


def test_check_vector_rejects_unknown_block():
    with pytest.raises(SliceError):
        rot_space.check_vector(DeformedVector({(cl.Fourier(1), Fraction(1, 8), 1): 1}))


@given(dvec)
@settings(max_examples=50)
def test_embedding_preserves_norm(v):
    # embed a classical vector into a block: norm equals the classical norm
    classical = cl.SparseModeVector({m: c for (m, _, _), c in v.items()})
    for lam in GROUP.values:
        for comp in (0, 1):
            e = rot_space.embed(classical, lam, comp)
            assert abs(rot_space.norm(e) - rot_space.classical.norm(classical)) < 1e-9


def test_embed_components_real_orthogonal():
    # (1,0) and (0,1) are orthogonal for the real part only; the imaginary
    # part carries the deformation and vanishes exactly on lambda = 1
    f = cl.SparseModeVector({cl.Fourier(2): 1})
    for lam in GROUP.values:
        x, y = rot_space.embed(f, lam, 0), rot_space.embed(f, lam, 1)
        ip = complex(rot_space.inner(x, y))
        assert abs(ip.real) < 1e-12
        expected = 0.5 * float(block_weight(lam) - block_weight(1 / lam))
        assert abs(abs(ip.imag) - abs(expected)) < 1e-12


@given(dvec, dvec)
@settings(max_examples=50)
def test_inner_is_hermitian_and_positive(x, y):
    assert abs(rot_space.inner(x, y) - np.conj(rot_space.inner(y, x))) < 1e-9
    assert complex(rot_space.inner(x, x)).real >= 0


@given(dvec, st.floats(-10, 10), st.floats(-10, 10))
@settings(max_examples=50)
def test_vt_is_a_unitary_group_commuting_with_u(x, s, t):
    V = rot_space.apply_V
    assert abs(rot_space.norm(V(t, x)) - rot_space.norm(x)) < 1e-9
    diff = V(s, V(t, x)) - V(s + t, x)
    assert rot_space.norm(diff) < 1e-9
    assert commutator_residual(rot_space, t, x) < 1e-12


def test_vt_eigenvalues():
    # V(t) acts on the (lambda, +) line by lambda^{it}
    lam = Fraction(2)
    b = rot_space.basis(cl.Fourier(1), lam, 1)
    out = rot_space.apply_V(0.7, b)
    assert abs(out.get((cl.Fourier(1), lam, 1)) - np.exp(1j * 0.7 * math.log(2))) < 1e-14
    b = rot_space.basis(cl.Fourier(1), lam, -1)
    out = rot_space.apply_V(0.7, b)
    assert abs(out.get((cl.Fourier(1), lam, -1)) - np.exp(-1j * 0.7 * math.log(2))) < 1e-14


@given(dvec)
@settings(max_examples=50)
def test_norm_comparison(v):
    deformed, undeformed, factor = norm_comparison_bound(rot_space, v)
    assert deformed <= undeformed * factor + 1e-12


def test_lambda_one_block_is_undeformed():
    x = DeformedVector({(cl.Fourier(1), 1, 1): Fraction(1, 3), (cl.Fourier(2), 1, -1): Fraction(2, 5)})
    y = DeformedVector({(cl.Fourier(1), 1, 1): Fraction(3, 7), (cl.Fourier(2), 1, -1): -1})
    assert rot_space.inner(x, y) == rot_space.undeformed_inner(x, y) == Fraction(1, 7) - Fraction(2, 5)


@pytest.mark.parametrize("m", [1, 2, 5])
def test_rotation_pair_and_invariant_vector(m):
    for lam in GROUP.values:
        x, y, theta = rotation_pair(rot_space, m, lam)
        assert rotation_pair_residual(rot_space, x, y, theta) < 1e-13
        t = invariant_vector(rot_space, x, y, theta)
        assert invariance_residual(rot_space, t) < 1e-12
        assert tensor_norm(rot_space, t) > 0.5


def test_invariant_vector_rejects_wrong_angle():
    x, y, theta = rotation_pair(rot_space, 1)
    with pytest.raises(SliceError):
        invariant_vector(rot_space, x, y, theta + 0.1)


def test_tensor_apply_is_isometric():
    a = rot_space.basis(cl.Fourier(1), 2, 1, 1 + 1j)
    b = rot_space.basis(cl.Fourier(-3), Fraction(1, 2), -1, 0.5)
    t = TensorVector.product(a, b) + TensorVector.product(b, a)
    assert abs(tensor_norm(rot_space, tensor_apply(rot_space, 7, t)) - tensor_norm(rot_space, t)) < 1e-12


def test_deformed_correlation_on_catmap():
    space = OneBodySpace(cl.catmap_koopman([[2, 1], [1, 1]]), GROUP)
    v = space.basis(cl.Torus(1, 0), 2, 1)
    w = space.apply(3, v)
    assert space.correlation(3, v, w) == block_weight(2)
    assert space.correlation(2, v, w) == 0
    sweep = space.correlation_sweep([2, 3], v, w)
    assert np.allclose(sweep, [0, float(block_weight(2))])


def test_json_export():
    d = rot_space.to_dict()
    assert d["group"]["kind"] == "powers"
    assert rot_space.to_json().startswith("{")
