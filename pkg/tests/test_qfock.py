import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fockdyn.errors import BudgetExceeded
from fockdyn.qfock import (
    FockOperator,
    FockTruncation,
    adjointness_residual,
    annihilator_matrix,
    check_qccr,
    creator_matrix,
    field_matrix,
    gram_poly,
    identity,
    inversions,
    matrix_from_csv,
    matrix_to_csv,
    operator_norm,
    qgram,
    second_quantization,
    truncation_to_json,
    vacuum_expectation,
    word_offsets,
    words_of_degree,
)

q_st = st.floats(-0.95, 0.95)


def brute_gram_entry(u, v, q):
    """<v, u>_q = sum over permutations with u_{pi(i)} = v_i of q^{inv(pi)}."""
    if len(u) != len(v):
        return 0.0
    total = 0.0
    for perm in itertools.permutations(range(len(u))):
        if all(u[perm[i]] == v[i] for i in range(len(u))):
            total += q ** inversions(perm)
    return total


def test_inversions():
    assert inversions((0, 1, 2)) == 0
    assert inversions((2, 1, 0)) == 3
    assert sum(1 for p in itertools.permutations(range(4)) if inversions(p) == 1) == 3


def test_word_indexing():
    assert word_offsets(2, 3) == [0, 1, 3, 7, 15]
    T = FockTruncation(2, 3)
    for idx in range(T.dim):
        assert T.index(T.word(idx)) == idx
    assert words_of_degree(3, 2).shape == (9, 2)


@given(q_st)
@settings(max_examples=20)
def test_gram_matches_brute_permutation_sum(q):
    n, d = 3, 2
    G = qgram(n, q, d=d)
    words = [tuple(w) for w in words_of_degree(d, n)]
    for a, u in enumerate(words):
        for b, v in enumerate(words):
            assert abs(G[a, b] - brute_gram_entry(u, v, q)) < 1e-12


def test_gram_frozen_values():
    G = qgram(2, Fraction(1, 3), d=2, exact=True)
    assert G.tolist() == [
        [Fraction(4, 3), 0, 0, 0],
        [0, 1, Fraction(1, 3), 0],
        [0, Fraction(1, 3), 1, 0],
        [0, 0, 0, Fraction(4, 3)],
    ]
    # single letter: the q-factorial [n]_q! on the diagonal (coefficients in increasing powers)
    for n in range(6):
        expected = np.array([1])
        for k in range(1, n + 1):
            expected = np.polynomial.polynomial.polymul(expected, np.ones(k))
        got = np.trim_zeros(np.asarray(gram_poly(n, d=1)[0, 0]), "b")
        assert got.tolist() == expected.astype(int).tolist()


def test_gram_general_overlaps_exact():
    O = np.array([[2, 1], [1, 3]])
    for n in range(4):
        a = qgram(n, Fraction(-1, 2), O, method="recursive", exact=True)
        b = qgram(n, Fraction(-1, 2), O, method="brute", exact=True)
        assert (a == b).all()


@given(q_st)
@settings(max_examples=20)
def test_gram_positive_definite(q):
    for n in range(4):
        assert np.linalg.eigvalsh(qgram(n, q, d=2)).min() > 0


def test_q_out_of_range():
    with pytest.raises(ValueError):
        qgram(2, 1.5, d=2)


@pytest.mark.parametrize("q", [-0.5, 0.0, 0.3, 0.9])
def test_qccr_and_adjointness(q):
    rng = np.random.default_rng(0)
    T = FockTruncation(3, 4, q)
    for _ in range(10):
        f = rng.normal(size=3) + 1j * rng.normal(size=3)
        g = rng.normal(size=3) + 1j * rng.normal(size=3)
        assert check_qccr(f, g, T) < 1e-10
        assert adjointness_residual(f, T) < 1e-10


def test_annihilator_frozen_action():
    q = 0.3
    T = FockTruncation(2, 3, q)
    a2 = annihilator_matrix([0, 1], T)
    xi = T.basis_vector((0, 1))
    out = a2.apply(xi)
    assert np.allclose(out, q * T.basis_vector((0,)))
    assert np.allclose(annihilator_matrix([0, 1], T).apply(T.vacuum()), 0)


def test_semicircle_norm_and_moments():
    T = FockTruncation(1, 8, 0.0)
    s = field_matrix([1], T)
    # tridiagonal Jacobi matrix of the semicircle: norm 2 cos(pi/(D+2))
    assert abs(operator_norm(s) - 2 * math.cos(math.pi / 10)) < 1e-12
    assert abs(vacuum_expectation(s @ s @ s @ s) - 2) < 1e-12
    # q-Gaussian fourth moment 2 + q
    Tq = FockTruncation(1, 6, 0.5)
    sq = field_matrix([1], Tq)
    assert abs(vacuum_expectation(sq @ sq @ sq @ sq) - 2.5) < 1e-12


def test_second_quantization_covariance():
    rng = np.random.default_rng(1)
    q = 0.4
    T = FockTruncation(2, 4, q)
    Z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    P, _ = np.linalg.qr(Z)
    F = second_quantization(P, T)
    Finv = second_quantization(P.conj().T, T)
    f = rng.normal(size=2) + 1j * rng.normal(size=2)
    lhs = (F @ creator_matrix(f, T) @ Finv).dense()
    rhs = creator_matrix(P @ f, T).dense()
    assert np.abs(lhs - rhs).max() < 1e-12
    xi = rng.normal(size=T.dim) + 0j
    assert abs(T.norm(F.apply(xi)) - T.norm(xi)) < 1e-10


def test_operator_algebra():
    T = FockTruncation(2, 3, 0.2)
    a = annihilator_matrix([1, 0], T)
    I = identity(T)
    X = 2 * a + I - a
    assert np.allclose(X.dense(), a.dense() + np.eye(T.dim))
    assert isinstance(-X, FockOperator)
    assert np.allclose(a.adjoint().dense(), creator_matrix([1, 0], T).dense())


def test_creator_norm_bound():
    for q in (0.0, 0.5, 0.9):
        T = FockTruncation(1, 7, q)
        assert operator_norm(creator_matrix([1], T), window=T.D - 1) <= 1 / math.sqrt(1 - q) + 1e-12


def test_budget():
    with pytest.raises(BudgetExceeded):
        FockTruncation(10, 6, 0.0, max_dim=1000)


def test_csv_and_json_export():
    M = np.array([[1 + 2j, 0], [-0.5, 3j]])
    assert np.array_equal(matrix_from_csv(matrix_to_csv(M)), M)
    js = truncation_to_json(FockTruncation(2, 2, 0.3), include_gram=True)
    assert '"q": 0.3' in js
