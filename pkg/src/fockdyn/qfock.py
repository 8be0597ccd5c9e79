"""Truncated q-Fock spaces over a finite set of letters.

Words of length ``<= D`` over ``d`` letters are indexed degree by degree, and
lexicographically inside a degree with the first letter most significant.
Coefficient vectors ``xi`` pair through ``<xi, eta>_q = eta^H G xi`` with the
block-diagonal Gram matrix ``G``; in particular ``G[a, b] = <w_b, w_a>_q``.
Letter overlaps follow the same convention, ``O[i, j] = <e_j, e_i>``.

Operators are stored as sparse matrices acting on coefficient vectors.
Norms and adjoints are always taken in the Gram-orthonormal frame
``G^{1/2} X G^{-1/2}``.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, svds

from fockdyn.errors import BudgetExceeded, SliceError

DENSE_NORM_LIMIT = 1500


# ---------------------------------------------------------------------------
# words and permutations


def word_offsets(d: int, D: int) -> list:
    off = [0]
    for n in range(D + 1):
        off.append(off[-1] + d**n)
    return off


def words_of_degree(d: int, n: int) -> np.ndarray:
    """All words of length ``n`` as rows, in index order."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(itertools.product(range(d), repeat=n)), dtype=np.int64).reshape(-1, n)


def _place_values(d: int, n: int) -> np.ndarray:
    return d ** np.arange(n - 1, -1, -1, dtype=np.int64)


def inversions(perm) -> int:
    return sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j])


def _slot_to_front(d: int, n: int) -> list:
    """``idx[k][v]`` is the index of the word ``v_k v_1 .. (v_k omitted) .. v_n``."""
    W = words_of_degree(d, n)
    pv = _place_values(d, n)
    out = []
    for k in range(n):
        order = [k] + [i for i in range(n) if i != k]
        out.append(W[:, order] @ pv)
    return out


# ---------------------------------------------------------------------------
# Gram matrices


def _check_q(q):
    if not -1 < q < 1:
        raise ValueError(f"|q| must be < 1, got {q}")


def _overlaps(letter_overlaps, d):
    if letter_overlaps is None:
        if d is None:
            raise ValueError("give either letter overlaps or the letter count d")
        return np.eye(d)
    O = np.asarray(letter_overlaps)
    if O.ndim != 2 or O.shape[0] != O.shape[1]:
        raise ValueError("letter overlaps must be a square matrix")
    return O


def _gram_recursive_float(n, q, O):
    d = O.shape[0]
    G = np.ones((1, 1), dtype=complex if np.iscomplexobj(O) else float)
    Oc = np.conj(O)
    for m in range(1, n + 1):
        X = np.kron(Oc, G)
        G = np.zeros_like(X)
        for k, cols in enumerate(_slot_to_front(d, m)):
            G += (q**k) * X[:, cols]
    return G


def gram_poly_recursive(n: int, O_int) -> np.ndarray:
    """Gram matrix as an integer polynomial in ``q``: shape ``(d^n, d^n, n(n-1)/2 + 1)``.

    Built degree by degree from ``G_m = (conj O (x) G_{m-1}) R_m`` where
    ``R_m`` sums ``q^{k}`` times the move of slot ``k`` to the front.
    """
    O_int = np.asarray(O_int)
    d = O_int.shape[0]
    G = np.ones((1, 1, 1), dtype=np.int64)
    for m in range(1, n + 1):
        T = m * (m - 1) // 2 + 1
        s = d ** (m - 1)
        X = (O_int[:, None, :, None, None] * G[None, :, None, :, :]).reshape(d * s, d * s, -1)
        Gm = np.zeros((d * s, d * s, T), dtype=np.int64)
        for k, cols in enumerate(_slot_to_front(d, m)):
            Gm[:, :, k : k + X.shape[2]] += X[:, cols, :]
        G = Gm
    return G


def gram_poly_brute(n: int, O_int) -> np.ndarray:
    """Permutation-sum Gram matrix as an integer polynomial in ``q``."""
    O_int = np.asarray(O_int)
    d = O_int.shape[0]
    T = n * (n - 1) // 2 + 1
    W = words_of_degree(d, n)
    N = len(W)
    G = np.zeros((N, N, T), dtype=np.int64)
    if n == 0:
        G[0, 0, 0] = 1
        return G
    pv = _place_values(d, n)
    identity = np.array_equal(O_int, np.eye(d, dtype=O_int.dtype))
    rows = np.arange(N)
    for perm in itertools.permutations(range(n)):
        inv = inversions(perm)
        if identity:
            # only w' = w o perm survives
            cols = W[:, list(perm)] @ pv
            np.add.at(G, (rows, cols, np.full(N, inv)), 1)
        else:
            prod = np.ones((N, N), dtype=np.int64)
            for i in range(n):
                prod *= O_int[W[:, perm[i]][:, None], W[None, :, i]]
            G[:, :, inv] += prod
    return G


def gram_poly(n: int, O_int=None, d: int | None = None, method: str = "recursive") -> np.ndarray:
    O_int = np.eye(d, dtype=np.int64) if O_int is None else np.asarray(O_int, dtype=np.int64)
    if method == "recursive":
        return gram_poly_recursive(n, O_int)
    if method == "brute":
        return gram_poly_brute(n, O_int)
    raise ValueError(f"unknown method {method!r}")


def eval_poly_exact(C: np.ndarray, q) -> tuple:
    """Evaluate an integer polynomial array at rational ``q``.

    Returns ``(numerators, denominator)`` with integer numerators (object
    dtype only when int64 could overflow).
    """
    q = Fraction(q)
    a, b = q.numerator, q.denominator
    T = C.shape[-1]
    scale = [a**k * b ** (T - 1 - k) for k in range(T)]
    cmax = int(np.abs(C).max()) if C.size else 0
    if cmax * sum(abs(s) for s in scale) < 2**62:
        num = np.tensordot(C, np.array(scale, dtype=np.int64), axes=([-1], [0]))
    else:
        num = np.tensordot(C.astype(object), np.array(scale, dtype=object), axes=([-1], [0]))
    return num, b ** (T - 1)


def qgram(n: int, q, letter_overlaps=None, d: int | None = None, method: str = "recursive", exact: bool = False):
    """q-Gram matrix of the degree-``n`` words, ``G[a, b] = <w_b, w_a>_q``.

    ``exact=True`` requires rational ``q`` and integer or rational overlaps
    and returns an object array of ``Fraction``.
    """
    _check_q(q)
    O = _overlaps(letter_overlaps, d)
    if not exact:
        if method == "recursive":
            return _gram_recursive_float(n, float(q), O.astype(complex) if np.iscomplexobj(O) else O.astype(float))
        C = gram_poly_brute(n, O) if _is_integer_matrix(O) else None
        if C is None:
            return _gram_brute_float(n, float(q), O)
        return np.tensordot(C.astype(float), float(q) ** np.arange(C.shape[-1]), axes=([-1], [0]))
    Of = np.vectorize(Fraction, otypes=[object])(O)
    den = 1
    for x in Of.ravel():
        den = math.lcm(den, x.denominator)
    O_int = np.array([[int(x * den) for x in row] for row in Of], dtype=np.int64)
    C = gram_poly(n, O_int, method=method)
    num, qden = eval_poly_exact(C, Fraction(q))
    total = qden * den**n
    return np.vectorize(lambda v: Fraction(int(v), total), otypes=[object])(num)


def _is_integer_matrix(O) -> bool:
    return np.isrealobj(O) and np.array_equal(O, np.round(O))


def _gram_brute_float(n, q, O):
    d = O.shape[0]
    W = words_of_degree(d, n)
    N = len(W)
    G = np.zeros((N, N), dtype=complex)
    for perm in itertools.permutations(range(n)):
        prod = np.ones((N, N), dtype=complex)
        for i in range(n):
            prod *= O[W[:, perm[i]][:, None], W[None, :, i]]
        G += q ** inversions(perm) * prod
    return G if np.iscomplexobj(O) else G.real


# ---------------------------------------------------------------------------
# truncation


class FockTruncation:
    """Words of length ``<= D`` over ``d`` letters with the q-Gram matrices.

    Immutable after construction.  ``slice`` optionally records the
    ``LetterSlice`` the letters came from, so that one-body vectors can be
    passed wherever coordinates are expected.
    """

    def __init__(self, d: int, D: int, q: float = 0.0, overlaps=None, slice=None, max_dim: int = 20_000):
        _check_q(q)
        if d < 1 or D < 0:
            raise ValueError("need d >= 1 letters and cutoff D >= 0")
        self.d, self.D, self.q = int(d), int(D), q
        self.offsets = word_offsets(self.d, self.D)
        self.dim = self.offsets[-1]
        if self.dim > max_dim:
            raise BudgetExceeded(f"truncation dimension {self.dim} exceeds the budget of {max_dim}")
        self.overlaps = None if overlaps is None else np.asarray(overlaps)
        self.slice = slice
        self._cre = {}
        self._ann = {}

    # -- indexing --------------------------------------------------------

    def degree_slice(self, n: int) -> slice:
        return slice(self.offsets[n], self.offsets[n + 1])

    def index(self, word) -> int:
        n = len(word)
        return self.offsets[n] + int(sum(int(c) * self.d ** (n - 1 - i) for i, c in enumerate(word)))

    def word(self, idx: int) -> tuple:
        n = int(np.searchsorted(self.offsets, idx, side="right") - 1)
        r = idx - self.offsets[n]
        out = []
        for _ in range(n):
            out.append(r % self.d)
            r //= self.d
        return tuple(reversed(out))

    def window(self, top: int) -> int:
        """Number of basis words of degree ``<= top``."""
        return self.offsets[min(top, self.D) + 1]

    def degree_mask(self, top: int) -> np.ndarray:
        m = np.zeros(self.dim, dtype=bool)
        m[: self.window(top)] = True
        return m

    @property
    def orthonormal_letters(self) -> bool:
        return self.overlaps is None or np.allclose(self.overlaps, np.eye(self.d), atol=0, rtol=0)

    @property
    def free_frame(self) -> bool:
        """Whether the Gram matrix is the identity (``q = 0`` with orthonormal letters)."""
        return self.q == 0 and self.orthonormal_letters

    # -- Gram ------------------------------------------------------------

    @cached_property
    def gram_blocks(self) -> list:
        O = np.eye(self.d) if self.overlaps is None else self.overlaps
        return [qgram(n, self.q, O) for n in range(self.D + 1)]

    @cached_property
    def gram(self) -> np.ndarray:
        return sla.block_diag(*self.gram_blocks)

    @cached_property
    def _frames(self):
        sq, isq = [], []
        for n, G in enumerate(self.gram_blocks):
            w, Q = np.linalg.eigh(G)
            if w.min() <= 0:
                raise ValueError(f"Gram matrix of degree {n} is not positive definite (min eig {w.min():.3e})")
            sq.append((Q * np.sqrt(w)) @ Q.conj().T)
            isq.append((Q / np.sqrt(w)) @ Q.conj().T)
        return sla.block_diag(*sq), sla.block_diag(*isq)

    @property
    def gram_sqrt(self) -> np.ndarray:
        return self._frames[0]

    @property
    def gram_isqrt(self) -> np.ndarray:
        return self._frames[1]

    def min_gram_eigenvalue(self) -> float:
        return min(float(np.linalg.eigvalsh(G).min()) for G in self.gram_blocks)

    def inner(self, xi, eta) -> complex:
        """``<xi, eta>_q`` of coefficient vectors."""
        xi, eta = np.asarray(xi), np.asarray(eta)
        if self.free_frame:
            return complex(np.vdot(eta, xi))
        return complex(np.vdot(eta, self.gram @ xi))

    def norm(self, xi) -> float:
        return math.sqrt(max(self.inner(xi, xi).real, 0.0))

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    def basis_vector(self, word) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(word)] = 1.0
        return v

    # -- letter operators -------------------------------------------------

    def letter_creator(self, i: int) -> sp.csr_matrix:
        if i not in self._cre:
            rows, cols = [], []
            for n in range(self.D):
                src = np.arange(self.offsets[n], self.offsets[n + 1])
                rows.append(self.offsets[n + 1] + i * self.d**n + (src - self.offsets[n]))
                cols.append(src)
            rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
            cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
            self._cre[i] = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.dim, self.dim))
        return self._cre[i]

    def letter_annihilator(self, i: int) -> sp.csr_matrix:
        """``a(e_i) w = sum_k q^(k-1) <e_{w_k}, e_i> (w without slot k)``."""
        if i not in self._ann:
            O = np.eye(self.d) if self.overlaps is None else self.overlaps
            rows, cols, vals = [], [], []
            for n in range(1, self.D + 1):
                W = words_of_degree(self.d, n)
                src = self.offsets[n] + np.arange(len(W))
                pv = _place_values(self.d, n - 1)
                for k in range(n):
                    coef = O[i, W[:, k]] * (self.q**k)
                    keep = coef != 0
                    rest = np.delete(W, k, axis=1)
                    tgt = self.offsets[n - 1] + (rest @ pv if n > 1 else np.zeros(len(W), dtype=np.int64))
                    rows.append(tgt[keep])
                    cols.append(src[keep])
                    vals.append(coef[keep])
            if rows:
                rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
            self._ann[i] = sp.csr_matrix((vals, (rows, cols)), shape=(self.dim, self.dim)).astype(complex)
        return self._ann[i]

    def coords(self, f) -> np.ndarray:
        """Letter coordinates of ``f`` (a coordinate array, or a vector of the attached slice)."""
        if isinstance(f, np.ndarray) or isinstance(f, (list, tuple)):
            c = np.asarray(f, dtype=complex)
            if c.shape != (self.d,):
                raise SliceError(f"expected {self.d} letter coordinates, got shape {c.shape}")
            return c
        if self.slice is None:
            raise SliceError("no letter slice attached to this truncation")
        return self.slice.coords(f)

    def letter_inner(self, f, g) -> complex:
        """One-particle ``<f, g>`` from letter coordinates."""
        f, g = self.coords(f), self.coords(g)
        if self.overlaps is None:
            return complex(np.vdot(g, f))
        return complex(np.vdot(g, self.overlaps @ f))

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "D": self.D,
            "q": self.q,
            "dim": self.dim,
            "orthonormal_letters": self.orthonormal_letters,
        }


# ---------------------------------------------------------------------------
# operators


class FockOperator:
    """Matrix on the word basis together with its degree shift (+1, -1, 0 or None if mixed)."""

    def __init__(self, matrix, trunc: FockTruncation, shift=None):
        self.matrix = sp.csr_matrix(matrix) if not sp.issparse(matrix) else matrix.tocsr()
        self.trunc = trunc
        self.shift = shift

    def _combine(self, other, mat, shift):
        return FockOperator(mat, self.trunc, shift)

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            s = None if self.shift is None or other.shift is None else self.shift + other.shift
            return FockOperator(self.matrix @ other.matrix, self.trunc, s)
        return self.matrix @ np.asarray(other)

    def __add__(self, other):
        s = self.shift if self.shift == other.shift else None
        return FockOperator(self.matrix + other.matrix, self.trunc, s)

    def __sub__(self, other):
        s = self.shift if self.shift == other.shift else None
        return FockOperator(self.matrix - other.matrix, self.trunc, s)

    def __mul__(self, scalar):
        return FockOperator(self.matrix * scalar, self.trunc, self.shift)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def adjoint(self) -> "FockOperator":
        """Adjoint for the q-inner product, ``G^{-1} X^H G``."""
        s = None if self.shift is None else -self.shift
        if self.trunc.free_frame:
            return FockOperator(self.matrix.conj().T, self.trunc, s)
        G = self.trunc.gram
        return FockOperator(np.linalg.solve(G, self.matrix.conj().T.toarray() @ G), self.trunc, s)

    def apply(self, xi) -> np.ndarray:
        return self.matrix @ np.asarray(xi)


def identity(T: FockTruncation) -> FockOperator:
    return FockOperator(sp.identity(T.dim, dtype=complex, format="csr"), T, 0)


def creator_matrix(f, T: FockTruncation) -> FockOperator:
    """``a+(f)``: prepends ``f``; words of degree ``D`` are sent to 0."""
    c = T.coords(f)
    mat = sp.csr_matrix((T.dim, T.dim), dtype=complex)
    for i, ci in enumerate(c):
        if ci != 0:
            mat = mat + ci * T.letter_creator(i)
    return FockOperator(mat, T, 1)


def annihilator_matrix(f, T: FockTruncation) -> FockOperator:
    """``a(f)``, conjugate-linear in ``f``."""
    c = T.coords(f)
    mat = sp.csr_matrix((T.dim, T.dim), dtype=complex)
    for i, ci in enumerate(c):
        if ci != 0:
            mat = mat + np.conj(ci) * T.letter_annihilator(i)
    return FockOperator(mat, T, -1)


def field_matrix(f, T: FockTruncation) -> FockOperator:
    """``s(f) = a(f) + a+(f)``."""
    op = annihilator_matrix(f, T) + creator_matrix(f, T)
    op.shift = None
    return op


def second_quantization(P, T: FockTruncation) -> FockOperator:
    """``F(P)``: ``P (x) ... (x) P`` on every degree, ``1`` on the vacuum."""
    P = np.asarray(P, dtype=complex)
    if P.shape != (T.d, T.d):
        raise SliceError(f"one-particle operator must be {T.d}x{T.d} on the letters")
    blocks = [sp.identity(1, dtype=complex, format="csr")]
    cur = sp.identity(1, dtype=complex, format="csr")
    Ps = sp.csr_matrix(P)
    for _ in range(T.D):
        cur = sp.kron(Ps, cur, format="csr")
        blocks.append(cur)
    return FockOperator(sp.block_diag(blocks, format="csr"), T, 0)


def vacuum_expectation(X: FockOperator) -> complex:
    return complex(X.matrix[0, 0])


def vector_expectation(X: FockOperator, xi) -> complex:
    """``<X xi, xi>_q``."""
    return X.trunc.inner(X.apply(xi), xi)


def _spectral_norm(A) -> float:
    n = A.shape[0]
    if n == 0 or (sp.issparse(A) and A.nnz == 0):
        return 0.0
    if sp.issparse(A) and n > DENSE_NORM_LIMIT:
        # ARPACK stalls on very low-rank operators; widen the Krylov space, then try LOBPCG
        attempts = [
            dict(solver="arpack", ncv=None),
            dict(solver="arpack", ncv=min(min(A.shape) - 1, 64)),
            dict(solver="lobpcg"),
        ]
        for kw in attempts:
            try:
                s = svds(A, k=1, return_singular_vectors=False, tol=1e-13, maxiter=20 * n, random_state=0, **kw)
                return float(s[0])
            except (ArpackError, ArpackNoConvergence):
                continue
        return float(np.linalg.norm(A.toarray(), 2))
    M = A.toarray() if sp.issparse(A) else A
    if not np.any(M):
        return 0.0
    return float(np.linalg.norm(M, 2))


def operator_norm(X, window: int | None = None) -> float:
    """Largest singular value in the Gram-orthonormal frame.

    ``window`` restricts the domain to words of degree ``<= window``.
    """
    T = X.trunc
    cols = T.window(window) if window is not None else T.dim
    if T.free_frame:
        return _spectral_norm(X.matrix[:, :cols])
    Xt = T.gram_sqrt @ X.matrix.toarray() @ T.gram_isqrt[:, :cols]
    return _spectral_norm(Xt)


def check_qccr(f, g, T: FockTruncation) -> float:
    """Norm of ``a(f)a+(g) - q a+(g)a(f) - <g, f>`` on the words of degree ``< D``."""
    af, ag_plus = annihilator_matrix(f, T), creator_matrix(g, T)
    Y = af @ ag_plus - T.q * (ag_plus @ af) - T.letter_inner(g, f) * identity(T)
    return operator_norm(Y, window=T.D - 1)


def adjointness_residual(f, T: FockTruncation) -> float:
    """``|| G a+(f) - a(f)^H G ||`` (entrywise max)."""
    A = creator_matrix(f, T).dense()
    B = annihilator_matrix(f, T).dense()
    G = T.gram
    return float(np.abs(G @ A - B.conj().T @ G).max())


# ---------------------------------------------------------------------------
# letter slices of a one-particle space


class LetterSlice:
    """Finite set of one-particle vectors, Gram-orthonormalized into letters.

    ``space`` provides ``inner``, ``correlation`` (``<U^k x, y>``) and
    ``correlation_sweep``: a Koopman system or a deformed one-body space.
    With ``H[i, j] = <b_j, b_i>`` and ``C = H^{-1/2}``, the letters are
    ``e_l = sum_i C[i, l] b_i`` and a vector ``v`` has letter coordinates
    ``C p`` with ``p_j = <v, b_j>``.
    """

    def __init__(self, space, vectors, tol: float = 1e-10):
        if not vectors:
            raise SliceError("a letter slice needs at least one vector")
        self.space = space
        self.vectors = list(vectors)
        self.tol = tol
        d = len(self.vectors)
        H = np.zeros((d, d), dtype=complex)
        for i, bi in enumerate(self.vectors):
            for j, bj in enumerate(self.vectors):
                H[i, j] = complex(space.inner(bj, bi))
        w, Q = np.linalg.eigh(H)
        if w.min() <= tol * max(1.0, w.max()):
            raise SliceError("slice vectors are linearly dependent")
        self.H = H
        self.C = (Q / np.sqrt(w)) @ Q.conj().T
        self.d = d

    @classmethod
    def from_keys(cls, space, keys, vector_type):
        return cls(space, [vector_type({k: 1}) for k in keys])

    def coords(self, v, check: bool = True) -> np.ndarray:
        p = np.array([complex(self.space.inner(v, b)) for b in self.vectors])
        c = self.C @ p
        if check:
            nv = float(np.real(complex(self.space.inner(v, v))))
            miss = nv - float(np.vdot(c, c).real)
            if miss > self.tol * max(1.0, nv):
                raise SliceError(f"vector lies outside the letter slice (missing norm^2 {miss:.3e})")
        return c

    def projected_coords(self, k: int, v) -> np.ndarray:
        """Letter coordinates of the projection of ``U^k v`` onto the slice."""
        return self.C @ np.array([complex(self.space.correlation(k, v, b)) for b in self.vectors])

    def projected_coords_sweep(self, ks, v) -> np.ndarray:
        """Rows: projected coordinates of ``U^k v`` for each ``k``."""
        P = np.stack([self.space.correlation_sweep(ks, v, b) for b in self.vectors], axis=1)
        return P @ self.C.T

    @cached_property
    def unitary(self) -> np.ndarray:
        """Matrix of U on the letters; raises unless the slice is U-invariant."""
        K1 = np.zeros((self.d, self.d), dtype=complex)
        for l, bl in enumerate(self.vectors):
            for m, bm in enumerate(self.vectors):
                K1[l, m] = complex(self.space.correlation(1, bm, bl))
        UL = self.C @ K1 @ self.C
        err = np.abs(UL.conj().T @ UL - np.eye(self.d)).max()
        if err > 1e-9:
            raise SliceError(f"letter slice is not closed under U (unitarity defect {err:.3e})")
        return UL

    def is_closed(self) -> bool:
        try:
            self.unitary
        except SliceError:
            return False
        return True

    @cached_property
    def multiples(self):
        """Eigen multiples of the letters when each is a single U-eigen basis vector, else ``None``."""
        out = []
        for v in self.vectors:
            if len(v) != 1:
                return None
            key = next(iter(v.keys()))
            m = self.space.eigen_multiple(key)
            if m is None:
                return None
            out.append(m)
        if not np.allclose(self.H, np.diag(np.diag(self.H))):
            return None
        return out

    def truncation(self, D: int, q: float = 0.0, **kw) -> FockTruncation:
        return FockTruncation(self.d, D, q, slice=self, **kw)


# ---------------------------------------------------------------------------
# export


def matrix_to_csv(M) -> str:
    """Row-major CSV: one line per row, ``re,im`` pairs for each column."""
    M = np.asarray(M.toarray() if sp.issparse(M) else M, dtype=complex)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in M:
        w.writerow([x for z in row for x in (repr(float(z.real)), repr(float(z.imag)))])
    return buf.getvalue()


def matrix_from_csv(text: str) -> np.ndarray:
    rows = [list(map(float, r)) for r in csv.reader(io.StringIO(text)) if r]
    return np.array([[complex(r[2 * i], r[2 * i + 1]) for i in range(len(r) // 2)] for r in rows])


def truncation_to_json(T: FockTruncation, include_gram: bool = False) -> str:
    d = T.to_dict()
    if include_gram:
        d["gram"] = [
            [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(G, dtype=complex)]
            for G in T.gram_blocks
        ]
    return json.dumps(d, sort_keys=True)
