"""Bogoliubov dynamics on Wick polynomials and ergodic diagnostics.

An observable is a ``WickPolynomial``: a linear combination of words in
creators ``a+(f)`` and annihilators ``a(g)`` whose arguments are one-particle
vectors of a space offering ``inner``, ``apply`` (``U^k``), ``correlation``
(``<U^k x, y>``), ``correlation_sweep`` and ``spectral_split``.  The
automorphism ``alpha^k`` replaces every argument ``f`` by ``U^k f``.

Three routes evaluate the statistics without materializing ``H^{(x) n}``:

* spectral: when all arguments live in a U-invariant slice of eigenvectors
  (circle rotations), ``alpha^k(A) = sum_M exp(2 pi i k M theta) A_M`` with
  fixed matrices ``A_M``;
* kernel: at ``q = 0`` the norm of ``sum_l alpha^{k_l}(a+(f_1)..a(g_n))`` is
  the norm of a finite-rank operator whose Gram data are correlations;
* vector states: ``<A xi, xi>_q`` of a normal-ordered monomial only sees the
  projections of its arguments onto the letters of ``xi``.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from fockdyn.classical import Angle, _conj, tower_height
from fockdyn.errors import BudgetExceeded, SliceError
from fockdyn.qfock import (
    FockOperator,
    FockTruncation,
    LetterSlice,
    annihilator_matrix,
    creator_matrix,
    identity,
    operator_norm,
    second_quantization,
)

CRE, ANN = "+", "-"
SCHEMA_VERSION = "1.0"


# ---------------------------------------------------------------------------
# symbolic observables


@dataclass(frozen=True)
class WickMonomial:
    """``a+(f_1) ... a+(f_m) a(g_1) ... a(g_n)`` with ``m + n >= 1``."""

    creators: tuple = ()
    annihilators: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "creators", tuple(self.creators))
        object.__setattr__(self, "annihilators", tuple(self.annihilators))
        if not self.creators and not self.annihilators:
            raise ValueError("a Wick monomial needs at least one creator or annihilator")

    @property
    def word(self) -> tuple:
        return tuple((CRE, f) for f in self.creators) + tuple((ANN, g) for g in self.annihilators)

    @property
    def degree(self) -> int:
        return len(self.creators) + len(self.annihilators)

    def poly(self) -> "WickPolynomial":
        return WickPolynomial([(1, self.word)])


class WickPolynomial:
    """Linear combination of operator words; the empty word is the identity."""

    def __init__(self, terms=None):
        self.terms = [(c, tuple(w)) for c, w in (terms or []) if c != 0]

    @classmethod
    def scalar(cls, c) -> "WickPolynomial":
        return cls([(c, ())])

    @classmethod
    def creator(cls, f) -> "WickPolynomial":
        return cls([(1, ((CRE, f),))])

    @classmethod
    def annihilator(cls, f) -> "WickPolynomial":
        return cls([(1, ((ANN, f),))])

    @classmethod
    def field(cls, f) -> "WickPolynomial":
        return cls([(1, ((ANN, f),)), (1, ((CRE, f),))])

    @classmethod
    def of(cls, A) -> "WickPolynomial":
        if isinstance(A, WickPolynomial):
            return A
        if isinstance(A, WickMonomial):
            return A.poly()
        raise TypeError(f"not an observable: {A!r}")

    def __add__(self, other):
        return WickPolynomial(self.terms + WickPolynomial.of(other).terms)

    def __sub__(self, other):
        return self + (-1) * WickPolynomial.of(other)

    def __mul__(self, other):
        if isinstance(other, (WickPolynomial, WickMonomial)):
            other = WickPolynomial.of(other)
            return WickPolynomial([(c * d, w + v) for c, w in self.terms for d, v in other.terms])
        return WickPolynomial([(other * c, w) for c, w in self.terms])

    def __rmul__(self, scalar):
        return WickPolynomial([(scalar * c, w) for c, w in self.terms])

    def __matmul__(self, other):
        return self * WickPolynomial.of(other)

    def max_word_length(self) -> int:
        return max((len(w) for _, w in self.terms), default=0)

    def vectors(self) -> list:
        return [v for _, w in self.terms for _, v in w]

    def map_vectors(self, fn) -> "WickPolynomial":
        return WickPolynomial([(c, tuple((kind, fn(v)) for kind, v in w)) for c, w in self.terms])

    def is_normal_ordered(self) -> bool:
        for _, w in self.terms:
            kinds = [k for k, _ in w]
            if ANN in kinds and CRE in kinds[kinds.index(ANN) :]:
                return False
        return True

    def canonical(self) -> dict:
        """Like terms combined: ``word -> coefficient``."""
        out = {}
        for c, w in self.terms:
            out[w] = out.get(w, 0) + c
        return {w: c for w, c in out.items() if abs(complex(c)) > 0}

    def monomials(self):
        """``(coefficient, WickMonomial or None)`` for a normal-ordered polynomial."""
        for c, w in self.terms:
            if not w:
                yield c, None
                continue
            cre = tuple(v for k, v in w if k == CRE)
            ann = tuple(v for k, v in w if k == ANN)
            if w != tuple((CRE, f) for f in cre) + tuple((ANN, g) for g in ann):
                raise ValueError("polynomial is not normal ordered")
            yield c, WickMonomial(cre, ann)


def normal_order(A, q: float, inner) -> WickPolynomial:
    """Rewrite with creators left of annihilators via ``a(f) a+(g) = <g, f> + q a+(g) a(f)``."""
    todo = list(WickPolynomial.of(A).terms)
    done = []
    while todo:
        c, w = todo.pop()
        for i in range(len(w) - 1):
            if w[i][0] == ANN and w[i + 1][0] == CRE:
                f, g = w[i][1], w[i + 1][1]
                ip = inner(g, f)
                if ip != 0:
                    todo.append((c * ip, w[:i] + w[i + 2 :]))
                if q != 0:
                    todo.append((c * q, w[:i] + ((CRE, g), (ANN, f)) + w[i + 2 :]))
                break
        else:
            done.append((c, w))
    return WickPolynomial(done)


def bogoliubov_apply(space, A, k: int):
    """``alpha^k(A)``: every argument replaced by ``U^k`` of it (symbolic)."""
    if k == 0:
        return A
    fn = lambda v: space.apply(k, v)
    if isinstance(A, WickMonomial):
        return WickMonomial(tuple(map(fn, A.creators)), tuple(map(fn, A.annihilators)))
    return WickPolynomial.of(A).map_vectors(fn)


# ---------------------------------------------------------------------------
# subsequences


@dataclass(frozen=True)
class Subsequence:
    """Strictly increasing positive indices ``k_1 < k_2 < ...`` with their provenance."""

    kind: str
    indices: tuple
    params: tuple = ()

    def __post_init__(self):
        idx = tuple(int(k) for k in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("subsequence indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def full(cls, N: int) -> "Subsequence":
        return cls("full", tuple(range(1, N + 1)), (("N", N),))

    @classmethod
    def explicit(cls, ks) -> "Subsequence":
        return cls("explicit", tuple(sorted(set(int(k) for k in ks))))

    @classmethod
    def tower_heights(cls, max_stage: int) -> "Subsequence":
        return cls("tower_heights", tuple(tower_height(n) for n in range(1, max_stage + 1)), (("max_stage", max_stage),))

    @classmethod
    def phase_aligned(cls, angle, multiple: int, eps: float, N: int) -> "Subsequence":
        """``{1 <= k <= N : k * multiple * theta is within eps of an integer}`` (theta in turns)."""
        angle = Angle.parse(angle)
        p, q = angle.turns.numerator, angle.turns.denominator
        ks = []
        for k in range(1, N + 1):
            r = ((k * multiple * p) % q) / q
            if min(r, 1.0 - r) <= eps:
                ks.append(k)
        return cls("phase_aligned", tuple(ks), (("theta", str(angle)), ("multiple", multiple), ("eps", eps), ("N", N)))

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def upto(self, N: int) -> tuple:
        return tuple(k for k in self.indices if k <= N)

    def density(self, N: int) -> float:
        return len(self.upto(N)) / N


# ---------------------------------------------------------------------------
# fixed-point classification and conditional expectation


INVARIANT, CESARO_NULL, UNKNOWN = "Invariant", "CesaroNull", "Unknown"


def classify_phases(creator_phases, annihilator_phases, tol: float = 1e-10) -> str:
    """Classify from eigenphases in radians; ``None`` marks a continuous-spectrum argument."""
    phases = list(creator_phases) + list(annihilator_phases)
    if any(p is None for p in phases):
        return CESARO_NULL
    total = sum(creator_phases) - sum(annihilator_phases)
    turns = total / (2 * math.pi)
    return INVARIANT if abs(turns - round(turns)) <= tol else CESARO_NULL


def _is_invariant_multiple(space, M: int) -> bool:
    angle = space.angle
    if angle is None:
        return M == 0
    return angle.is_integer_multiple(M)


def _split_word(space, w):
    """Expand a word into ``(coeff, word, total multiple or None)`` along spectral components."""
    parts = [space.spectral_split(v) for _, v in w]
    for combo in itertools.product(*parts):
        M = 0
        for (kind, _), (m, _) in zip(w, combo):
            if m is None:
                M = None
                break
            M += m if kind == CRE else -m
        yield tuple((kind, comp) for (kind, _), (_, comp) in zip(w, combo)), M


def conditional_expectation(space, A, q: float) -> WickPolynomial:
    """Invariant part of ``A``: normal order, split arguments spectrally, keep invariant terms."""
    P = normal_order(A, q, space.inner)
    kept = []
    for c, w in P.terms:
        if not w:
            kept.append((c, w))
            continue
        for word, M in _split_word(space, w):
            if M is not None and _is_invariant_multiple(space, M):
                kept.append((c, word))
    return WickPolynomial(kept)


def classify_fixed(space, A: WickMonomial, q: float = 0.0) -> str:
    """``Invariant`` if ``A`` equals its invariant part, ``CesaroNull`` if that part is 0, else ``Unknown``."""
    if not isinstance(A, WickMonomial):
        raise TypeError("classify_fixed takes a WickMonomial")
    invariant, null = True, True
    for word, M in _split_word(space, A.word):
        if M is not None and _is_invariant_multiple(space, M):
            null = False
        else:
            invariant = False
    if invariant:
        return INVARIANT
    if null:
        return CESARO_NULL
    return UNKNOWN


# ---------------------------------------------------------------------------
# matrices of observables on a truncation


def poly_matrix(A, T: FockTruncation) -> FockOperator:
    """Matrix of a Wick polynomial; arguments are resolved through the truncation's letter slice."""
    P = WickPolynomial.of(A)
    out = identity(T) * 0
    out.shift = None
    cache = {}

    def op(kind, v):
        key = (kind, id(v))
        if key not in cache:
            cache[key] = (creator_matrix if kind == CRE else annihilator_matrix)(v, T)
        return cache[key]

    for c, w in P.terms:
        term = identity(T)
        for kind, v in w:
            term = term @ op(kind, v)
        out = out + complex(c) * term
    out.shift = None
    return out


def _keys(vectors) -> list:
    seen = {}
    for v in vectors:
        for key in v.keys():
            seen.setdefault(key, None)
    return list(seen)


def slice_for(space, vectors, vector_type=None) -> LetterSlice:
    """Letter slice spanned by the basis elements supporting ``vectors``."""
    if not vectors:
        raise SliceError("no vectors to build a slice from")
    vt = vector_type or type(vectors[0])
    keys = sorted(_keys(vectors), key=lambda k: vt._sort_key(k))
    return LetterSlice(space, [vt({k: 1}) for k in keys])


def default_cutoff(A) -> int:
    return WickPolynomial.of(A).max_word_length() + 2


class SpectralObservable:
    """``alpha^k(A) = sum_M exp(2 pi i k M theta) A_M`` on a slice of U-eigen letters."""

    def __init__(self, space, A, T: FockTruncation):
        sl = T.slice
        if sl is None or sl.multiples is None:
            raise SliceError("spectral route needs a slice of U-eigen basis letters")
        self.space, self.T, self.slice = space, T, sl
        mult = sl.multiples
        parts = {}
        for c, w in WickPolynomial.of(A).terms:
            coords = [T.coords(v) for _, v in w]
            supports = [np.nonzero(cv)[0] for cv in coords]
            for J in itertools.product(*supports):
                coef = complex(c)
                M = 0
                mats = identity(T)
                for (kind, _), cv, j in zip(w, coords, J):
                    if kind == CRE:
                        coef *= cv[j]
                        M += mult[j]
                        mats = mats @ FockOperator(T.letter_creator(j), T, 1)
                    else:
                        coef *= np.conj(cv[j])
                        M -= mult[j]
                        mats = mats @ FockOperator(T.letter_annihilator(j), T, -1)
                if coef != 0:
                    acc = parts.get(M)
                    parts[M] = mats * coef if acc is None else acc + mats * coef
        self.parts = parts

    def invariant_multiples(self) -> list:
        return [M for M in self.parts if _is_invariant_multiple(self.space, M)]

    def phase_averages(self, ks, schedule=None) -> dict:
        """Mean of ``exp(2 pi i k M theta)`` over ``ks`` (or prefix means at ``schedule``)."""
        angle = self.space.angle
        out = {}
        for M in self.parts:
            ph = angle.phases([int(k) * M for k in ks])
            if schedule is None:
                out[M] = ph.mean()
            else:
                cs = np.cumsum(ph)
                out[M] = [cs[N - 1] / N for N in schedule]
        return out

    def combine(self, weights: dict) -> FockOperator:
        out = identity(self.T) * 0
        for M, op in self.parts.items():
            w = weights.get(M, 0)
            if w != 0:
                out = out + op * w
        out.shift = None
        return out

    def fixed_part(self) -> FockOperator:
        return self.combine({M: 1 for M in self.invariant_multiples()})


def _orbit_slice(space, A, ks):
    vecs = []
    P = WickPolynomial.of(A)
    for k in ks:
        vecs += bogoliubov_apply(space, P, int(k)).vectors()
    return slice_for(space, vecs)


def cesaro_operator_norm(space, A, ks, q: float = 0.0, D: Optional[int] = None, max_dim: int = 4000) -> float:
    """``|| |ks|^{-1} sum_{k in ks} alpha^k(A) ||`` on a truncation containing every iterate."""
    ks = list(ks)
    if not ks:
        raise ValueError("empty subsequence")
    D = default_cutoff(A) if D is None else D
    P = WickPolynomial.of(A)
    sl = slice_for(space, P.vectors())
    if sl.multiples is not None and sl.is_closed():
        T = sl.truncation(D, q, max_dim=max_dim)
        so = SpectralObservable(space, P, T)
        return operator_norm(so.combine(so.phase_averages(ks)))
    sl = _orbit_slice(space, P, ks)
    T = sl.truncation(D, q, max_dim=max_dim)
    acc = identity(T) * 0
    for k in ks:
        acc = acc + poly_matrix(bogoliubov_apply(space, P, int(k)), T)
    return operator_norm(acc) / len(ks)


def alpha_sum_operator_norm(space, A, ks, q: float = 0.0, D: Optional[int] = None, max_dim: int = 4000) -> float:
    """``|| sum_{k in ks} alpha^k(A) ||`` on a truncation (``N`` times the Cesaro norm)."""
    return len(list(ks)) * cesaro_operator_norm(space, A, ks, q, D, max_dim)


def _difference_table(space, v, ks):
    """``<U^{k_j - k_i} v, v>`` as a matrix indexed ``[i, j]``."""
    ks = np.asarray(ks, dtype=np.int64)
    diffs = ks[None, :] - ks[:, None]
    uniq, inv = np.unique(diffs, return_inverse=True)
    vals = space.correlation_sweep(uniq.tolist(), v, v)
    return vals[inv.reshape(diffs.shape)]


def tensor_bound(space, A: WickMonomial, ks) -> float:
    """``|| sum_l U^{-k_l} f_1 (x) .. (x) U^{-k_l} f_m (x) U^{k_l} g_n (x) .. (x) U^{k_l} g_1 ||``."""
    ks = list(ks)
    K = len(ks)
    total = np.ones((K, K), dtype=complex)
    for f in A.creators:
        # <U^{-k_i} f, U^{-k_j} f> = <U^{k_j - k_i} f, f>
        total *= _difference_table(space, f, ks)
    for g in A.annihilators:
        # <U^{k_i} g, U^{k_j} g> = <U^{k_i - k_j} g, g>
        total *= _difference_table(space, g, ks).T
    return math.sqrt(max(float(total.sum().real), 0.0))


def kernel_norm(space, A: WickMonomial, ks) -> float:
    """Exact free Fock-space norm of ``sum_l alpha^{k_l}(A)`` (``q = 0``).

    ``A`` acts as ``K (x) 1`` with ``K = sum_l |F_l><G_l|``, ``F_l`` the
    creator tensor and ``G_l = U^{k_l} g_n (x) .. (x) U^{k_l} g_1``; its norm
    is ``sqrt(lambda_max(Phi^{1/2} Gamma Phi^{1/2}))`` with the Gram matrices
    ``Phi[l, l'] = <F_l', F_l>`` and ``Gamma[l, l'] = <G_l', G_l>``.
    """
    ks = list(ks)
    K = len(ks)
    Phi = np.ones((K, K), dtype=complex)
    Gam = np.ones((K, K), dtype=complex)
    for f in A.creators:
        Phi *= _difference_table(space, f, ks).T
    for g in A.annihilators:
        Gam *= _difference_table(space, g, ks).T
    Phi = (Phi + Phi.conj().T) / 2
    Gam = (Gam + Gam.conj().T) / 2
    w, Q = np.linalg.eigh(Phi)
    S = (Q * np.sqrt(np.clip(w, 0, None))) @ Q.conj().T
    top = np.linalg.eigvalsh(S @ Gam @ S)[-1]
    return math.sqrt(max(float(top), 0.0))


# ---------------------------------------------------------------------------
# states


class VectorState:
    """``X -> <X xi, xi>_q`` for a unit vector ``xi`` over a letter slice.

    ``xi`` is a coefficient vector on ``slice.truncation(D, q)``; ``None``
    gives the vacuum.
    """

    def __init__(self, space, vectors, D: int, q: float, xi=None, name: str = "xi"):
        self.space, self.q, self.name = space, q, name
        self.slice = LetterSlice(space, list(vectors)) if vectors else None
        if self.slice is None:
            self.T = None
            self.xi = None
            return
        self.T = self.slice.truncation(D, q)
        xi = self.T.vacuum() if xi is None else np.asarray(xi, dtype=complex)
        nrm = self.T.norm(xi)
        if nrm == 0:
            raise ValueError("state vector must be nonzero")
        self.xi = xi / nrm
        self._cache = {}

    @classmethod
    def vacuum(cls, space, q: float, name: str = "vacuum") -> "VectorState":
        return cls(space, [], 0, q, name=name)

    @classmethod
    def from_words(cls, space, vectors, D, q, coeffs: dict, name="xi") -> "VectorState":
        """``xi = sum coeffs[word] * word`` with words as tuples of letter indices (``()`` is the vacuum)."""
        st = cls(space, vectors, D, q, name=name)
        xi = np.zeros(st.T.dim, dtype=complex)
        for w, c in coeffs.items():
            xi[st.T.index(tuple(w))] += c
        return cls(space, vectors, D, q, xi, name)

    @property
    def is_vacuum(self) -> bool:
        return self.slice is None or (abs(self.xi[0]) == 1.0 and not np.any(self.xi[1:]))

    def _letter_images(self, n_ann: int, order_reversed: bool) -> np.ndarray:
        """Rows ``a(e_{J})...xi`` over all index tuples ``J`` of length ``n_ann``."""
        key = (n_ann, order_reversed)
        if key not in self._cache:
            T, s = self.T, self.slice.d
            anns = [T.letter_annihilator(j) for j in range(s)]
            rows = []
            for J in itertools.product(range(s), repeat=n_ann):
                v = self.xi
                seq = J if order_reversed else tuple(reversed(J))
                # a(e_{J_1}) ... a(e_{J_n}) xi applies J_n first;
                # the creator side a(e_{I_m}) ... a(e_{I_1}) xi applies I_1 first
                for j in seq:
                    v = anns[j] @ v
                rows.append(v)
            self._cache[key] = np.array(rows)
        return self._cache[key]

    def _pairing(self, n: int, m: int) -> np.ndarray:
        key = ("pair", n, m)
        if key not in self._cache:
            A = self._letter_images(n, False)
            B = self._letter_images(m, True)
            G = self.T.gram
            # entry [I, J] = <A_J xi, B_I xi>_q = B_I^H G A_J
            self._cache[key] = np.conj(B) @ (G @ A.T)
        return self._cache[key]

    def monomial_sweep(self, A: WickMonomial, ks) -> np.ndarray:
        """``<alpha^k(A) xi, xi>_q`` for every ``k`` in ``ks``."""
        K = len(ks)
        if self.slice is None:
            return np.zeros(K, dtype=complex)
        n, m = len(A.annihilators), len(A.creators)
        if n > self.T.D or m > self.T.D:
            return np.zeros(K, dtype=complex)
        s = self.slice.d
        u = np.ones((K, 1), dtype=complex)
        for g in A.annihilators:
            cg = np.conj(self.slice.projected_coords_sweep(ks, g))
            u = (u[:, :, None] * cg[:, None, :]).reshape(K, -1)
        v = np.ones((K, 1), dtype=complex)
        for f in A.creators:
            cf = self.slice.projected_coords_sweep(ks, f)
            v = (v[:, :, None] * cf[:, None, :]).reshape(K, -1)
        Mx = self._pairing(n, m)  # [I, J]
        return np.einsum("kj,ij,ki->k", u, Mx, v)

    def sweep(self, A, ks, q_inner=None) -> np.ndarray:
        """``phi(alpha^k(A))`` for a polynomial, normal ordering it first."""
        P = normal_order(A, self.q, self.space.inner)
        out = np.zeros(len(ks), dtype=complex)
        for c, mono in P.monomials():
            if mono is None:
                out += complex(c)
            else:
                out += complex(c) * self.monomial_sweep(mono, ks)
        return out

    def expectation(self, A) -> complex:
        return complex(self.sweep(A, [0])[0])


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class DiagnosticReport:
    schedule: list
    rows: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def add(self, statistic, witness_id, state_id, values):
        for N, v in zip(self.schedule, values):
            self.rows.append(
                {"N": int(N), "statistic": statistic, "witness_id": witness_id, "state_id": state_id, "value": float(v)}
            )

    def series(self, statistic, witness_id, state_id=None) -> list:
        return [
            r["value"]
            for r in self.rows
            if r["statistic"] == statistic and r["witness_id"] == witness_id and (state_id is None or r["state_id"] == state_id)
        ]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "schedule": [int(N) for N in self.schedule],
            "rows": self.rows,
            "verdicts": {"|".join(k): v for k, v in sorted(self.verdicts.items())},
            "thresholds": self.thresholds,
            "metadata": self.metadata,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "statistic", "witness_id", "state_id", "value"])
        for r in self.rows:
            w.writerow([r["N"], r["statistic"], r["witness_id"], r["state_id"], repr(r["value"])])
        return buf.getvalue()


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FOCKDYN_THREADS", "1")))
    except ValueError:
        return 1


def ue_series(space, A, schedule, q: float = 0.0, D: Optional[int] = None, kernel_limit: int = 2000):
    """``|| N^{-1} sum_{k=1}^N alpha^k(A) - E(A) ||`` over the schedule, with the method used.

    Returns ``(values or None, method)``.
    """
    P = WickPolynomial.of(A)
    D = default_cutoff(P) if D is None else D
    sl = slice_for(space, P.vectors())
    if sl.multiples is not None and sl.is_closed():
        T = sl.truncation(D, q)
        so = SpectralObservable(space, P, T)
        avgs = so.phase_averages(range(1, max(schedule) + 1), schedule)
        inv = set(so.invariant_multiples())
        vals = []
        for i in range(len(schedule)):
            weights = {M: a[i] for M, a in avgs.items() if M not in inv}
            vals.append(operator_norm(so.combine(weights)))
        return vals, "spectral"
    if q != 0:
        return None, "unavailable: continuous spectrum with q != 0"
    if max(schedule) > kernel_limit:
        return None, f"unavailable: N above the kernel budget {kernel_limit}"
    NP = normal_order(P, q, space.inner)
    E = conditional_expectation(space, P, q)
    if any(w for _, w in E.terms):
        return None, "unavailable: mixed spectrum"
    monos = [(c, mo) for c, mo in NP.monomials() if mo is not None]
    vals = []
    for N in schedule:
        ks = range(1, N + 1)
        vals.append(sum(abs(complex(c)) * kernel_norm(space, mo, ks) for c, mo in monos) / N)
    method = "kernel" if len(monos) <= 1 else "kernel-triangle-bound"
    return vals, method


def diagnostic_run(
    space,
    witnesses,
    states,
    schedule,
    q: float = 0.0,
    D: Optional[int] = None,
    decay_tol: float = 1e-2,
    compute_ue: bool = True,
) -> DiagnosticReport:
    """UE / UWM / UM statistics for each witness and vector state.

    ``witnesses`` and ``states`` are lists of ``(id, object)`` pairs.
    """
    schedule = [int(N) for N in schedule]
    if not schedule:
        raise ValueError("schedule must not be empty")
    if any(b <= a for a, b in zip(schedule, schedule[1:])) or schedule[0] < 1:
        raise ValueError("schedule must be strictly increasing positive integers")
    rep = DiagnosticReport(schedule)
    rep.thresholds = {"decay": decay_tol}
    rep.metadata = {"q": q, "states": [sid for sid, _ in states], "witnesses": [wid for wid, _ in witnesses]}
    Nmax = schedule[-1]
    ks = list(range(1, Nmax + 1))
    idx = [N - 1 for N in schedule]

    def one(item):
        wid, A = item
        out = []
        if compute_ue:
            vals, method = ue_series(space, A, schedule, q, D)
            if vals is not None:
                out.append(("UE", wid, "norm", vals, method))
            else:
                out.append(("note", wid, "norm", None, method))
        E = conditional_expectation(space, A, q)
        for sid, st in states:
            traj = st.sweep(A, ks)
            base = st.expectation(E)
            dev = np.abs(traj - base)
            cs = np.cumsum(dev)
            out.append(("UWM", wid, sid, [cs[i] / (i + 1) for i in idx], "vector-state"))
            out.append(("UM", wid, sid, [dev[i] for i in idx], "vector-state"))
        return out

    with ThreadPoolExecutor(max_workers=_threads()) as ex:
        results = list(ex.map(one, witnesses))
    methods = {}
    for res in results:
        for stat, wid, sid, vals, method in res:
            if stat == "note":
                rep.notes.append(f"UE for {wid}: {method}")
                continue
            rep.add(stat, wid, sid, vals)
            methods[f"{stat}|{wid}"] = method
            rep.verdicts[(stat, wid, sid)] = "decaying" if vals[-1] <= decay_tol else "bounded-away"
    rep.metadata["methods"] = methods
    rep.notes.append("states are the listed vector states only; the statistics do not range over all states")
    return rep


# ---------------------------------------------------------------------------
# witnesses


def non_wm_witness(space, f, eps: float = 0.05, N: int = 10_000, schedule=None):
    """Phase-aligned subsequence for an eigenvector ``f`` and its certified lower bound.

    Returns ``(Subsequence, lower_bound, info)`` where ``info`` holds the
    realized density, the achieved ratio ``||avg U^k f|| / ||f||`` and, if a
    schedule is given, that ratio over prefixes ``k <= N_i``.
    """
    parts = space.spectral_split(f)
    ms = {m for m, _ in parts}
    if len(ms) != 1 or None in ms:
        raise SliceError("f must be a U-eigenvector with a known phase")
    (m,) = ms
    angle = space.angle
    if angle is None or angle.exact:
        raise ValueError("the phase-aligned witness needs an irrational rotation angle")
    ks = Subsequence.phase_aligned(angle, m, eps, N)
    if not len(ks):
        raise ValueError("no aligned indices up to N; increase N")
    bound_factor = math.cos(2 * math.pi * eps)
    fn = space.norm(f) if hasattr(space, "norm") else math.sqrt(float(np.real(complex(space.inner(f, f)))))
    ph = angle.phases([k * m for k in ks.indices])
    info = {
        "density": ks.density(N),
        "ratio": float(abs(ph.mean())),
        "degenerate": bound_factor <= 0,
        "multiple": m,
    }
    if schedule is not None:
        arr = np.array(ks.indices)
        cs = np.cumsum(ph)
        prefix = []
        for Ni in schedule:
            n = int(np.searchsorted(arr, Ni, side="right"))
            prefix.append(float(abs(cs[n - 1]) / n) * fn if n else float("nan"))
        info["prefix_norms"] = prefix
    return ks, max(bound_factor, 0.0) * fn, info


def non_mixing_witness_chacon(max_stage: int, stage: int = 0, level: int = 0):
    """``(tower heights h_1..h_max, exact mu(T^{h_n} A cap A))`` for ``A`` a stage level."""
    from fockdyn.classical import chacon_raw_overlap, level_vector

    ks = Subsequence.tower_heights(max_stage)
    A = level_vector([(stage, level)])
    vals = [chacon_raw_overlap(h, A, A) for h in ks.indices]
    return ks, vals


def invariant_observable(space, x, y=None, q: float = 0.0, D: int = 4):
    """``s(x)^2 + s(y)^2`` for a rotation pair (or ``s(x)^2`` when ``U x = -x``) on a truncation.

    Returns ``(W, T)`` with ``W`` the matrix and ``T`` the truncation over the
    slice spanned by the supports of ``x`` and ``y``.
    """
    vecs = [x] if y is None else [x, y]
    sl = slice_for(space, vecs)
    T = sl.truncation(D, q)
    W = WickPolynomial.field(x) * WickPolynomial.field(x)
    if y is not None:
        W = W + WickPolynomial.field(y) * WickPolynomial.field(y)
    return poly_matrix(W, T), T


def alpha_residual(X: FockOperator, k: int = 1) -> float:
    """``|| F(U^k) X F(U^k)^{-1} - X ||`` with ``U`` the slice unitary."""
    T = X.trunc
    UL = np.linalg.matrix_power(T.slice.unitary, k)
    F = second_quantization(UL, T)
    Finv = second_quantization(UL.conj().T, T)
    return operator_norm(F @ X @ Finv - X)
