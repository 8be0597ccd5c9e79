"""Exact Koopman unitaries for a few classical measure-preserving systems.

Every system acts on a finitely representable basis of L^2(X, mu) minus the
constants, with the Koopman convention ``u f = f o T^{-1}``:

* ``RotationSystem``  -- circle rotation, Fourier modes, diagonal phases.
* ``CatMapSystem``    -- hyperbolic toral automorphism, lattice modes.
* ``ShiftSystem``     -- two-sided Bernoulli shift, single-site characters.
* ``ChaconSystem``    -- Chacon cutting-and-stacking map, centered level
  indicators of the stage towers.

Correlations ``<U^k xi, eta>`` are exact (rationals) wherever the underlying
arithmetic allows it; rotation phases are reduced modulo 1 in exact integer
arithmetic before the final float conversion.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Number
from typing import Iterable, Union

import mpmath
import numpy as np

from fockdyn.errors import BudgetExceeded, SliceError

TWO_THIRDS = Fraction(2, 3)


# ---------------------------------------------------------------------------
# mode indices


@dataclass(frozen=True)
class Fourier:
    """Character ``x -> exp(2 pi i m x)`` on the circle."""

    m: int

    def __post_init__(self):
        if self.m == 0:
            raise ValueError("Fourier(0) is the constant function and is excluded")


@dataclass(frozen=True)
class Torus:
    """Character ``x -> exp(2 pi i (m x_1 + n x_2))`` on the 2-torus."""

    m: int
    n: int

    def __post_init__(self):
        if self.m == 0 and self.n == 0:
            raise ValueError("Torus(0, 0) is the constant function and is excluded")


@dataclass(frozen=True)
class Interval:
    """Centered indicator ``1_L - mu(L)`` of level ``level`` of the stage-``stage`` Chacon tower."""

    stage: int
    level: int

    def __post_init__(self):
        if self.stage < 0:
            raise ValueError("Chacon stage must be >= 0")
        if not 0 <= self.level < tower_height(self.stage):
            raise ValueError(f"stage {self.stage} tower has no level {self.level}")


@dataclass(frozen=True)
class ShiftCell:
    """Nontrivial character ``symbol`` of the coordinate at ``position``."""

    position: int
    symbol: int

    def __post_init__(self):
        if self.symbol < 1:
            raise ValueError("symbol 0 is the trivial character and is excluded")


ModeIndex = Union[Fourier, Torus, Interval, ShiftCell]

_MODE_ORDER = {Fourier: 0, Torus: 1, Interval: 2, ShiftCell: 3}


def mode_key(mode) -> tuple:
    """Total order on mode indices (used for deterministic output)."""
    return (_MODE_ORDER[type(mode)],) + tuple(vars(mode).values())


def mode_label(mode) -> str:
    if isinstance(mode, Fourier):
        return f"F({mode.m})"
    if isinstance(mode, Torus):
        return f"T({mode.m},{mode.n})"
    if isinstance(mode, Interval):
        return f"I({mode.stage},{mode.level})"
    return f"S({mode.position},{mode.symbol})"


# ---------------------------------------------------------------------------
# sparse vectors


def _is_zero(c) -> bool:
    return c == 0


class SparseModeVector:
    """Finitely supported coefficient map ``key -> number``; zeros are never stored."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=None):
        self.coeffs = {}
        if coeffs:
            for key, c in dict(coeffs).items():
                self._check_key(key)
                if not _is_zero(c):
                    self.coeffs[key] = c

    @staticmethod
    def _check_key(key):
        if type(key) not in _MODE_ORDER:
            raise TypeError(f"not a mode index: {key!r}")

    @classmethod
    def basis(cls, key, coeff=1):
        return cls({key: coeff})

    def _new(self, coeffs):
        out = type(self).__new__(type(self))
        out.coeffs = {k: c for k, c in coeffs.items() if not _is_zero(c)}
        return out

    def __add__(self, other):
        if not isinstance(other, SparseModeVector):
            return NotImplemented
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0) + c
        return self._new(out)

    def __sub__(self, other):
        return self + (-1) * other

    def __mul__(self, scalar):
        if not isinstance(scalar, Number):
            return NotImplemented
        return self._new({k: scalar * c for k, c in self.coeffs.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return (-1) * self

    def __eq__(self, other):
        return isinstance(other, SparseModeVector) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))

    def __len__(self):
        return len(self.coeffs)

    def __bool__(self):
        return bool(self.coeffs)

    def items(self):
        return self.coeffs.items()

    def keys(self):
        return self.coeffs.keys()

    def get(self, key, default=0):
        return self.coeffs.get(key, default)

    def conj(self):
        return self._new({k: _conj(c) for k, c in self.coeffs.items()})

    def sorted_items(self):
        return sorted(self.coeffs.items(), key=lambda kc: self._sort_key(kc[0]))

    @staticmethod
    def _sort_key(key):
        return mode_key(key)

    def __repr__(self):
        body = ", ".join(f"{self._label(k)}: {c}" for k, c in self.sorted_items())
        return f"{type(self).__name__}({{{body}}})"

    @staticmethod
    def _label(key):
        return mode_label(key)


def _conj(c):
    return c.conjugate() if isinstance(c, complex) else c


def _is_rational(c) -> bool:
    return isinstance(c, (int, Fraction)) and not isinstance(c, bool)


# ---------------------------------------------------------------------------
# angles


GOLDEN_TURNS = Fraction(mpmath.nstr((mpmath.sqrt(5) - 1) / 2, 60, strip_zeros=False))


@dataclass(frozen=True)
class Angle:
    """Rotation angle measured in turns (multiples of 2 pi).

    ``exact=False`` marks a high-precision rational approximant of an
    irrational angle: phases are evaluated with it, but arithmetic questions
    such as ``M * theta in Z`` are answered as for an irrational number.
    """

    turns: Fraction
    exact: bool = True

    @classmethod
    def parse(cls, theta) -> "Angle":
        if isinstance(theta, Angle):
            return theta
        if isinstance(theta, (int, Fraction)):
            return cls(Fraction(theta), True)
        if isinstance(theta, str):
            key = theta.strip().lower()
            if key in ("golden", "(sqrt5-1)/2", "(sqrt(5)-1)/2"):
                return cls(GOLDEN_TURNS, False)
            return cls(Fraction(key), True)
        if isinstance(theta, (float, mpmath.mpf)):
            return cls(Fraction(mpmath.nstr(mpmath.mpf(theta), 40, strip_zeros=False)), False)
        raise TypeError(f"cannot interpret {theta!r} as an angle")

    def frac(self, multiple: int) -> Fraction:
        """``multiple * theta mod 1`` in exact arithmetic."""
        p, q = self.turns.numerator, self.turns.denominator
        return Fraction((multiple * p) % q, q)

    def phase(self, multiple: int) -> complex:
        """``exp(2 pi i * multiple * theta)``."""
        r = self.frac(multiple)
        ang = 2.0 * math.pi * float(r)
        return complex(math.cos(ang), math.sin(ang))

    def phases(self, multiples: Iterable[int]) -> np.ndarray:
        p, q = self.turns.numerator, self.turns.denominator
        r = np.array([((int(mm) * p) % q) / q for mm in multiples], dtype=float)
        return np.exp(2j * np.pi * r)

    def is_integer_multiple(self, multiple: int) -> bool:
        """Whether ``multiple * theta`` is an integer."""
        if not self.exact:
            return multiple == 0
        return self.frac(multiple) == 0

    def __str__(self):
        if self.turns == GOLDEN_TURNS and not self.exact:
            return "golden"
        return str(self.turns) if self.exact else f"~{float(self.turns):.17g}"


# ---------------------------------------------------------------------------
# Koopman systems


class KoopmanSystem:
    """Koopman unitary ``u f = f o T^{-1}`` restricted to representable modes."""

    kind = "abstract"
    exact = True
    angle = None

    def check_mode(self, mode):
        raise NotImplementedError

    def check_vector(self, v: SparseModeVector):
        for mode in v.keys():
            self.check_mode(mode)

    def apply(self, k: int, v: SparseModeVector) -> SparseModeVector:
        raise NotImplementedError

    def inner(self, x: SparseModeVector, y: SparseModeVector):
        """``<x, y>``, linear in ``x`` and conjugate-linear in ``y``."""
        return self.correlation(0, x, y)

    def norm(self, x: SparseModeVector) -> float:
        return math.sqrt(max(float(_real(self.inner(x, x))), 0.0))

    def correlation(self, k: int, x: SparseModeVector, y: SparseModeVector):
        raise NotImplementedError

    def correlation_sweep(self, ks, x, y) -> np.ndarray:
        return np.array([complex(self.correlation(int(k), x, y)) for k in ks])

    def eigen_multiple(self, mode):
        """Integer ``M`` with ``U e = exp(2 pi i M theta) e``, or ``None`` on continuous spectrum."""
        return None

    def spectral_split(self, v: SparseModeVector):
        """Components ``(multiple or None, vector)`` of ``v`` along U-eigenvectors."""
        return [(None, v)] if v else []

    def describe(self) -> dict:
        raise NotImplementedError


def _real(z):
    return z.real if isinstance(z, complex) else z


class _OrthonormalModes(KoopmanSystem):
    """Systems whose modes are orthonormal and permuted up to phases by U."""

    def image(self, mode, k: int):
        """Return ``(phase, mode')`` with ``U^k e_mode = phase * e_mode'``."""
        raise NotImplementedError

    def apply(self, k, v):
        self.check_vector(v)
        out = {}
        for mode, c in v.items():
            ph, new = self.image(mode, k)
            out[new] = out.get(new, 0) + (c if ph == 1 else ph * c)
        return SparseModeVector(out)

    def correlation(self, k, x, y):
        self.check_vector(x)
        self.check_vector(y)
        total = 0
        for mode, c in x.items():
            ph, new = self.image(mode, k)
            d = y.get(new)
            if d:
                term = c * _conj(d)
                total += term if ph == 1 else ph * term
        return total


class RotationSystem(_OrthonormalModes):
    """Circle rotation with ``U e_m = exp(2 pi i m theta) e_m``.

    With ``u f = f o T^{-1}`` this is the rotation ``T x = x - theta``.
    """

    kind = "rotation"

    def __init__(self, theta):
        self.angle = Angle.parse(theta)
        self.exact = self.angle.exact and self.angle.turns == 0

    def check_mode(self, mode):
        if not isinstance(mode, Fourier):
            raise SliceError(f"rotation acts on Fourier modes, got {mode!r}")

    def image(self, mode, k):
        if k == 0 or self.angle.turns == 0:
            return 1, mode
        return self.angle.phase(k * mode.m), mode

    def correlation_sweep(self, ks, x, y):
        ks = np.asarray(ks, dtype=np.int64)
        out = np.zeros(len(ks), dtype=complex)
        for mode, c in x.items():
            d = y.get(mode)
            if d:
                out += complex(c * _conj(d)) * self.angle.phases([int(k) * mode.m for k in ks])
        return out

    def eigen_multiple(self, mode):
        return mode.m

    def spectral_split(self, v):
        return [(mode.m, SparseModeVector({mode: c})) for mode, c in v.sorted_items()]

    def describe(self):
        return {"kind": self.kind, "theta": str(self.angle), "theta_exact": self.angle.exact}


class CatMapSystem(_OrthonormalModes):
    """Toral automorphism ``T x = M x mod 1``.

    ``e_v o T^{-1} = e_{M^{-T} v}``, so the Koopman unitary acts on lattice
    modes through the inverse transpose ``L = M^{-T}`` (integer, as det M = +-1).
    """

    kind = "catmap"

    def __init__(self, matrix):
        (a, b), (c, d) = [[int(e) for e in row] for row in matrix]
        det = a * d - b * c
        if det not in (1, -1):
            raise ValueError(f"cat map matrix must be unimodular, det = {det}")
        self.matrix = ((a, b), (c, d))
        self.det = det
        # M^{-1} = det * [[d, -b], [-c, a]]; the lattice action is its transpose
        self.lattice = ((det * d, -det * c), (-det * b, det * a))
        self.lattice_inv = ((a, c), (b, d))
        self._pow_cache = {}

    def check_mode(self, mode):
        if not isinstance(mode, Torus):
            raise SliceError(f"cat map acts on Torus modes, got {mode!r}")

    @staticmethod
    def _mul(A, B):
        return (
            (A[0][0] * B[0][0] + A[0][1] * B[1][0], A[0][0] * B[0][1] + A[0][1] * B[1][1]),
            (A[1][0] * B[0][0] + A[1][1] * B[1][0], A[1][0] * B[0][1] + A[1][1] * B[1][1]),
        )

    def lattice_power(self, k: int):
        if k in self._pow_cache:
            return self._pow_cache[k]
        base = self.lattice if k >= 0 else self.lattice_inv
        e = abs(k)
        result = ((1, 0), (0, 1))
        while e:
            if e & 1:
                result = self._mul(result, base)
            base = self._mul(base, base)
            e >>= 1
        if len(self._pow_cache) < 4096:
            self._pow_cache[k] = result
        return result

    def image(self, mode, k):
        L = self.lattice_power(k)
        return 1, Torus(L[0][0] * mode.m + L[0][1] * mode.n, L[1][0] * mode.m + L[1][1] * mode.n)

    @property
    def hyperbolic(self) -> bool:
        return abs(self.matrix[0][0] + self.matrix[1][1]) > 2

    def escape_bound(self, v: Torus, w: Torus, max_k: int = 10_000):
        """Smallest ``k0 >= 0`` with ``L^k v != w`` for every ``k >= k0``.

        Uses the eigen-decomposition lower bound
        ``|L^k v| >= |alpha| mu^k - |beta| mu^-k``; past the point where this
        exceeds ``|w|`` the orbit can never return, and the finitely many
        earlier iterates are checked directly.  Returns ``None`` for
        non-hyperbolic matrices (orbits need not escape).
        """
        if not self.hyperbolic:
            return None
        Lf = np.array(self.lattice, dtype=float)
        evals, evecs = np.linalg.eig(Lf)
        order = np.argsort(-np.abs(evals))
        mu = abs(evals[order[0]])
        coef = np.linalg.solve(evecs, np.array([v.m, v.n], dtype=float))
        alpha, beta = abs(coef[order[0]]), abs(coef[order[1]])
        wnorm = math.hypot(w.m, w.n)
        kstar = None
        for k in range(max_k):
            if alpha * mu**k - beta * mu ** (-k) > wnorm + 1.0:
                kstar = k
                break
        if kstar is None:
            raise BudgetExceeded("escape bound not reached within max_k iterations")
        last_hit = -1
        for k in range(kstar + 1):
            if self.image(v, k)[1] == w:
                last_hit = k
        return last_hit + 1

    def describe(self):
        return {"kind": self.kind, "matrix": [list(r) for r in self.matrix]}


class ShiftSystem(_OrthonormalModes):
    """Two-sided Bernoulli shift on ``alphabet`` equiprobable symbols.

    Modes are single-site characters; with ``(T x)_i = x_{i-1}`` the Koopman
    unitary moves them one site to the right.  On a fixed symbol this is the
    bilateral shift of l^2(Z).
    """

    kind = "shift"

    def __init__(self, alphabet: int = 2):
        if alphabet < 2:
            raise ValueError("alphabet must have at least two symbols")
        self.alphabet = int(alphabet)

    def check_mode(self, mode):
        if not isinstance(mode, ShiftCell):
            raise SliceError(f"shift acts on ShiftCell modes, got {mode!r}")
        if mode.symbol >= self.alphabet:
            raise SliceError(f"symbol {mode.symbol} outside alphabet of size {self.alphabet}")

    def image(self, mode, k):
        return 1, ShiftCell(mode.position + k, mode.symbol)

    def describe(self):
        return {"kind": self.kind, "alphabet": self.alphabet}


# ---------------------------------------------------------------------------
# Chacon


def tower_height(n: int) -> int:
    """Height ``h_n`` of the stage-n Chacon tower: ``h_0 = 1``, ``h_{n+1} = 3 h_n + 1``."""
    return (3 ** (n + 1) - 1) // 2


def level_width(n: int) -> Fraction:
    return TWO_THIRDS / 3**n


def spacer_start(m: int) -> Fraction:
    """Left end of the spacer inserted at stage ``m >= 1``."""
    return TWO_THIRDS + sum((level_width(i) for i in range(1, m)), Fraction(0))


def chacon_level_positions(n: int) -> list:
    """Left endpoints of the stage-n tower levels, bottom to top."""
    los = [Fraction(0)]
    for m in range(n):
        w = level_width(m + 1)
        los = los + [lo + w for lo in los] + [spacer_start(m + 1)] + [lo + 2 * w for lo in los]
    return los


def _level_offsets(n: int, M: int) -> np.ndarray:
    """Stage-M level indices making up one stage-n level (relative to its index)."""
    off = np.zeros(1, dtype=np.int64)
    for m in range(n, M):
        h = tower_height(m)
        off = np.concatenate([off, off + h, off + 2 * h + 1])
    return off


@dataclass(frozen=True)
class PiecewiseTranslationMap:
    """Partial map of [0, 1) translating each source interval by a rational amount."""

    pieces: tuple
    residual: Fraction

    def validate(self):
        srcs = sorted((lo, hi) for lo, hi, _ in self.pieces)
        imgs = sorted((lo + t, hi + t) for lo, hi, t in self.pieces)
        for seq in (srcs, imgs):
            for (a, b), (c, _) in zip(seq, seq[1:]):
                if b > c:
                    raise ValueError("overlapping intervals")
            for a, b in seq:
                if not (0 <= a < b <= 1):
                    raise ValueError("interval outside [0, 1)")
        if sum(hi - lo for lo, hi, _ in self.pieces) != 1 - self.residual:
            raise ValueError("source measure does not match residual")

    def __call__(self, x: Fraction):
        for lo, hi, t in self.pieces:
            if lo <= x < hi:
                return x + t
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["piece_index", "src_lo", "src_hi", "translation"])
        for i, (lo, hi, t) in enumerate(self.pieces):
            w.writerow([i, _ratstr(lo), _ratstr(hi), _ratstr(t)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PiecewiseTranslationMap":
        rows = list(csv.DictReader(io.StringIO(text)))
        pieces = tuple(
            (Fraction(r["src_lo"]), Fraction(r["src_hi"]), Fraction(r["translation"])) for r in rows
        )
        return cls(pieces, 1 - sum(hi - lo for lo, hi, _ in pieces))


def _ratstr(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


DEFAULT_MAX_STAGE = 40


def chacon_stage(n: int, max_stage: int = DEFAULT_MAX_STAGE) -> PiecewiseTranslationMap:
    """Stage-n cutting-and-stacking approximation of the Chacon map.

    The initial column is ``[0, 2/3)``.  Passing from stage ``m-1`` to ``m``
    the top level ``[2/3 - w_{m-1}, 2/3)`` is cut in thirds: the first third
    moves onto the second third of the bottom level, the second third onto
    the new spacer ``[s_m, s_m + w_m)``, and the spacer onto the last third of
    the bottom level.  The stage-n map is undefined only on the current top
    level and the unused spacer stock.
    """
    if n < 0:
        raise ValueError("stage must be >= 0")
    if n > max_stage:
        raise BudgetExceeded(f"stage {n} exceeds the rational-arithmetic budget of {max_stage}")
    pieces = []
    for m in range(1, n + 1):
        w, wp, s = level_width(m), level_width(m - 1), spacer_start(m)
        top = TWO_THIRDS - wp
        pieces.append((top, top + w, w - top))
        pieces.append((top + w, top + 2 * w, s - top - w))
        pieces.append((s, s + w, 2 * w - s))
    pieces.sort()
    used = sum((hi - lo for lo, hi, _ in pieces), Fraction(0))
    return PiecewiseTranslationMap(tuple(pieces), 1 - used)


class ChaconSystem(KoopmanSystem):
    """Chacon map acting on centered level indicators.

    ``stage`` is the depth of the partition available to ``apply``: a vector
    can be pushed forward only while its support stays below the top of the
    stage tower.  Correlations are exact for every ``k`` via the self-similar
    closed form in ``chacon_raw_overlap``.
    """

    kind = "chacon"

    def __init__(self, stage: int, max_stage: int = DEFAULT_MAX_STAGE):
        if stage < 0:
            raise ValueError("stage must be >= 0")
        if stage > max_stage:
            raise BudgetExceeded(f"stage {stage} exceeds the budget of {max_stage}")
        self.stage = int(stage)
        self.max_stage = max_stage

    def check_mode(self, mode):
        if not isinstance(mode, Interval):
            raise SliceError(f"Chacon acts on Interval modes, got {mode!r}")

    def refine(self, v: SparseModeVector, stage: int) -> SparseModeVector:
        """Rewrite ``v`` over the levels of a deeper stage."""
        out = {}
        for mode, c in v.items():
            if mode.stage > stage:
                raise SliceError(f"{mode!r} is finer than stage {stage}")
            for off in _level_offsets(mode.stage, stage):
                key = Interval(stage, mode.level + int(off))
                out[key] = out.get(key, 0) + c
        return SparseModeVector(out)

    def apply(self, k, v):
        self.check_vector(v)
        fine = self.refine(v, self.stage)
        h = tower_height(self.stage)
        out = {}
        for mode, c in fine.items():
            j = mode.level + k
            if not 0 <= j < h:
                raise SliceError(
                    f"U^{k} of level {mode.level} leaves the stage-{self.stage} tower; "
                    "use a deeper stage"
                )
            out[Interval(self.stage, j)] = c
        return SparseModeVector(out)

    @staticmethod
    def mean(v: SparseModeVector):
        """``sum_i c_i mu(L_i)``, the integral of the uncentered step function."""
        return sum((c * level_width(m.stage) for m, c in v.items()), Fraction(0))

    def correlation(self, k, x, y):
        self.check_vector(x)
        self.check_vector(y)
        raw = chacon_raw_overlap(k, x, y)
        return raw - self.mean(x) * _conj(self.mean(y))

    def correlation_sweep(self, ks, x, y):
        self.check_vector(x)
        self.check_vector(y)
        shift = complex(self.mean(x) * _conj(self.mean(y)))
        raw = chacon_raw_overlap_sweep(ks, x, y)
        return raw - shift

    def describe(self):
        return {"kind": self.kind, "stage": self.stage}


def _weights(v: SparseModeVector, M: int):
    """Weights of ``v`` (as an uncentered step function) on the stage-M levels.

    Rational coefficients give an integer array plus a common denominator.
    """
    h = tower_height(M)
    coeffs = list(v.items())
    if all(_is_rational(c) for _, c in coeffs):
        den = 1
        for _, c in coeffs:
            den = den * Fraction(c).denominator // math.gcd(den, Fraction(c).denominator)
        arr = np.zeros(h, dtype=object if den > 2**20 else np.int64)
        for mode, c in coeffs:
            idx = mode.level + _level_offsets(mode.stage, M)
            arr[idx] += int(Fraction(c) * den)
        return arr, den
    arr = np.zeros(h, dtype=complex)
    for mode, c in coeffs:
        arr[mode.level + _level_offsets(mode.stage, M)] += complex(c)
    return arr, None


def _stage_for(k: int, x, y) -> int:
    M = max([m.stage for m in x.keys()] + [m.stage for m in y.keys()] + [0])
    while tower_height(M) <= abs(k):
        M += 1
    return M


def _overlap_core(k, fa, gb, M):
    """``sum_j fa[j] * (value of g at T^k(level j))`` in units of the level width.

    Levels that stay inside the stage-M tower after k steps contribute
    ``gb[j+k]``.  A level at distance ``d`` below the top follows the last
    subcolumn forever; at every later stage one third of it lands on level
    ``k-d`` of a copy of the tower and one third on the spacer-shifted level
    ``k-d-1``, giving the fixed point ``(gb[k-d] + gb[k-d-1]) / 2``.
    """
    h = tower_height(M)
    j = np.nonzero(fa)[0]
    inside = j + k < h
    ji = j[inside]
    s1 = (fa[ji] * gb[ji + k]).sum() if len(ji) else 0
    jo = j[~inside]
    if len(jo) == 0:
        return s1, 0
    t = k - (h - jo)
    a = (fa[jo] * gb[t]).sum()
    has_b = t >= 1
    b = (fa[jo[has_b]] * gb[t[has_b] - 1]).sum() if has_b.any() else 0
    return s1, a + b


def chacon_raw_overlap(k: int, x: SparseModeVector, y: SparseModeVector):
    """``integral (f o T^{-k}) conj(g)`` for uncentered step functions ``f, g``.

    ``x`` and ``y`` list level-indicator coefficients.  Exact (``Fraction``)
    for rational coefficients.
    """
    if not x or not y:
        return Fraction(0)
    if k < 0:
        return _conj(chacon_raw_overlap(-k, y, x))
    M = _stage_for(k, x, y)
    fa, dx = _weights(x, M)
    gb, dy = _weights(y, M)
    if dx is None or dy is None:
        fa = fa.astype(complex)
        gb = np.conj(gb.astype(complex))
        s1, s2 = _overlap_core(k, fa, gb, M)
        return complex((s1 + s2 / 2) * float(level_width(M)))
    s1, s2 = _overlap_core(k, fa, gb, M)
    return (Fraction(int(s1)) + Fraction(int(s2), 2)) * level_width(M) / (dx * dy)


def chacon_raw_overlap_sweep(ks, x, y) -> np.ndarray:
    """Float version of ``chacon_raw_overlap`` over many lags, sharing the level weights."""
    ks = [int(k) for k in ks]
    out = np.zeros(len(ks), dtype=complex)
    if not x or not y or not ks:
        return out
    M = _stage_for(max(abs(k) for k in ks), x, y)
    fa, dx = _weights(x, M)
    gb, dy = _weights(y, M)
    scale = 1.0 if dx is None else 1.0 / (dx * dy)
    fa = fa.astype(complex)
    gb = gb.astype(complex)
    w = float(level_width(M)) * scale
    for i, k in enumerate(ks):
        if k >= 0:
            s1, s2 = _overlap_core(k, fa, np.conj(gb), M)
            out[i] = (s1 + s2 / 2) * w
        else:
            s1, s2 = _overlap_core(-k, gb, np.conj(fa), M)
            out[i] = np.conj((s1 + s2 / 2) * w)
    return out


def chacon_sampled_overlap(
    k: int, a_levels, b_levels, n_points: int = 100_000, depth: int = 24
) -> float:
    """Sampling oracle for ``mu(A cap T^{-k} B)`` = ``mu(T^k A cap B)``.

    ``A`` and ``B`` are unions of tower levels given as ``(stage, level)``
    pairs.  The midpoints ``(2i+1)/(2 n_points)`` are pushed through the
    explicit piecewise translations of ``chacon_stage(depth)`` in exact
    integer arithmetic.  Independent of the level combinatorics used by
    ``chacon_raw_overlap``.
    """
    if k < 0:
        return chacon_sampled_overlap(-k, b_levels, a_levels, n_points, depth)
    Q = 2 * n_points * 3 ** (depth + 1)
    if Q >= 2**62:
        raise BudgetExceeded("sampling grid does not fit in 64-bit integers")
    ptm = chacon_stage(depth)
    lo = np.array([int(p[0] * Q) for p in ptm.pieces], dtype=np.int64)
    hi = np.array([int(p[1] * Q) for p in ptm.pieces], dtype=np.int64)
    tr = np.array([int(p[2] * Q) for p in ptm.pieces], dtype=np.int64)
    X = (2 * np.arange(n_points, dtype=np.int64) + 1) * (3 ** (depth + 1))

    def member(pts, levels):
        mask = np.zeros(len(pts), dtype=bool)
        for stage, level in levels:
            start = chacon_level_positions(stage)[level]
            a, b = int(start * Q), int((start + level_width(stage)) * Q)
            mask |= (pts >= a) & (pts < b)
        return mask

    in_a = member(X, a_levels)
    Y = X[in_a]
    for _ in range(k):
        idx = np.searchsorted(lo, Y, side="right") - 1
        if (idx < 0).any() or (Y >= hi[idx]).any():
            raise BudgetExceeded(f"sample orbit reached beyond stage {depth}")
        Y = Y + tr[idx]
    return float(member(Y, b_levels).sum()) / n_points


def level_vector(levels, coeff=1) -> SparseModeVector:
    """Centered indicator of a union of tower levels ``[(stage, level), ...]``."""
    out = SparseModeVector()
    for stage, level in levels:
        out = out + SparseModeVector.basis(Interval(stage, level), coeff)
    return out


# ---------------------------------------------------------------------------
# high-level constructors and operations


def rotation_koopman(theta) -> RotationSystem:
    return RotationSystem(theta)


def catmap_koopman(matrix) -> CatMapSystem:
    return CatMapSystem(matrix)


def shift_koopman(alphabet: int = 2) -> ShiftSystem:
    return ShiftSystem(alphabet)


def chacon_koopman(stage: int, max_stage: int = DEFAULT_MAX_STAGE) -> ChaconSystem:
    return ChaconSystem(stage, max_stage)


def koopman_apply(K: KoopmanSystem, k: int, v: SparseModeVector) -> SparseModeVector:
    return K.apply(k, v)


def correlation(K: KoopmanSystem, k: int, xi: SparseModeVector, eta: SparseModeVector):
    """``<U^k xi, eta>``."""
    return K.correlation(k, xi, eta)


def system_from_description(desc: dict) -> KoopmanSystem:
    kind = desc["kind"]
    if kind == "rotation":
        return RotationSystem(desc["theta"])
    if kind == "catmap":
        return CatMapSystem(desc["matrix"])
    if kind == "shift":
        return ShiftSystem(int(desc.get("alphabet", 2)))
    if kind == "chacon":
        return ChaconSystem(int(desc["stage"]))
    raise ValueError(f"unknown classical system kind {kind!r}")
