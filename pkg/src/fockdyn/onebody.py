"""Deformed one-particle space built from a Koopman system and a group of modular weights.

The real space is ``(L^2_R minus constants) (x) (direct sum over lambda in G of R^2)``.
On block ``lambda`` the generator ``a`` of the one-parameter rotation group
``v(t) = a^{it}`` has eigenvalue ``lambda`` on ``beta_+ = (1, -i)/sqrt 2`` and
``1/lambda`` on ``beta_- = (1, i)/sqrt 2``.  A basis vector of the
complexification is the triple ``(mode, lambda, sign)`` and the deformed inner
product ``(2A(I+A)^{-1} x, y)`` is diagonal in these triples with weight
``w(lambda^{sign})``, ``w(s) = 2 s / (1 + s)``.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from fockdyn.classical import (
    KoopmanSystem,
    RotationSystem,
    SparseModeVector,
    _conj,
    mode_key,
    mode_label,
)
from fockdyn.errors import SliceError

SQRT_HALF = 1.0 / math.sqrt(2.0)


def block_weight(lam):
    """``w(lambda) = 2 lambda / (1 + lambda)``; exact for rationals."""
    lam = _as_number(lam)
    return 2 * lam / (1 + lam)


def _as_number(lam):
    if isinstance(lam, (int, Fraction)):
        return Fraction(lam)
    if isinstance(lam, str):
        return Fraction(lam)
    return float(lam)


@dataclass(frozen=True)
class DeformationGroup:
    """Finite symmetric truncation of a multiplicative subgroup of the positive reals.

    kind is ``"trivial"`` (``{1}``), ``"powers"`` (``{lambda^n : |n| <= max_exponent}``)
    or ``"rationals"`` (an explicit list, closed under inversion).
    """

    kind: str
    lam: Optional[object] = None
    max_exponent: int = 0
    values_: tuple = field(default=(), repr=False)

    @classmethod
    def trivial(cls):
        return cls("trivial", values_=(Fraction(1),))

    @classmethod
    def powers(cls, lam, max_exponent: int = 1):
        lam = _as_number(lam)
        if not 0 < lam < 1:
            raise ValueError("lambda must lie in (0, 1)")
        if max_exponent < 0:
            raise ValueError("max_exponent must be >= 0")
        vals = tuple(sorted(lam**n for n in range(-max_exponent, max_exponent + 1)))
        return cls("powers", lam, max_exponent, vals)

    @classmethod
    def rationals(cls, values):
        vals = {Fraction(v) for v in values}
        if not vals:
            raise ValueError("deformation group must not be empty")
        if any(v <= 0 for v in vals):
            raise ValueError("group elements must be positive")
        vals |= {1 / v for v in vals} | {Fraction(1)}
        return cls("rationals", None, 0, tuple(sorted(vals)))

    @classmethod
    def rationals_generated(cls, primes=(2, 3), max_exponent: int = 1):
        """Products ``prod p^{e_p}`` with ``|e_p| <= max_exponent``: a truncation of Q_+."""
        vals = [Fraction(1)]
        for p in primes:
            vals = [v * Fraction(p) ** e for v in vals for e in range(-max_exponent, max_exponent + 1)]
        return cls.rationals(vals)

    @property
    def values(self) -> tuple:
        return self.values_

    def weights(self) -> dict:
        return {lam: block_weight(lam) for lam in self.values}

    def contains(self, lam) -> bool:
        return any(_close(lam, v) for v in self.values)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "values": [_numstr(v) for v in self.values]}
        if self.kind == "powers":
            d["lambda"] = _numstr(self.lam)
            d["max_exponent"] = self.max_exponent
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DeformationGroup":
        if d["kind"] == "trivial":
            return cls.trivial()
        if d["kind"] == "powers":
            return cls.powers(_as_number(d["lambda"]), int(d["max_exponent"]))
        if d["kind"] == "rationals":
            return cls.rationals([Fraction(v) for v in d["values"]])
        raise ValueError(f"unknown group kind {d['kind']!r}")


def _close(a, b) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(float(a) - float(b)) <= 1e-14 * max(1.0, abs(float(b)))


def _numstr(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    return repr(float(x))


class DeformedVector(SparseModeVector):
    """Finitely supported vector over ``(mode, lambda, sign)`` triples, ``sign`` in ``{+1, -1}``."""

    __slots__ = ()

    @staticmethod
    def _check_key(key):
        mode, lam, sign = key
        SparseModeVector._check_key(mode)
        if sign not in (1, -1):
            raise ValueError("eigenline sign must be +1 or -1")

    @staticmethod
    def _sort_key(key):
        mode, lam, sign = key
        return (float(lam), -sign) + mode_key(mode)

    @staticmethod
    def _label(key):
        mode, lam, sign = key
        return f"{mode_label(mode)}@{_numstr(lam)}{'+' if sign > 0 else '-'}"

    def blocks(self) -> dict:
        """Split into classical vectors per ``(lambda, sign)``."""
        out = {}
        for (mode, lam, sign), c in self.items():
            out.setdefault((lam, sign), {})[mode] = c
        return {k: SparseModeVector(v) for k, v in out.items()}

    @classmethod
    def from_blocks(cls, blocks: dict) -> "DeformedVector":
        coeffs = {}
        for (lam, sign), v in blocks.items():
            for mode, c in v.items():
                coeffs[(mode, lam, sign)] = c
        return cls(coeffs)


class OneBodySpace:
    """Complexified deformed one-particle space with ``U = u (x) I`` and ``V(t) = I (x) v(t)``."""

    def __init__(self, classical: KoopmanSystem, group: DeformationGroup):
        if not group.values:
            raise ValueError("deformation group must not be empty")
        self.classical = classical
        self.group = group
        self.block_weights = group.weights()

    # -- basic structure -------------------------------------------------

    def weight(self, lam, sign):
        lam = _as_number(lam)
        return block_weight(lam if sign > 0 else 1 / lam)

    def check_vector(self, v: DeformedVector):
        if not isinstance(v, DeformedVector):
            raise TypeError("expected a DeformedVector")
        for mode, lam, sign in v.keys():
            if not self.group.contains(lam):
                raise SliceError(f"block {lam} is not in the materialized group")
            self.classical.check_mode(mode)

    def basis(self, mode, lam=1, sign=1, coeff=1) -> DeformedVector:
        return DeformedVector({(mode, _as_number(lam), sign): coeff})

    def embed(self, v: SparseModeVector, lam=1, component: int = 0) -> DeformedVector:
        """``v (x) e`` with ``e = (1, 0)`` (component 0) or ``(0, 1)`` (component 1) of block ``lam``.

        ``(1, 0) = (beta_+ + beta_-)/sqrt 2`` and ``(0, 1) = i (beta_+ - beta_-)/sqrt 2``.
        """
        lam = _as_number(lam)
        if _close(lam, 1):
            # on the lambda = 1 block both eigenlines share weight 1; keep the
            # classical coefficients exact by using the + line only
            if component == 0:
                return DeformedVector({(m, lam, 1): c for m, c in v.items()})
            return DeformedVector({(m, lam, -1): c for m, c in v.items()})
        a, b = (SQRT_HALF, SQRT_HALF) if component == 0 else (1j * SQRT_HALF, -1j * SQRT_HALF)
        coeffs = {}
        for m, c in v.items():
            coeffs[(m, lam, 1)] = a * c
            coeffs[(m, lam, -1)] = b * c
        return DeformedVector(coeffs)

    # -- inner products ----------------------------------------------------

    def inner(self, x: DeformedVector, y: DeformedVector):
        return self.correlation(0, x, y)

    def undeformed_inner(self, x: DeformedVector, y: DeformedVector):
        xb, yb = x.blocks(), y.blocks()
        total = 0
        for key, xv in xb.items():
            if key in yb:
                total += self.classical.inner(xv, yb[key])
        return total

    def norm(self, x) -> float:
        return math.sqrt(max(float(_re(self.inner(x, x))), 0.0))

    def undeformed_norm(self, x) -> float:
        return math.sqrt(max(float(_re(self.undeformed_inner(x, x))), 0.0))

    def correlation(self, k: int, x: DeformedVector, y: DeformedVector):
        """Deformed ``<U^k x, y>``."""
        xb, yb = x.blocks(), y.blocks()
        total = 0
        for (lam, sign), xv in xb.items():
            yv = yb.get((lam, sign))
            if yv is None:
                continue
            c = self.classical.correlation(k, xv, yv)
            if c:
                total += self.weight(lam, sign) * c
        return total

    def correlation_sweep(self, ks, x, y) -> np.ndarray:
        xb, yb = x.blocks(), y.blocks()
        out = np.zeros(len(ks), dtype=complex)
        for (lam, sign), xv in xb.items():
            yv = yb.get((lam, sign))
            if yv is not None:
                out += float(self.weight(lam, sign)) * self.classical.correlation_sweep(ks, xv, yv)
        return out

    # -- dynamics -----------------------------------------------------------

    def apply(self, k: int, x: DeformedVector) -> DeformedVector:
        """``U^k x`` with ``U = u (x) I``."""
        return DeformedVector.from_blocks(
            {key: self.classical.apply(k, v) for key, v in x.blocks().items()}
        )

    def apply_V(self, t: float, x: DeformedVector) -> DeformedVector:
        """``V(t) x``: the phase ``exp(+- i t ln lambda)`` on the ``+-`` eigenline."""
        out = {}
        for (mode, lam, sign), c in x.items():
            if _close(lam, 1) or t == 0:
                out[(mode, lam, sign)] = c
            else:
                out[(mode, lam, sign)] = cmath.exp(1j * sign * t * math.log(float(lam))) * c
        return DeformedVector(out)

    def eigen_multiple(self, mode_triple):
        return self.classical.eigen_multiple(mode_triple[0])

    @property
    def angle(self):
        return getattr(self.classical, "angle", None)

    def spectral_split(self, v: DeformedVector):
        """Components ``(multiple or None, vector)`` of ``v`` along U-eigenvectors."""
        if isinstance(self.classical, RotationSystem):
            return [(mode.m, DeformedVector({(mode, lam, s): c})) for (mode, lam, s), c in v.sorted_items()]
        return [(None, v)] if v else []

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "classical": self.classical.describe(),
            "group": self.group.to_dict(),
            "weights": {_numstr(k): _numstr(w) for k, w in self.block_weights.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _re(z):
    return z.real if isinstance(z, complex) else z


def build_onebody(classical: KoopmanSystem, group: DeformationGroup) -> OneBodySpace:
    return OneBodySpace(classical, group)


def deformed_inner(space: OneBodySpace, x: DeformedVector, y: DeformedVector):
    space.check_vector(x)
    space.check_vector(y)
    return space.inner(x, y)


def vt_unitary(space: OneBodySpace, t: float):
    """The operator ``V(t)`` as a callable on deformed vectors."""
    return lambda x: space.apply_V(t, x)


def commutator_residual(space: OneBodySpace, t: float, x: DeformedVector) -> float:
    """``|| U V(t) x - V(t) U x ||`` (undeformed norm)."""
    d = space.apply(1, space.apply_V(t, x)) - space.apply_V(t, space.apply(1, x))
    return space.undeformed_norm(d)


# ---------------------------------------------------------------------------
# tensor vectors and the invariant vector of a rotation pair


class TensorVector:
    """Finitely supported element of ``H (x) H`` over pairs of basis triples."""

    def __init__(self, coeffs=None):
        self.coeffs = {k: c for k, c in (coeffs or {}).items() if c != 0}

    @classmethod
    def product(cls, x: DeformedVector, y: DeformedVector) -> "TensorVector":
        return cls({(a, b): ca * cb for a, ca in x.items() for b, cb in y.items()})

    def __add__(self, other):
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0) + c
        return TensorVector(out)

    def __sub__(self, other):
        return self + TensorVector({k: -c for k, c in other.coeffs.items()})


def tensor_apply(space: OneBodySpace, k: int, t: TensorVector) -> TensorVector:
    """``(U^k (x) U^k) t``."""
    out = TensorVector()
    for (a, b), c in t.coeffs.items():
        ua = space.apply(k, DeformedVector({a: 1}))
        ub = space.apply(k, DeformedVector({b: 1}))
        out = out + TensorVector({key: c * v for key, v in TensorVector.product(ua, ub).coeffs.items()})
    return out


def tensor_inner(space: OneBodySpace, s: TensorVector, t: TensorVector):
    total = 0
    for (a, b), c in s.coeffs.items():
        for (a2, b2), d in t.coeffs.items():
            ia = space.inner(DeformedVector({a: 1}), DeformedVector({a2: 1}))
            if not ia:
                continue
            ib = space.inner(DeformedVector({b: 1}), DeformedVector({b2: 1}))
            total += c * _conj(d) * ia * ib
    return total


def tensor_norm(space: OneBodySpace, t: TensorVector) -> float:
    return math.sqrt(max(float(_re(tensor_inner(space, t, t))), 0.0))


def rotation_pair_residual(space: OneBodySpace, x: DeformedVector, y: DeformedVector, theta: float) -> float:
    """How far ``(x, y)`` is from ``U x = cos th x + sin th y``, ``U y = -sin th x + cos th y``."""
    c, s = math.cos(theta), math.sin(theta)
    rx = space.apply(1, x) - (c * x + s * y)
    ry = space.apply(1, y) - ((-s) * x + c * y)
    return max(space.norm(rx), space.norm(ry))


def rotation_pair(space: OneBodySpace, m: int, lam=1):
    """Real pair ``x = cos(2 pi m .) (x) (1,0)``, ``y = sin(2 pi m .) (x) (1,0)`` and its angle.

    For a circle rotation ``U e_m = exp(2 pi i m theta) e_m`` one gets
    ``U x = cos(phi) x - sin(phi) y`` with ``phi = 2 pi m theta``, so the pair
    rotates by ``-phi`` in the orientation used by ``invariant_vector``.
    """
    from fockdyn.classical import Fourier

    if not isinstance(space.classical, RotationSystem):
        raise SliceError("rotation pairs are available for circle rotations only")
    cosv = SparseModeVector({Fourier(m): 0.5, Fourier(-m): 0.5})
    sinv = SparseModeVector({Fourier(m): -0.5j, Fourier(-m): 0.5j})
    x = space.embed(cosv, lam, 0)
    y = space.embed(sinv, lam, 0)
    phi = 2.0 * math.pi * float(space.classical.angle.frac(m))
    return x, y, -phi


def invariant_vector(space: OneBodySpace, x: DeformedVector, y: DeformedVector, theta: float, tol: float = 1e-10):
    """``x (x) x + y (x) y`` for a rotation pair; invariant under ``U (x) U``."""
    res = rotation_pair_residual(space, x, y, theta)
    scale = max(space.norm(x), space.norm(y), 1.0)
    if res > tol * scale:
        raise SliceError(f"(x, y) is not a rotation pair for angle {theta} (residual {res:.3e})")
    return TensorVector.product(x, x) + TensorVector.product(y, y)


def invariance_residual(space: OneBodySpace, t: TensorVector) -> float:
    return tensor_norm(space, tensor_apply(space, 1, t) - t)


def norm_comparison_bound(space: OneBodySpace, v: DeformedVector):
    """``(deformed norm, undeformed norm, sqrt(max weight))`` with the first bounded by the product of the others."""
    wmax = max(block_weight(lam) for lam in space.group.values)
    return space.norm(v), space.undeformed_norm(v), math.sqrt(float(wmax))
