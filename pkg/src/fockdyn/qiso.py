"""Isomorphism machinery between the q-deformed and the free Fock space.

On a truncation with ``d`` orthonormal letters:

* ``M = sum_j a+_q(e_j) a_q(e_j)`` (degree preserving, positive);
* ``V`` is built degree by degree, ``V_0 = 1`` and
  ``V_m = (I_d (x) V_{m-1}) M^{1/2}`` on degree ``m``; it carries the q-inner
  product to the free one;
* ``R = V M^{1/2} V^{-1}`` lives on the free side and the operators
  ``b_j = a_0(e_j) R`` satisfy the q-relations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from fockdyn.errors import ConfigError
from fockdyn.qfock import (
    FockOperator,
    FockTruncation,
    annihilator_matrix,
    creator_matrix,
    operator_norm,
    second_quantization,
)

Q_ISO_BOUND = math.sqrt(2.0) - 1.0


def require_iso_range(q: float):
    if not abs(q) < Q_ISO_BOUND:
        raise ConfigError(
            f"|q| = {abs(q)} is outside the range |q| < sqrt(2) - 1 = {Q_ISO_BOUND:.6f} "
            "where the generators a_0(e_j) R are known to give an isomorphism"
        )


def m_operator(Tq: FockTruncation) -> np.ndarray:
    """``sum_j a+_q(e_j) a_q(e_j)`` as a dense matrix on the word basis."""
    M = sum((Tq.letter_creator(j) @ Tq.letter_annihilator(j) for j in range(Tq.d)))
    return np.asarray(M.toarray())


def _sqrt_in_gram_frame(Tq: FockTruncation, M: np.ndarray, min_eig: float = 1e-12) -> np.ndarray:
    """``M^{1/2}`` for M positive w.r.t. the q-inner product, degree by degree."""
    out = np.zeros_like(M, dtype=complex)
    for n, G in enumerate(Tq.gram_blocks):
        sl = Tq.degree_slice(n)
        w, Q = np.linalg.eigh(G)
        gs = (Q * np.sqrt(w)) @ Q.conj().T
        gi = (Q / np.sqrt(w)) @ Q.conj().T
        Mt = gs @ M[sl, sl] @ gi
        Mt = (Mt + Mt.conj().T) / 2
        ev, E = np.linalg.eigh(Mt)
        if n > 0 and ev.min() < min_eig:
            raise ValueError(f"M is singular on degree {n} (min eigenvalue {ev.min():.3e})")
        ev = np.clip(ev, 0.0, None)
        out[sl, sl] = gi @ ((E * np.sqrt(ev)) @ E.conj().T) @ gs
    return out


@dataclass
class IsoBundle:
    q: float
    d: int
    D: int
    Tq: FockTruncation
    T0: FockTruncation
    M: np.ndarray
    Mhalf: np.ndarray
    V: np.ndarray
    R: np.ndarray

    @property
    def window(self) -> int:
        """Top degree on which nested identities are compared."""
        return self.D - 2


def v_unitary(Tq: FockTruncation, T0: FockTruncation, Mhalf: np.ndarray | None = None) -> np.ndarray:
    if (Tq.d, Tq.D) != (T0.d, T0.D):
        raise ValueError("both truncations need the same letters and cutoff")
    if Mhalf is None:
        Mhalf = _sqrt_in_gram_frame(Tq, m_operator(Tq))
    V = np.zeros((Tq.dim, Tq.dim), dtype=complex)
    V[0, 0] = 1.0
    prev = np.ones((1, 1), dtype=complex)
    for m in range(1, Tq.D + 1):
        sl = Tq.degree_slice(m)
        Vm = np.kron(np.eye(Tq.d), prev) @ Mhalf[sl, sl]
        V[sl, sl] = Vm
        prev = Vm
    return V


def build_iso(q: float, d: int, D: int, enforce_range: bool = True) -> IsoBundle:
    if enforce_range:
        require_iso_range(q)
    Tq = FockTruncation(d, D, q)
    T0 = FockTruncation(d, D, 0.0)
    M = m_operator(Tq)
    Mhalf = _sqrt_in_gram_frame(Tq, M)
    V = v_unitary(Tq, T0, Mhalf)
    R = V @ Mhalf @ np.linalg.inv(V)
    return IsoBundle(q, d, D, Tq, T0, M, Mhalf, V, R)


def r_operator(bundle: IsoBundle) -> np.ndarray:
    return bundle.R


def _free_norm(X: np.ndarray, T0: FockTruncation, window: int | None = None) -> float:
    return operator_norm(FockOperator(X, T0), window=window)


def isometry_residual(bundle: IsoBundle) -> float:
    """``max |<V xi, V eta>_0 - <xi, eta>_q|`` over basis words, i.e. ``|V^H V - G|``."""
    return float(np.abs(bundle.V.conj().T @ bundle.V - bundle.Tq.gram).max())


def isometry_residual_random(bundle: IsoBundle, n: int = 100, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        xi = rng.normal(size=bundle.Tq.dim) + 1j * rng.normal(size=bundle.Tq.dim)
        worst = max(worst, abs(np.linalg.norm(bundle.V @ xi) - bundle.Tq.norm(xi)) / max(bundle.Tq.norm(xi), 1.0))
    return worst


def _letter_ops(T0: FockTruncation):
    a0 = [T0.letter_annihilator(j).toarray() for j in range(T0.d)]
    c0 = [T0.letter_creator(j).toarray() for j in range(T0.d)]
    return a0, c0


def verify_r_fixedpoint(bundle: IsoBundle) -> dict:
    """Residuals of the quadratic equation satisfied by R, on degrees ``<= D - 2``.

    ``residual`` uses ``R^2 = sum_j a+_0 a_0 + q sum_{j,k} (a_0(e_j) R a_0(e_k))^* (a_0(e_k) R a_0(e_j))``;
    ``literal_residual`` drops the factor ``q`` in front of the double sum.
    """
    R, T0, q = bundle.R, bundle.T0, bundle.q
    a0, c0 = _letter_ops(T0)
    number = sum(c0[j] @ a0[j] for j in range(T0.d))
    nested = sum(
        (a0[j] @ R @ a0[k]).conj().T @ (a0[k] @ R @ a0[j]) for j in range(T0.d) for k in range(T0.d)
    )
    R2 = R @ R
    w = bundle.window
    return {
        "window": w,
        "residual": _free_norm(R2 - number - q * nested, T0, w),
        "literal_residual": _free_norm(R2 - number - nested, T0, w),
    }


def r_selfadjoint_residual(bundle: IsoBundle) -> float:
    return float(np.abs(bundle.R - bundle.R.conj().T).max())


def r_min_eigenvalue(bundle: IsoBundle) -> float:
    return float(np.linalg.eigvalsh((bundle.R + bundle.R.conj().T) / 2).min())


def b_operators(bundle: IsoBundle) -> list:
    a0, _ = _letter_ops(bundle.T0)
    return [a0[j] @ bundle.R for j in range(bundle.d)]


def b_of(bundle: IsoBundle, f) -> np.ndarray:
    """``b(f) = a_0(f) R``."""
    return annihilator_matrix(np.asarray(f, dtype=complex), bundle.T0).dense() @ bundle.R


def generator_qccr_residual(bundle: IsoBundle) -> float:
    """``max_{i,j} || b_i b_j^* - q b_j^* b_i - delta_ij ||`` on degrees ``<= D - 2``."""
    b = b_operators(bundle)
    eye = np.eye(bundle.T0.dim)
    worst = 0.0
    for i in range(bundle.d):
        for j in range(bundle.d):
            bj_star = b[j].conj().T
            Y = b[i] @ bj_star - bundle.q * bj_star @ b[i] - (i == j) * eye
            worst = max(worst, _free_norm(Y, bundle.T0, bundle.window))
    return worst


def verify_intertwine(bundle: IsoBundle, P) -> dict:
    """``||F_0(P) R - R F_0(P)||`` and ``||F_q(P) M - M F_q(P)||`` (q-frame norm)."""
    P = np.asarray(P, dtype=complex)
    F0 = second_quantization(P, bundle.T0).dense()
    Fq = second_quantization(P, bundle.Tq).dense()
    r_res = _free_norm(F0 @ bundle.R - bundle.R @ F0, bundle.T0)
    m_res = operator_norm(FockOperator(Fq @ bundle.M - bundle.M @ Fq, bundle.Tq))
    return {"R": r_res, "M": m_res}


def theta_check(bundle: IsoBundle, P) -> tuple:
    """``(qccr residual, intertwining residual)`` for the generators ``b_j = a_0(e_j) R``."""
    require_iso_range(bundle.q)
    P = np.asarray(P, dtype=complex)
    F0 = second_quantization(P, bundle.T0).dense()
    F0inv = second_quantization(P.conj().T, bundle.T0).dense()
    b = b_operators(bundle)
    inter = 0.0
    for j in range(bundle.d):
        lhs = F0 @ b[j] @ F0inv
        inter = max(inter, _free_norm(lhs - b_of(bundle, P[:, j]), bundle.T0))
    return generator_qccr_residual(bundle), inter


def annihilator_norm_bound(f, q: float, T: FockTruncation) -> tuple:
    """``(||a_q(f)||, ||f|| / sqrt(1 - |q|), ok)`` on the truncation."""
    if T.q != q:
        raise ValueError("truncation was built for a different q")
    f = np.asarray(f, dtype=complex)
    norm = operator_norm(annihilator_matrix(f, T))
    bound = math.sqrt(max(T.letter_inner(f, f).real, 0.0)) / math.sqrt(1.0 - abs(q))
    return norm, bound, norm <= bound * (1 + 1e-12) + 1e-14


def unitary_log(U) -> np.ndarray:
    """Self-adjoint ``H`` with ``U = exp(iH)`` and spectrum in ``(-pi, pi]``."""
    U = np.asarray(U, dtype=complex)
    Tm, Z = sla.schur(U, output="complex")
    ang = np.angle(np.diag(Tm))
    ang = np.where(ang <= -np.pi, np.pi, ang)
    return (Z * ang) @ Z.conj().T


def approximants(U, dims=None) -> list:
    """``U_n = exp(i P_n H P_n)`` for the coordinate projections ``P_n`` onto the first ``n`` letters."""
    U = np.asarray(U, dtype=complex)
    H = unitary_log(U)
    d = U.shape[0]
    dims = range(1, d + 1) if dims is None else dims
    out = []
    for n in dims:
        P = np.zeros((d, d))
        P[:n, :n] = np.eye(n)
        out.append(sla.expm(1j * P @ H @ P))
    return out


def approximant_bounds(U, f, q: float, T: FockTruncation) -> list:
    """Rows ``(n, ||a_q(U_n f) - a_q(U f)||, ||U_n f - U f|| / sqrt(1-|q|))``."""
    f = np.asarray(f, dtype=complex)
    target = annihilator_matrix(np.asarray(U) @ f, T)
    rows = []
    for n, Un in enumerate(approximants(U), start=1):
        diff = annihilator_matrix(Un @ f, T) - target
        lhs = operator_norm(diff)
        g = Un @ f - np.asarray(U) @ f
        rhs = math.sqrt(max(T.letter_inner(g, g).real, 0.0)) / math.sqrt(1.0 - abs(q))
        rows.append((n, lhs, rhs))
    return rows


def residual_report(bundle: IsoBundle, P=None) -> list:
    """Flat residual records ``{q, d, D, window, residual_name, value}``."""
    base = {"q": bundle.q, "d": bundle.d, "D": bundle.D}
    fp = verify_r_fixedpoint(bundle)
    rows = [
        dict(base, window=bundle.D, residual_name="v_isometry", value=isometry_residual(bundle)),
        dict(base, window=bundle.D, residual_name="r_selfadjoint", value=r_selfadjoint_residual(bundle)),
        dict(base, window=fp["window"], residual_name="r_fixedpoint", value=fp["residual"]),
        dict(base, window=fp["window"], residual_name="r_fixedpoint_literal", value=fp["literal_residual"]),
    ]
    if P is not None:
        it = verify_intertwine(bundle, P)
        qccr, inter = theta_check(bundle, P)
        rows += [
            dict(base, window=bundle.D, residual_name="intertwine_R", value=it["R"]),
            dict(base, window=bundle.D, residual_name="intertwine_M", value=it["M"]),
            dict(base, window=bundle.window, residual_name="theta_qccr", value=qccr),
            dict(base, window=bundle.D, residual_name="theta_intertwine", value=inter),
        ]
    return rows


def residual_sweep(qs, ds, Ds, seed: int = 0) -> list:
    """Residual records over a grid of ``(q, d, D)``, for trend studies."""
    rng = np.random.default_rng(seed)
    rows = []
    for q in qs:
        for d in ds:
            P = random_unitary(d, rng)
            for D in Ds:
                rows += residual_report(build_iso(q, d, D), P)
    return rows


def random_unitary(d: int, rng) -> np.ndarray:
    Z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def report_json(rows) -> str:
    return json.dumps(rows, indent=2, sort_keys=True)
