import json

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from fockdyn.errors import ConfigError
from fockdyn.qfock import FockTruncation
from fockdyn.qiso import (
    Q_ISO_BOUND,
    annihilator_norm_bound,
    approximant_bounds,
    approximants,
    build_iso,
    generator_qccr_residual,
    isometry_residual,
    isometry_residual_random,
    r_min_eigenvalue,
    r_selfadjoint_residual,
    random_unitary,
    report_json,
    require_iso_range,
    residual_report,
    residual_sweep,
    theta_check,
    unitary_log,
    verify_intertwine,
    verify_r_fixedpoint,
)


def test_range_guard():
    require_iso_range(0.41)
    require_iso_range(-0.41)
    for q in (0.42, -0.5, Q_ISO_BOUND):
        with pytest.raises(ConfigError, match="sqrt"):
            require_iso_range(q)
    # the guard can be lifted for exploratory runs
    assert build_iso(0.5, 1, 3, enforce_range=False).q == 0.5


def test_free_case_is_projection_off_vacuum():
    # at q = 0, sum_j a+ a is the projection onto degrees >= 1 and R equals it
    b = build_iso(0.0, 2, 4)
    deg = np.array([len(b.T0.word(i)) for i in range(b.T0.dim)])
    assert np.abs(b.R - np.diag((deg > 0).astype(float))).max() < 1e-14
    assert np.abs(b.V - np.eye(b.T0.dim)).max() < 1e-14


@pytest.mark.parametrize("q,d,D", [(0.2, 2, 5), (-0.3, 2, 4), (0.4, 1, 6), (0.1, 3, 4)])
def test_pipeline_residuals(q, d, D):
    b = build_iso(q, d, D)
    assert isometry_residual(b) < 1e-9
    assert isometry_residual_random(b, n=20) < 1e-9
    assert r_selfadjoint_residual(b) < 1e-12
    assert r_min_eigenvalue(b) > -1e-12
    fp = verify_r_fixedpoint(b)
    assert fp["residual"] < 1e-9
    assert generator_qccr_residual(b) < 1e-9
    P = random_unitary(d, np.random.default_rng(0))
    r = verify_intertwine(b, P)
    assert max(r.values()) < 1e-9
    qccr, inter = theta_check(b, P)
    assert qccr < 1e-9 and inter < 1e-9


def test_fixed_point_literal_form_differs():
    # without the factor q on the nested sum the relation fails for q != 0
    fp = verify_r_fixedpoint(build_iso(0.2, 2, 5))
    assert fp["literal_residual"] > 0.5


def test_residual_report_records():
    rows = residual_report(build_iso(0.2, 2, 4), random_unitary(2, np.random.default_rng(3)))
    names = [r["residual_name"] for r in rows]
    assert names[:4] == ["v_isometry", "r_selfadjoint", "r_fixedpoint", "r_fixedpoint_literal"]
    assert set(rows[0]) == {"q", "d", "D", "window", "residual_name", "value"}
    assert json.loads(report_json(rows))[0]["q"] == 0.2
    sweep = residual_sweep([0.1, 0.2], [1], [3], seed=0)
    assert len(sweep) == 2 * len(residual_report(build_iso(0.1, 1, 3), np.eye(1)))


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_unitary_log_inverts_expm(seed):
    U = random_unitary(3, np.random.default_rng(seed))
    H = unitary_log(U)
    assert np.abs(H - H.conj().T).max() < 1e-10
    assert np.abs(sla.expm(1j * H) - U).max() < 1e-10
    assert np.linalg.eigvalsh(H).max() <= np.pi + 1e-12
    Us = approximants(U)
    assert np.abs(Us[-1] - U).max() < 1e-10
    for Un in Us:
        assert np.abs(Un.conj().T @ Un - np.eye(3)).max() < 1e-10


@pytest.mark.parametrize("q", [0.0, 0.3, 0.6, 0.9, -0.6])
def test_annihilator_bound(q):
    rng = np.random.default_rng(5)
    T = FockTruncation(2, 5, q)
    for _ in range(5):
        f = rng.normal(size=2) + 1j * rng.normal(size=2)
        norm, bound, ok = annihilator_norm_bound(f, q, T)
        assert ok
    with pytest.raises(ValueError):
        annihilator_norm_bound(f, q + 0.01, T)
    U = random_unitary(2, rng)
    for n, lhs, rhs in approximant_bounds(U, f, q, T):
        assert lhs <= rhs * (1 + 1e-10) + 1e-12
