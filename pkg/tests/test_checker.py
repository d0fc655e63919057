from types import SimpleNamespace

import numpy as np
import pytest

from dsconf.checker import (
    ROUNDOFF_FLOOR,
    NonConstantMultiplicity,
    classification_row,
    classify,
    convergence_row,
    dichotomy_check,
    eigen_structure,
    field_summary,
    invariant_deviation,
    oracle_checks,
    simultaneous_diag_check,
)

from helpers import BUILDERS, CONTROLS, entry, result


def _rand_rot(rng, m):
    q, _ = np.linalg.qr(rng.normal(size=(m, m)))
    return q


def test_identity_field_is_one_cluster():
    s = eigen_structure(np.broadcast_to(np.eye(4), (5, 4, 4)))
    assert s.t == 1 and s.multiplicities == (4,)


def test_wp_B_has_three_clusters():
    assert eigen_structure(result("wp(3,1,1,sqrt2)").analysis.center.B).t == 3


def test_example32_D_structure():
    e = entry("example32(3,2,2)")
    s = eigen_structure(result("example32(3,2,2)").analysis.center.D(e.lam))
    assert s.t == 2 and s.multiplicities == (2, 1)
    np.testing.assert_allclose(s.values, [1 / 8 - e.lam ** 2 / 2, -(1 / 8 + e.lam ** 2 / 2)], atol=1e-6)


def test_eigen_structure_errors():
    with pytest.raises(ValueError, match="symmetric"):
        eigen_structure(np.array([[0.0, 1.0], [0.0, 0.0]]))
    S = np.stack([np.diag([1.0, 1.0, -2.0]), np.diag([1.0, 0.5, -1.5])])
    with pytest.raises(NonConstantMultiplicity):
        eigen_structure(S)


def test_eigen_structure_threshold():
    S = np.diag([1.0, 1.0 + 1e-5, -2.0])
    assert eigen_structure(S).t == 2
    assert eigen_structure(S, threshold=1e-7).t == 3


@pytest.mark.parametrize("key", ["example32(3,2,2)", "example33(3,2,2,+1)", "example33(3,2,2,-1)"])
def test_simultaneous_diagonalization_on_examples(key):
    c = result(key).analysis.center
    assert simultaneous_diag_check(c.D(entry(key).lam), c.B) <= 1e-6


def test_simultaneous_diagonalization_detects_coupling():
    rng = np.random.default_rng(4)
    Q = _rand_rot(rng, 3)
    D = Q @ np.diag([1.0, 0.5, -1.5]) @ Q.T
    B = Q @ np.diag([0.5, -0.2, -0.3]) @ Q.T
    assert simultaneous_diag_check(D[None], B[None]) <= 1e-12
    eps = 1e-3
    E = np.zeros((3, 3))
    E[0, 2] = E[2, 0] = eps
    res = simultaneous_diag_check(D[None], (B + Q @ E @ Q.T)[None])
    assert res == pytest.approx(eps, rel=1e-6)
    assert simultaneous_diag_check(np.eye(3)[None], B[None]) == 0.0


def test_dichotomy_on_example32():
    e = entry("example32(3,2,2)")
    c = result("example32(3,2,2)").analysis.center
    rep = dichotomy_check(c.D(e.lam), c.B, e.lam)
    assert rep.applicable and rep.sum_residual <= 1e-6 and rep.block_residual <= 1e-6
    assert rep.curvature_sign_value == pytest.approx(1 / 4, abs=1e-6)


def test_dichotomy_lambda_zero_symmetric():
    D = np.diag([0.5, 0.5, -0.5])[None]
    B = np.diag([0.3, -0.3, 0.0])[None]
    rep = dichotomy_check(D, B, 0.0)
    assert rep.holds()
    assert not dichotomy_check(np.eye(3)[None], B, 0.0).applicable


@pytest.mark.parametrize("key", list(BUILDERS))
def test_classifier_consistent_with_label(key):
    v = classify(result(key))
    assert v.consistent_with(entry(key).label), v.labels


@pytest.mark.parametrize("key", list(CONTROLS))
def test_controls_are_inconsistent(key):
    v = classify(result(key))
    assert v.labels == ["inconsistent"]
    assert any("para-Blaschke" in r or "conformal form" in r for r in v.reasons)


def test_generic_cites_phi():
    v = classify(result("generic(3)"))
    assert any("conformal form" in r for r in v.reasons)


def _synthetic(D_vals, B_vals, lam):
    P = 4
    B = np.broadcast_to(np.diag(B_vals), (P, 3, 3)).copy()
    A = np.broadcast_to(np.diag(D_vals), (P, 3, 3)) - lam * B
    center = SimpleNamespace(B=B, A=A, Phi=np.zeros((P, 3)), D=lambda L: A + L * B)
    analysis = SimpleNamespace(center=center, dB=SimpleNamespace(values=np.full((P, 3, 3, 3), 1e-3)))
    return SimpleNamespace(analysis=analysis, lam=lam, threshold=1e-3, dD_max=lambda L: 0.0)


def test_D_proportional_to_metric_is_constant_curvature_bucket():
    v = classify(_synthetic([0.2, 0.2, 0.2], [0.6, -0.1, -0.5], 0.3))
    assert v.t_D == 1 and v.labels == ["cmc"]


def test_nonparallel_D_is_inconsistent():
    r = _synthetic([0.2, 0.2, 0.2], [0.6, -0.1, -0.5], 0.3)
    r.dD_max = lambda L: 1e-2
    assert classify(r).labels == ["inconsistent"]


def test_convergence_row():
    assert convergence_row(ROUNDOFF_FLOOR / 2, 1.0)[0] == 0.0
    value, tol, fd, note = convergence_row(1e-6, 1e-6 / 64)
    assert value == pytest.approx(4 / 64) and tol == 1.0 and not fd
    assert convergence_row(1e-6, 1e-6 / 2)[0] > 1


def test_halving_rows_present_and_pass():
    rows = [r for r in result("wp(3,1,1,sqrt2)").residuals() if "halving" in r.name]
    assert rows and all(r.passed for r in rows)


def test_oracle_rows_on_product():
    rep = oracle_checks(entry("product-ds(3,1,sqrt2)"), result("product-ds(3,1,sqrt2)"))
    names = [r.name for r in rep]
    assert "B eigenvalues vs oracle" in names and "rho vs oracle" in names
    assert rep.passed


def test_classification_row():
    rep = classification_row(entry("generic(3)"), classify(result("generic(3)")))
    assert rep.passed
    rep = classification_row(entry("wp(3,1,1,sqrt2)"), classify(result("generic(3)")))
    assert not rep.passed


def test_field_summary():
    s = field_summary(np.broadcast_to(np.diag([1.0, 1.0, -2.0]), (3, 3, 3)))
    assert s["values"] == [1.0, -2.0] and s["multiplicities"] == [2, 1]
    s = field_summary(np.stack([np.diag([1.0, 1.0, -2.0]), np.diag([1.0, 0.5, -1.5])]))
    assert not s["constant_multiplicity"]


def test_invariant_deviation_aligns_orientation():
    c = result("product-ds(3,1,sqrt2)").analysis.center
    flipped = SimpleNamespace(B=-c.B, Phi=-c.Phi, A=c.A, geo=c.geo, D=lambda L: c.A - L * c.B)
    s, dev = invariant_deviation(c, flipped, (0.0, 0.5))
    assert s == -1.0
    assert max(dev.values()) <= 1e-14
