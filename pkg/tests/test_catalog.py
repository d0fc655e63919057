import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dsconf import catalog
from dsconf.catalog import NoAdmissibleParameters, ParameterError
from dsconf.checker import eigen_structure
from dsconf.conformal import invariants
from dsconf.hypersurface import uniform_grid

from helpers import entry, result

SQ2 = np.sqrt(2.0)


def test_product_closed_form():
    e = catalog.make_product_in_desitter(3, 1, SQ2)
    assert e.expected.rho == pytest.approx(1 / SQ2, abs=1e-15)
    vals = sorted(v for v, k in e.expected.B_eigs for _ in range(k))
    np.testing.assert_allclose(vals, [-1 / 3, -1 / 3, 2 / 3], atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 6), st.data(), st.floats(1.05, 4.0))
def test_product_expected_B_is_trace_free(m, data, a):
    k = data.draw(st.integers(1, m - 1))
    e = catalog.make_product_in_desitter(m, k, a)
    assert abs(sum(v * k for v, k in e.expected.B_eigs)) <= 1e-12
    assert abs(sum(v * v * k for v, k in e.expected.B_eigs) - (m - 1) / m) <= 1e-12


@pytest.mark.parametrize("a", [1.0, 0.5, -2.0])
def test_product_guard(a):
    with pytest.raises(ParameterError, match="a > 1"):
        catalog.make_product_in_desitter(3, 1, a)


def test_product_k_guard():
    with pytest.raises(ParameterError, match="k"):
        catalog.make_product_in_desitter(3, 3, 1.5)


def test_product_pipeline_matches_closed_form_at_m4():
    c = result("product-ds(4,2,1.5)").analysis.center
    e = entry("product-ds(4,2,1.5)")
    want = sorted((v for v, k in e.expected.B_eigs for _ in range(k)), reverse=True)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(c.B), axis=1)[:, ::-1],
                               np.broadcast_to(want, c.B.shape[:2]), atol=1e-10)
    np.testing.assert_allclose(c.rho, e.expected.rho, atol=1e-12)


def test_item5_valid_with_positive_rho():
    c = result("item5(3,1,1)").analysis.center
    assert np.all(c.rho > 0)
    assert eigen_structure(c.B).t == 2


def test_item6_guard_and_structure():
    with pytest.raises(ParameterError, match="0 < a < 1"):
        catalog.make_lifted_product("item6", 3, 1, 1.0)
    assert eigen_structure(result("item6(3,1,0.6)").analysis.center.B).t == 2
    assert eigen_structure(result("item6(5,2,0.6)").analysis.center.B).t == 2


def test_lifted_product_unknown_kind():
    with pytest.raises(ParameterError):
        catalog.make_lifted_product("item9", 3, 1, 1.0)


def test_wp_structure_and_domain():
    e = entry("wp(3,1,1,sqrt2)")
    r = result("wp(3,1,1,sqrt2)")
    assert eigen_structure(r.analysis.center.B).t == 3
    assert np.max(np.abs(r.analysis.dB.values)) <= 1e-5
    t_axis = 2   # q + p
    assert e.chart.lower[t_axis] >= 0.1


def test_wp_guards():
    with pytest.raises(ParameterError, match="p \\+ q < m"):
        catalog.make_wp(3, 2, 1, SQ2)
    with pytest.raises(ParameterError, match="a > 1"):
        catalog.make_wp(4, 1, 1, 0.9)


@pytest.mark.parametrize("example", ["32", "33"])
def test_examples_unattainable_at_r1(example):
    with pytest.raises(NoAdmissibleParameters, match="no admissible"):
        catalog.solve_inner_product(example, 3, 2, 1.0, lam=0.0)


@pytest.mark.parametrize("example,lam", [("32", 0.44095855184409843), ("33", 1 / 6)])
def test_solved_constraints_plug_back(example, lam):
    sol = catalog.solve_inner_product(example, 3, 2, 2.0)
    assert abs(sol.residual_S) <= 1e-10
    assert abs(sol.residual_H) <= 1e-10
    assert sol.lam == pytest.approx(lam, abs=1e-10)


def test_lambda_mismatch_is_reported():
    with pytest.raises(NoAdmissibleParameters, match="admissible lambda"):
        catalog.solve_inner_product("32", 3, 2, 2.0, lam=0.0)


def test_example_guards():
    with pytest.raises(ParameterError):
        catalog.make_example_32(3, 3, 2.0)
    with pytest.raises(ParameterError):
        catalog.make_example_33(3, 2, -1.0)
    with pytest.raises(ParameterError, match="eps"):
        catalog.make_example_33(3, 2, 2.0, eps=0)


@pytest.mark.parametrize("key", ["example32(3,2,2)", "example33(3,2,2,+1)"])
def test_example_rho_oracle(key):
    e = entry(key)
    pts = uniform_grid(e.chart, 4).points
    inv = invariants(e.chart, pts)
    np.testing.assert_allclose(inv.rho, e.rho_oracle(pts), atol=1e-8)


def test_example_D_eigs_formula():
    top, bottom = 1 / 8 - 0.5 * 0.09, -(1 / 8 + 0.5 * 0.09)
    assert catalog.example_D_eigs("32", 4, 2, 2.0, 0.3) == ((top, 2), (bottom, 2))
    assert catalog.example_D_eigs("33", 4, 3, 2.0, 0.3) == ((bottom, 3), (top, 1))


def test_registry():
    assert len(catalog.labeled_entries()) == 9
    assert [e.label for e in catalog.negative_controls()] == ["none", "none"]
    e = catalog.build("product-ds", m=4, k=1, a=None)
    assert e.params == {"m": 4, "k": 1, "a": SQ2}
    with pytest.raises(KeyError, match="unknown entry"):
        catalog.build("nope")


def test_default_grid_size():
    assert [catalog.default_grid_size(m) for m in (3, 4, 5)] == [9, 7, 5]


def test_expected_invariants_validate_multiplicity():
    with pytest.raises(ValueError):
        catalog.ExpectedInvariants(B_eigs=((1.0, 0),))
