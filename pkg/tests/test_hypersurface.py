import numpy as np
import pytest

from dsconf import jets
from dsconf.catalog import labeled_entries, make_product_in_desitter, make_wp
from dsconf.hypersurface import (
    ImmersionChart,
    NotRegular,
    NotSpacelike,
    christoffels,
    conformal_factor,
    covariant_hessian_logrho,
    de_sitter,
    euclidean_sphere,
    first_fundamental,
    local_geometry,
    minkowski,
    quadric_residual,
    second_fundamental,
    uniform_grid,
)

SQ2 = np.sqrt(2.0)


def polar_sphere():
    def x(u):
        t, p = u
        return [jets.sin(t) * jets.cos(p), jets.sin(t) * jets.sin(p), jets.cos(t)]

    return ImmersionChart(2, euclidean_sphere(2), (0.2, -2.0), (2.9, 2.0), x, "S2")


def equator(m=3):
    # totally geodesic x_0 = 0 slice of S^{m+1}_1
    def x(u):
        r2 = 1.0 - sum(c * c for c in u)
        return [0.0 * u[0], jets.sqrt(r2)] + list(u)

    return ImmersionChart(m, de_sitter(m), (-0.3,) * m, (0.3,) * m, x, "equator")


def umbilic_slice(m=3, t=0.5):
    # x_0 = sinh t: a totally umbilic sphere
    c = np.cosh(t)

    def x(u):
        r2 = 1.0 - sum(v * v for v in u)
        return [np.sinh(t) + 0.0 * u[0], c * jets.sqrt(r2)] + [c * v for v in u]

    return ImmersionChart(m, de_sitter(m), (-0.3,) * m, (0.3,) * m, x, "umbilic")


def test_first_fundamental_product_is_block_diagonal():
    e = make_product_in_desitter(3, 1, SQ2)
    g = first_fundamental(e.chart, [[0.1, -0.2, 0.4]])
    np.testing.assert_allclose(g[:2, 2], 0, atol=1e-15)


def test_first_fundamental_flat_graph():
    chart = ImmersionChart(2, minkowski(2), (-1, -1), (1, 1), lambda u: [0.0 * u[0], u[0], u[1]])
    np.testing.assert_allclose(first_fundamental(chart, [[0.3, 0.2]]), np.eye(2))


@pytest.mark.parametrize("e", labeled_entries(), ids=lambda e: e.chart.label)
def test_first_fundamental_vs_fd(e):
    p = e.chart.center
    g = first_fundamental(e.chart, [p])
    G = e.chart.ambient.metric.diag
    h = 1e-5
    dX = np.stack([(e.chart.evaluate([p + h * ek])[0] - e.chart.evaluate([p - h * ek])[0]) / (2 * h)
                   for ek in np.eye(e.m)])
    np.testing.assert_allclose(g, (dX * G) @ dX.T, atol=1e-7)


def test_first_fundamental_rejects_timelike():
    def x(u):
        return [jets.sinh(u[0]), jets.cosh(u[0]) * jets.cos(u[1]), jets.cosh(u[0]) * jets.sin(u[1]),
                0.0 * u[0]]

    chart = ImmersionChart(2, de_sitter(2), (-0.5, -0.5), (0.5, 0.5), x)
    with pytest.raises(NotSpacelike):
        first_fundamental(chart, [[0.0, 0.0]])


def test_second_fundamental_product():
    e = make_product_in_desitter(3, 1, SQ2)
    h, H = second_fundamental(e.chart, [[0.1, 0.2, -0.3]])
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(h)), [1 / SQ2, 1 / SQ2, SQ2], atol=1e-12)
    assert abs(H - (2 / SQ2 + SQ2) / 3) <= 1e-12


def test_second_fundamental_totally_geodesic():
    h, H = second_fundamental(equator(), [[0.1, 0.0, -0.1]])
    np.testing.assert_allclose(h, 0, atol=1e-13)
    assert abs(H) <= 1e-13


def test_second_fundamental_sign_flip():
    e = make_product_in_desitter(3, 1, SQ2)
    hint = e.chart.normal_hint
    flipped = ImmersionChart(3, e.chart.ambient, e.chart.lower, e.chart.upper, e.chart.map,
                             normal_hint=lambda u: [-c for c in hint(u)])
    p = [[0.1, 0.2, -0.3]]
    h1, H1 = second_fundamental(e.chart, p)
    h2, H2 = second_fundamental(flipped, p)
    np.testing.assert_allclose(h2, -h1, atol=1e-14)
    assert H2 == pytest.approx(-H1, abs=1e-14)


def test_conformal_factor_product():
    e = make_product_in_desitter(3, 1, SQ2)
    assert conformal_factor(e.chart, [[0.0, 0.1, 0.5]]) == pytest.approx(1 / SQ2, abs=1e-13)


def test_conformal_factor_umbilic_rejected():
    with pytest.raises(NotRegular):
        conformal_factor(umbilic_slice(), [[0.0, 0.1, 0.0]])


def test_christoffels_flat_zero():
    chart = ImmersionChart(2, minkowski(2), (-1, -1), (1, 1), lambda u: [0.0 * u[0], u[0], u[1]])
    np.testing.assert_array_equal(christoffels(chart, [[0.2, 0.1]]), 0)


@pytest.mark.parametrize("theta", [0.4, 1.0, 2.2])
def test_christoffels_round_sphere(theta):
    gam = christoffels(polar_sphere(), [[theta, 0.3]])
    assert abs(gam[0, 1, 1] + np.sin(theta) * np.cos(theta)) <= 1e-10
    assert abs(gam[1, 0, 1] - np.cos(theta) / np.sin(theta)) <= 1e-10
    np.testing.assert_array_equal(gam, np.swapaxes(gam, 1, 2))


def test_hessian_logrho_constant_rho():
    e = make_product_in_desitter(3, 1, SQ2)
    np.testing.assert_allclose(covariant_hessian_logrho(e.chart, [[0.1, 0.1, 0.2]]), 0, atol=1e-12)


def test_hessian_logrho_wp_vs_fd():
    e = make_wp(3, 1, 1, SQ2)
    p = e.chart.center
    hess = covariant_hessian_logrho(e.chart, [p])
    np.testing.assert_allclose(hess, hess.T, atol=1e-10)
    h = 1e-4
    geo0 = local_geometry(e.chart, [p])
    d = np.stack([(local_geometry(e.chart, [p + h * ek]).dlogrho[0]
                   - local_geometry(e.chart, [p - h * ek]).dlogrho[0]) / (2 * h) for ek in np.eye(3)],
                 axis=-1)
    coord = d - np.einsum("cab,c->ab", geo0.christoffel_bar[0], geo0.dlogrho[0])
    fd = geo0.frame[0].T @ coord @ geo0.frame[0]
    np.testing.assert_allclose(hess, fd, atol=1e-6)


@pytest.mark.parametrize("e", labeled_entries(), ids=lambda e: e.chart.label)
def test_catalog_charts_lie_on_de_sitter(e):
    pts = uniform_grid(e.chart, 4).points
    assert np.max(quadric_residual(e.chart, pts)) <= 1e-10


def test_local_geometry_chunks_match():
    e = make_product_in_desitter(3, 1, SQ2)
    pts = uniform_grid(e.chart, 4).points
    a = local_geometry(e.chart, pts, chunk=7)
    b = local_geometry(e.chart, pts)
    np.testing.assert_allclose(a.g, b.g, atol=1e-15)
    np.testing.assert_allclose(a.ddY, b.ddY, atol=1e-14)


def test_local_geometry_rejects_other_ambients():
    with pytest.raises(ValueError, match="de Sitter"):
        local_geometry(polar_sphere(), [[1.0, 0.0]])
    with pytest.raises(ValueError, match="order"):
        local_geometry(make_product_in_desitter(3, 1, SQ2).chart, [[0, 0, 0]], order=2)
