"""The conformal atlas of de Sitter space.

Points of the conformal space are null lines in R^{m+3}_2 (two leading
time-like slots).  Three space forms embed into it:

    sigma0(u) = (1 + q, 2 u_0, 2 u', 1 - q),  u in R^{m+1}_1, q = <u, u>_1
    sigma1(u) = (u_0, 1, u'),                  u in S^{m+1}_1
    sigma-1(y) = (y, 1),                       y in H^{m+1}_1 in R^{m+2}_2

and two affine charts map back onto S^{m+1}_1:

    psi1([y]) = (y_2, y_3) / y_1,   psi2([y]) = (y_1, y_3) / y_2

where y = (y_1, y_2, y_3) splits off the two time-like slots.  The slot order
of each embedding is chosen so that every image is null; psi2 o sigma1 is the
identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from . import jets
from .hypersurface import Ambient, ImmersionChart, de_sitter, light_cone, oriented_normal
from .pseudo_linalg import PseudoOrthogonalMap, SignatureMetric, inner

NULL_TOL = 1e-10
CHART_TOL = 1e-12

SIGMA_KINDS = (0, 1, -1)
ROUTES = {
    "sigma1": (0, "psi1"),
    "sigma2": (0, "psi2"),
    "tau1": (-1, "psi1"),
    "tau2": (-1, "psi2"),
}


class ChartInfinity(ValueError):
    pass


class OutsideChart(ValueError):
    pass


class ExcludedSet(ValueError):
    pass


class NoAdmissibleChart(ValueError):
    pass


def light_metric(m):
    return SignatureMetric(m + 3, 2)


@dataclass(frozen=True)
class ProjectiveLightPoint:
    """A null line in R^{m+3}_2 stored by its canonical representative."""

    rep: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.rep, dtype=float)
        if y.ndim != 1 or len(y) < 4:
            raise ValueError("light point needs a vector of length >= 4")
        scale = float(np.dot(y, y))
        if scale == 0.0:
            raise ValueError("zero vector is not a point of the conformal space")
        if abs(inner(light_metric(len(y) - 3), y, y)) > NULL_TOL * scale:
            raise ValueError("representative is not null")
        nz = np.nonzero(np.abs(y) > 1e-300)[0][0]
        if y[nz] < 0:
            y = -y
        object.__setattr__(self, "rep", y)

    @property
    def m(self):
        return len(self.rep) - 3

    def same_point(self, other, tol=1e-10):
        a = self.rep / np.linalg.norm(self.rep)
        b = other.rep / np.linalg.norm(other.rep)
        return bool(np.max(np.abs(a - b)) <= tol)

    def in_U1(self):
        return abs(self.rep[0]) > CHART_TOL * np.linalg.norm(self.rep)

    def in_U2(self):
        return abs(self.rep[1]) > CHART_TOL * np.linalg.norm(self.rep)


# -----------------------------------------------------------------------------
# component formulas, shared by the float and jet paths


def _sigma_components(kind, u):
    """Components of sigma_kind(u); u is a list of scalars or jets."""
    if kind == 0:
        q = -u[0] * u[0]
        for c in u[1:]:
            q = q + c * c
        return [1.0 + q, 2.0 * u[0]] + [2.0 * c for c in u[1:]] + [1.0 - q]
    if kind == 1:
        return [u[0], 1.0 + 0.0 * u[0]] + list(u[1:])
    if kind == -1:
        return list(u) + [1.0 + 0.0 * u[0]]
    raise ValueError(f"unknown embedding kind {kind!r}")


def _psi_components(which, y):
    if which == "psi1":
        d = y[0]
        rest = [y[1]] + list(y[2:])
    elif which == "psi2":
        d = y[1]
        rest = [y[0]] + list(y[2:])
    else:
        raise ValueError(f"unknown chart {which!r}")
    inv = jets.reciprocal(d) if isinstance(d, jets.Jet) else 1.0 / d
    return [c * inv for c in rest]


def _check_space_form(kind, u):
    u = np.asarray(u, dtype=float)
    if kind == 0:
        return
    if kind == 1:
        q = inner(SignatureMetric(len(u), 1), u, u)
        if abs(q - 1.0) > 1e-10:
            raise ValueError(f"point not in S^{{m+1}}_1 (<u,u>_1 = {q:.3g})")
    elif kind == -1:
        q = inner(SignatureMetric(len(u), 2), u, u)
        if abs(q + 1.0) > 1e-10:
            raise ValueError(f"point not in H^{{m+1}}_1 (<u,u>_2 = {q:.3g})")
    else:
        raise ValueError(f"unknown embedding kind {kind!r}")


def embed_sigma(kind, u):
    u = np.asarray(u, dtype=float)
    _check_space_form(kind, u)
    rep = np.array([float(c) for c in _sigma_components(kind, list(u))])
    return ProjectiveLightPoint(rep)


def sigma_inverse(kind, P):
    """Recover the space-form point; raises ChartInfinity on the excluded hyperplane."""
    y = P.rep
    scale = np.linalg.norm(y)
    if kind == 0:
        d = y[0] + y[-1]
        if abs(d) <= CHART_TOL * scale:
            raise ChartInfinity("image at infinity of this chart")
        return np.concatenate([[y[1]], y[2:-1]]) / d
    if kind == 1:
        if abs(y[1]) <= CHART_TOL * scale:
            raise ChartInfinity("image at infinity of this chart")
        return np.concatenate([[y[0]], y[2:]]) / y[1]
    if kind == -1:
        if abs(y[-1]) <= CHART_TOL * scale:
            raise ChartInfinity("image at infinity of this chart")
        return y[:-1] / y[-1]
    raise ValueError(f"unknown embedding kind {kind!r}")


def project_psi(which, P):
    y = P.rep if isinstance(P, ProjectiveLightPoint) else np.asarray(P, dtype=float)
    slot = {"psi1": 0, "psi2": 1}.get(which)
    if slot is None:
        raise ValueError(f"unknown chart {which!r}")
    if abs(y[slot]) <= CHART_TOL * np.linalg.norm(y):
        raise OutsideChart(f"outside chart U{slot + 1}")
    return np.array(_psi_components(which, list(y)))


# -----------------------------------------------------------------------------
# charts


def _probe_points(chart, n=5):
    axes = [np.linspace(lo, hi, n) for lo, hi in zip(chart.lower, chart.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def _corners(chart):
    return np.array(list(product(*zip(chart.lower, chart.upper))), dtype=float)


def _denominator_values(route, inner_chart, pts):
    kind, which = ROUTES[route]
    u = inner_chart.evaluate(pts)
    y = _sigma_components(kind, [u[:, k] for k in range(u.shape[1])])
    return np.asarray(y[0 if which == "psi1" else 1], dtype=float) * np.ones(len(pts))


def lift_composed_chart(inner_chart, route):
    """Compose an inner chart (Minkowski or anti de Sitter) with a route.

    Routes: sigma1 = psi1 o sigma0, sigma2 = psi2 o sigma0 (Minkowski inner);
    tau1 = psi1 o sigma-1, tau2 = psi2 o sigma-1 (anti de Sitter inner).
    """
    if route not in ROUTES:
        raise ValueError(f"unknown route {route!r}")
    kind, which = ROUTES[route]
    want = "Minkowski" if kind == 0 else "antiDeSitter"
    if inner_chart.ambient.kind != want:
        raise ValueError(f"route {route} needs a {want} inner chart, got {inner_chart.ambient.kind}")
    pts = np.concatenate([_corners(inner_chart), _probe_points(inner_chart)])
    den = _denominator_values(route, inner_chart, pts)
    s0 = np.sign(den[0])
    bad = np.nonzero((np.abs(den) <= CHART_TOL) | (np.sign(den) != s0))[0]
    if s0 == 0 or bad.size:
        where = pts[bad[0]] if bad.size else pts[0]
        raise ExcludedSet(f"domain box meets the excluded set of {route} near {where.tolist()}")

    inner_map = inner_chart.map

    def lifted(u):
        return _psi_components(which, _sigma_components(kind, list(inner_map(u))))

    return ImmersionChart(inner_chart.m, de_sitter(inner_chart.m), inner_chart.lower,
                          inner_chart.upper, lifted, f"{route}({inner_chart.label})",
                          inner_chart.closed)


def _light_lift(x):
    """(1, x) as a list, the projective class of the conformal position."""
    one = 1.0 + 0.0 * x[0]
    return [one] + list(x)


def _admissible_charts(M, chart):
    pts = np.concatenate([_corners(chart), _probe_points(chart)])
    x = chart.evaluate(pts)
    y = np.concatenate([np.ones((len(pts), 1)), x], axis=1) @ M.T
    scale = np.linalg.norm(y, axis=1)
    options = []
    for name, slot in (("psi1", 0), ("psi2", 1)):
        d = y[:, slot] / scale
        if np.all(d > CHART_TOL) or np.all(d < -CHART_TOL):
            options.append((float(np.min(np.abs(d))), name))
    return options


def act_and_reproject(T, chart, which=None, shrink=(1.0, 0.5, 0.25)):
    """The chart p -> psi(T (1, x(p))), with psi1 or psi2 chosen automatically.

    When the image leaves both affine charts somewhere on the box, the box is
    shrunk about its center by the factors in ``shrink`` until one fits.
    """
    if chart.ambient.kind != "deSitter":
        raise ValueError("act_and_reproject needs a de Sitter chart")
    M = T.matrix if isinstance(T, PseudoOrthogonalMap) else np.asarray(T, float)
    if M.shape != (chart.m + 3,) * 2:
        raise ValueError("map dimension does not match the light cone of the chart")
    center = chart.center
    half = 0.5 * (np.asarray(chart.upper, float) - np.asarray(chart.lower, float))
    for f in shrink:
        box = chart if f == 1.0 else chart.restrict(center - f * half, center + f * half)
        options = _admissible_charts(M, box)
        names = [o[1] for o in options]
        if which is None and options:
            chosen = max(options)[1]
            break
        if which is not None and which in names:
            chosen = which
            break
    else:
        if which is None:
            raise NoAdmissibleChart("no admissible chart: image crosses both chart boundaries")
        raise NoAdmissibleChart(f"image leaves U{which[-1]} on the domain box")
    base = chart.map

    def moved(u):
        z = _light_lift(list(base(u)))
        w = [sum(M[i, j] * z[j] for j in range(len(z)) if M[i, j] != 0.0) for i in range(len(z))]
        w = [c if not np.isscalar(c) or c != 0 else 0.0 * z[0] for c in w]
        return _psi_components(chosen, w)

    def image(x):
        y = np.concatenate([np.ones((len(x), 1)), x], axis=1) @ M.T
        return np.stack(_psi_components(chosen, list(y.T)), axis=-1)

    def hint(u):
        # push the old oriented normal forward; the map is conformal, so the
        # image of a normal is a co-oriented normal of the moved hypersurface
        pts = np.stack([np.broadcast_to(np.asarray(c, float), np.shape(u[0])) for c in u], axis=-1)
        pts = np.atleast_2d(pts)
        x = chart.evaluate(pts)
        n = oriented_normal(chart, pts)
        t = 1e-6
        return list(((image(x + t * n) - image(x - t * n)) / (2 * t)).T)

    return ImmersionChart(chart.m, chart.ambient, box.lower, box.upper, moved,
                          f"{chosen}(T.{chart.label})", chart.closed, normal_hint=hint)


def light_cone_chart(chart):
    """The chart p -> (1, x(p)) into the light cone (the projective class of Y)."""
    base = chart.map
    return ImmersionChart(chart.m, light_cone(chart.m), chart.lower, chart.upper,
                          lambda u: _light_lift(list(base(u))), f"lift({chart.label})",
                          chart.closed)
