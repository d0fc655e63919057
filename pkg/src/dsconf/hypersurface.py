"""Immersion charts and the classical first-order data of a space-like
hypersurface in de Sitter space.

All pointwise quantities come from one batched jet evaluation of the chart
map.  The map is expanded to ``order`` (default 4); everything derived from
first and second derivatives of the immersion is then carried as order-2
jets, which is exactly what the Hessian of ``log rho`` and the curvature of
the conformal metric need.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import jets
from .jets import Jet
from .pseudo_linalg import SignatureMetric, orient_largest_positive

TOL_UMBILIC = 1e-9
QUADRIC_TOL = 1e-10


class ChartDomainError(ValueError):
    pass


class NotSpacelike(ValueError):
    pass


class NotRegular(ValueError):
    pass


@dataclass(frozen=True)
class Ambient:
    """An ambient quadric ``<x, x> = c`` (``c is None`` for a flat space)."""

    kind: str
    metric: SignatureMetric
    radius: float = 1.0

    @property
    def quadric(self):
        a2 = self.radius ** 2
        return {
            "deSitter": a2,
            "antiDeSitter": -a2,
            "hyperbolic": -a2,
            "sphere": a2,
            "LightCone": 0.0,
        }.get(self.kind)

    @property
    def dim(self):
        return self.metric.dim


def de_sitter(m, radius=1.0):
    """S^{m+1}_1(radius) in R^{m+2}_1."""
    return Ambient("deSitter", SignatureMetric(m + 2, 1), radius)


def anti_de_sitter(m, radius=1.0):
    """H^{m+1}_1(-1/radius^2) in R^{m+2}_2."""
    return Ambient("antiDeSitter", SignatureMetric(m + 2, 2), radius)


def minkowski(m):
    """R^{m+1}_1 (ambient of a hypersurface of dimension m)."""
    return Ambient("Minkowski", SignatureMetric(m + 1, 1))


def light_cone(m):
    return Ambient("LightCone", SignatureMetric(m + 3, 2))


def euclidean_sphere(n, radius=1.0):
    """S^n(radius) in Euclidean R^{n+1}; used for intrinsic sanity checks."""
    return Ambient("sphere", SignatureMetric(n + 1, 0), radius)


@dataclass(frozen=True)
class ImmersionChart:
    """A box-shaped chart domain and a map into an ambient space.

    ``map`` takes a list of ``m`` scalars (floats, arrays or jets) and returns
    the ambient coordinates as a list.  ``normal_hint``, when present, returns
    a time-like vector field used to orient the unit normal.
    """

    m: int
    ambient: Ambient
    lower: tuple
    upper: tuple
    map: Callable[[Sequence], Sequence]
    label: str = ""
    closed: tuple = ()
    normal_hint: Optional[Callable[[Sequence], Sequence]] = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.lower) != self.m or len(self.upper) != self.m:
            raise ValueError("domain box does not match chart dimension")
        if not self.closed:
            object.__setattr__(self, "closed", (True,) * self.m)

    @property
    def center(self):
        return 0.5 * (np.asarray(self.lower, float) + np.asarray(self.upper, float))

    def contains(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        closed = np.asarray(self.closed)
        ok_lo = np.where(closed, p >= lo, p > lo)
        ok_hi = np.where(closed, p <= hi, p < hi)
        return np.all(ok_lo & ok_hi, axis=1)

    def check_domain(self, points):
        inside = self.contains(points)
        if not np.all(inside):
            bad = np.atleast_2d(points)[~inside][0]
            raise ChartDomainError(f"point {bad.tolist()} outside chart domain of {self.label!r}")

    def evaluate(self, points):
        """Ambient coordinates at each row of ``points`` (shape (P, n))."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        cols = [p[:, k] for k in range(self.m)]
        out = self.map(cols)
        return np.stack([np.broadcast_to(np.asarray(c, float), (p.shape[0],)) for c in out], axis=-1)

    def jets(self, points, order):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        vars_ = Jet.variables(p, order)
        out = self.map(vars_)
        js = vars_[0].space
        return Jet.stack([c if isinstance(c, Jet) else Jet.constant(js, np.broadcast_to(c, (p.shape[0],)))
                          for c in out], axis=-1)

    def restrict(self, lower, upper, label=None):
        return ImmersionChart(self.m, self.ambient, tuple(lower), tuple(upper), self.map,
                              label or self.label, self.closed, self.normal_hint)


def evaluate_immersion(chart, points, order=4):
    """Component jets of the immersion at ``points``."""
    chart.check_domain(points)
    return chart.jets(points, order)


@dataclass(frozen=True)
class Grid:
    points: np.ndarray
    shape: tuple
    spacing: np.ndarray

    def interior(self, width=1):
        """Indices of grid nodes at least ``width`` nodes from every face."""
        idx = np.indices(self.shape).reshape(len(self.shape), -1).T
        ok = np.all((idx >= width) & (idx <= np.asarray(self.shape) - 1 - width), axis=1)
        return np.nonzero(ok)[0]


def uniform_grid(chart, n=9, margin=0.1):
    lo = np.asarray(chart.lower, float)
    hi = np.asarray(chart.upper, float)
    span = hi - lo
    a, b = lo + margin * span, hi - margin * span
    axes = [np.linspace(a[k], b[k], n) for k in range(chart.m)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    spacing = (b - a) / (n - 1) if n > 1 else np.zeros(chart.m)
    return Grid(pts, (n,) * chart.m, spacing)


# -----------------------------------------------------------------------------
# metric-only data (any ambient)


def _christoffel(ginv, dg):
    """Gamma^c_{ab} from the metric inverse and dg[..., a, b, k] = d_k g_ab."""
    # term[..., d, a, b] = d_a g_db + d_b g_da - d_d g_ab
    d_a_gdb = np.einsum("...dba->...dab", dg)
    d_b_gda = dg
    d_d_gab = np.einsum("...abd->...dab", dg)
    return 0.5 * np.einsum("...cd,...dab->...cab", ginv, d_a_gdb + d_b_gda - d_d_gab)


def first_fundamental_jet(X, metric):
    m = X.nvars
    dX = Jet.stack([X.deriv(k) for k in range(m)], axis=-2)
    return jets.einsum("an,bn->ab", dX * metric.diag, dX), dX


def first_fundamental(chart, p):
    """Induced metric at a single chart point (coordinate basis)."""
    chart.check_domain(p)
    X = chart.jets(p, 1)
    g, _ = first_fundamental_jet(X, chart.ambient.metric)
    gv = g.value[0]
    if np.any(np.linalg.eigvalsh(gv) <= 0):
        raise NotSpacelike(f"not space-like at p={np.asarray(p).tolist()}")
    return gv


def christoffels(chart, p):
    """Gamma^c_{ab} of the induced metric at a single chart point."""
    chart.check_domain(p)
    X = chart.jets(p, 2)
    g, _ = first_fundamental_jet(X, chart.ambient.metric)
    gv = g.value[0]
    return _christoffel(np.linalg.inv(gv), g.gradient()[0])


# -----------------------------------------------------------------------------
# de Sitter hypersurfaces


@dataclass
class LocalGeometry:
    """Pointwise first-order data at a batch of chart points.

    Coordinate-basis arrays use the chart coordinates ``u^a``; derivative
    indices are appended last (``dgbar[p, a, b, k] = d_k gbar_ab``).
    ``frame[p, a, i]`` are the coordinate components of the gbar-orthonormal
    frame e_i and ``coframe[p, i, a]`` those of its dual coframe.
    """

    points: np.ndarray
    m: int
    metric: SignatureMetric
    order: int
    x: np.ndarray
    dx: np.ndarray
    ddx: np.ndarray
    gbar: np.ndarray
    dgbar: np.ndarray
    normal: np.ndarray
    h_coord: np.ndarray
    H: np.ndarray
    dH: np.ndarray
    rho: np.ndarray
    dlogrho: np.ndarray
    ddlogrho: Optional[np.ndarray]
    frame: np.ndarray
    dframe: Optional[np.ndarray]
    coframe: np.ndarray
    g: np.ndarray
    dg: Optional[np.ndarray]
    ddg: Optional[np.ndarray]
    Y: np.ndarray
    dY: Optional[np.ndarray]
    ddY: Optional[np.ndarray]
    orientation: str = "largest-component"

    @property
    def gbar_inv(self):
        return np.linalg.inv(self.gbar)

    @property
    def christoffel_bar(self):
        return _christoffel(self.gbar_inv, self.dgbar)

    @property
    def h(self):
        """Second fundamental form in the frame e_i."""
        return np.einsum("pai,pab,pbj->pij", self.frame, self.h_coord, self.frame)

    def subset(self, idx):
        kw = {}
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            if isinstance(v, np.ndarray) and v.ndim >= 1 and v.shape[0] == self.points.shape[0]:
                kw[name] = v[idx]
            else:
                kw[name] = v
        return LocalGeometry(**kw)


def _require_de_sitter(chart):
    if chart.ambient.kind != "deSitter":
        raise ValueError(f"hypersurface data needs a de Sitter chart, got {chart.ambient.kind}")


def _normal_jet(X, dX, gbar_inv, metric):
    """Unit normal n with n_0 > 0 (the projection of the time axis)."""
    G = metric.diag
    XX = jets.einsum("n,n->", X * G, X)
    x0 = X[..., 0]
    coef = jets.einsum("ab,b->a", gbar_inv, dX[..., 0])
    tang = jets.einsum("a,an->n", coef, dX)
    e0 = np.zeros(metric.dim)
    e0[0] = 1.0
    n_prime = X * (x0 / XX).expand(1) + tang + e0
    nn = jets.einsum("n,n->", n_prime * G, n_prime)
    if np.any(nn.value >= 0):
        raise NotSpacelike("no time-like normal: surface not space-like")
    return n_prime * jets.reciprocal(jets.sqrt(-nn)).expand(1)


def _orientation_signs(chart, points, n_values, order):
    metric = chart.ambient.metric
    if chart.normal_hint is not None:
        p = np.atleast_2d(points)
        hint = np.stack([np.broadcast_to(np.asarray(c, float), (p.shape[0],))
                         for c in chart.normal_hint([p[:, k] for k in range(chart.m)])], axis=-1)
        s = np.sign(-np.sum(n_values * hint * metric.diag, axis=-1))
        s[s == 0] = 1.0
        return s, "reference normal"
    # basepoint rule: largest component positive at the domain center; the
    # projected normal is continuous (n_0 > 0), so one global sign suffices
    c = chart.center[None, :]
    nc = _normal_at(chart, c)[0]
    ref = orient_largest_positive(nc)
    s = 1.0 if np.dot(ref, nc) > 0 else -1.0
    return np.full(len(n_values), s), "largest-component at basepoint"


def oriented_normal(chart, points):
    """Unit normal at each point, with the chart's orientation rule applied."""
    _require_de_sitter(chart)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = _normal_at(chart, points)
    s, _ = _orientation_signs(chart, points, n, 1)
    return n * s[:, None]


def _normal_at(chart, points):
    X = chart.jets(points, 1)
    metric = chart.ambient.metric
    gbar, dX = first_fundamental_jet(X, metric)
    X0 = X.truncate(0)
    dX0 = dX.truncate(0)
    return _normal_jet(X0, dX0, jets.matinv(gbar.truncate(0)), metric).value


def local_geometry(chart, points, order=4, chunk=512):
    """Batched first-order data; see :class:`LocalGeometry`."""
    _require_de_sitter(chart)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    chart.check_domain(points)
    if order not in (3, 4):
        raise ValueError("jet order must be 3 or 4")
    parts = [_local_geometry_chunk(chart, points[i:i + chunk], order)
             for i in range(0, len(points), chunk)]
    if len(parts) == 1:
        return parts[0]
    kw = {}
    for name in LocalGeometry.__dataclass_fields__:
        vals = [getattr(p, name) for p in parts]
        if isinstance(vals[0], np.ndarray) and name != "points" and vals[0].shape[:1] == parts[0].points.shape[:1]:
            kw[name] = np.concatenate(vals, axis=0)
        elif name == "points":
            kw[name] = points
        else:
            kw[name] = vals[0]
    return LocalGeometry(**kw)


def _local_geometry_chunk(chart, points, order):
    m = chart.m
    metric = chart.ambient.metric
    K = order - 2
    X = chart.jets(points, order)
    dX = Jet.stack([X.deriv(k) for k in range(m)], axis=-2)
    ddX = Jet.stack([dX.deriv(k) for k in range(m)], axis=-3)
    X2, dX2, ddX2 = X.truncate(K), dX.truncate(K), ddX
    G = metric.diag

    gbar = jets.einsum("an,bn->ab", dX2 * G, dX2)
    ev = np.linalg.eigvalsh(gbar.value)
    if np.any(ev <= 0):
        bad = points[np.any(ev <= 0, axis=-1)][0]
        raise NotSpacelike(f"not space-like at p={bad.tolist()}")
    gbar_inv = jets.matinv(gbar)

    n = _normal_jet(X2, dX2, gbar_inv, metric)
    s, orientation = _orientation_signs(chart, points, n.value, order)
    n = n * s[:, None]

    h = -jets.einsum("n,abn->ab", n * G, ddX2)
    H = jets.einsum("ab,ab->", gbar_inv, h) * (1.0 / m)
    hup = jets.einsum("ac,cb->ab", gbar_inv, h)
    h2 = jets.einsum("ab,ba->", hup, hup)
    trace_free = h2 - H * H * m
    tf = trace_free.value
    if np.any(tf <= TOL_UMBILIC * np.maximum(h2.value, 1e-300)):
        bad = points[tf <= TOL_UMBILIC * np.maximum(h2.value, 1e-300)][0]
        raise NotRegular(f"not regular (umbilic) at p={bad.tolist()}")
    rho2 = trace_free * (m / (m - 1.0))
    rho = jets.sqrt(rho2)
    logrho = jets.log(rho2) * 0.5

    R = jets.cholesky_upper(gbar)
    frame = jets.matinv(R)
    g = gbar * rho2.expand(2)
    Y = Jet.stack([rho] + [rho * X2[..., k] for k in range(metric.dim)], axis=-1)

    two = K >= 2
    return LocalGeometry(
        points=points,
        m=m,
        metric=metric,
        order=order,
        x=X.value,
        dx=dX.value,
        ddx=ddX.value,
        gbar=gbar.value,
        dgbar=gbar.gradient(),
        normal=n.value,
        h_coord=h.value,
        H=H.value,
        dH=H.gradient(),
        rho=rho.value,
        dlogrho=logrho.gradient(),
        ddlogrho=logrho.hessian() if two else None,
        frame=frame.value,
        dframe=frame.gradient(),
        coframe=R.value,
        g=g.value,
        dg=g.gradient(),
        ddg=g.hessian() if two else None,
        Y=Y.value,
        dY=Y.gradient(),
        ddY=Y.hessian() if two else None,
        orientation=orientation,
    )


# -----------------------------------------------------------------------------
# single-point conveniences


def second_fundamental(chart, p):
    """(h in the frame e_i, H) at one point; umbilic points are allowed here."""
    _require_de_sitter(chart)
    p = np.atleast_2d(np.asarray(p, dtype=float))
    chart.check_domain(p)
    metric = chart.ambient.metric
    X = chart.jets(p, 2)
    dX = Jet.stack([X.deriv(k) for k in range(chart.m)], axis=-2)
    ddX = Jet.stack([dX.deriv(k) for k in range(chart.m)], axis=-3).value
    X0, dX0 = X.truncate(0), dX.truncate(0)
    gbar = jets.einsum("an,bn->ab", dX0 * metric.diag, dX0)
    if np.any(np.linalg.eigvalsh(gbar.value) <= 0):
        raise NotSpacelike(f"not space-like at p={p[0].tolist()}")
    n = _normal_jet(X0, dX0, jets.matinv(gbar), metric).value
    s, _ = _orientation_signs(chart, p, n, 2)
    n = n * s[:, None]
    h = -np.einsum("pn,pabn->pab", n * metric.diag, ddX)[0]
    g0 = gbar.value[0]
    frame = np.linalg.inv(np.linalg.cholesky(g0).T)
    H = float(np.trace(np.linalg.solve(g0, h))) / chart.m
    return frame.T @ h @ frame, H


def conformal_factor(chart, p, order=4):
    return float(local_geometry(chart, p, order=order).rho[0])


def covariant_hessian_logrho(chart, p):
    """(log rho)_{,ij} in the frame e_i at one point."""
    geo = local_geometry(chart, p, order=4)
    return hessian_logrho_frame(geo)[0]


def hessian_logrho_frame(geo):
    gam = geo.christoffel_bar
    hess = geo.ddlogrho - np.einsum("pcab,pc->pab", gam, geo.dlogrho)
    return np.einsum("pai,pab,pbj->pij", geo.frame, hess, geo.frame)


def quadric_residual(chart, points):
    x = chart.evaluate(points)
    c = chart.ambient.quadric
    if c is None:
        return np.zeros(len(x))
    return np.abs(chart.ambient.metric.inner(x, x) - c)
