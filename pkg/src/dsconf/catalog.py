"""Hypersurface families with closed-form expectations.

Every constructor returns a CatalogEntry whose chart maps into S^{m+1}_1,
either directly or through a composed conformal route.  Coordinates are
graph-type: a sphere factor S^n(c) is parametrized by v -> c(sqrt(1-|v|^2), v),
a hyperbolic factor by w -> c(sqrt(1+|w|^2), w) with the first slot time-like.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import jets
from .hypersurface import ImmersionChart, anti_de_sitter, de_sitter, minkowski
from .spaceforms import lift_composed_chart


class ParameterError(ValueError):
    pass


class NoAdmissibleParameters(ValueError):
    pass


SPHERE_BOX = 0.4
HYPERBOLIC_BOX = 1.0


def default_grid_size(m):
    return {2: 9, 3: 9, 4: 7}.get(m, 5)


@dataclass(frozen=True)
class ExpectedInvariants:
    """Closed-form expectations; eigenvalue lists are (value, multiplicity)."""

    B_eigs: Optional[tuple] = None
    D_eigs: Optional[tuple] = None
    rho: Optional[float] = None
    flags: frozenset = frozenset()
    t_B: Optional[int] = None
    t_D: Optional[int] = None

    def __post_init__(self):
        for eigs in (self.B_eigs, self.D_eigs):
            if eigs is not None and any(k <= 0 for _, k in eigs):
                raise ValueError("multiplicities must be positive")


@dataclass(frozen=True)
class CatalogEntry:
    family: str
    label: str
    params: dict
    chart: ImmersionChart
    expected: ExpectedInvariants = ExpectedInvariants()
    route: str = "direct"
    lam: Optional[float] = None
    rho_oracle: Optional[Callable] = field(default=None, compare=False)
    notes: dict = field(default_factory=dict, compare=False)
    inner: Optional[ImmersionChart] = field(default=None, compare=False)

    @property
    def m(self):
        return self.chart.m


# -----------------------------------------------------------------------------
# coordinate pieces


def _sqrt1p(ws):
    s = 1.0
    for w in ws:
        s = s + w * w
    return jets.sqrt(s)


def _sqrt1m(vs):
    s = 1.0
    for v in vs:
        s = s - v * v
    return jets.sqrt(s)


def _box(*parts):
    lo, hi = [], []
    for n, a, b in parts:
        lo += [a] * n
        hi += [b] * n
    return tuple(lo), tuple(hi)


def _check_int(name, v, lo, hi):
    if int(v) != v or not lo <= v <= hi:
        raise ParameterError(f"guard {lo} <= {name} <= {hi} violated ({name} = {v})")


# -----------------------------------------------------------------------------
# product and warped families


def product_principal_curvatures(a):
    b = np.sqrt(a * a - 1.0)
    return b / a, a / b


def make_product_in_desitter(m, k, a):
    """S^{m-k}(a) x H^k(-1/(a^2-1)) in S^{m+1}_1."""
    if not a > 1:
        raise ParameterError(f"guard a > 1 violated (a = {a})")
    _check_int("k", k, 1, m - 1)
    n_s = m - k
    b = np.sqrt(a * a - 1.0)

    def x(u):
        v, w = u[:n_s], u[n_s:]
        return [b * _sqrt1p(w), a * _sqrt1m(v)] + [a * c for c in v] + [b * c for c in w]

    def hint(u):
        v, w = u[:n_s], u[n_s:]
        return [a * _sqrt1p(w), b * _sqrt1m(v)] + [b * c for c in v] + [a * c for c in w]

    lo, hi = _box((n_s, -SPHERE_BOX, SPHERE_BOX), (k, -HYPERBOLIC_BOX, HYPERBOLIC_BOX))
    chart = ImmersionChart(m, de_sitter(m), lo, hi, x, f"product-ds(m={m},k={k},a={a:g})",
                           normal_hint=hint)
    alpha, beta = product_principal_curvatures(a)
    H = (n_s * alpha + k * beta) / m
    rho = np.sqrt(k * n_s / (m - 1.0)) * (beta - alpha)
    eigs = (((beta - H) / rho, k), ((alpha - H) / rho, n_s))
    exp = ExpectedInvariants(B_eigs=eigs, rho=rho,
                             flags=frozenset({"phi_zero", "B_parallel", "D_parallel"}), t_B=2)
    return CatalogEntry("product-ds", "item4", {"m": m, "k": k, "a": a}, chart, exp,
                        notes={"alpha": alpha, "beta": beta, "H": H})


def item5_inner(m, k, a):
    """H^k(-1/a^2) x R^{m-k} in R^{m+1}_1, with the flat factor boxed away from
    the excluded set 1 + <u,u> = 0 of the sigma0 routes."""
    n_f = m - k

    def u(c):
        w, s = c[:k], c[k:]
        return [a * _sqrt1p(w)] + [a * t for t in w] + list(s)

    c0 = np.sqrt(max(a * a - 1.0, 0.0)) + 0.5
    lo, hi = _box((k, -HYPERBOLIC_BOX, HYPERBOLIC_BOX), (n_f, c0, c0 + 1.0))
    return ImmersionChart(m, minkowski(m), lo, hi, u, f"H^{k}({a:g})xR^{n_f}")


def item6_inner(m, k, a):
    """H^k(-1/a^2) x H^{m-k}(-1/(1-a^2)) in H^{m+1}_1."""
    c = np.sqrt(1.0 - a * a)

    def y(u):
        w, w2 = u[:k], u[k:]
        return [a * _sqrt1p(w), c * _sqrt1p(w2)] + [a * t for t in w] + [c * t for t in w2]

    lo, hi = _box((k, -HYPERBOLIC_BOX, HYPERBOLIC_BOX), (m - k, -HYPERBOLIC_BOX, HYPERBOLIC_BOX))
    return ImmersionChart(m, anti_de_sitter(m), lo, hi, y, f"H^{k}({a:g})xH^{m - k}")


def make_lifted_product(kind, m, k, a, route=None):
    if kind == "item5":
        if not a > 0:
            raise ParameterError(f"guard a > 0 violated (a = {a})")
        _check_int("k", k, 1, m - 1)
        inner = item5_inner(m, k, a)
        route = route or "sigma1"
    elif kind == "item6":
        if not 0 < a < 1:
            raise ParameterError(f"guard 0 < a < 1 violated (a = {a})")
        _check_int("k", k, 1, m - 1)
        inner = item6_inner(m, k, a)
        route = route or "tau1"
    else:
        raise ParameterError(f"unknown lifted family {kind!r}")
    chart = lift_composed_chart(inner, route)
    exp = ExpectedInvariants(flags=frozenset({"phi_zero", "B_parallel", "D_parallel"}), t_B=2)
    return CatalogEntry(kind, kind, {"m": m, "k": k, "a": a}, chart, exp, route=route, inner=inner)


def wp_inner(m, p, q, a):
    b = np.sqrt(a * a - 1.0)
    n_r = m - p - q - 1

    def u(c):
        w, v, t, z = c[:q], c[q:q + p], c[q + p], c[q + p + 1:]
        return ([t * b * _sqrt1p(w)] + [t * b * s for s in w]
                + [t * a * _sqrt1m(v)] + [t * a * s for s in v] + list(z))

    lo, hi = _box((q, -HYPERBOLIC_BOX, HYPERBOLIC_BOX), (p, -SPHERE_BOX, SPHERE_BOX),
                  (1, 0.5, 1.5), (n_r, -0.5, 0.5))
    return ImmersionChart(m, minkowski(m), lo, hi, u, f"WP({p},{q},{a:g})")


def make_wp(m, p, q, a, route="sigma1"):
    _check_int("p", p, 1, m)
    _check_int("q", q, 1, m)
    if not p + q < m:
        raise ParameterError(f"guard p + q < m violated (p + q = {p + q}, m = {m})")
    if not a > 1:
        raise ParameterError(f"guard a > 1 violated (a = {a})")
    inner = wp_inner(m, p, q, a)
    chart = lift_composed_chart(inner, route)
    exp = ExpectedInvariants(flags=frozenset({"phi_zero", "B_parallel", "D_parallel"}), t_B=3)
    return CatalogEntry("wp", "item7", {"m": m, "p": p, "q": q, "a": a}, chart, exp,
                        route=route, inner=inner)


# -----------------------------------------------------------------------------
# Examples built on an isoparametric product inner hypersurface


@dataclass(frozen=True)
class InnerProduct:
    """Solved inner product hypersurface: radii and principal curvatures."""

    c1: float
    c2: float
    kappa1: float
    kappa2: float
    lam: float
    residual_S: float
    residual_H: float


def _inner_curvatures(example, s, r):
    """(kappa1, kappa2, c1, c2) for the scan variable s = kappa1 * r."""
    k1 = s / r
    if example == "32":
        c1 = r / np.sqrt(1.0 - s * s)
        k2 = 1.0 / (r * r * k1)
    else:
        c1 = r / np.sqrt(1.0 + s * s)
        k2 = -1.0 / (r * r * k1)
    return k1, k2, c1, s * c1


def _constraints(example, m, K, j, r, k1, k2):
    """(lambda, S residual, H residual) for principal curvatures k1 (x n1), k2 (x n2)."""
    n1, n2 = (K - j, j) if example == "32" else (j, K - j)
    H1 = (n1 * k1 + n2 * k2) / K
    lam = K * H1 / m
    h2 = n1 * k1 ** 2 + n2 * k2 ** 2
    c = 1.0 if example == "32" else -1.0
    S = c * K * (K - 1) / r ** 2 - K * K * H1 ** 2 + h2
    S_target = (c * m * K * (K - 1) + (m - 1) * r * r) / (m * r * r) - m * (m - 1) * lam ** 2
    return lam, S - S_target, H1 - m * lam / K


def solve_inner_product(example, m, K, r, j=1, lam=None):
    """Solve the scalar and mean curvature constraints for a product inner surface.

    For example32 the inner surface is S^{K-j}(c1) x H^j(c2) in S^{K+1}_1(r)
    (c1^2 - c2^2 = r^2); for example33 it is H^j(c1) x H^{K-j}(c2) in
    H^{K+1}_1(-1/r^2) (c1^2 + c2^2 = r^2).  With the H constraint solved for
    lambda, the S constraint is a function of one radius ratio; roots are
    bracketed on a fixed scan and polished with brentq.
    """
    if example not in ("32", "33"):
        raise ValueError(f"unknown example {example!r}")
    if m < 3 or not 2 <= K <= m - 1:
        raise ParameterError(f"guards m >= 3 and 2 <= K <= m-1 violated (m={m}, K={K})")
    if not r > 0:
        raise ParameterError(f"guard r > 0 violated (r = {r})")
    _check_int("j", j, 1, K - 1)

    def f(s):
        k1, k2, _, _ = _inner_curvatures(example, s, r)
        return _constraints(example, m, K, j, r, k1, k2)[1]

    if example == "32":
        scan = np.linspace(1e-4, 1 - 1e-4, 4001)
    else:
        scan = np.logspace(-4, 4, 4001)
    vals = np.array([f(s) for s in scan])
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        s = brentq(f, scan[i], scan[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200)
        if not any(abs(s - t) < 1e-12 for t in roots):
            roots.append(s)
    sols = []
    for s in roots:
        k1, k2, c1, c2 = _inner_curvatures(example, s, r)
        lam_s, rS, rH = _constraints(example, m, K, j, r, k1, k2)
        sols.append(InnerProduct(c1, c2, k1, k2, lam_s, rS, rH))
    label = f"(m, K, r) = ({m}, {K}, {r:g}), j = {j}"
    if not sols:
        i = int(np.argmin(np.abs(vals)))
        where = " at the degenerate end of the radius range" if i in (0, len(vals) - 1) else ""
        raise NoAdmissibleParameters(
            f"no admissible (b, lambda) for {label}: S constraint residual never vanishes "
            f"(min |residual| = {abs(vals[i]):.3e}{where})")
    if lam is not None:
        match = [s for s in sols if abs(s.lam - lam) <= 1e-8]
        if not match:
            found = ", ".join(f"{s.lam:.6g}" for s in sols)
            raise NoAdmissibleParameters(
                f"no admissible (b, lambda) for {label} with lambda = {lam:g}: "
                f"{_residual_at_lambda(example, m, K, j, r, lam)}; admissible lambda: {found}")
        return match[0]
    return min(sols, key=lambda s: (abs(s.lam), s.lam))


def _residual_at_lambda(example, m, K, j, r, lam):
    """Describe the S-constraint residual along the curve H1 = m lambda / K."""
    def g(s):
        k1, k2, _, _ = _inner_curvatures(example, s, r)
        return _constraints(example, m, K, j, r, k1, k2)[0] - lam

    scan = np.linspace(1e-4, 1 - 1e-4, 4001) if example == "32" else np.logspace(-4, 4, 4001)
    vals = np.array([g(s) for s in scan])
    res = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        s = brentq(g, scan[i], scan[i + 1], xtol=1e-15)
        k1, k2, _, _ = _inner_curvatures(example, s, r)
        res.append(abs(_constraints(example, m, K, j, r, k1, k2)[1]))
    if not res:
        return "H constraint H1 = m lambda / K has no solution"
    return f"S constraint residual {min(res):.6g} where H1 = m lambda / K holds"


def example_D_eigs(example, m, K, r, lam):
    top = 1.0 / (2 * r * r) - 0.5 * lam * lam
    bottom = -(1.0 / (2 * r * r) + 0.5 * lam * lam)
    if example == "32":
        return ((top, K), (bottom, m - K))
    return ((bottom, K), (top, m - K))


def make_example_32(m, K, r, j=1, lam=None):
    sol = solve_inner_product("32", m, K, r, j=j, lam=lam)
    c1, c2 = sol.c1, sol.c2
    n_s, n_h, n_f = K - j, j, m - K

    def y_parts(u):
        v, w, z = u[:n_s], u[n_s:K], u[K:]
        y0 = r * _sqrt1p(z)
        y1 = [c2 * _sqrt1p(w), c1 * _sqrt1m(v)] + [c1 * t for t in v] + [c2 * t for t in w]
        y2 = [r * t for t in z]
        return y0, y1, y2, (v, w)

    def x(u):
        y0, y1, y2, _ = y_parts(u)
        inv = jets.reciprocal(y0) if isinstance(y0, jets.Jet) else 1.0 / y0
        return [c * inv for c in y1 + y2]

    def hint(u):
        _, _, _, (v, w) = y_parts(u)
        zero = 0.0 * u[0]
        p, q = c1 / (c2 * r), c2 / (c1 * r)
        n1 = ([p * c2 * _sqrt1p(w), q * c1 * _sqrt1m(v)] + [q * c1 * t for t in v]
              + [p * c2 * t for t in w])
        return n1 + [zero] * n_f

    def rho_oracle(points):
        z = np.atleast_2d(points)[:, K:]
        return r * np.sqrt(1.0 + np.sum(z * z, axis=1))

    lo, hi = _box((n_s, -SPHERE_BOX, SPHERE_BOX), (n_h, -HYPERBOLIC_BOX, HYPERBOLIC_BOX),
                  (n_f, -HYPERBOLIC_BOX, HYPERBOLIC_BOX))
    chart = ImmersionChart(m, de_sitter(m), lo, hi, x, f"example32(m={m},K={K},r={r:g})",
                           normal_hint=hint)
    lam_s = sol.lam
    B_eigs = _merge_eigs([(sol.kappa1 - lam_s, n_s), (sol.kappa2 - lam_s, n_h), (-lam_s, n_f)])
    exp = ExpectedInvariants(B_eigs=B_eigs, D_eigs=example_D_eigs("32", m, K, r, lam_s),
                             flags=frozenset({"phi_zero", "D_parallel"}), t_D=2)
    return CatalogEntry("example32", "example32", {"m": m, "K": K, "r": r, "j": j}, chart, exp,
                        lam=lam_s, rho_oracle=rho_oracle,
                        notes={"inner": sol})


def make_example_33(m, K, r, j=1, lam=None, eps=1):
    if eps not in (1, -1):
        raise ParameterError("eps must be +1 or -1")
    sol = solve_inner_product("33", m, K, r, j=j, lam=lam)
    c1, c2 = sol.c1, sol.c2
    n_a, n_b, n_s = j, K - j, m - K

    def parts(u):
        w, w2, v = u[:n_a], u[n_a:K], u[K:]
        y0 = eps * c1 * _sqrt1p(w)
        y1 = [c2 * _sqrt1p(w2)] + [c1 * t for t in w] + [c2 * t for t in w2]
        y2 = [r * _sqrt1m(v)] + [r * t for t in v]
        return y0, y1, y2, (w, w2)

    def x(u):
        y0, y1, y2, _ = parts(u)
        inv = jets.reciprocal(y0) if isinstance(y0, jets.Jet) else 1.0 / y0
        return [eps * c * inv for c in y1 + y2]

    def hint(u):
        y0, y1, y2, (w, w2) = parts(u)
        p, q = c2 / (c1 * r), c1 / (c2 * r)
        # inner normal: p * (first factor) - q * (second factor), reflected with y0
        n0 = eps * p * c1 * _sqrt1p(w)
        n1 = [-q * c2 * _sqrt1p(w2)] + [p * c1 * t for t in w] + [-q * c2 * t for t in w2]
        xs = x(u)
        zero = 0.0 * u[0]
        base = n1 + [zero] * (n_s + 1)
        return [b - eps * n0 * xc for b, xc in zip(base, xs)]

    def rho_oracle(points):
        w = np.atleast_2d(points)[:, :n_a]
        return c1 * np.sqrt(1.0 + np.sum(w * w, axis=1))

    lo, hi = _box((n_a, -HYPERBOLIC_BOX, HYPERBOLIC_BOX), (n_b, -HYPERBOLIC_BOX, HYPERBOLIC_BOX),
                  (n_s, -SPHERE_BOX, SPHERE_BOX))
    chart = ImmersionChart(m, de_sitter(m), lo, hi, x,
                           f"example33(m={m},K={K},r={r:g},eps={eps:+d})", normal_hint=hint)
    lam_s = sol.lam
    B_eigs = _merge_eigs([(sol.kappa1 - lam_s, n_a), (sol.kappa2 - lam_s, n_b), (-lam_s, n_s)])
    exp = ExpectedInvariants(B_eigs=B_eigs, D_eigs=example_D_eigs("33", m, K, r, lam_s),
                             flags=frozenset({"phi_zero", "D_parallel"}), t_D=2)
    return CatalogEntry("example33", "example33", {"m": m, "K": K, "r": r, "j": j, "eps": eps},
                        chart, exp, lam=lam_s, rho_oracle=rho_oracle, notes={"inner": sol})


def _merge_eigs(pairs, tol=1e-9):
    out = []
    for v, k in sorted(pairs, key=lambda p: -p[0]):
        if k == 0:
            continue
        if out and abs(out[-1][0] - v) <= tol:
            out[-1] = (out[-1][0], out[-1][1] + k)
        else:
            out.append((v, k))
    return tuple(out)


# -----------------------------------------------------------------------------
# charts without symmetry: negative controls and generic identity checks


def _normalize_to_desitter(ys):
    q = -ys[0] * ys[0]
    for c in ys[1:]:
        q = q + c * c
    inv = jets.reciprocal(jets.sqrt(q)) if isinstance(q, jets.Jet) else 1.0 / np.sqrt(q)
    return [c * inv for c in ys]


def make_generic(m=3, amplitude=0.3):
    """x = (sinh phi, cosh phi * sigma) with sigma a unit-sphere graph; Phi != 0."""

    def phi(u):
        out = amplitude * u[0] * u[0]
        for k in range(1, m):
            out = out + 0.2 * amplitude * (k + 1) * jets.sin(u[k] + 0.3 * k) * u[k - 1]
        return out + 0.1

    def x(u):
        f = phi(u)
        ch, sh = jets.cosh(f), jets.sinh(f)
        return [sh, ch * _sqrt1m(u)] + [ch * t for t in u]

    lo, hi = (-0.4,) * m, (0.4,) * m
    chart = ImmersionChart(m, de_sitter(m), lo, hi, x, f"generic(m={m})")
    return CatalogEntry("generic", "none", {"m": m, "amplitude": amplitude}, chart)


def make_perturbed_product(m=3, k=1, a=np.sqrt(2.0), eps=0.05):
    """Product chart plus a bump, renormalized back onto the quadric."""
    base = make_product_in_desitter(m, k, a)
    f = base.chart.map

    def x(u):
        ys = list(f(u))
        bump = eps * jets.sin(2.0 * u[0]) * jets.cos(u[-1])
        ys[2] = ys[2] + bump
        return _normalize_to_desitter(ys)

    chart = ImmersionChart(m, de_sitter(m), base.chart.lower, base.chart.upper, x,
                           f"perturbed-product(m={m},k={k},a={a:g},eps={eps:g})",
                           normal_hint=base.chart.normal_hint)
    return CatalogEntry("perturbed-product", "none", {"m": m, "k": k, "a": a, "eps": eps}, chart)


# -----------------------------------------------------------------------------
# registry


FAMILIES = {
    "product-ds": (make_product_in_desitter, {"m": 3, "k": 1, "a": np.sqrt(2.0)}),
    "item5": (lambda m, k, a: make_lifted_product("item5", m, k, a), {"m": 3, "k": 1, "a": 1.0}),
    "item6": (lambda m, k, a: make_lifted_product("item6", m, k, a), {"m": 3, "k": 1, "a": 0.6}),
    "wp": (make_wp, {"m": 3, "p": 1, "q": 1, "a": np.sqrt(2.0)}),
    "example32": (make_example_32, {"m": 3, "K": 2, "r": 2.0}),
    "example33": (make_example_33, {"m": 3, "K": 2, "r": 2.0}),
    "generic": (make_generic, {"m": 3}),
    "perturbed-product": (make_perturbed_product, {"m": 3}),
}


def build(family, **params):
    """Build an entry from a family id and keyword parameters."""
    if family not in FAMILIES:
        raise KeyError(f"unknown entry {family!r}; known: {', '.join(sorted(FAMILIES))}")
    fn, defaults = FAMILIES[family]
    kw = dict(defaults)
    kw.update({k: v for k, v in params.items() if v is not None})
    return fn(**kw)


def labeled_entries():
    """The nine labeled entries used for classifier consistency."""
    return [
        make_product_in_desitter(3, 1, np.sqrt(2.0)),
        make_product_in_desitter(4, 2, 1.5),
        make_lifted_product("item5", 3, 1, 1.0),
        make_lifted_product("item6", 3, 1, 0.6),
        make_lifted_product("item6", 5, 2, 0.6),
        make_wp(3, 1, 1, np.sqrt(2.0)),
        make_example_32(3, 2, 2.0),
        make_example_33(3, 2, 2.0, eps=1),
        make_example_33(3, 2, 2.0, eps=-1),
    ]


def negative_controls():
    return [make_generic(3), make_perturbed_product(3)]
