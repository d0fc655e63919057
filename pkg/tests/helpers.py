"""Shared fixtures data: cached catalog evaluations and independent oracles."""

from functools import lru_cache
import random

import mpmath
import numpy as np

from dsconf import catalog, jets
from dsconf.catalog import default_grid_size
from dsconf.checker import evaluate_chart
from dsconf.conformal import invariants
from dsconf.checker import invariant_deviation
from dsconf.hypersurface import uniform_grid

LAMS = (0.0, 0.5, 1.0)
SQ2 = np.sqrt(2.0)

BUILDERS = {
    "product-ds(3,1,sqrt2)": lambda: catalog.make_product_in_desitter(3, 1, SQ2),
    "product-ds(4,2,1.5)": lambda: catalog.make_product_in_desitter(4, 2, 1.5),
    "item5(3,1,1)": lambda: catalog.make_lifted_product("item5", 3, 1, 1.0),
    "item6(3,1,0.6)": lambda: catalog.make_lifted_product("item6", 3, 1, 0.6),
    "item6(5,2,0.6)": lambda: catalog.make_lifted_product("item6", 5, 2, 0.6),
    "wp(3,1,1,sqrt2)": lambda: catalog.make_wp(3, 1, 1, SQ2),
    "example32(3,2,2)": lambda: catalog.make_example_32(3, 2, 2.0),
    "example33(3,2,2,+1)": lambda: catalog.make_example_33(3, 2, 2.0, eps=1),
    "example33(3,2,2,-1)": lambda: catalog.make_example_33(3, 2, 2.0, eps=-1),
}
CONTROLS = {
    "generic(3)": lambda: catalog.make_generic(3),
    "perturbed-product(3)": lambda: catalog.make_perturbed_product(3),
}
ALL = {**BUILDERS, **CONTROLS}


@lru_cache(maxsize=None)
def entry(key):
    return ALL[key]()


@lru_cache(maxsize=None)
def result(key):
    e = entry(key)
    return evaluate_chart(e.chart, LAMS, e.lam if e.lam is not None else 0.0,
                          grid_n=default_grid_size(e.m), halving=True)


def overlap_deviation(chart_a, chart_b, n=5):
    """Invariant differences of two charts over the same parameter grid."""
    pts = uniform_grid(chart_a, n).points
    return invariant_deviation(invariants(chart_a, pts), invariants(chart_b, pts), LAMS)


# -----------------------------------------------------------------------------
# jets oracle: random expression trees against Richardson-extrapolated
# central differences evaluated in extended precision

UNARY = ("sin", "cos", "exp", "sinh", "cosh", "sqrt", "log", "tame")
BINARY = ("+", "-", "*", "/")


def random_tree(rng, nvars, depth=3):
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.75:
            return ("var", rng.randrange(nvars))
        return ("const", round(rng.uniform(-2, 2), 3))
    if rng.random() < 0.1:
        return ("pow", random_tree(rng, nvars, depth - 1), rng.choice((-1.5, -0.5, 0.5, 2.5, 3)))
    if rng.random() < 0.45:
        return (rng.choice(UNARY), random_tree(rng, nvars, depth - 1))
    return (rng.choice(BINARY), random_tree(rng, nvars, depth - 1), random_tree(rng, nvars, depth - 1))


def evaluate_tree(t, xs, lib):
    """lib is 'jet' or 'mp'; singular primitives get arguments kept away from their poles."""
    op = t[0]
    if op == "var":
        return xs[t[1]]
    if op == "const":
        return t[1] if lib == "jet" else mpmath.mpf(t[1])
    f = jets if lib == "jet" else mpmath
    if op == "pow":
        a = evaluate_tree(t[1], xs, lib)
        return f.power(1.0 + a * a, t[2]) if lib == "mp" else jets.pow(1.0 + a * a, t[2])
    if op in ("+", "-", "*", "/"):
        a, b = evaluate_tree(t[1], xs, lib), evaluate_tree(t[2], xs, lib)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        return a / (1.5 + b * b)
    a = evaluate_tree(t[1], xs, lib)
    if op == "sqrt":
        return f.sqrt(1.0 + a * a)
    if op == "log":
        return f.log(2.0 + a * a)
    if op == "tame":
        return a / f.sqrt(1.0 + a * a)
    if op in ("exp", "sinh", "cosh"):
        return getattr(f, op)(a / f.sqrt(1.0 + a * a))
    return getattr(f, op)(a)


def _central(f, x, alpha, h):
    """Tensor-product central difference for the mixed partial d^alpha f."""
    from itertools import product as iproduct
    from math import comb
    offs = []
    for n in alpha:
        offs.append([((-1) ** j * comb(n, j), (n / 2 - j)) for j in range(n + 1)])
    total = mpmath.mpf(0)
    for combo in iproduct(*offs):
        w = 1
        pt = list(x)
        for k, (c, o) in enumerate(combo):
            w *= c
            pt[k] = pt[k] + o * h
        total += w * f(pt)
    return total / h ** sum(alpha)


def richardson_partial(f, x, alpha, h=mpmath.mpf("0.02")):
    """Three-level Richardson extrapolation of central differences (error O(h^6))."""
    d = [_central(f, x, alpha, h / 2 ** k) for k in range(3)]
    r1 = [(4 * d[k + 1] - d[k]) / 3 for k in range(2)]
    return (16 * r1[1] - r1[0]) / 15


def jet_vs_fd(tree, point, order=4):
    """Largest relative difference between jet partials and the FD oracle."""
    js = jets.Jet.variables(np.atleast_2d(point), order)
    J = evaluate_tree(tree, js, "jet")
    if not isinstance(J, jets.Jet):
        return 0.0
    with mpmath.workdps(40):
        mp_pt = [mpmath.mpf(float(c)) for c in point]
        f = lambda p: evaluate_tree(tree, p, "mp")  # noqa: E731
        worst = 0.0
        for alpha in J.space.index:
            if sum(alpha) == 0:
                ref = f(mp_pt)
            else:
                ref = richardson_partial(f, mp_pt, alpha)
            got = J.partial(alpha)[0]
            err = abs(got - float(ref)) / max(1.0, abs(float(ref)))
            worst = max(worst, err)
    return worst


def _ops(t):
    if t[0] in ("var", "const"):
        return {t[0]}
    out = {t[0]}
    for c in t[1:]:
        if isinstance(c, tuple):
            out |= _ops(c)
    return out


def jet_oracle_trees(n=50, seed=2024):
    """n random compositions, each using a variable and at least two primitives."""
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        nv = rng.choice((1, 2, 3))
        t = random_tree(rng, nv, depth=4)
        ops = _ops(t)
        if "var" not in ops or len(ops & (set(UNARY) | {"pow"})) < 2:
            continue
        pt = [round(rng.uniform(-0.8, 0.8), 3) for _ in range(nv)]
        out.append((t, pt))
    return out
