"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` stores the Taylor coefficients ``d^a f / a!`` of a function of
``nvars`` variables for every multi-index ``|a| <= order``, batched over
points and (optionally) tensor indices.  The coefficient array has shape
``(C, P, *tshape)`` where ``C = binom(nvars + order, order)``.

Monomials are laid out graded-lexicographically, so truncation to a lower
order is a prefix slice of the coefficient axis.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
import scipy.sparse as sp

MAX_ORDER = 4


class JetSingularity(ArithmeticError):
    """Raised when a jet operation needs a nonzero/positive constant term."""


def _monomials(nvars, order):
    monos = []
    for deg in range(order + 1):
        block = []
        for combo in combinations_with_replacement(range(nvars), deg):
            a = [0] * nvars
            for v in combo:
                a[v] += 1
            block.append(tuple(a))
        # graded lex: within a degree, larger exponents on earlier variables first
        block.sort(reverse=True)
        monos.extend(block)
    return monos


class JetSpace:
    """Index tables for jets in ``nvars`` variables up to ``order``."""

    def __init__(self, nvars, order):
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"jet order must be in [0, {MAX_ORDER}], got {order}")
        self.nvars = nvars
        self.order = order
        self.monomials = _monomials(nvars, order)
        self.index = {a: i for i, a in enumerate(self.monomials)}
        self.size = len(self.monomials)
        self.degree = np.array([sum(a) for a in self.monomials])

        I, J, K = [], [], []
        for i, a in enumerate(self.monomials):
            for j, b in enumerate(self.monomials):
                if sum(a) + sum(b) <= order:
                    I.append(i)
                    J.append(j)
                    K.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self.mul_i = np.array(I)
        self.mul_j = np.array(J)
        T = len(K)
        self.mul_sum = sp.csr_matrix(
            (np.ones(T), (np.array(K), np.arange(T))), shape=(self.size, T)
        )

    def unit(self, var):
        a = [0] * self.nvars
        a[var] = 1
        return self.index[tuple(a)]

    def pair(self, u, v):
        """Index of the monomial ``x_u x_v`` and the factor turning its
        coefficient into the mixed partial."""
        a = [0] * self.nvars
        a[u] += 1
        a[v] += 1
        return self.index[tuple(a)], (2.0 if u == v else 1.0)

    @lru_cache(maxsize=None)
    def deriv_table(self, var):
        """(src, factor) such that d/dx_var maps into the order-1 space."""
        lower = space(self.nvars, self.order - 1)
        src = np.empty(lower.size, dtype=int)
        fac = np.empty(lower.size)
        for k, a in enumerate(lower.monomials):
            b = list(a)
            b[var] += 1
            src[k] = self.index[tuple(b)]
            fac[k] = b[var]
        return src, fac


@lru_cache(maxsize=None)
def space(nvars, order):
    return JetSpace(nvars, order)


def _is_jet(x):
    return isinstance(x, Jet)


class Jet:
    """Batched truncated Taylor expansion.

    ``coeffs[k, p, ...]`` is the coefficient of monomial ``k`` at point ``p``.
    """

    __array_priority__ = 1000

    def __init__(self, jspace, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != jspace.size:
            raise ValueError(
                f"expected {jspace.size} coefficients, got {coeffs.shape[0]}"
            )
        self.space = jspace
        self.c = coeffs

    # construction -----------------------------------------------------------

    @classmethod
    def variables(cls, points, order):
        """Identity jets ``u_k`` at each row of ``points`` (shape (P, m))."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        P, m = points.shape
        js = space(m, order)
        out = []
        for k in range(m):
            c = np.zeros((js.size, P))
            c[0] = points[:, k]
            if order >= 1:
                c[js.unit(k)] = 1.0
            out.append(cls(js, c))
        return out

    @classmethod
    def constant(cls, jspace, value):
        value = np.asarray(value, dtype=float)
        c = np.zeros((jspace.size,) + value.shape)
        c[0] = value
        return cls(jspace, c)

    @classmethod
    def stack(cls, jets, axis=-1):
        jets = list(jets)
        js = jets[0].space
        arrs = [j.c for j in jets]
        nd = arrs[0].ndim
        ax = axis if axis >= 0 else nd + 1 + axis
        return cls(js, np.stack(arrs, axis=ax))

    # shape helpers ----------------------------------------------------------

    @property
    def order(self):
        return self.space.order

    @property
    def nvars(self):
        return self.space.nvars

    @property
    def tshape(self):
        return self.c.shape[2:]

    @property
    def value(self):
        return self.c[0]

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.space, self.c[(slice(None), slice(None)) + idx])

    def _lift(self, other):
        if _is_jet(other):
            if other.space is not self.space:
                raise ValueError("jets live in different spaces")
            return other.c
        other = np.asarray(other, dtype=float)
        c = np.zeros((self.space.size,) + np.broadcast_shapes(other.shape, self.c.shape[1:]))
        c[0] = other
        return c

    def expand(self, ndim):
        """Append singleton tensor axes so elementwise ops broadcast."""
        extra = ndim - len(self.tshape)
        return Jet(self.space, self.c.reshape(self.c.shape + (1,) * extra))

    # arithmetic -------------------------------------------------------------

    def __add__(self, other):
        return Jet(self.space, self.c + self._lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Jet(self.space, self.c - self._lift(other))

    def __rsub__(self, other):
        return Jet(self.space, self._lift(other) - self.c)

    def __neg__(self):
        return Jet(self.space, -self.c)

    def __mul__(self, other):
        if not _is_jet(other):
            return Jet(self.space, self.c * np.asarray(other, dtype=float))
        return einsum("...,...->...", self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not _is_jet(other):
            return Jet(self.space, self.c / np.asarray(other, dtype=float))
        return self * reciprocal(other)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, p):
        if isinstance(p, int) and p >= 0:
            out = Jet.constant(self.space, np.ones_like(self.value))
            for _ in range(p):
                out = out * self
            return out
        return power(self, p)

    # calculus ---------------------------------------------------------------

    def deriv(self, var):
        """Partial derivative; the result has order one lower."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = self.space.deriv_table(var)
        lower = space(self.nvars, self.order - 1)
        fac = fac.reshape((-1,) + (1,) * (self.c.ndim - 1))
        return Jet(lower, self.c[src] * fac)

    def truncate(self, order):
        if order > self.order:
            raise ValueError("cannot raise jet order by truncation")
        lower = space(self.nvars, order)
        return Jet(lower, self.c[: lower.size])

    def gradient(self):
        """First partials at the base points, shape (P, *tshape, m)."""
        js = self.space
        return np.stack([self.c[js.unit(k)] for k in range(self.nvars)], axis=-1)

    def hessian(self):
        """Second partials at the base points, shape (P, *tshape, m, m)."""
        js = self.space
        m = self.nvars
        out = np.empty(self.c.shape[1:] + (m, m))
        for u in range(m):
            for v in range(u, m):
                k, f = js.pair(u, v)
                out[..., u, v] = out[..., v, u] = f * self.c[k]
        return out

    def partial(self, alpha):
        """The mixed partial ``d^alpha f`` at the base points."""
        k = self.space.index[tuple(alpha)]
        return self.c[k] * math.prod(math.factorial(a) for a in alpha)

    def __repr__(self):
        return f"Jet(nvars={self.nvars}, order={self.order}, shape={self.c.shape[1:]})"


def einsum(subscripts, a, b):
    """Jet product contracted over tensor indices, e.g. ``'ij,jk->ik'``.

    The coefficient and point axes are handled implicitly.
    """
    js = a.space
    if b.space is not js:
        raise ValueError("jets live in different spaces")
    lhs, out = subscripts.split("->")
    sa, sb = lhs.split(",")
    prod = np.einsum(f"tp{sa},tp{sb}->tp{out}", a.c[js.mul_i], b.c[js.mul_j])
    T = prod.shape[0]
    res = js.mul_sum @ prod.reshape(T, -1)
    return Jet(js, res.reshape((js.size,) + prod.shape[1:]))


# univariate compositions --------------------------------------------------------

def _compose(x, derivs):
    """f(x) from ``derivs[n] = f^(n)(x0)`` via the Taylor series in x - x0."""
    d = Jet(x.space, x.c.copy())
    d.c[0] = 0.0
    out = Jet.constant(x.space, derivs[0])
    term = None
    for n in range(1, x.order + 1):
        term = d if term is None else term * d
        out = out + term * (derivs[n] / math.factorial(n))
    return out


def _derivs(x, fn):
    x0 = x.value
    return [fn(n, x0) for n in range(x.order + 1)]


def reciprocal(x):
    x0 = x.value
    if np.any(x0 == 0):
        raise JetSingularity("jet singularity: division by jet with zero constant term")
    return _compose(x, _derivs(x, lambda n, v: (-1) ** n * math.factorial(n) / v ** (n + 1)))


def power(x, p):
    x0 = x.value
    if np.any(x0 <= 0):
        raise JetSingularity("jet singularity: non-positive base in real power")

    def f(n, v):
        coef = 1.0
        for k in range(n):
            coef *= p - k
        return coef * v ** (p - n)

    return _compose(x, _derivs(x, f))


def _sqrt_jet(x):
    if np.any(x.value <= 0):
        raise JetSingularity("jet singularity: sqrt of non-positive constant term")
    return power(x, 0.5)


def _log_jet(x):
    if np.any(x.value <= 0):
        raise JetSingularity("jet singularity: log of non-positive constant term")
    return _compose(
        x,
        _derivs(
            x,
            lambda n, v: np.log(v) if n == 0 else (-1) ** (n - 1) * math.factorial(n - 1) / v ** n,
        ),
    )


def _exp_jet(x):
    e = np.exp(x.value)
    return _compose(x, [e] * (x.order + 1))


def _cycle(x, seq):
    return _compose(x, [seq[n % len(seq)] for n in range(x.order + 1)])


def _sin_jet(x):
    s, c = np.sin(x.value), np.cos(x.value)
    return _cycle(x, [s, c, -s, -c])


def _cos_jet(x):
    s, c = np.sin(x.value), np.cos(x.value)
    return _cycle(x, [c, -s, -c, s])


def _sinh_jet(x):
    s, c = np.sinh(x.value), np.cosh(x.value)
    return _cycle(x, [s, c])


def _cosh_jet(x):
    s, c = np.sinh(x.value), np.cosh(x.value)
    return _cycle(x, [c, s])


def _dispatch(jet_fn, np_fn):
    def f(x):
        if _is_jet(x):
            return jet_fn(x)
        return np_fn(x)

    f.__name__ = np_fn.__name__
    return f


sqrt = _dispatch(_sqrt_jet, np.sqrt)
log = _dispatch(_log_jet, np.log)
exp = _dispatch(_exp_jet, np.exp)
sin = _dispatch(_sin_jet, np.sin)
cos = _dispatch(_cos_jet, np.cos)
sinh = _dispatch(_sinh_jet, np.sinh)
cosh = _dispatch(_cosh_jet, np.cosh)


def pow(x, p):  # noqa: A001 - mirrors math.pow
    if _is_jet(x):
        return x ** p
    return np.power(x, p)


def matinv(M):
    """Inverse of a square matrix jet (tshape (n, n)) by a nilpotent Neumann series."""
    M0inv = np.linalg.inv(M.value)
    inv0 = Jet.constant(M.space, M0inv)
    delta = Jet(M.space, M.c.copy())
    delta.c[0] = 0.0
    step = -einsum("ij,jk->ik", inv0, delta)
    out = inv0
    term = inv0
    for _ in range(M.order):
        term = einsum("ij,jk->ik", step, term)
        out = out + term
    return out


def cholesky_upper(M):
    """Upper-triangular R (as a jet) with ``M = R^T R``."""
    n = M.tshape[-1]
    js = M.space
    zero = Jet.constant(js, np.zeros(M.value.shape[:-2]))
    R = [[zero for _ in range(n)] for _ in range(n)]
    for i in range(n):
        s = M[..., i, i]
        for k in range(i):
            s = s - R[k][i] * R[k][i]
        if np.any(s.value <= 0):
            raise JetSingularity("matrix is not positive definite")
        R[i][i] = _sqrt_jet(s)
        inv = reciprocal(R[i][i])
        for j in range(i + 1, n):
            s = M[..., i, j]
            for k in range(i):
                s = s - R[k][i] * R[k][j]
            R[i][j] = s * inv
    rows = [Jet.stack(row, axis=-1) for row in R]
    return Jet.stack(rows, axis=-2)
