"""Linear algebra over R^{s+m}_s with the s time-like coordinates first."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


class FrameDegeneracy(ValueError):
    pass


class NoTimelikeNormal(ValueError):
    pass


@dataclass(frozen=True)
class SignatureMetric:
    dim: int
    s: int

    def __post_init__(self):
        if self.dim <= 0 or not 0 <= self.s <= self.dim:
            raise ValueError(f"invalid signature dim={self.dim}, s={self.s}")

    @property
    def diag(self):
        d = np.ones(self.dim)
        d[: self.s] = -1.0
        return d

    @property
    def gram(self):
        return np.diag(self.diag)

    def inner(self, v, w):
        return inner(self, v, w)


@dataclass(frozen=True)
class LorentzVector:
    coords: np.ndarray
    metric: SignatureMetric

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.shape != (self.metric.dim,):
            raise ValueError(f"vector of length {c.shape} does not fit metric dim {self.metric.dim}")
        object.__setattr__(self, "coords", c)

    def __array__(self, dtype=None, copy=None):
        return self.coords if dtype is None else self.coords.astype(dtype)


def _coords(v):
    return v.coords if isinstance(v, LorentzVector) else np.asarray(v, dtype=float)


def inner(metric, v, w):
    """-sum_{i<s} v_i w_i + sum_{i>=s} v_i w_i, batched over leading axes."""
    v, w = _coords(v), _coords(w)
    if v.shape[-1] != metric.dim or w.shape[-1] != metric.dim:
        raise ValueError(
            f"dimension mismatch: {v.shape[-1]}, {w.shape[-1]} vs metric dim {metric.dim}"
        )
    s = metric.s
    return np.sum(v[..., s:] * w[..., s:], axis=-1) - np.sum(v[..., :s] * w[..., :s], axis=-1)


def orthonormalize_spacelike(metric, basis, tol=1e-12):
    """Gram-Schmidt with respect to the indefinite inner product.

    Every projected vector must be space-like; otherwise the span is not a
    space-like subspace and FrameDegeneracy is raised.
    """
    out = []
    for v in basis:
        u = _coords(v).copy()
        for e in out:
            u = u - inner(metric, u, e) * e
        nn = inner(metric, u, u)
        scale = max(1.0, float(np.dot(u, u)))
        if nn <= tol * scale:
            raise FrameDegeneracy("frame degeneracy: projected vector is not space-like")
        out.append(u / np.sqrt(nn))
    return [LorentzVector(u, metric) for u in out]


def orient_largest_positive(n):
    """Flip n so that its component of largest magnitude is positive."""
    n = np.asarray(n, dtype=float)
    k = int(np.argmax(np.abs(n)))
    return n if n[k] >= 0 else -n


def timelike_normal(metric, constraints, reference=None):
    """Unit time-like vector orthogonal to every constraint.

    Sign: if ``reference`` is given, the result is time-like co-oriented with it
    (``<n, reference> < 0``); otherwise the largest-magnitude component is made
    positive.
    """
    C = np.array([_coords(c) for c in constraints], dtype=float)
    if C.ndim != 2 or C.shape[1] != metric.dim:
        raise ValueError("constraints must be vectors of the metric dimension")
    # <n, c> = c^T G n, so n spans the null space of C G
    A = C * metric.diag
    _, sv, vt = np.linalg.svd(A)
    rank = int(np.sum(sv > 1e-12 * max(1.0, sv[0] if sv.size else 1.0)))
    if metric.dim - rank != 1:
        raise ValueError("constraints do not cut out a line")
    n = vt[-1]
    nn = inner(metric, n, n)
    if nn >= -1e-14:
        raise NoTimelikeNormal("no time-like normal: orthogonal complement is not time-like")
    n = n / np.sqrt(-nn)
    if reference is not None:
        if inner(metric, n, _coords(reference)) > 0:
            n = -n
    else:
        n = orient_largest_positive(n)
    return LorentzVector(n, metric)


@dataclass(frozen=True)
class PseudoOrthogonalMap:
    matrix: np.ndarray
    metric: SignatureMetric
    tol: float = field(default=1e-12, compare=False)

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        G = self.metric.gram
        if M.shape != (self.metric.dim, self.metric.dim):
            raise ValueError("matrix shape does not match metric")
        scale = max(1.0, float(np.max(np.abs(M))) ** 2)
        err = np.max(np.abs(M.T @ G @ M - G))
        if err > self.tol * scale:
            raise ValueError(f"matrix is not pseudo-orthogonal (residual {err:.3e})")
        object.__setattr__(self, "matrix", M)

    def apply(self, v):
        return _coords(v) @ self.matrix.T

    def __matmul__(self, other):
        if isinstance(other, PseudoOrthogonalMap):
            return PseudoOrthogonalMap(self.matrix @ other.matrix, self.metric, tol=1e-9)
        return self.apply(other)


def lie_algebra_element(metric, seed):
    """Random M with M^T G + G M = 0 and |M_ij| <= 1."""
    rng = np.random.default_rng(seed)
    n = metric.dim
    S = rng.uniform(-1.0, 1.0, size=(n, n))
    S = np.triu(S, 1)
    S = S - S.T
    # G M antisymmetric  <=>  M = G S with S antisymmetric (G^2 = I)
    return metric.gram @ S


def expm(M):
    """Matrix exponential (scaling and squaring with Pade approximants)."""
    return scipy.linalg.expm(np.asarray(M, dtype=float))


def random_pseudo_orthogonal(metric, seed):
    M = lie_algebra_element(metric, seed)
    # exp can have entries up to e^{dim}; the invariant check is scaled accordingly
    return PseudoOrthogonalMap(expm(M), metric, tol=1e-10)


def block_swap(dim):
    """Swap of the two leading time-like axes; relates the two affine light-cone charts."""
    T = np.eye(dim)
    T[[0, 1]] = T[[1, 0]]
    return PseudoOrthogonalMap(T, SignatureMetric(dim, 2))
