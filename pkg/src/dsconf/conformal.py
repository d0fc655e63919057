"""Conformal invariants of a regular space-like hypersurface in de Sitter
space, the light-cone moving frame, and the identities relating them.

Pointwise quantities (B, Phi, A, curvature, frame vectors) come from jets and
are exact up to rounding.  Covariant derivatives and the structure equations
need one more derivative than the jets carry; those use Richardson
extrapolated central differences on a stencil around each sample node.  Every
field is differentiated in the fixed coordinate basis and only then moved into
the orthonormal frame of the node, so no frame alignment across points is
needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .hypersurface import LocalGeometry, _christoffel, hessian_logrho_frame, local_geometry
from .pseudo_linalg import SignatureMetric


class RicciRouteUnderdetermined(ValueError):
    pass


class GridTooCoarse(ValueError):
    pass


def eigenvalues_desc(S):
    """Eigenvalues of symmetric matrices, sorted descending along the last axis."""
    return np.linalg.eigvalsh(0.5 * (S + np.swapaxes(S, -1, -2)))[..., ::-1]


# -----------------------------------------------------------------------------
# pointwise invariants


def conformal_B(geo):
    h = geo.h
    m = geo.m
    return (h - geo.H[:, None, None] * np.eye(m)) / geo.rho[:, None, None]


def _frame_derivative(geo, d):
    """e_i(f) for gradients ``d[p, a]`` in chart coordinates."""
    return np.einsum("pai,pa->pi", geo.frame, d)


def conformal_form_Phi(geo):
    h = geo.h
    m = geo.m
    elog = _frame_derivative(geo, geo.dlogrho)
    eH = _frame_derivative(geo, geo.dH)
    tf = h - geo.H[:, None, None] * np.eye(m)
    return -(np.einsum("pij,pj->pi", tf, elog) + eH) / geo.rho[:, None] ** 2


def blaschke_direct(geo):
    if geo.ddlogrho is None:
        raise ValueError("Blaschke tensor needs jet order 4")
    m = geo.m
    hess = hessian_logrho_frame(geo)
    elog = _frame_derivative(geo, geo.dlogrho)
    H = geo.H
    inv_r2 = 1.0 / geo.rho ** 2
    core = hess - np.einsum("pi,pj->pij", elog, elog) + geo.h * H[:, None, None]
    trace = np.sum(elog ** 2, axis=-1) - H ** 2 - 1.0
    A = -inv_r2[:, None, None] * core - 0.5 * (inv_r2 * trace)[:, None, None] * np.eye(m)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def conformal_frame(geo):
    """(E, F): E[p, a, i] components of E_i = e_i / rho, F[p, i, a] of omega^i."""
    E = geo.frame / geo.rho[:, None, None]
    F = geo.coframe * geo.rho[:, None, None]
    return E, F


def conformal_christoffel(geo):
    if geo.dg is None:
        raise ValueError("conformal Christoffels need jet order >= 3")
    return _christoffel(np.linalg.inv(geo.g), geo.dg)


def conformal_curvature(geo):
    """(R_ijkl, R_ij, kappa) of g in the frame E_i.

    R_ijkl = g(R(E_i, E_j) E_k, E_l) with R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y],
    so R_ijij is minus the sectional curvature of the plane E_i ^ E_j.
    """
    if geo.ddg is None:
        raise ValueError("curvature needs jet order 4")
    m = geo.m
    g, dg, ddg = geo.g, geo.dg, geo.ddg
    ginv = np.linalg.inv(g)
    # first kind G[d, a, b] and its derivative dG[d, a, b, k]
    G1 = 0.5 * (np.einsum("...dba->...dab", dg) + dg - np.einsum("...abd->...dab", dg))
    dG1 = 0.5 * (np.einsum("...dbak->...dabk", ddg) + ddg - np.einsum("...abdk->...dabk", ddg))
    gam = np.einsum("...ed,...dab->...eab", ginv, G1)
    dginv = -np.einsum("...ec,...cdk,...df->...efk", ginv, dg, ginv)
    dgam = np.einsum("...edk,...dab->...eabk", dginv, G1) + np.einsum("...ed,...dabk->...eabk", ginv, dG1)
    # R(d_a, d_b) d_c = Rup[e, c, a, b] d_e
    Rup = (np.einsum("...ecba->...ecab", dgam) - np.einsum("...ecab->...ecab", dgam)
           + np.einsum("...fbc,...eaf->...ecab", gam, gam)
           - np.einsum("...fac,...ebf->...ecab", gam, gam))
    # lower: Rl[a, b, c, d] = g(R(d_a, d_b) d_c, d_d)
    Rl = np.einsum("...de,...ecab->...abcd", g, Rup)
    E, _ = conformal_frame(geo)
    R = np.einsum("...abcd,...ai,...bj,...ck,...dl->...ijkl", Rl, E, E, E, E, optimize=True)
    Ric = np.einsum("...kijk->...ij", R)
    scal = np.einsum("...ii->...", Ric)
    kappa = scal / (m * (m - 1))
    return R, Ric, kappa


def blaschke_trace(kappa, m):
    return (m * m * kappa - 1.0) / (2.0 * m)


def blaschke_from_ricci(Ric, B, kappa):
    m = B.shape[-1]
    if m < 3:
        raise RicciRouteUnderdetermined("Ricci route underdetermined for m = 2")
    trA = blaschke_trace(np.asarray(kappa), m)
    BB = np.einsum("...ik,...kj->...ij", B, B)
    return (Ric - BB - trA[..., None, None] * np.eye(m)) / (m - 2)


def para_blaschke(A, B, lam):
    return A + lam * B


@dataclass
class InvariantFrame:
    """Conformal invariants at a batch of points, frame components in E_i."""

    geo: LocalGeometry
    B: np.ndarray
    Phi: np.ndarray
    A: Optional[np.ndarray]
    A_ricci: Optional[np.ndarray]
    R: Optional[np.ndarray]
    Ric: Optional[np.ndarray]
    kappa: Optional[np.ndarray]
    E: np.ndarray
    F: np.ndarray

    @property
    def m(self):
        return self.geo.m

    @property
    def rho(self):
        return self.geo.rho

    @property
    def H(self):
        return self.geo.H

    def D(self, lam):
        return para_blaschke(self.A, self.B, lam)

    def to_coordinates(self, T):
        """Frame tensor (rank 1 or 2) to chart-coordinate components."""
        if T.ndim == 2:
            return np.einsum("pia,pi->pa", self.F, T)
        return np.einsum("pia,pjb,pij->pab", self.F, self.F, T)


def invariant_frame(geo):
    B = conformal_B(geo)
    Phi = conformal_form_Phi(geo)
    E, F = conformal_frame(geo)
    A = A_ricci = R = Ric = kappa = None
    if geo.ddlogrho is not None and geo.ddg is not None:
        A = blaschke_direct(geo)
        R, Ric, kappa = conformal_curvature(geo)
        if geo.m >= 3:
            A_ricci = blaschke_from_ricci(Ric, B, kappa)
    return InvariantFrame(geo, B, Phi, A, A_ricci, R, Ric, kappa, E, F)


def invariants(chart, points, order=4):
    return invariant_frame(local_geometry(chart, points, order=order))


def curvature_identity(B, A):
    """Right-hand side of the Gauss-type identity for R_ijkl."""
    m = B.shape[-1]
    d = np.eye(m)
    return (np.einsum("...ik,...jl->...ijkl", B, B) - np.einsum("...il,...jk->...ijkl", B, B)
            + np.einsum("...il,jk->...ijkl", A, d) - np.einsum("...ik,jl->...ijkl", A, d)
            + np.einsum("...jk,il->...ijkl", A, d) - np.einsum("...jl,ik->...ijkl", A, d))


# -----------------------------------------------------------------------------
# moving frame


def _lift_inner(v, w):
    """<v, w> in R^{m+3}_2, two leading time-like slots."""
    return np.sum(v[..., 2:] * w[..., 2:], axis=-1) - v[..., 0] * w[..., 0] - v[..., 1] * w[..., 1]


@dataclass
class MovingFrame:
    Y: np.ndarray
    N: np.ndarray
    Yi: np.ndarray
    xi: np.ndarray
    Yij: Optional[np.ndarray]
    laplace_Y: Optional[np.ndarray]


def moving_frame(inv):
    geo = inv.geo
    m = geo.m
    E = inv.E
    Y, dY = geo.Y, geo.dY
    Yi = np.einsum("pai,pna->pin", E, dY)
    H = geo.H
    xi = np.concatenate([-H[:, None], -H[:, None] * geo.x + geo.normal], axis=-1)
    N = Yij = lap = None
    if geo.ddY is not None:
        gam = conformal_christoffel(geo)
        hess = geo.ddY.transpose(0, 2, 3, 1) - np.einsum("pcab,pnc->pabn", gam, dY)
        ginv = np.linalg.inv(geo.g)
        lap = np.einsum("pab,pabn->pn", ginv, hess)
        N = -lap / m - (_lift_inner(lap, lap) / (2 * m * m))[:, None] * Y
        Yij = np.einsum("pai,pbj,pabn->pijn", E, E, hess)
    return MovingFrame(Y, N, Yi, xi, Yij, lap)


def connection_forms(inv):
    """omega_ij(d_alpha) = g(nabla_{d_alpha} E_i, E_j), shape (P, i, j, alpha)."""
    geo = inv.geo
    gam = conformal_christoffel(geo)
    E = inv.E
    dE = geo.dframe / geo.rho[:, None, None, None] - np.einsum("pai,pk->paik", E, geo.dlogrho)
    cov = dE + np.einsum("pcka,pai->pcik", gam, E)
    return np.einsum("pcd,pcik,pdj->pijk", geo.g, cov, E)


# -----------------------------------------------------------------------------
# finite-difference stencils


@dataclass(frozen=True)
class Stencil:
    """Interior nodes plus offsets +-h, +-h/2, ... along every axis."""

    nodes: np.ndarray
    step: np.ndarray
    levels: int = 3

    @property
    def m(self):
        return self.nodes.shape[1]

    @property
    def width(self):
        return 1 + 2 * self.levels * self.m

    def _offsets(self, k):
        h = self.step[k]
        return [sgn * h / 2 ** j for j in range(self.levels) for sgn in (1.0, -1.0)]

    def points(self):
        P, m = self.nodes.shape
        out = np.repeat(self.nodes[:, None, :], self.width, axis=1)
        for k in range(m):
            base = 1 + 2 * self.levels * k
            for j, off in enumerate(self._offsets(k)):
                out[:, base + j, k] += off
        return out.reshape(-1, m)

    def derivative(self, values):
        """Richardson-extrapolated partials; values (P, width, ...) -> (P, ..., m)."""
        out = []
        for k in range(self.m):
            h = self.step[k]
            base = 1 + 2 * self.levels * k
            table = [(values[:, base + 2 * j] - values[:, base + 2 * j + 1]) * (2 ** j / (2 * h))
                     for j in range(self.levels)]
            # central differences have even error expansions in h
            for lev in range(1, self.levels):
                f = 4.0 ** lev
                table = [(f * table[j + 1] - table[j]) / (f - 1) for j in range(len(table) - 1)]
            out.append(table[0])
        return np.stack(out, axis=-1)

    def halved(self):
        return Stencil(self.nodes, 0.5 * self.step, self.levels)


FD_STEP_CAP = 0.2


def make_stencil(grid, step=None, max_nodes=None, levels=3):
    """Stencils at the interior grid nodes.

    The default step is the grid spacing, capped at FD_STEP_CAP so coarse grids
    (high dimension) keep the same truncation budget.
    """
    if min(grid.shape) < 5:
        raise GridTooCoarse("grid too coarse: need at least 5 points per axis")
    idx = grid.interior(1)
    nodes = grid.points[idx]
    if max_nodes is not None and len(nodes) > max_nodes:
        nodes = nodes[np.linspace(0, len(nodes) - 1, max_nodes).round().astype(int)]
    if step is None:
        h = np.minimum(np.asarray(grid.spacing, float), FD_STEP_CAP)
    else:
        if not step > 0:
            raise ValueError("finite-difference step must be positive")
        h = np.full(grid.points.shape[1], float(step))
    return Stencil(nodes, h, levels)


def _reshape(arr, P, W):
    return arr.reshape((P, W) + arr.shape[1:])


def coordinate_derivative(values, stencil):
    return stencil.derivative(values)


def covariant_derivative_coords(T, dT, gam):
    """nabla_gamma T for rank-1 (P, a) or rank-2 (P, a, b) coordinate tensors.

    ``dT`` carries the derivative index last; the result does as well.
    """
    if T.ndim == 2:
        return dT - np.einsum("pdga,pd->pag", gam, T)
    return (dT - np.einsum("pdga,pdb->pabg", gam, T)
            - np.einsum("pdgb,pad->pabg", gam, T))


@dataclass
class CovariantDerivativeField:
    label: str
    values: np.ndarray  # T_ijk (derivative index last) or Phi_ij


def covariant_derivative(label, samples_coord, stencil, center):
    """Frame components of nabla T at the stencil nodes.

    ``samples_coord`` holds the coordinate components at every stencil point,
    shape (P, width, m[, m]); ``center`` is the InvariantFrame at the nodes.
    """
    P, W = stencil.nodes.shape[0], stencil.width
    samples_coord = _reshape(samples_coord, P, W) if samples_coord.shape[0] != P else samples_coord
    dT = stencil.derivative(samples_coord)
    T0 = samples_coord[:, 0]
    gam = conformal_christoffel(center.geo)
    nab = covariant_derivative_coords(T0, dT, gam)
    E = center.E
    if T0.ndim == 2:
        vals = np.einsum("pai,pgj,pag->pij", E, E, nab)
    else:
        vals = np.einsum("pai,pbj,pgk,pabg->pijk", E, E, E, nab)
    return CovariantDerivativeField(label, vals)


# -----------------------------------------------------------------------------
# residual reports


@dataclass
class Residual:
    name: str
    value: float
    tol: float
    fd: bool = False
    note: str = ""

    @property
    def passed(self):
        return bool(np.isfinite(self.value) and self.value <= self.tol)


@dataclass
class ResidualReport:
    rows: list = field(default_factory=list)

    def add(self, name, value, tol, fd=False, note=""):
        self.rows.append(Residual(name, float(value), float(tol), fd, note))

    def extend(self, other):
        self.rows.extend(other.rows)

    def get(self, name):
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def __iter__(self):
        return iter(self.rows)


def _maxabs(a):
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


@dataclass
class FieldAnalysis:
    """Invariants at the nodes and on the full stencil, with FD derivatives."""

    stencil: Stencil
    center: InvariantFrame
    samples: InvariantFrame
    dB: CovariantDerivativeField
    dPhi: CovariantDerivativeField
    dA: Optional[CovariantDerivativeField]

    def dD(self, lam):
        if self.dA is None:
            return None
        return CovariantDerivativeField(f"D^{lam:g}", self.dA.values + lam * self.dB.values)


def _sample_reshape(arr, P, W):
    return None if arr is None else arr.reshape((P, W) + arr.shape[1:])


def analyze_fields(chart, stencil, order=4, perturb=None):
    """Evaluate every invariant on the stencil and differentiate.

    ``perturb`` (optional) maps (points, B) -> B and is applied to the frame
    components of B before differentiation; used for negative controls.
    """
    P, W = stencil.nodes.shape[0], stencil.width
    pts = stencil.points()
    samples = invariants(chart, pts, order=order)
    center = invariant_frame(samples.geo.subset(np.arange(0, P * W, W)))
    B = samples.B
    if perturb is not None:
        B = perturb(pts, B)
        center.B = B[::W]
    dB = covariant_derivative("B", _sample_reshape(samples.to_coordinates(B), P, W), stencil, center)
    dPhi = covariant_derivative("Phi", _sample_reshape(samples.to_coordinates(samples.Phi), P, W),
                                stencil, center)
    dA = None
    if samples.A is not None:
        dA = covariant_derivative("A", _sample_reshape(samples.to_coordinates(samples.A), P, W),
                                  stencil, center)
    return FieldAnalysis(stencil, center, samples, dB, dPhi, dA)


def trace_checks(inv, tol_trace=1e-9, tol_norm=1e-7):
    m = inv.m
    rep = ResidualReport()
    B = inv.B
    rep.add("trace B", _maxabs(np.trace(B, axis1=-2, axis2=-1)), tol_trace)
    rep.add("|B|^2 - (m-1)/m", _maxabs(np.sum(B * B, axis=(-2, -1)) - (m - 1) / m), tol_norm)
    if inv.A is not None:
        rep.add("trace A - (m^2 kappa - 1)/(2m)",
                _maxabs(np.trace(inv.A, axis1=-2, axis2=-1) - blaschke_trace(inv.kappa, m)), 1e-7)
    return rep


def route_equivalence(inv, tol=1e-6):
    rep = ResidualReport()
    if inv.A_ricci is not None:
        rep.add("A direct vs Ricci", _maxabs(inv.A - inv.A_ricci), tol)
    return rep


def integrability_residuals(fa, lam=0.0, tol=1e-5):
    """Named residuals of the integrability conditions and the curvature identity."""
    c = fa.center
    m = c.m
    d = np.eye(m)
    B, Phi, A = c.B, c.Phi, c.A
    rep = ResidualReport()
    Phij = fa.dPhi.values
    Bk = fa.dB.values
    if A is not None:
        comm = np.einsum("pik,pkj->pij", B, A) - np.einsum("pkj,pki->pij", B, A)
        rep.add("Phi_ij - Phi_ji", _maxabs(Phij - np.swapaxes(Phij, 1, 2) - comm), tol, fd=True)
        Ak = fa.dA.values
        rhs = np.einsum("pij,pk->pijk", B, Phi) - np.einsum("pik,pj->pijk", B, Phi)
        rep.add("A_ijk - A_ikj", _maxabs(Ak - np.swapaxes(Ak, 2, 3) - rhs), tol, fd=True)
    rhs = np.einsum("ij,pk->pijk", d, Phi) - np.einsum("ik,pj->pijk", d, Phi)
    rep.add("B_ijk - B_ikj", _maxabs(Bk - np.swapaxes(Bk, 2, 3) - rhs), tol, fd=True)
    if A is not None:
        rep.add("R_ijkl Gauss identity", _maxabs(c.R - curvature_identity(B, A)), 1e-7)
        Dk = fa.dD(lam).values
        Bl = B + lam * d
        rhs = np.einsum("pij,pk->pijk", Bl, Phi) - np.einsum("pik,pj->pijk", Bl, Phi)
        rep.add(f"D_ijk - D_ikj (lambda={lam:g})", _maxabs(Dk - np.swapaxes(Dk, 2, 3) - rhs), tol, fd=True)
    return rep


def moving_frame_check(fa, tol=1e-6, tol_pointwise=1e-7):
    """Light-cone frame identities and the four structure-equation rows."""
    st = fa.stencil
    P, W = st.nodes.shape[0], st.width
    s = fa.samples
    c = fa.center
    m = c.m
    mf_s = moving_frame(s)
    mf = MovingFrame(*(None if v is None else v[::W] for v in
                       (mf_s.Y, mf_s.N, mf_s.Yi, mf_s.xi, mf_s.Yij, mf_s.laplace_Y)))
    rep = ResidualReport()
    Y, xi, Yi = mf.Y, mf.xi, mf.Yi
    rep.add("<Y,Y>", _maxabs(_lift_inner(Y, Y)), tol_pointwise)
    rep.add("<xi,xi> + 1", _maxabs(_lift_inner(xi, xi) + 1), 1e-10)
    rep.add("<Y_i,Y_j> - delta", _maxabs(np.einsum("pin,pjn->pij", Yi * _sig(Yi), Yi) - np.eye(m)),
            tol_pointwise)
    if mf.N is None:
        return rep
    N = mf.N
    rep.add("<DY,Y> + m", _maxabs(_lift_inner(mf.laplace_Y, Y) + m), tol_pointwise)
    rep.add("<N,N>", _maxabs(_lift_inner(N, N)), tol_pointwise)
    rep.add("<Y,N> - 1", _maxabs(_lift_inner(Y, N) - 1), tol_pointwise)
    rep.add("A + <Y_ij,N>", _maxabs(c.A + _lift_inner(mf.Yij, N[:, None, None, :])), tol_pointwise)
    rep.add("B + <Y_ij,xi>", _maxabs(c.B + _lift_inner(mf.Yij, xi[:, None, None, :])), tol_pointwise)

    dY = st.derivative(_sample_reshape(mf_s.Y, P, W))      # (P, n, alpha)
    dN = st.derivative(_sample_reshape(mf_s.N, P, W))
    dYi = st.derivative(_sample_reshape(mf_s.Yi, P, W))    # (P, i, n, alpha)
    dxi = st.derivative(_sample_reshape(mf_s.xi, P, W))
    F = c.F                                                # omega^i(d_alpha)
    psi = np.einsum("pij,pja->pia", c.A, F)
    tau = np.einsum("pij,pja->pia", c.B, F)
    phi = np.einsum("pi,pia->pa", c.Phi, F)
    omega = connection_forms(c)                            # (P, i, j, alpha)

    r1 = dY - np.einsum("pin,pia->pna", Yi, F)
    r2 = dN - np.einsum("pia,pin->pna", psi, Yi) - np.einsum("pa,pn->pna", phi, xi)
    r3 = (dYi + np.einsum("pia,pn->pina", psi, Y) + np.einsum("pia,pn->pina", F, N)
          - np.einsum("pija,pjn->pina", omega, Yi) - np.einsum("pia,pn->pina", tau, xi))
    r4 = dxi - np.einsum("pa,pn->pna", phi, Y) - np.einsum("pia,pin->pna", tau, Yi)
    rep.add("dY row", _maxabs(r1), tol, fd=True)
    rep.add("dN row", _maxabs(r2), tol, fd=True)
    rep.add("dY_i row", _maxabs(r3), tol, fd=True)
    rep.add("dxi row", _maxabs(r4), tol, fd=True)
    return rep


def _sig(v):
    s = np.ones(v.shape[-1])
    s[:2] = -1.0
    return s
