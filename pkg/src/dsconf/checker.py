"""Eigenstructure of the invariant fields and the branch predicates of the
parallel para-Blaschke classification, applied to sampled data.

The classifier only checks necessary conditions: it lists every branch whose
numerical signature the sampled fields are consistent with.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .conformal import (
    analyze_fields,
    eigenvalues_desc,
    integrability_residuals,
    make_stencil,
    moving_frame_check,
    route_equivalence,
    trace_checks,
    ResidualReport,
)
from .hypersurface import uniform_grid

CLUSTER_THRESHOLD = 1e-3
PARALLEL_TOL = 1e-5
PHI_TOL = 1e-7
PREDICATE_TOL = 1e-6


class NonConstantMultiplicity(ValueError):
    pass


@dataclass(frozen=True)
class EigenStructure:
    t: int
    values: tuple
    multiplicities: tuple
    deviation: float
    eigenvalues: np.ndarray = field(repr=False, compare=False)

    def pairs(self):
        return tuple(zip(self.values, self.multiplicities))


def _cluster_sizes(ev, threshold):
    scale = max(1.0, float(np.max(np.abs(ev))))
    gaps = np.abs(np.diff(ev)) > threshold * scale
    sizes, run = [], 1
    for g in gaps:
        if g:
            sizes.append(run)
            run = 1
        else:
            run += 1
    sizes.append(run)
    return tuple(sizes)


def eigen_structure(S, threshold=CLUSTER_THRESHOLD):
    """Distinct eigenvalue clusters of a symmetric field sampled over a grid."""
    S = np.asarray(S, dtype=float)
    if S.ndim == 2:
        S = S[None]
    asym = float(np.max(np.abs(S - np.swapaxes(S, -1, -2)))) if S.size else 0.0
    if asym > 1e-8:
        raise ValueError(f"field is not symmetric (asymmetry {asym:.3e})")
    ev = eigenvalues_desc(S)
    patterns = {_cluster_sizes(e, threshold) for e in ev}
    if len(patterns) != 1:
        raise NonConstantMultiplicity(
            f"non-constant multiplicity: {len(patterns)} cluster patterns over the grid")
    sizes = patterns.pop()
    values, dev, start = [], 0.0, 0
    for k in sizes:
        block = ev[:, start:start + k]
        values.append(float(np.mean(block)))
        dev = max(dev, float(np.max(block) - np.min(block)))
        start += k
    return EigenStructure(len(sizes), tuple(values), sizes, dev, ev)


def _eigenframes(S):
    w, V = np.linalg.eigh(0.5 * (S + np.swapaxes(S, -1, -2)))
    return w[..., ::-1], V[..., ::-1]


def _blocks(sizes):
    out, start = [], 0
    for k in sizes:
        out.append(slice(start, start + k))
        start += k
    return out


def simultaneous_diag_check(D, B, structure=None):
    """Largest component of B coupling distinct eigenspaces of D."""
    structure = structure or eigen_structure(D)
    if structure.t == 1:
        return 0.0
    _, V = _eigenframes(D)
    Bd = np.einsum("pai,pab,pbj->pij", V, B, V)
    blocks = _blocks(structure.multiplicities)
    res = 0.0
    for i, bi in enumerate(blocks):
        for bj in blocks[i + 1:]:
            res = max(res, float(np.max(np.abs(Bd[:, bi, bj]))))
    return res


@dataclass(frozen=True)
class DichotomyReport:
    applicable: bool
    reason: str = ""
    sum_residual: float = float("nan")
    block_residual: float = float("nan")
    space_form_block: Optional[int] = None
    curvature_sign_value: float = float("nan")

    def holds(self, tol=PREDICATE_TOL):
        return self.applicable and self.sum_residual <= tol and self.block_residual <= tol


def dichotomy_check(D, B, lam, structure=None):
    """Test d1 + d2 = -lambda^2 and B = -lambda on one eigenspace of D.

    The block where B = -lambda is the space-form factor.  ``curvature_sign_value``
    is 2d + lambda^2 with d the D eigenvalue of the other block; the space-form
    factor has sectional curvature -(2d + lambda^2), so a positive value means a
    hyperbolic factor.
    """
    structure = structure or eigen_structure(D)
    if structure.t != 2:
        return DichotomyReport(False, reason=f"inapplicable: t = {structure.t}")
    d1, d2 = structure.values
    _, V = _eigenframes(D)
    Bd = np.einsum("pai,pab,pbj->pij", V, B, V)
    res = []
    for blk in _blocks(structure.multiplicities):
        sub = Bd[:, blk, blk]
        res.append(float(np.max(np.abs(sub + lam * np.eye(sub.shape[-1])))))
    sf = int(np.argmin(res))
    d_other = (d1, d2)[1 - sf]
    return DichotomyReport(True, "", abs(d1 + d2 + lam * lam), res[sf], sf, 2 * d_other + lam * lam)


@dataclass
class ClassificationVerdict:
    flags: dict
    t_B: Optional[int]
    t_D: Optional[int]
    predicates: dict
    labels: list
    reasons: list

    @property
    def label(self):
        return self.labels[0]

    def consistent_with(self, label):
        return label in self.labels


def _block_curvatures(A, B, structure):
    """2a - b^2 on each eigenspace of B, with a the mean of A there."""
    _, V = _eigenframes(B)
    Ad = np.einsum("pai,pab,pbj->pij", V, A, V)
    out = []
    for blk, b in zip(_blocks(structure.multiplicities), structure.values):
        a = np.mean(np.trace(Ad[:, blk, blk], axis1=-2, axis2=-1)) / (blk.stop - blk.start)
        out.append(float(2 * a - b * b))
    return out


def classify(results, lam=None):
    """Decision tree over sampled invariants; see :class:`EntryResults`."""
    lam = results.lam if lam is None else lam
    c = results.analysis.center
    phi_max = float(np.max(np.abs(c.Phi)))
    dB = float(np.max(np.abs(results.analysis.dB.values)))
    dD = results.dD_max(lam)
    flags = {
        "phi_zero": phi_max <= PHI_TOL,
        "B_parallel": dB <= PARALLEL_TOL,
        "D_parallel": dD is not None and dD <= PARALLEL_TOL,
    }
    reasons, labels, predicates = [], [], {}
    try:
        sB = eigen_structure(c.B, results.threshold)
    except NonConstantMultiplicity as exc:
        sB = None
        reasons.append(f"B: {exc}")
    D = c.D(lam) if c.A is not None else None
    sD = None
    if D is not None:
        try:
            sD = eigen_structure(D, results.threshold)
        except NonConstantMultiplicity as exc:
            reasons.append(f"D: {exc}")
    t_B = sB.t if sB else None
    t_D = sD.t if sD else None
    if not flags["phi_zero"]:
        reasons.append(f"conformal form not zero (max |Phi| = {phi_max:.3e})")
    if not flags["D_parallel"]:
        reasons.append("para-Blaschke tensor not parallel"
                       + (f" (max |D_ijk| = {dD:.3e})" if dD is not None else " (no Blaschke data)"))
    if sB is not None:
        predicates["isoparametric_B"] = sB.deviation <= PREDICATE_TOL
    if sD is not None and D is not None:
        predicates["simultaneous_diagonalization"] = simultaneous_diag_check(D, c.B, sD) <= PREDICATE_TOL
        dich = dichotomy_check(D, c.B, lam, sD)
        predicates["dichotomy_d1_plus_d2"] = dich.holds()
    else:
        dich = None
    if not (flags["phi_zero"] and flags["D_parallel"]):
        return ClassificationVerdict(flags, t_B, t_D, predicates, ["inconsistent"], reasons)

    if flags["B_parallel"] and sB is not None:
        if sB.t == 2:
            curv = _block_curvatures(c.A, c.B, sB)
            predicates["block_curvatures"] = curv
            if max(curv) > PREDICATE_TOL:
                labels.append("item4")
            elif min(abs(x) for x in curv) <= PREDICATE_TOL:
                labels.append("item5")
            else:
                labels.append("item6")
        elif sB.t == 3:
            labels.append("item7")
    if dich is not None and dich.holds():
        labels.append("example32" if dich.curvature_sign_value > 0 else "example33")
    if t_D == 1:
        labels.append("cmc")
    if not labels:
        reasons.append(f"no branch matches (t_B = {t_B}, t_D = {t_D})")
        labels = ["inconsistent"]
    return ClassificationVerdict(flags, t_B, t_D, predicates, labels, reasons)


# -----------------------------------------------------------------------------
# running the full pipeline on one chart


@dataclass
class EntryResults:
    chart: object
    analysis: object
    lams: tuple
    lam: float
    reports: dict
    grid_n: int
    threshold: float = CLUSTER_THRESHOLD

    def dD_max(self, lam):
        dD = self.analysis.dD(lam)
        return None if dD is None else float(np.max(np.abs(dD.values)))

    def residuals(self):
        rep = ResidualReport()
        for r in self.reports.values():
            rep.extend(r)
        return rep


def evaluate_chart(chart, lams=(0.0,), lam=None, grid_n=9, order=4, fd_step=None,
                   threshold=CLUSTER_THRESHOLD, halving=False):
    """Run every pointwise and FD identity on a chart.

    ``halving`` repeats the FD rows with the step halved and adds a
    convergence row per residual (ratio >= 4, or both below the roundoff floor).
    """
    lams = tuple(lams) or (0.0,)
    lam = lams[0] if lam is None else lam
    grid = uniform_grid(chart, grid_n)
    stencil = make_stencil(grid, fd_step)
    fa = analyze_fields(chart, stencil, order=order)
    reports = {
        "trace": trace_checks(fa.center),
        "routes": route_equivalence(fa.center),
        "moving_frame": moving_frame_check(fa),
    }
    for L in dict.fromkeys(lams + (lam,)):
        reports[f"integrability(lambda={L:g})"] = integrability_residuals(fa, L)
    if halving:
        fa2 = analyze_fields(chart, stencil.halved(), order=order)
        fine = {"moving_frame": moving_frame_check(fa2)}
        for L in dict.fromkeys(lams + (lam,)):
            fine[f"integrability(lambda={L:g})"] = integrability_residuals(fa2, L)
        conv = ResidualReport()
        for key, rep in fine.items():
            for row in rep:
                if not row.fd:
                    continue
                coarse = reports[key].get(row.name).value
                conv.add(f"{row.name} halving ratio", *convergence_row(coarse, row.value))
        reports["halving"] = conv
    return EntryResults(chart, fa, lams, lam, reports, grid_n, threshold)


ROUNDOFF_FLOOR = 1e-11


def convergence_row(coarse, fine):
    """(value, tol, fd, note) for a halving check: value is 4 / ratio, tol 1."""
    if coarse <= ROUNDOFF_FLOOR:
        return 0.0, 1.0, False, "coarse residual at roundoff floor"
    ratio = coarse / max(fine, 1e-300)
    return 4.0 / ratio, 1.0, False, f"ratio {ratio:.3g}"


# -----------------------------------------------------------------------------
# closed-form oracles and summaries

ORACLE_TOL = {"B eigenvalues": 1e-8, "D eigenvalues": 1e-6, "rho": 1e-8}


def _expand(pairs):
    return np.array(sorted((v for v, k in pairs for _ in range(k)), reverse=True))


def oracle_checks(entry, results, tol=None):
    """Rows comparing sampled invariants against the closed forms stored on an entry."""
    tol = dict(ORACLE_TOL, **(tol or {}))
    c = results.analysis.center
    exp = entry.expected
    rep = ResidualReport()
    if exp.B_eigs is not None:
        rep.add("B eigenvalues vs oracle",
                float(np.max(np.abs(eigenvalues_desc(c.B) - _expand(exp.B_eigs)))),
                tol["B eigenvalues"])
    if exp.D_eigs is not None and c.A is not None:
        lam = results.lam if entry.lam is None else entry.lam
        rep.add(f"D eigenvalues vs oracle (lambda={lam:g})",
                float(np.max(np.abs(eigenvalues_desc(c.D(lam)) - _expand(exp.D_eigs)))),
                tol["D eigenvalues"])
    if exp.rho is not None:
        rep.add("rho vs oracle", float(np.max(np.abs(c.rho - exp.rho))), tol["rho"])
    if entry.rho_oracle is not None:
        rho = entry.rho_oracle(results.analysis.stencil.nodes)
        rep.add("rho vs oracle", float(np.max(np.abs(c.rho - rho))), tol["rho"])
    phi = float(np.max(np.abs(c.Phi)))
    if "phi_zero" in exp.flags:
        rep.add("Phi max", phi, PHI_TOL)
    if "B_parallel" in exp.flags:
        rep.add("|nabla B| max", float(np.max(np.abs(results.analysis.dB.values))), PARALLEL_TOL)
    if "D_parallel" in exp.flags:
        for L in dict.fromkeys(results.lams + (results.lam,)):
            dD = results.dD_max(L)
            if dD is not None:
                rep.add(f"|nabla D| max (lambda={L:g})", dD, PARALLEL_TOL)
    if exp.t_B is not None:
        sB = eigen_structure(c.B, results.threshold)
        rep.add("distinct B eigenvalues vs oracle", abs(sB.t - exp.t_B), 0.0)
        if exp.t_B == 3:
            rep.add("B cluster spread", sB.deviation, PREDICATE_TOL)
    return rep


def phi_consistency(results):
    """Wherever D^lambda is parallel the conformal form must vanish."""
    rep = ResidualReport()
    phi = float(np.max(np.abs(results.analysis.center.Phi)))
    for L in dict.fromkeys(results.lams + (results.lam,)):
        dD = results.dD_max(L)
        if dD is not None and dD <= PARALLEL_TOL:
            rep.add(f"Phi max where D parallel (lambda={L:g})", phi, PHI_TOL)
    return rep


def classification_row(entry, verdict):
    rep = ResidualReport()
    if entry.label == "none":
        ok = verdict.labels == ["inconsistent"]
        rep.add("classifier rejects control", 0.0 if ok else 1.0, 0.0,
                note=",".join(verdict.labels))
    else:
        ok = verdict.consistent_with(entry.label)
        rep.add(f"classifier consistent with {entry.label}", 0.0 if ok else 1.0, 0.0,
                note=",".join(verdict.labels))
    return rep


def field_summary(S, threshold=CLUSTER_THRESHOLD):
    """Eigenvalue clusters of a sampled symmetric field, for reports."""
    try:
        s = eigen_structure(S, threshold)
    except NonConstantMultiplicity:
        ev = eigenvalues_desc(S)
        return {"constant_multiplicity": False,
                "min": ev.min(axis=0).tolist(), "max": ev.max(axis=0).tolist()}
    return {"constant_multiplicity": True, "values": list(s.values),
            "multiplicities": list(s.multiplicities), "spread": s.deviation}


# -----------------------------------------------------------------------------
# comparing invariants of two charts of the same hypersurface


def _eig_gap(S1, S2):
    return float(np.max(np.abs(eigenvalues_desc(S1) - eigenvalues_desc(S2))))


def orientation_sign(ref, other):
    """+1 or -1: the relative orientation of two charts, read off from B.

    Reversing the normal flips B and Phi and leaves g and A alone.
    """
    return 1.0 if _eig_gap(ref.B, other.B) <= _eig_gap(ref.B, -other.B) else -1.0


def invariant_deviation(ref, other, lams=(0.0,)):
    """Largest differences between the invariants of two charts at the same points."""
    s = orientation_sign(ref, other)
    out = {
        "g": float(np.max(np.abs(ref.geo.g - other.geo.g))),
        "B": _eig_gap(ref.B, s * other.B),
        "|Phi|": float(np.max(np.abs(np.linalg.norm(ref.Phi, axis=-1)
                                     - np.linalg.norm(other.Phi, axis=-1)))),
    }
    if ref.A is not None and other.A is not None:
        out["A"] = _eig_gap(ref.A, other.A)
        for L in lams:
            out[f"D^{L:g}"] = _eig_gap(ref.D(L), other.A + L * s * other.B)
    return s, out
