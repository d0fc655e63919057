"""Batch driver: run the invariant pipeline on catalog entries and write a report.

Exit status is 0 when every residual row passes, 1 when any fails and 2 on
configuration or parameter errors.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import io
import json
import logging
import sys
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import catalog
from .catalog import NoAdmissibleParameters, ParameterError
from .checker import (
    CLUSTER_THRESHOLD,
    classification_row,
    classify,
    evaluate_chart,
    field_summary,
    invariant_deviation,
    oracle_checks,
    phi_consistency,
)
from .conformal import GridTooCoarse, ResidualReport, invariants
from .hypersurface import uniform_grid
from .pseudo_linalg import SignatureMetric, block_swap, random_pseudo_orthogonal
from .spaceforms import NoAdmissibleChart, act_and_reproject, lift_composed_chart

log = logging.getLogger("dsconf")

PARAM_KEYS = ("m", "k", "K", "p", "q", "a", "r")
EQUIVALENCE_TOL = 1e-6
EQUIVALENCE_GRID = 5
PARTNER_ROUTE = {"sigma1": "sigma2", "sigma2": "sigma1", "tau1": "tau2", "tau2": "tau1"}

CONVENTIONS = [
    "light cone in R^{m+3}_2, slots 0 and 1 time-like",
    "conformal position Y = rho (1, x)",
    "h_ab = -<n, d_a d_b x> with n future-pointing unless a normal hint fixes the side",
    "R_ijkl = g(R(E_i, E_j) E_k, E_l); R_ijij is minus the sectional curvature",
    "Ric_ij = sum_k R_kijk; covariant derivative index written last",
    "FD: 3-level Richardson on a +-h, +-h/2, +-h/4 stencil",
]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    entry: str
    params: dict = field(default_factory=dict)
    lams: tuple = ()
    grid: int | None = None
    jet_order: int = 4
    fd_step: float | None = None
    tols: dict = field(default_factory=dict)
    seed: int = 0
    report: str = "json"
    out: str | None = None
    equivalence: int | None = None

    def __post_init__(self):
        if self.jet_order not in (3, 4):
            raise ConfigError("jet order must be 3 or 4")
        for name, v in self.tols.items():
            if not v > 0:
                raise ConfigError(f"tolerance {name} must be positive")
        if self.grid is not None and self.grid < 2:
            raise ConfigError("grid needs at least 2 points per axis")
        if self.fd_step is not None and not self.fd_step > 0:
            raise ConfigError("FD step must be positive")
        if self.equivalence is not None and self.equivalence < 0:
            raise ConfigError("equivalence suite size must be >= 0")

    def echo(self):
        return {
            "entry": self.entry,
            "params": {k: self.params[k] for k in sorted(self.params)},
            "lambda": list(self.lams),
            "grid": self.grid,
            "jet_order": self.jet_order,
            "fd_step": self.fd_step,
            "tol": {k: self.tols[k] for k in sorted(self.tols)},
            "seed": self.seed,
            "equivalence": self.equivalence,
        }


def build_entry(name, params):
    if name not in catalog.FAMILIES:
        raise ConfigError(f"unknown entry {name!r}; known: {', '.join(sorted(catalog.FAMILIES))}")
    fn, defaults = catalog.FAMILIES[name]
    accepted = set(inspect.signature(fn).parameters)
    extra = sorted(set(params) - accepted)
    if extra:
        raise ConfigError(f"entry {name} takes no parameter(s) {', '.join(extra)}")
    kw = dict(params)
    for key in ("m", "k", "K", "p", "q"):
        if key in kw:
            kw[key] = int(kw[key])
    return catalog.build(name, **kw)


def _apply_tolerances(rep, tols):
    """Override the tolerance of every row whose name starts with a given key."""
    for row in rep:
        for name, v in tols.items():
            if row.name == name or row.name.startswith(name + " "):
                row.tol = v
    return rep


# -----------------------------------------------------------------------------
# equivalence suites


def _compare_charts(ref_chart, other_chart, lams, grid_n):
    pts = uniform_grid(other_chart, grid_n).points
    ref = invariants(ref_chart, pts)
    other = invariants(other_chart, pts)
    _, dev = invariant_deviation(ref, other, lams)
    return dev


def run_equivalence_suite(entry, n, seed=0, lams=(0.0,), tol=EQUIVALENCE_TOL,
                          grid_n=EQUIVALENCE_GRID, swap_only=False):
    """Apply random O(m+3,2) maps (or the time-axis swap alone) and compare invariants.

    Each map acts on the light-cone lift and the image is read back through an
    affine chart; the eigenvalue fields of g, B, A, D^lambda and |Phi| must not
    move.  Returns (report, warnings).
    """
    rep = ResidualReport()
    warnings = []
    chart = entry.chart
    dim = chart.m + 3
    if swap_only:
        T = block_swap(dim)
        dev = _compare_charts(chart, act_and_reproject(T, chart), lams, grid_n)
        rep.add("swap map max deviation", max(dev.values()), tol,
                note=", ".join(f"{k} {v:.3g}" for k, v in dev.items()))
        partner = PARTNER_ROUTE.get(entry.route)
        if partner and entry.inner is not None:
            other = lift_composed_chart(entry.inner, partner)
            moved = act_and_reproject(T, chart, which="psi1" if partner.endswith("2") else "psi2")
            pts = uniform_grid(chart, grid_n).points
            rep.add(f"swap overlap {entry.route} -> {partner}",
                    float(np.max(np.abs(moved.evaluate(pts) - other.evaluate(pts)))), 1e-10)
        return rep, warnings
    if n == 0:
        warnings.append("equivalence suite with 0 maps: vacuous pass")
        return rep, warnings
    metric = SignatureMetric(dim, 2)
    seeds = np.random.SeedSequence(seed).generate_state(n)
    worst, skipped = 0.0, []
    for i, s in enumerate(seeds):
        T = random_pseudo_orthogonal(metric, int(s))
        try:
            moved = act_and_reproject(T, chart)
        except NoAdmissibleChart as exc:
            skipped.append(f"map {i}: {exc}")
            continue
        dev = _compare_charts(chart, moved, lams, grid_n)
        worst = max(worst, max(dev.values()))
    rep.add(f"equivalence max deviation ({n - len(skipped)} maps)", worst, tol)
    if skipped:
        rep.add("equivalence maps skipped", float(len(skipped)), 0.0, note="; ".join(skipped))
    return rep, warnings


# -----------------------------------------------------------------------------
# running


def _plain(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_plain(v) for v in x]
    return x


def _num(x):
    if np.isfinite(x):
        return format(x, ".17g")
    return json.dumps(str(x))


def to_json(obj, indent=0):
    """JSON text with every float written to 17 significant digits."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, float):
        return _num(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if not obj:
        return "[]"
    items = [f"{inner}{to_json(v, indent + 1)}" for v in obj]
    return "[\n" + ",\n".join(items) + f"\n{pad}]"


def _rows(rep):
    return [{"name": r.name, "max": r.value, "tol": r.tol, "pass": r.passed}
            | ({"note": r.note} if r.note else {}) for r in rep]


def run_entry(entry, config):
    lams = tuple(config.lams) or (entry.lam if entry.lam is not None else 0.0,)
    lam = entry.lam if entry.lam is not None else lams[0]
    grid_n = config.grid or catalog.default_grid_size(entry.m)
    threshold = config.tols.get("cluster", CLUSTER_THRESHOLD)
    res = evaluate_chart(entry.chart, lams, lam, grid_n=grid_n, order=config.jet_order,
                         fd_step=config.fd_step, threshold=threshold, halving=True)
    rep = res.residuals()
    c = res.analysis.center
    summary = {"rho": {"min": float(np.min(c.rho)), "max": float(np.max(c.rho))},
               "B": field_summary(c.B, threshold),
               "Phi_max": float(np.max(np.abs(c.Phi)))}
    verdict = None
    if config.jet_order == 4:
        rep.extend(oracle_checks(entry, res))
        rep.extend(phi_consistency(res))
        summary["A"] = field_summary(c.A, threshold)
        for L in dict.fromkeys(lams + (lam,)):
            summary[f"D^{L:g}"] = field_summary(c.D(L), threshold)
        v = classify(res)
        rep.extend(classification_row(entry, v))
        verdict = {"labels": v.labels, "flags": v.flags, "t_B": v.t_B, "t_D": v.t_D,
                   "reasons": v.reasons}
    warnings = []
    if config.equivalence is not None:
        eq, warnings = run_equivalence_suite(entry, config.equivalence, config.seed, lams)
        rep.extend(eq)
        if config.equivalence > 0:
            sw, _ = run_equivalence_suite(entry, 0, config.seed, lams, swap_only=True)
            rep.extend(sw)
    _apply_tolerances(rep, config.tols)
    return {
        "id": entry.chart.label,
        "family": entry.family,
        "label": entry.label,
        "params": entry.params,
        "lambda": list(lams),
        "lambda_classify": lam,
        "grid": grid_n,
        "invariants": summary,
        "residuals": _rows(rep),
        "classification": verdict,
        "warnings": warnings,
        "pass": rep.passed,
    }, rep.passed


def run(config):
    """(report dict, exit code)."""
    header = {
        "conventions": CONVENTIONS,
        "versions": {"python": sys.version.split()[0], "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "config": config.echo(),
    }
    try:
        entry = build_entry(config.entry, config.params)
    except (ConfigError, ParameterError, NoAdmissibleParameters, KeyError) as exc:
        msg = exc.args[0] if exc.args else str(exc)
        return {"header": header, "entries": [], "verdict": "error", "error": msg}, 2
    try:
        result, ok = run_entry(entry, config)
    except GridTooCoarse as exc:
        return {"header": header, "entries": [], "verdict": "error", "error": str(exc)}, 2
    report = {"header": header, "entries": [result], "verdict": "pass" if ok else "fail"}
    return report, 0 if ok else 1


def render(report, fmt):
    if fmt == "json":
        return to_json(_plain(report)) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["entry", "name", "max", "tol", "pass"])
    for e in report["entries"]:
        for r in e["residuals"]:
            w.writerow([e["id"], r["name"], _num(float(r["max"])), _num(float(r["tol"])),
                        "pass" if r["pass"] else "fail"])
    return buf.getvalue()


def _tol_pair(s):
    name, sep, v = s.rpartition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected NAME=X, got {s!r}")
    try:
        return name, float(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {v!r} is not a number") from None


def parser():
    p = argparse.ArgumentParser(prog="dsconf-check",
                                description="Check conformal invariants of space-like "
                                            "hypersurfaces in de Sitter space.")
    p.add_argument("--entry", required=True, help="catalog family id")
    for key in PARAM_KEYS:
        p.add_argument(f"--{key}", type=float, dest=f"param_{key}", metavar="X")
    p.add_argument("--lambda", type=float, action="append", dest="lams", default=[],
                   metavar="L", help="para-Blaschke parameter (repeatable)")
    p.add_argument("--grid", type=int, help="grid points per axis")
    p.add_argument("--jet-order", type=int, choices=(3, 4), default=4)
    p.add_argument("--fd-step", type=float)
    p.add_argument("--tol", type=_tol_pair, action="append", default=[], metavar="NAME=X",
                   help="override a residual tolerance by row name prefix ('cluster' sets "
                        "the eigenvalue clustering threshold)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--equivalence", type=int, metavar="N",
                   help="also run N random O(m+3,2) maps and the time-axis swap")
    return p


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    p = parser()
    try:
        args = p.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    params = {k: getattr(args, f"param_{k}") for k in PARAM_KEYS
              if getattr(args, f"param_{k}") is not None}
    try:
        config = RunConfig(args.entry, params, tuple(args.lams), args.grid, args.jet_order,
                           args.fd_step, dict(args.tol), args.seed, args.report, args.out,
                           args.equivalence)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report, code = run(config)
    if code == 2:
        print(f"error: {report['error']}", file=sys.stderr)
    for e in report["entries"]:
        for w in e["warnings"]:
            log.warning(w)
    text = render(report, config.report)
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
