"""Command-line front end.

Each command writes its result document to ``--out`` (stdout when omitted)
and, when ``--out`` is a file, a ``.report.json`` with the check reports and
an ``.svg`` figure alongside it.  Exit status: 0 all checks pass, 1 some
check fails, 2 some check is inconclusive and none fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analytic, catalog, io, plotting, verify
from .complex import Complex, close_faces
from .maps import IterationCapExceeded, MapEvaluator, PLMap, zeeman_relative
from .shrink_widen import build_covering
from .smoothing import approximate, identity_smoother, synthesize
from .subdivision import sd_iter, sd_mod
from .verify import FAIL, PASS, Report


def _parse_list(text: str | None):
    """A JSON literal or a path to a JSON file."""
    if text is None:
        return None
    p = Path(text)
    if p.exists():
        return json.loads(p.read_text())
    return json.loads(text)


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(","))


def _map(spec: str) -> MapEvaluator:
    if spec in catalog.EVALUATORS:
        return catalog.EVALUATORS[spec]()
    obj = io.load(spec)
    if isinstance(obj, PLMap):
        return obj
    raise ValueError(f"{spec!r} is neither a built-in map nor a PL map document")


def _complex(spec: str) -> Complex:
    obj = io.load(spec)
    if not isinstance(obj, Complex):
        raise ValueError(f"{spec} does not hold a complex")
    return obj


class Outcome:
    def __init__(self, doc=None, reports=(), figure=None, summary: str = ""):
        self.doc, self.reports, self.figure, self.summary = doc, list(reports), figure, summary


# -- commands ----------------------------------------------------------------------

def cmd_subdivide(a) -> Outcome:
    K = _complex(a.input)
    sub = sd_iter(K, (), a.levels)
    return Outcome(sub, verify.audit(sub, a.density, a.seed, a.tolerance), sub,
                   f"{len(sub.child.maximal)} top simplices, {sub.child.n_vertices} vertices")


def cmd_subdivide_mod(a) -> Outcome:
    K = _complex(a.input)
    H = close_faces(_parse_list(a.keep) or [])
    sub = sd_mod(K, H)
    return Outcome(sub, verify.audit(sub, a.density, a.seed, a.tolerance), sub,
                   f"{len(sub.child.maximal)} top simplices, {len(sub.retained)} retained")


def cmd_approx(a) -> Outcome:
    K, L = _complex(a.input), _complex(a.target)
    F = _map(a.map)
    H = close_faces(_parse_list(a.pinned) or [])
    try:
        z = zeeman_relative(F, K, H, L, a.epsilon, density=a.density, seed=a.seed, cap=a.cap)
    except IterationCapExceeded as exc:
        rep = Report("approximation-error", FAIL, {"reason": str(exc)}, "relative-approximation")
        return Outcome(None, [rep], None, "iteration cap exceeded")
    reports = [
        Report("approximation-error", PASS if z.sup_error < a.epsilon else FAIL,
               {"sup_error": z.sup_error, "epsilon": a.epsilon, "n_samples": z.n_samples,
                "kappa": z.kappa, "ell": z.ell}, "relative-approximation"),
        Report("pinned-exact", PASS if z.pinned_exact else FAIL,
               {"n_pinned": len(H)}, "relative-approximation-fixes-H"),
        Report("simplicial", PASS if not z.G.violations(z.region) else FAIL,
               {"violations": len(z.G.violations(z.region))}, "relative-approximation-simplicial"),
    ]
    return Outcome(z.G, reports, z.G,
                   f"kappa={z.kappa} ell={z.ell} sup_error={z.sup_error:.4g}")


def cmd_smooth(a) -> Outcome:
    g = _map(a.input)
    if not isinstance(g, PLMap):
        raise ValueError("smooth expects a PL map document")
    K = g.source
    L = _complex(a.target) if a.target else None
    if L is None:
        raise ValueError("--target is required")
    sm = synthesize(g, K, L, a.epsilon, density=a.density, seed=a.seed)
    reports = verify.audit_smooth(sm, density=a.density, seed=a.seed, tolerance=a.tolerance)
    p, d = verify.smooth_probe_sites(sm, seed=a.seed)
    reports.append(verify.c1_report(sm, p, d))
    return Outcome(sm, reports, sm, f"{len(sm.covering.sets)} covering sets")


def cmd_identity_smoother(a) -> Outcome:
    K = _complex(a.input)
    sm = identity_smoother(K, a.epsilon, a.density, a.seed)
    reports = verify.audit_smooth(sm, density=a.density, seed=a.seed, tolerance=a.tolerance)
    p, d = verify.smooth_probe_sites(sm, seed=a.seed)
    reports.append(verify.c1_report(sm, p, d))
    S = verify.sample_set(K, a.density, a.seed, total=10_000)
    err, _ = verify.sup_distance(sm, lambda x: x, S)
    return Outcome(sm, reports, sm, f"sup displacement {err:.4g}")


def cmd_pipeline(a) -> Outcome:
    K, L = _complex(a.input), _complex(a.target)
    f = _map(a.map)
    res = approximate(f, K, L, a.epsilon, density=a.density, seed=a.seed)
    reports = verify.audit_pipeline(res, f, a.epsilon, seed=a.seed, tolerance=a.tolerance)
    return Outcome(res.smooth, reports, res.smooth, f"budget {res.budget.budget:.4g}")


def cmd_cover(a) -> Outcome:
    K = _complex(a.input)
    C = build_covering(K, a.eta, density=a.density, seed=a.seed)
    if a.scale_eta != 1.0:
        C = C.with_eta_scaled(a.scale_eta)
    return Outcome(C, verify.audit_covering(C, a.density, a.seed), C, f"{len(C.sets)} sets")


def cmd_retract_nc(a) -> Outcome:
    eta = _floats(a.eta)
    active = a.active or len(eta)
    if len(eta) == 1 and active > 1:
        eta = eta * active
    M = analytic.NormalCrossingsModel(a.dim, active, eta)
    axis = np.arange(-a.half_steps, a.half_steps + 1) / a.half_steps * a.extent
    r = analytic.retraction_report(M, axis)
    reports = [
        Report("near-points-land-in-X", PASS if r["near_mapped_into_X"] == r["near_points"] else FAIL,
               {k: r[k] for k in ("near_points", "near_mapped_into_X", "max_abs_product_near")},
               "weak-retraction-onto-X"),
        Report("identity-far-from-X", PASS if r["identity_far_exact"] else FAIL, {},
               "weak-retraction-identity"),
        Report("displacement-on-X", PASS if r["max_displacement_on_X"] <= r["max_gauge"] else FAIL,
               {"max_displacement": r["max_displacement_on_X"], "gauge": r["max_gauge"]},
               "weak-retraction-close"),
        Report("factors-commute", PASS if r["commutator_max"] <= 1e-15 else FAIL,
               {"max": r["commutator_max"]}, "weak-retraction-commute"),
        Report("c1-probe", PASS if r["c1_mismatch_max"] < 1e-3 else FAIL,
               {"max_mismatch": r["c1_mismatch_max"]}, "weak-retraction-smooth"),
    ]
    fig = None
    if a.dim == 2:
        pts = analytic.grid(M, axis)
        disp = np.linalg.norm(analytic.weak_retract(M, pts) - pts, axis=1)
        fig = plotting.scatter_values(pts, disp, "weak retraction", "displacement")
    return Outcome({"kind": "retraction", "dim": a.dim, "eta": list(eta), "summary": r}, reports,
                   fig, f"max displacement on X {r['max_displacement_on_X']:.4g}")


def cmd_singular_lift(a) -> Outcome:
    E = analytic.SingularEmbedding.from_coeffs(_floats(a.coeffs))
    ax = np.linspace(-a.extent, a.extent, a.points)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    r = analytic.singular_locus_scan(E, X.ravel(), Y.ravel(), a.tolerance)
    z = analytic.singular_lift(E, X.ravel(), Y.ravel())
    res = float(np.abs(E.g(z)).max())
    reports = [
        Report("on-surface", PASS if r["max_relative_residual"] <= 1e-12 else FAIL,
               {"max_relative_residual": r["max_relative_residual"], "max_abs_residual": res},
               "singular-lift-on-zero-set"),
        Report("projection-identity", PASS if r["projection_exact"] else FAIL, {},
               "singular-lift-section"),
        Report("critical-locus", PASS if r["critical_matches_expected"] else FAIL,
               {"critical_points": r["critical_points"], "locus": r["critical_locus"][:10]},
               "singular-lift-critical-locus"),
    ]
    fig = None
    if E.n == 1:
        fig = plotting.contour(X, Y, z[:, -1].reshape(X.shape), "lifted surface height", "x", "y1")
    r.pop("critical_locus")
    doc = {"kind": "singular_lift", "coeffs": list(_floats(a.coeffs)), "summary": r}
    if a.at:
        x, y1 = _floats(a.at)
        doc["lift"] = analytic.singular_lift(E, [x], [y1])[0].tolist()
    return Outcome(doc, reports, fig, f"{r['critical_points']} critical points"
                   + (f", lift {doc['lift']}" if a.at else ""))


def cmd_audit(a) -> Outcome:
    obj = io.load(a.input)
    reports = verify.audit(obj, a.density, a.seed, a.tolerance)
    return Outcome(None, reports, obj if not isinstance(obj, list) else None,
                   f"{sum(r.ok for r in reports)}/{len(reports)} checks pass")


def cmd_plot(a) -> Outcome:
    obj = io.load(a.input)
    return Outcome(None, [], obj, "figure written")


COMMANDS = {
    "subdivide": cmd_subdivide, "subdivide-mod": cmd_subdivide_mod, "approx": cmd_approx,
    "smooth": cmd_smooth, "identity-smoother": cmd_identity_smoother, "pipeline": cmd_pipeline,
    "cover": cmd_cover, "retract-nc": cmd_retract_nc, "singular-lift": cmd_singular_lift,
    "audit": cmd_audit, "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--in", dest="input", help="input JSON path, or @name for a built-in complex")
    common.add_argument("--out", help="output path (JSON; SVG for the plot command)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--density", type=int, default=1000, help="samples per simplex")
    common.add_argument("--epsilon", type=float, default=0.1)
    common.add_argument("--tolerance", type=float, default=1e-9)
    common.add_argument("--no-plot", action="store_true", help="skip the SVG figure")

    p = argparse.ArgumentParser(prog="plsmooth", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("subdivide", parents=[common], help="iterated barycentric subdivision")
    s.add_argument("--levels", type=int, default=1)
    s = sub.add_parser("subdivide-mod", parents=[common], help="subdivision keeping a subcomplex")
    s.add_argument("--keep", help="simplices to keep, JSON list or file")
    s = sub.add_parser("approx", parents=[common], help="relative simplicial approximation")
    s.add_argument("--target", required=True)
    s.add_argument("--map", required=True, help="built-in map name or PL map document")
    s.add_argument("--pinned", help="subcomplex to fix, JSON list or file")
    s.add_argument("--cap", type=int, default=8)
    s = sub.add_parser("smooth", parents=[common], help="smooth a PL map")
    s.add_argument("--target", required=True)
    sub.add_parser("identity-smoother", parents=[common], help="smooth map close to the identity")
    s = sub.add_parser("pipeline", parents=[common], help="smooth approximation of a continuous map")
    s.add_argument("--target", required=True)
    s.add_argument("--map", required=True)
    s = sub.add_parser("cover", parents=[common], help="shrink-widen covering")
    s.add_argument("--eta", type=float, default=0.2)
    s.add_argument("--scale-eta", type=float, default=1.0,
                   help="rescale the declared radii after construction (fault injection)")
    s = sub.add_parser("retract-nc", parents=[common], help="normal-crossings weak retraction")
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--active", type=int, help="number of active axes (default: one per gauge)")
    s.add_argument("--eta", default="1,1", help="comma separated gauges, one per active axis")
    s.add_argument("--extent", type=float, default=2.0)
    s.add_argument("--half-steps", type=int, default=200)
    s = sub.add_parser("singular-lift", parents=[common], help="lift onto the cusp-type surface")
    s.add_argument("--poly", "--coeffs", dest="coeffs", default="0,1",
                   help="polynomial coefficients, constant term first")
    s.add_argument("--at", help="x,y1 point to lift")
    s.add_argument("--extent", type=float, default=1.0)
    s.add_argument("--points", type=int, default=101)
    sub.add_parser("audit", parents=[common], help="run the checks for a saved object")
    sub.add_parser("plot", parents=[common], help="render a saved object as SVG")
    return p


def _needs_input(cmd: str) -> bool:
    return cmd not in ("retract-nc", "singular-lift")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if _needs_input(args.command) and not args.input:
        print(f"plsmooth {args.command}: --in is required", file=sys.stderr)
        return 1
    try:
        out = COMMANDS[args.command](args)
    except (ValueError, KeyError, FileNotFoundError, TypeError) as exc:
        print(f"plsmooth {args.command}: {exc}", file=sys.stderr)
        return 1

    if args.command == "plot":
        if not args.out:
            print("plsmooth plot: --out is required", file=sys.stderr)
            return 1
        plotting.save_svg(out.figure, args.out)
        print(f"wrote {args.out}")
        return 0

    report_doc = {"kind": "reports", "command": args.command, "seed": args.seed,
                  "density": args.density, "reports": [r.to_dict() for r in out.reports]}
    if args.out:
        base = Path(args.out)
        if out.doc is not None:
            io.save(out.doc, base)
            io.save(report_doc, base.with_suffix(".report.json"))
        else:
            io.save(report_doc, base)
        if out.figure is not None and not args.no_plot:
            try:
                plotting.save_svg(out.figure, base.with_suffix(".svg"), args.command)
            except TypeError:
                pass
    else:
        doc = report_doc if out.doc is None else {"result": io.encode(out.doc)
                                                  if not isinstance(out.doc, dict) else out.doc,
                                                  "reports": report_doc["reports"]}
        print(io.dumps(doc))
    for r in out.reports:
        print(f"[{r.status}] {r.check} ({r.paper_tag})", file=sys.stderr)
    if out.summary:
        print(out.summary, file=sys.stderr)
    return verify.exit_code(out.reports)


if __name__ == "__main__":
    sys.exit(main())
