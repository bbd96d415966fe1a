"""Sampling-based verification: sup distances, derivative probes and audits.

A "pass" means no counterexample was found at the declared density; it is a
numerical certificate, not a proof.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .complex import Complex
from .geometry import TOL, AffineFrame, sample_simplex
from .maps import WeaklySimplicialMap
from .probes import ProbeTable, StepUnderflow, c1_probe  # noqa: F401
from .shrink_widen import Covering, _residual_samples, core_threshold
from .smoothing import SmoothMap
from .subdivision import Subdivision, sd

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass
class Report:
    check: str
    status: str
    metrics: dict = field(default_factory=dict)
    paper_tag: str = ""

    def to_dict(self) -> dict:
        return {"check": self.check, "status": self.status, "metrics": self.metrics,
                "paper_tag": self.paper_tag}

    @property
    def ok(self) -> bool:
        return self.status == PASS


def exit_code(reports) -> int:
    st = {r.status for r in reports}
    if FAIL in st:
        return 1
    if INCONCLUSIVE in st:
        return 2
    return 0


def _status(ok: bool, borderline: bool = False) -> str:
    if ok:
        return PASS
    return INCONCLUSIVE if borderline else FAIL


@dataclass
class SampleSet:
    seed: int
    density: int
    points: np.ndarray
    carriers: np.ndarray  # simplex ids in the sampled complex


def sample_set(K: Complex, density: int = 1000, seed: int = 0, total: int | None = None,
               concentrate: float = 0.2) -> SampleSet:
    """Random points of ``|K|``: ``density`` per maximal simplex plus all vertices.

    With ``total`` the per-simplex density is raised so that at least that many
    points are drawn.
    """
    rng = np.random.default_rng(seed)
    tops = [s for s in K.maximal if len(s) > 1]
    per = density
    if total and tops:
        per = max(per, -(-total // len(tops)))
    pts = [K.vertices] + [sample_simplex(K.coords(s), per, rng, concentrate) for s in tops]
    pts = np.vstack(pts)
    return SampleSet(seed, per, pts, K.locate(pts).carrier_ids)


def sup_distance(A, B, S) -> tuple:
    """``max ||A(x) - B(x)||`` over the sample and the maximising point."""
    x = S.points if isinstance(S, SampleSet) else np.atleast_2d(S)
    d = np.linalg.norm(np.atleast_2d(A(x)) - np.atleast_2d(B(x)), axis=1)
    i = int(np.argmax(d))
    return float(d[i]), x[i]


def interface_crossings(K: Complex, n_per: int = 100, seed: int = 0, inset: float = 1e-3):
    """Points on interior codimension-1 faces with transverse directions.

    Points keep barycentric weight ``>= inset`` in their face so that probe
    steps stay inside the two adjacent simplices.
    """
    rng = np.random.default_rng(seed)
    d = K.dim
    pts, dirs = [], []
    for f in K.of_dim(d - 1):
        cof = [t for t in K.maximal if len(t) == d + 1 and set(f) < set(t)]
        if len(cof) != 2:
            continue
        c = K.coords(f)
        if len(f) > 1:
            w = rng.dirichlet(np.ones(len(f)), n_per)
            w = inset + (1 - len(f) * inset) * w
            p = w @ c
        else:
            p = c
        opp = K.vertices[[v for v in cof[0] if v not in f][0]]
        fr = AffineFrame(c)
        nrm = (opp - fr.foot(opp[None])[0])
        nrm /= np.linalg.norm(nrm)
        pts.append(p)
        dirs.append(np.repeat(nrm[None], len(p), axis=0))
    if not pts:
        return np.zeros((0, K.ambient_dim)), np.zeros((0, K.ambient_dim))
    return np.vstack(pts), np.vstack(dirs)


def transition_crossings(C: Covering, n_chords: int = 40, seed: int = 0, inset: float = 1e-4,
                         steps: int = 400):
    """Points where covering sets begin or end along chords of top simplices.

    These are where partition weights switch on or off.  Points keep
    barycentric weight ``> inset`` in their top simplex so probes stay inside.
    """
    K = C.complex
    rng = np.random.default_rng(seed)
    u = np.linspace(0, 1, steps)[:, None]
    lines, dirs, owner = [], [], []
    for t in K.maximal:
        if len(t) < 2:
            continue
        V = K.coords(t)
        for k in range(n_chords if len(t) > 2 else 1):  # vertex to a point of the opposite face
            i = k % len(t)
            w = rng.dirichlet(np.ones(len(t) - 1))
            a, b = V[i], w @ np.delete(V, i, axis=0)
            if np.linalg.norm(b - a) < 1e-6:
                continue
            lines.append(a + u * (b - a))
            dirs.append((b - a) / np.linalg.norm(b - a))
            owner.append(t)
    if not lines:
        return np.zeros((0, K.ambient_dim)), np.zeros((0, K.ambient_dim))
    X = np.vstack(lines)
    M = C.members(X).reshape(len(lines), steps, -1)
    li, si, j = np.nonzero(M[:, 1:] != M[:, :-1])
    inside = M[li, si, j]
    lo = np.where(inside[:, None], X[li * steps + si], X[li * steps + si + 1])
    hi = np.where(inside[:, None], X[li * steps + si + 1], X[li * steps + si])
    sets = list(C)
    for jj in np.unique(j):
        m = j == jj
        a, b = lo[m], hi[m]
        for _ in range(60):
            mid = (a + b) / 2
            ok = sets[jj].contains(mid)
            a = np.where(ok[:, None], mid, a)
            b = np.where(ok[:, None], b, mid)
        lo[m], hi[m] = a, b
    pts = (lo + hi) / 2
    keep = np.array([K.frame(owner[i]).coords(p[None]).min() > inset for i, p in zip(li, pts)],
                    bool)
    D = np.array(dirs)[li]
    return pts[keep].reshape(-1, K.ambient_dim), D[keep].reshape(-1, K.ambient_dim)


def c1_report(A, points, directions, threshold: float = 1e-2, h: float = 1e-5,
              check: str = "c1-probe", tag: str = "derivative-continuity") -> Report:
    if not len(points):
        return Report(check, INCONCLUSIVE, {"n_probes": 0}, tag)
    tab = c1_probe(A, points, directions, h)
    mm = tab.mismatch
    i = int(np.argmax(mm))
    return Report(check, _status(bool(mm.max() < threshold)),
                  {"n_probes": int(len(mm)), "max_mismatch": float(mm[i]),
                   "worst_point": tab.points[i].tolist(), "threshold": threshold}, tag)


# -- audits ------------------------------------------------------------------------

def audit_subdivision(sub: Subdivision, density: int = 100, seed: int = 0,
                      tolerance: float = TOL) -> list:
    rng = np.random.default_rng(seed)
    C, P = sub.child, sub.parent
    worst = np.inf
    for c, p in sub.carrier_of.items():
        pts = np.vstack([C.coords(c), sample_simplex(C.coords(c), density, rng)]) \
            if len(c) > 1 else C.coords(c)
        fr = P.frame(p)
        lam = fr.coords(pts)
        res = np.linalg.norm(pts - lam @ fr.verts, axis=1).max()
        worst = min(worst, float(lam.min()) - (np.inf if res > TOL else 0.0))
    reports = [Report("carrier-containment", _status(worst >= -tolerance),
                      {"min_weight": worst}, "subdivision-carrier")]
    d = P.dim
    if all(len(s) == d + 1 for s in P.maximal):
        vp, vc = P.volume(d), C.volume(d)
        rel = abs(vc - vp) / vp if vp else abs(vc)
        reports.append(Report("volume-conservation", _status(rel <= 1e-9),
                              {"parent": vp, "child": vc, "relative": rel}, "subdivision-volume"))
    missing = [list(s) for s in sub.retained if s not in C.index]
    reports.append(Report("retained-subcomplex", _status(not missing),
                          {"missing": missing[:10], "n_retained": len(sub.retained)},
                          "subdivision-retains-H"))
    S = sample_set(P, density, seed)
    inside = C.contains(S.points)
    S2 = sample_set(C, max(1, density // 4), seed + 1)
    back = P.contains(S2.points)
    reports.append(Report("same-polyhedron", _status(bool(inside.all() and back.all())),
                          {"parent_samples_outside": int((~inside).sum()),
                           "child_samples_outside": int((~back).sum())}, "subdivision-polyhedron"))
    return reports


def audit_covering(C: Covering, density: int = 1000, seed: int = 0) -> list:
    K = C.complex
    S = sample_set(K, density, seed, concentrate=0.5)
    x = S.points
    mem = C.members(x)
    uncovered = int((~mem.any(axis=1)).sum())
    reports = [Report("coverage", _status(uncovered == 0),
                      {"samples": len(x), "uncovered": uncovered}, "covering-coverage")]

    # closures stay away from the simplices the open simplex misses
    min_margin, worst_pair = np.inf, None
    lo = np.array([K.coords(t).min(axis=0) for t in K.simplices])
    hi = np.array([K.coords(t).max(axis=0) for t in K.simplices])
    for s, c in C.sets.items():
        cl = x[c.contains(x, closed=True)]
        if not len(cl):
            continue
        # box distance bounds the true distance from below
        box = np.linalg.norm(np.maximum(0.0, np.maximum(lo - cl.max(axis=0), cl.min(axis=0) - hi)),
                             axis=1)
        for i in np.argsort(box, kind="stable"):
            if box[i] >= min_margin:
                break
            t = K.simplices[i]
            if set(s) <= set(t):
                continue
            m = float(K.distance(cl, [t]).min())
            if m < min_margin:
                min_margin, worst_pair = m, (list(s), list(t))
    reports.append(Report("disjointness", _status(min_margin > 0),
                          {"min_margin": min_margin, "pair": worst_pair}, "covering-disjointness"))

    worst_ratio, worst = 0.0, None
    for j, (s, c) in enumerate(C.sets.items()):
        u = x[mem[:, j]]
        if not len(u):
            continue
        disp = float(np.linalg.norm(u - c.retract(u), axis=1).max())
        if disp / c.eta > worst_ratio:
            worst_ratio, worst = disp / c.eta, {"simplex": list(s), "displacement": disp,
                                                "eta": c.eta}
    reports.append(Report("displacement", _status(worst_ratio < 1.0),
                          {"max_ratio": worst_ratio, "worst": worst}, "covering-displacement"))

    # retraction fixes points of the shrunk core
    rng = np.random.default_rng(seed)
    idem = 0.0
    for s, c in C.sets.items():
        if c.base_case:
            continue
        core = sample_simplex(c.verts, 50, rng)
        core = core[c.contains(core)]
        if len(core):
            idem = max(idem, float(np.abs(c.retract(core) - core).max()))
    reports.append(Report("retraction-idempotent", _status(idem <= 1e-12),
                          {"max_error": idem}, "covering-retraction"))

    # sets that meet U_u come from simplices incident to a simplex containing u
    bad = []
    keys = list(C.sets)
    m = mem.astype(np.int32)
    overlap = m.T @ m
    for a, b in zip(*np.nonzero(overlap)):
        if a != b:
            u, s = set(keys[a]), set(keys[b])
            if not any(s & set(t) for t in K.star(keys[a])):
                bad.append((list(keys[a]), list(keys[b])))
    reports.append(Report("local-finiteness", _status(not bad),
                          {"violations": bad[:10], "n_sets": len(keys)}, "covering-local-finiteness"))

    # residual of each simplex lies in the shrunk core with margin
    worst_res = np.inf
    for s, c in C.sets.items():
        if c.base_case:
            continue
        pts = _residual_samples(K, s, density, rng)
        covered = np.zeros(len(pts), bool)
        for f, cf in C.sets.items():
            if set(f) < set(s):
                covered |= cf.inner(pts)
        lam = c.frame.coords(pts[~covered])
        if len(lam):
            m = float(lam.min(axis=1).min()) - core_threshold(c.epsilon_inner, c.dim)
            worst_res = min(worst_res, m)
    reports.append(Report("residual-certificate", _status(worst_res >= 1e-9),
                          {"min_margin": worst_res}, "covering-residual"))
    return reports


def carrier_margins(sm: SmoothMap, density: int = 200, seed: int = 0) -> dict:
    """Per source simplex: smallest barycentric weight of ``h(x)`` in its certificate
    over samples of ``W_t``, and the same for an independent recombination."""
    K = sm.source
    rng = np.random.default_rng(seed)
    groups, chunks = [], []
    for t, xi in sm.certificates.items():
        star = [u for u in K.maximal if set(t) <= set(u)]
        pts = np.vstack([sample_simplex(K.coords(u), density, rng, 0.5) for u in star]
                        + [K.coords(t)])
        pts = pts[sm.in_W(t, pts)]
        if len(pts):
            groups.append((tuple(t), tuple(xi), len(pts)))
            chunks.append(pts)
    if not chunks:
        return {}
    X = np.vstack(chunks)
    Y = sm.inner(X)
    theta, vals = sm.pieces(X)
    rebuilt = np.einsum("ns,nsq->nq", theta, vals)
    out = {}
    start = 0
    for t, xi, n in groups:
        rows = slice(start, start + n)
        start += n
        y = Y[rows]
        fr = sm.target.frame(xi)
        lam = fr.coords(y)
        res = np.linalg.norm(y - lam @ fr.verts, axis=1).max()
        th = theta[rows]
        act = th > 0
        pv = vals[rows][act]
        out[t] = {
            "min_weight": float(lam.min()) if res <= 1e-9 else -np.inf,
            "piece_min_weight": float(fr.coords(pv).min()) if len(pv) else np.inf,
            "theta_sum_error": float(np.abs(th.sum(axis=1) - 1).max()),
            "rebuild_error": float(np.abs(rebuilt[rows] - y).max()),
            "n": int(n),
        }
    return out


def audit_smooth(sm: SmoothMap, reference=None, density: int = 1000, seed: int = 0,
                 total: int = 10_000, tolerance: float = TOL) -> list:
    """Partition, carrier and error checks for a synthesized map.

    ``reference`` is the map being approximated (defaults to the input piece map).
    """
    K = sm.source
    S = sample_set(K, density, seed, total=total)
    x = S.points
    theta = sm.pou.weights(x)
    mem = sm.covering.members(x)
    sum_err = float(np.abs(theta.sum(axis=1) - 1).max())
    reports = [Report("partition-sum", _status(sum_err <= 1e-10 and (theta >= 0).all()),
                      {"max_error": sum_err, "min_weight": float(theta.min())}, "partition-of-unity"),
               Report("partition-support", _status(bool((theta[~mem] == 0).all())),
                      {"outside_nonzero": int((theta[~mem] != 0).sum())}, "partition-support")]
    cm = carrier_margins(sm, max(50, density // 5), seed)
    mins = min((v["min_weight"] for v in cm.values()), default=np.inf)
    pmins = min((v["piece_min_weight"] for v in cm.values()), default=np.inf)
    rebuild = max((v["rebuild_error"] for v in cm.values()), default=0.0)
    reports.append(Report("carrier", _status(mins >= -tolerance and pmins >= -tolerance and rebuild <= 1e-12),
                          {"min_weight": mins, "piece_min_weight": pmins,
                           "rebuild_error": rebuild}, "smoothing-carrier"))
    ref = reference if reference is not None else sm.g
    y = sm.inner(x)
    err = np.linalg.norm(y - ref(x), axis=1)
    bound = sm.delta(x)
    worst = float((err / bound).max())
    reports.append(Report("error-bound", _status(worst < 1.0, abs(worst - 1.0) <= 1e-9),
                          {"max_error": float(err.max()), "max_ratio": worst,
                           "lipschitz": sm.lipschitz, "lipschitz_estimated": sm.lipschitz_estimated},
                          "smoothing-error"))
    return reports


def audit_weakly_simplicial(F: WeaklySimplicialMap, density: int = 200, seed: int = 0,
                            tolerance: float = TOL) -> list:
    bad = F.incoherent()
    reports = [Report("coherence", _status(not bad),
                      {"incoherent": [list(s) for s in bad[:10]], "n": len(F.source)},
                      "weakly-simplicial-coherence")]
    rng = np.random.default_rng(seed)
    worst = np.inf
    for s in F.source.maximal:
        if s in bad:  # no certificate exists
            worst = -np.inf
            continue
        pts = sample_simplex(F.source.coords(s), density, rng)
        y = F(pts)
        fr = F.target.frame(F.certificate(s))
        worst = min(worst, float(fr.coords(y).min()))
    reports.append(Report("certificate", _status(worst >= -tolerance),
                          {"min_weight": worst}, "weakly-simplicial-certificate"))
    return reports


def smooth_probe_sites(sm: SmoothMap, n_per: int = 20, seed: int = 0):
    """Interior faces of the source and of its barycentric subdivision, plus
    covering transitions."""
    K = sm.source
    parts = [interface_crossings(K, n_per, seed),
             interface_crossings(sd(K).child, n_per, seed + 1),
             transition_crossings(sm.covering, n_per, seed + 2)]
    return np.vstack([p for p, _ in parts]), np.vstack([d for _, d in parts])


def audit_pipeline(result, f, epsilon: float, samples: int = 10_000, seed: int = 0,
                   tolerance: float = TOL, probe_points=None, probe_dirs=None) -> list:
    """End-to-end checks: error against ``f``, image in the target, smoothness."""
    sm = result.smooth
    K = sm.source
    S = sample_set(K, 100, seed, total=samples)
    err, arg = sup_distance(sm, f, S)
    reports = [Report("approximation-error", _status(err < epsilon, abs(err - epsilon) <= 1e-12),
                      {"sup_error": err, "argmax": arg.tolist(), "epsilon": epsilon,
                       "n_samples": int(len(S.points))}, "pipeline-error")]
    cm = carrier_margins(sm, 200, seed)
    m = min((v["min_weight"] for v in cm.values()), default=np.inf)
    reports.append(Report("image-in-target", _status(m >= -tolerance),
                          {"min_weight": m}, "pipeline-carrier"))
    if probe_points is None:
        probe_points, probe_dirs = smooth_probe_sites(sm, seed=seed)
    reports.append(c1_report(sm, probe_points, probe_dirs))
    return reports


def audit(obj, density: int = 1000, seed: int = 0, tolerance: float = TOL, **kw) -> list:
    """Reports for a subdivision, covering, smooth map or weakly simplicial map."""
    if isinstance(obj, Subdivision):
        return audit_subdivision(obj, min(density, 200), seed, tolerance)
    if isinstance(obj, Covering):
        return audit_covering(obj, density, seed)
    if isinstance(obj, SmoothMap):
        return audit_smooth(obj, density=density, seed=seed, tolerance=tolerance, **kw)
    if isinstance(obj, WeaklySimplicialMap):
        return audit_weakly_simplicial(obj, min(density, 200), seed, tolerance)
    raise TypeError(f"no audit for {type(obj).__name__}")
