"""Map evaluators, PL and (weakly) simplicial maps, and simplicial approximation.

The approximation loop certifies the star condition by sampling: a pass means
no counterexample was found at the requested density.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .complex import Complex, NotInPolyhedron, Simplex, close_faces
from .geometry import TOL, simplex_distance, sample_simplex
from .profile import DEFAULT_PROFILE
from .subdivision import Subdivision, identity_subdivision, sd_iter


class IterationCapExceeded(RuntimeError):
    pass


class StageFailure(RuntimeError):
    def __init__(self, stage: int, cause: Exception):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class MapEvaluator:
    """A vectorised point oracle ``(N, p) -> (N, q)``.

    ``lipschitz`` is a known bound when available; ``derivative(x, v)``
    optionally returns directional derivatives.
    """

    func: Callable
    name: str = "map"
    lipschitz: float | None = None
    derivative: Callable | None = None

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(self.func(x), dtype=float)
        return y.reshape(len(x), -1)


class PLMap:
    """Affine on each simplex of ``source``; given by vertex image points."""

    def __init__(self, source: Complex, images):
        images = np.asarray(images, dtype=float)
        if images.ndim == 1:
            images = images[:, None]
        if len(images) != source.n_vertices:
            raise ValueError("one image per source vertex required")
        self.source = source
        self.images = images

    def __call__(self, x, tol: float = TOL) -> np.ndarray:
        loc = self.source.locate(x, tol)
        # vertices carrying only round-off weight may be unassigned (NaN image)
        imgs = self.images[np.maximum(loc.vertex_ids, 0)]
        w = np.where((loc.vertex_ids >= 0) & (loc.live | np.isfinite(imgs).all(axis=2)),
                     loc.weights, 0.0)
        w /= w.sum(axis=1, keepdims=True)
        imgs = np.where(w[..., None] > 0, imgs, 0.0)
        return np.einsum("nk,nkq->nq", w, imgs)

    def jacobian(self, s: Simplex) -> np.ndarray:
        fr = self.source.frame(tuple(s))
        return self.images[list(s)].T @ fr.weight_gradients()

    def lipschitz(self) -> float:
        """Largest operator norm of the affine pieces."""
        best = 0.0
        for s in self.source.maximal:
            if len(s) > 1:
                best = max(best, float(np.linalg.norm(self.jacobian(s), 2)))
        return best

    def evaluator(self, name: str = "pl") -> MapEvaluator:
        return MapEvaluator(self.__call__, name, lipschitz=self.lipschitz())


class SimplicialMap(PLMap):
    """Vertex map between complexes; ``-1`` marks vertices left unassigned."""

    def __init__(self, source: Complex, target: Complex, vertex_image):
        vi = np.asarray(vertex_image, dtype=int)
        self.vertex_image = vi
        self.target = target
        imgs = np.full((source.n_vertices, target.ambient_dim), np.nan)
        ok = vi >= 0
        imgs[ok] = target.vertices[vi[ok]]
        super().__init__(source, imgs)

    def image_simplex(self, s: Simplex) -> Simplex:
        return tuple(sorted({int(self.vertex_image[v]) for v in s}))

    def violations(self, simplices=None) -> list:
        """Source simplices whose image vertices do not span a target simplex."""
        bad = []
        for s in (self.source.simplices if simplices is None else simplices):
            img = self.image_simplex(s)
            if img[0] < 0 or img not in self.target.index:
                bad.append(s)
        return bad


@dataclass(eq=False)
class WeaklySimplicialMap(PLMap):
    """PL map whose simplex images are simplices of per-simplex subdivisions.

    ``image_ids`` index vertices of the finest target subdivision; since
    subdivision keeps vertex ids, they are valid at every coarser level that
    contains the vertex.
    """

    source: Complex
    target: Complex
    image_ids: np.ndarray
    level_of: dict
    target_levels: Callable  # level -> Subdivision of target
    images: np.ndarray = field(init=False)

    def __post_init__(self):
        finest = self.target_levels(max(self.level_of.values(), default=0)).child
        PLMap.__init__(self, self.source, finest.vertices[self.image_ids])

    def image_simplex(self, s: Simplex) -> Simplex:
        return tuple(sorted({int(self.image_ids[v]) for v in s}))

    def certificate(self, s: Simplex) -> Simplex:
        """A simplex of the target containing the image of ``s``."""
        s = tuple(s)
        sub = self.target_levels(self.level_of[s])
        return sub.carrier_of[self.image_simplex(s)]

    def incoherent(self) -> list:
        bad = []
        for s in self.source.simplices:
            child = self.target_levels(self.level_of[s]).child
            img = self.image_simplex(s)
            if img[-1] >= child.n_vertices or img not in child.index:
                bad.append(s)
        return bad

    def to_dict(self) -> dict:
        return {
            "vertex_image": {str(i): int(u) for i, u in enumerate(self.image_ids)},
            "levels": {",".join(map(str, s)): int(l) for s, l in self.level_of.items()},
        }


# -- nearest-point retraction ----------------------------------------------

def retract(L: Complex, z, previous=None, tie_tol: float = 1e-9, nudge: float = 1e-7):
    """Nearest-point projection onto ``|L|``.

    Near a tie between distinct feet the query is moved by ``nudge`` toward
    ``previous`` and projected again.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    feet, _, gap = L.nearest(z)
    if previous is not None:
        tie = gap < tie_tol
        if tie.any():
            prev = np.atleast_2d(previous)[tie]
            d = prev - z[tie]
            n = np.linalg.norm(d, axis=1, keepdims=True)
            step = np.where(n > 0, d / np.where(n > 0, n, 1.0), 0.0) * nudge
            feet[tie] = L.nearest(z[tie] + step)[0]
    return feet


# -- sampling ----------------------------------------------------------------

@dataclass
class SampleBlocks:
    """Per-simplex point samples with their barycentric weights."""

    simplices: list
    weights: list
    points: np.ndarray
    offsets: np.ndarray

    def block(self, i: int) -> slice:
        return slice(self.offsets[i], self.offsets[i + 1])


def sample_blocks(K: Complex, simplices, density: int, rng: np.random.Generator,
                  concentrate: float = 0.3) -> SampleBlocks:
    ws, pts = [], []
    for s in simplices:
        k = len(s)
        if k == 1:
            w = np.ones((1, 1))
        else:
            n_edge = int(round(concentrate * density))
            w = np.vstack([rng.dirichlet(np.ones(k), density - n_edge),
                           rng.dirichlet(np.full(k, 0.3), n_edge)])
        ws.append(w)
        pts.append(w @ K.coords(s))
    offsets = np.concatenate([[0], np.cumsum([len(w) for w in ws])])
    return SampleBlocks(list(simplices), ws, np.vstack(pts), offsets)


# -- star condition --------------------------------------------------------

@dataclass
class StarResult:
    status: str  # "pass" | "fail" | "inconclusive"
    assignment: dict
    margins: dict
    witness: tuple | None = None
    samples: SampleBlocks | None = None
    images: np.ndarray | None = None


def check_star_condition(F: MapEvaluator, K: Complex, L: Complex, density: int = 1000,
                         seed: int = 0, region=None, pinned: dict | None = None,
                         tol: float = TOL, min_total: int = 0) -> StarResult:
    """Choose, per vertex ``v``, a target vertex ``u`` with ``F(st v) ⊂ st u``.

    Open stars are tested through hat functions: ``u`` passes when its hat
    stays positive on every sampled image of the open star of ``v``.
    ``pinned`` vertices keep the given image and are not tested.
    """
    rng = np.random.default_rng(seed)
    simplices = list(K.simplices if region is None else
                     [s for s in K.simplices if s in region])
    n_open = sum(len(s) > 1 for s in simplices)
    if min_total and n_open:
        density = max(density, -(-min_total // n_open))
    blocks = sample_blocks(K, simplices, density, rng)
    images = F(blocks.points)
    loc = L.locate(images, tol)
    pinned = dict(pinned or {})

    rows_of: dict = {}
    vertex_row = {s[0]: blocks.offsets[i] for i, s in enumerate(simplices) if len(s) == 1}
    for i, s in enumerate(simplices):
        for j, v in enumerate(s):
            # drop samples whose own position is within tolerance of the star's edge
            b = blocks.block(i)
            keep = np.flatnonzero(blocks.weights[i][:, j] > 10 * tol)
            rows_of.setdefault(v, []).append(b.start + keep)

    assignment, margins = {}, {}
    status, witness = "pass", None
    for v, sl in sorted(rows_of.items()):
        if v in pinned:
            assignment[v] = pinned[v]
            continue
        rows = np.concatenate(sl)
        v_row = vertex_row[v]
        cands = loc.vertex_ids[v_row][loc.live[v_row]]
        best_u, best_m, best_bad = None, -1.0, None
        for u in cands:
            h = _hat_rows(loc, int(u), rows)
            m = float(h.min())
            if m > best_m:
                best_u, best_m = int(u), m
                best_bad = rows[h <= 0]
        margins[v] = best_m
        assignment[v] = best_u
        if best_m <= 0:
            touching = (loc.vertex_ids[best_bad] == best_u).any(axis=1).all()
            if status == "pass" or (status == "inconclusive" and not touching):
                status = "inconclusive" if touching else "fail"
                witness = (v, blocks.points[best_bad[0]])
    return StarResult(status, assignment, margins, witness, blocks, images)


def _hat_rows(loc, u: int, rows: np.ndarray) -> np.ndarray:
    vids = loc.vertex_ids[rows]
    return np.where(vids == u, loc.weights[rows], 0.0).sum(axis=1)


# -- relative simplicial approximation --------------------------------------

class _LevelCache:
    def __init__(self, L: Complex, base=None):
        self.L = L
        self.cache = {0: base or identity_subdivision(L)}

    def __call__(self, level: int) -> Subdivision:
        if level not in self.cache:
            prev = self(level - 1)
            step = sd_iter(prev.child, (), 1)
            composed = {c: prev.carrier_of[p] for c, p in step.carrier_of.items()}
            self.cache[level] = Subdivision(step.child, self.L, composed, level)
        return self.cache[level]


@dataclass
class ZeemanResult:
    kappa: int
    ell: int
    G: SimplicialMap
    source: Subdivision
    target: Subdivision
    sup_error: float
    n_samples: int
    pinned_exact: bool
    region: frozenset
    attempts: list


def zeeman_relative(F: MapEvaluator, K: Complex, H, L: Complex, epsilon: float,
                    density: int = 1000, seed: int = 0, cap: int = 8,
                    region_filter: Callable | None = None,
                    target_levels: Callable | None = None,
                    min_samples: int = 10_000) -> ZeemanResult:
    """Simplicial approximation from ``sd^k(K/H)`` to ``sd^l(L)`` fixing ``H``.

    ``region_filter(parent_simplex) -> bool`` restricts the construction to
    the child simplices whose parent carrier passes the filter.
    """
    H = K.subcomplex(H)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    levels = target_levels or _LevelCache(L)
    attempts = []
    h_verts = sorted({s[0] for s in H if len(s) == 1})
    kappa = 0
    # coarsest target first; for each target level raise kappa until the star
    # condition holds, since a finer target never needs a coarser source
    for ell in range(cap + 1):
        Ls = levels(ell)
        T = Ls.child
        while kappa <= cap:
            Ks = sd_iter(K, H, kappa)
            out = _attempt(F, Ks, T, H, h_verts, region_filter, density,
                           seed + kappa * 31 + ell, min_samples)
            out["rec"].update(kappa=kappa, ell=ell)
            attempts.append(out["rec"])
            if out["rec"]["star"] == "pass" and not out["rec"]["incoherent"]:
                break
            kappa += 1
        else:
            break
        if out["error"] < epsilon:
            return ZeemanResult(kappa, ell, out["G"], Ks, Ls, out["error"], out["n"],
                                out["exact"], out["region"], attempts)
    raise IterationCapExceeded(f"no (kappa, ell) <= {cap} met epsilon={epsilon}: {attempts[-3:]}")


def _attempt(F, Ks, T, H, h_verts, region_filter, density, seed, min_samples):
    region = frozenset(c for c, p in Ks.carrier_of.items()
                       if region_filter is None or region_filter(p))
    pinned, exact = {}, True
    if h_verts:
        fv = F(Ks.child.vertices[h_verts])
        for v, y in zip(h_verts, fv):
            u = T.vertex_at(y)
            if u is None:
                raise ValueError(f"F does not send H-vertex {v} to a target vertex")
            pinned[v] = u
            exact &= bool(np.array_equal(T.vertices[u], y))
    res = check_star_condition(F, Ks.child, T, density, seed, region, pinned,
                               min_total=min_samples)
    rec = {"star": res.status, "incoherent": 0}
    out = {"rec": rec, "error": np.inf, "region": region, "exact": exact}
    if res.status != "pass":
        return out
    vi = np.full(Ks.child.n_vertices, -1)
    for v, u in res.assignment.items():
        vi[v] = u
    G = SimplicialMap(Ks.child, T, vi)
    rec["incoherent"] = len(G.violations([s for s in region if s not in H]))
    if rec["incoherent"]:
        return out
    # sup error over the same samples, evaluated through their weights
    b = res.samples
    gx = np.vstack([w @ G.images[list(s)] for s, w in zip(b.simplices, b.weights)])
    out["error"] = rec["sup_error"] = float(np.linalg.norm(gx - res.images, axis=1).max())
    out.update(G=G, n=len(b.points))
    return out


# -- staged construction over a filtration -----------------------------------

@dataclass
class StagedResult:
    subdivision: Subdivision
    F_star: WeaklySimplicialMap
    stages: list  # per-stage dicts with kappa, ell, tolerance, errors
    evaluators: list  # F_0, F_1, ..., F_N


def _union_distance(K: Complex, A, B) -> float:
    best = np.inf
    for s in A:
        for t in B:
            if set(s) & set(t):
                return 0.0
            best = min(best, simplex_distance(K.coords(s), K.coords(t)))
    return best


def staged_weakly_simplicial(F: MapEvaluator, K: Complex, filtration: list, L: Complex,
                             epsilon, H=(), density: int = 1000, seed: int = 0,
                             cap: int = 8) -> StagedResult:
    """Weakly simplicial approximation built stage by stage along a filtration.

    ``filtration`` lists subcomplexes ``K_0 ⊂ ... ⊂ K_{N-1} = K``; ``epsilon``
    is a positive constant or a callable on points.  Stage ``m`` approximates
    on ``|K_{m+1}|`` relative to ``K_{m-1}`` and blends into the previous map
    with a cutoff equal to 1 on ``|K_m|``.
    """
    N = len(filtration)
    levels_K = [K.subcomplex(close_faces(f)) for f in filtration]
    if set(levels_K[-1]) != set(K.simplices):
        raise ValueError("the last filtration level must be K itself")
    Hc = K.subcomplex(H)
    for a, b in zip([Hc] + levels_K[:-1], levels_K):
        if not a <= b:
            raise ValueError("filtration must be increasing")
    eps_fn = epsilon if callable(epsilon) else (lambda x, e=float(epsilon): np.full(len(x), e))

    rng = np.random.default_rng(seed)
    dense = [sample_simplex(K.coords(s), 200, rng) for s in K.simplices]

    def level(n):  # P_n as a simplex set of K
        if n < 0:
            return Hc
        return levels_K[min(n, N - 1)]

    def eps_on(n):
        P = level(n)
        pts = np.vstack([d for s, d in zip(K.simplices, dense) if s in P])
        return float(np.min(eps_fn(pts)))

    Lcache = _LevelCache(L)
    cum_ell = 0
    cum_after = []
    cur = identity_subdivision(K, Hc)  # K^m with composed carriers into K
    evaluators = [F]
    stages = []
    all_pts = np.vstack(dense)

    for m in range(N):
        Fm = evaluators[-1]
        inner, outer = level(m), level(m + 1)
        eps_next = eps_on(m + 1)
        budget = eps_next / 6.0  # nearest-point projection is 2-Lipschitz at |L|
        H_m = frozenset(c for c, p in cur.carrier_of.items() if p in level(m - 1))
        try:
            z = zeeman_relative(
                Fm, cur.child, H_m, Lcache(cum_ell).child, budget, density=density,
                seed=seed + m, cap=cap, region_filter=lambda p, o=outer, c=cur: c.carrier_of[p] in o,
                target_levels=lambda l, c=cum_ell: Lcache(c + l))
        except (IterationCapExceeded, ValueError, NotInPolyhedron) as exc:
            raise StageFailure(m, exc) from exc
        composed = {c: cur.carrier_of[p] for c, p in z.source.carrier_of.items()}
        cur = Subdivision(z.source.child, K, composed, cur.levels + z.kappa, z.source.retained)
        cum_ell += z.ell
        cum_after.append(cum_ell)

        if m == N - 1:
            scale = None
        else:
            rest = [s for s in K.simplices if s not in outer]
            scale = _union_distance(K, list(inner), rest)
            if scale <= 0:
                raise StageFailure(m, ValueError("filtration levels are not nested in interiors"))
        Fn = _blend(Fm, z.G, K, inner, outer, scale, L)
        evaluators.append(Fn)
        step_err = float(np.linalg.norm(Fn(all_pts) - Fm(all_pts), axis=1).max())
        stages.append({"stage": m, "kappa": z.kappa, "ell": z.ell, "tolerance": budget,
                       "epsilon": eps_next, "zeeman_error": z.sup_error,
                       "step_error": step_err, "modulus": "exact-projection-bound"})
        images = z.G.vertex_image

    if (images < 0).any():
        raise RuntimeError("unassigned vertices after the final stage")
    level_of = {}
    for c, p in cur.carrier_of.items():
        if p in Hc:
            level_of[c] = 0
        else:
            m = next(i for i in range(N) if p in levels_K[i])
            level_of[c] = cum_after[m]
    Fstar = WeaklySimplicialMap(cur.child, L, images, level_of, Lcache)
    return StagedResult(cur, Fstar, stages, evaluators)


def _blend(Fm: MapEvaluator, G: SimplicialMap, K: Complex, inner, outer, scale, L: Complex):
    """``F_{m+1}``: G on the inner level, a retracted blend on the collar, F_m outside."""
    inner_s = list(inner)
    region_s = list(outer)

    def f(x):
        out = Fm(x)
        if scale is None:
            return G(x)
        d_out = K.distance(x, region_s)
        in_region = d_out <= TOL
        if not in_region.any():
            return out
        xr = x[in_region]
        phi = DEFAULT_PROFILE(K.distance(xr, inner_s) / scale)
        g = G(xr)
        prev = out[in_region]
        full = phi >= 1.0
        mixed = (phi > 0) & ~full
        res = prev.copy()
        res[full] = g[full]
        if mixed.any():
            z = phi[mixed, None] * g[mixed] + (1 - phi[mixed, None]) * prev[mixed]
            res[mixed] = retract(L, z, prev[mixed])
        out[in_region] = res
        return out

    return MapEvaluator(f, "staged")
