"""Partitions of unity on coverings, smoothing synthesis and the approximation pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .complex import Complex, Simplex
from .geometry import TOL, sample_simplex
from .maps import MapEvaluator, PLMap, WeaklySimplicialMap, staged_weakly_simplicial
from .profile import DEFAULT_PROFILE, BumpProfile, smoothstep, smoothstep_prime
from .shrink_widen import Covering, build_covering, core_threshold


class CoveringDefect(ValueError):
    def __init__(self, msg, points=None):
        super().__init__(msg)
        self.points = points


class Inconclusive(RuntimeError):
    pass


# -- partition of unity --------------------------------------------------------

@dataclass
class PartitionOfUnity:
    covering: Covering
    profile: BumpProfile = DEFAULT_PROFILE
    floor: float = 1e-14

    @property
    def keys(self) -> list:
        return list(self.covering.sets)

    def _bump(self, c, x, grad: bool):
        lam, d = c.coords(x)
        off = x - lam @ c.frame.verts
        t = d**2 / c.eta_prime**2
        radial = self.profile(t)
        g_rad = (self.profile.derivative(t) * 2 / c.eta_prime**2)[:, None] * off if grad else None
        if c.base_case:
            return radial, g_rad
        lo = core_threshold(c.epsilon, c.dim)
        hi = core_threshold(c.epsilon_inner, c.dim)
        u = (lam - lo) / (hi - lo)
        S = smoothstep(u)
        core = S.prod(axis=1)
        val = radial * core
        if not grad:
            return val, None
        dS = smoothstep_prime(u) / (hi - lo)  # (N, d+1)
        wg = c.frame.weight_gradients()  # (d+1, p)
        g_core = np.zeros_like(x)
        for i in range(c.dim + 1):
            others = np.prod(np.delete(S, i, axis=1), axis=1)
            g_core += (dS[:, i] * others)[:, None] * wg[i]
        return val, g_rad * core[:, None] + radial[:, None] * g_core

    def bumps(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        sets = list(self.covering)
        out = np.zeros((len(x), len(sets)))
        for rows, idx in self.covering.blocks(x):
            for j in idx:
                out[rows, j] = self._bump(sets[j], x[rows], False)[0]
        return out

    def weights(self, x) -> np.ndarray:
        b = self.bumps(x)
        tot = b.sum(axis=1)
        if (tot < self.floor).any():
            bad = np.atleast_2d(x)[tot < self.floor]
            raise CoveringDefect(f"partition sum underflows at {len(bad)} point(s)", bad)
        return b / tot[:, None]

    def weights_and_gradients(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        sets = list(self.covering)
        b = np.zeros((len(x), len(sets)))
        gb = np.zeros((len(x), len(sets), x.shape[1]))  # (N, S, p)
        for rows, idx in self.covering.blocks(x):
            for j in idx:
                v, g = self._bump(sets[j], x[rows], True)
                b[rows, j] = v
                gb[rows, j] = g
        tot = b.sum(axis=1)
        if (tot < self.floor).any():
            raise CoveringDefect("partition sum underflows", x[tot < self.floor])
        theta = b / tot[:, None]
        gsum = gb.sum(axis=1)
        gtheta = (gb - theta[..., None] * gsum[:, None, :]) / tot[:, None, None]
        return theta, gtheta


def partition_of_unity(C: Covering, profile: BumpProfile = DEFAULT_PROFILE) -> PartitionOfUnity:
    return PartitionOfUnity(C, profile)


# -- synthesis -----------------------------------------------------------------

def estimate_lipschitz(g: MapEvaluator, K: Complex, n_pairs: int = 100_000,
                       seed: int = 0, inflate: float = 2.0) -> float:
    """Largest observed ratio over random pairs inside common simplices, inflated."""
    rng = np.random.default_rng(seed)
    tops = [s for s in K.maximal if len(s) > 1]
    if not tops:
        return 0.0
    per = max(1, n_pairs // len(tops))
    best = 0.0
    for s in tops:
        a = sample_simplex(K.coords(s), per, rng)
        b = sample_simplex(K.coords(s), per, rng)
        dx = np.linalg.norm(a - b, axis=1)
        ok = dx > 1e-12
        r = np.linalg.norm(g(a[ok]) - g(b[ok]), axis=1) / dx[ok]
        best = max(best, float(r.max(initial=0.0)))
    return inflate * best


def _identity_pl(K: Complex) -> PLMap:
    return PLMap(K, K.vertices)


def _certificates_for(g, K: Complex, L: Complex) -> dict:
    if isinstance(g, WeaklySimplicialMap):
        return {t: g.certificate(t) for t in K.simplices}
    out = {}
    for t in K.simplices:
        if isinstance(g, PLMap):
            imgs = g.images[list(t)]
        else:
            imgs = g(K.coords(t))
        xi = L.carrier(imgs.mean(axis=0))
        lam = L.frame(xi).coords(imgs)
        if (lam < -TOL).any():
            raise ValueError(f"image of {t} is not inside a single target simplex")
        out[t] = xi
    return out


@dataclass
class SmoothMap:
    """``x -> sum_s theta_s(x) * g(r_s(x))`` with carrier certificates."""

    g: Callable
    covering: Covering
    pou: PartitionOfUnity
    target: Complex
    certificates: dict  # source simplex -> target simplex
    delta: Callable
    lipschitz: float
    lipschitz_estimated: bool = False
    post: Callable | None = None  # optional outer map (weak triangulation)
    meta: dict = field(default_factory=dict)

    @property
    def source(self) -> Complex:
        return self.covering.complex

    def _active(self, x, keep):
        """Rows, set indices and retracted points for every pair with ``keep[row, set]``."""
        sets = list(self.covering)
        R, J, P = [], [], []
        for rows, idx in self.covering.blocks(x):
            for j in idx:
                act = rows[keep[rows, j]]
                if act.size:
                    R.append(act)
                    J.append(np.full(act.size, j))
                    P.append(sets[j].retract(x[act]))
        if not R:
            e = np.zeros(0, int)
            return e, e, np.zeros((0, x.shape[1]))
        return np.concatenate(R), np.concatenate(J), np.vstack(P)

    def _g(self, pts) -> np.ndarray:
        if not len(pts):
            return np.zeros((0, self.target.ambient_dim))
        return np.atleast_2d(self.g(pts)).reshape(len(pts), -1)

    def inner(self, x) -> np.ndarray:
        """The synthesized map before any outer map is applied."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        theta = self.pou.weights(x)
        R, J, P = self._active(x, theta > 0)
        vals = self._g(P)
        out = np.zeros((len(x), vals.shape[1]))
        np.add.at(out, R, theta[R, J, None] * vals)
        return out

    def __call__(self, x) -> np.ndarray:
        y = self.inner(x)
        return y if self.post is None else self.post(y)

    def pieces(self, x):
        """Active weights and piece values, for independent re-verification."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        theta = self.pou.weights(x)
        vals = np.zeros((len(x), len(self.covering.sets), self.target.ambient_dim))
        R, J, P = self._active(x, theta > 0)
        vals[R, J] = self._g(P)
        return theta, vals

    def derivative(self, x, v, h: float = 1e-6) -> np.ndarray:
        """Directional derivative of the synthesized map (before ``post``)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        v = np.broadcast_to(np.asarray(v, dtype=float), x.shape)
        theta, gtheta = self.pou.weights_and_gradients(x)
        R, J, P = self._active(x, (theta > 0) | (np.abs(gtheta).sum(axis=2) > 0))
        gv = self._g(P)
        out = np.zeros((len(x), self.target.ambient_dim))
        np.add.at(out, R, (gtheta[R, J] * v[R]).sum(axis=1)[:, None] * gv)
        # the foot moves along the simplex of each set
        sets = list(self.covering)
        tv = np.zeros_like(P)
        for j in np.unique(J):
            c = sets[j]
            if not c.base_case:
                m = J == j
                tv[m] = v[R[m]] @ c.frame.proj.T
        if isinstance(self.g, PLMap):
            dg = np.zeros_like(gv)
            for j in np.unique(J):
                c = sets[j]
                if c.base_case:
                    continue
                m = J == j
                Jac = self.g.images[list(c.simplex)].T @ c.frame.weight_gradients()
                dg[m] = tv[m] @ Jac.T
        else:
            dg = (self._g(P + h * tv) - self._g(P - h * tv)) / (2 * h)
        np.add.at(out, R, theta[R, J, None] * dg)
        return out

    def in_W(self, t: Simplex, x) -> np.ndarray:
        """Points outside the closures of every ``U_s`` with ``s`` not a face of ``t``."""
        x = np.atleast_2d(x)
        ts = set(t)
        ok = np.ones(len(x), bool)
        sets = list(self.covering)
        for rows, idx in self.covering.blocks(x):
            for j in idx:
                c = sets[j]
                if not set(c.simplex) <= ts:
                    ok[rows] &= ~c.contains(x[rows], closed=True)
        return ok


def _delta_fn(delta) -> Callable:
    if callable(delta):
        return delta
    return lambda x, d=float(delta): np.full(len(np.atleast_2d(x)), d)


def synthesize(g, K: Complex, L: Complex, delta, covering: Covering | None = None,
               certificates: dict | None = None, density: int = 1000, seed: int = 0,
               lipschitz: float | None = None, profile: BumpProfile = DEFAULT_PROFILE,
               post: Callable | None = None) -> SmoothMap:
    """Smooth map within ``delta`` of ``g``, built on a shrink-widen covering of ``|K|``.

    ``g`` is a :class:`PLMap` on ``K`` (exact per-simplex Lipschitz bounds) or
    a :class:`MapEvaluator` (bound taken from ``g.lipschitz`` or estimated).
    """
    dfn = _delta_fn(delta)
    rng = np.random.default_rng(seed)
    estimated = False
    lip_of: dict = {}
    if isinstance(g, PLMap):
        for t in K.simplices:
            lip_of[t] = float(np.linalg.norm(g.jacobian(t), 2)) if len(t) > 1 else 0.0
    else:
        lip = g.lipschitz if lipschitz is None else lipschitz
        if lip is None:
            lip = estimate_lipschitz(g, K, seed=seed)
            estimated = True
        lip_of = {t: float(lip) for t in K.simplices}
    if lipschitz is not None:
        lip_of = {t: float(lipschitz) for t in K.simplices}
    diam = float(np.ptp(K.vertices, axis=0).max()) or 1.0

    samples = {t: np.vstack([K.coords(t), sample_simplex(K.coords(t), 50, rng)])
               for t in K.maximal}

    def eta(s):
        star = [t for t in K.maximal if set(s) <= set(t)]
        d = min(float(dfn(samples[t]).min()) for t in star)
        if d <= 0:
            raise ValueError("delta must be positive")
        lip = max(max(lip_of[u] for u in K.simplices if set(s) <= set(u)), 0.0)
        return d / lip if lip > 0 else diam

    if covering is None:
        covering = build_covering(K, eta, density=density, seed=seed)
    if certificates is None:
        certificates = _certificates_for(g, K, L)
    pou = partition_of_unity(covering, profile)
    gl = max(lip_of.values(), default=0.0)
    sm = SmoothMap(g, covering, pou, L, certificates, dfn, gl, estimated, post)
    if not callable(delta):
        sm.meta["delta"] = float(delta)
    return sm


def identity_smoother(K: Complex, epsilon: float, density: int = 1000, seed: int = 0) -> SmoothMap:
    """Smooth self-map of ``|K|`` within ``epsilon`` of the identity, keeping simplices."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    g = _identity_pl(K)
    sm = synthesize(g, K, K, epsilon, certificates={t: t for t in K.simplices},
                    density=density, seed=seed)
    sm.meta["epsilon"] = epsilon
    return sm


def smoother_sequence(K: Complex, n_max: int, density: int = 1000, seed: int = 0) -> list:
    """Identity smoothers at ``epsilon_n = 2**-n`` for ``n = 0..n_max``."""
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    return [identity_smoother(K, 2.0**-n, density, seed) for n in range(n_max + 1)]


# -- end-to-end pipeline -------------------------------------------------------

@dataclass
class PipelineBudget:
    epsilon: float
    mu: float
    delta: float
    margin_radius: float

    @property
    def budget(self) -> float:
        return min(self.mu / 4, self.delta / 2)


@dataclass
class PipelineResult:
    H: Callable
    smooth: SmoothMap
    staged: object
    budget: PipelineBudget


def approximate(f: MapEvaluator, K: Complex, L: Complex, epsilon: float,
                psi: PLMap | None = None, closure_gap: float = np.inf,
                density: int = 1000, seed: int = 0) -> PipelineResult:
    """Smooth approximation of ``f: |K| -> psi(|L|)`` within ``epsilon``.

    ``f`` must take values in ``|L|`` (``psi`` is the identity) or, with
    ``psi`` given, ``f = psi o f_L`` is approximated through ``f_L`` supplied
    as ``f``.  ``closure_gap`` is the distance from the relevant compact part
    of ``|L|`` to the frontier of ``|L|`` in its closure (``inf`` if closed).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    lip_psi = 1.0 if psi is None else psi.lipschitz()
    mu = min(1.0, closure_gap)
    delta = epsilon / lip_psi if lip_psi > 0 else np.inf
    b = PipelineBudget(epsilon, mu, delta, mu / 2)
    staged = staged_weakly_simplicial(f, K, [K.simplices], L, b.budget,
                                      density=density, seed=seed)
    Fstar = staged.F_star
    sm = synthesize(Fstar, Fstar.source, L, b.budget, density=density, seed=seed,
                    post=None if psi is None else psi)
    sm.meta.update(budget=b.budget, epsilon=epsilon)
    return PipelineResult(sm, sm, staged, b)
