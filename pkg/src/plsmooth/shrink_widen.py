"""Shrunk open simplices, tubular widenings and the covering built from them.

Every open simplex ``s`` of a complex gets a set ``U_s``: points of ``|K|``
whose orthogonal foot on the affine hull of ``s`` lies in a shrunk copy of
``s`` and whose distance to that foot is below a radius ``eta'``.  A smaller
"inner" set, where the smooth weights of :mod:`plsmooth.smoothing` are
identically 1, is also recorded so that the inner sets alone already cover.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .complex import Complex, Simplex
from .geometry import AffineFrame, lattice_weights, sample_simplex, simplex_distance


class OutsideTube(ValueError):
    pass


class DegenerateComplex(ValueError):
    pass


class ContainmentError(ValueError):
    pass


@dataclass(frozen=True)
class Shrinking:
    simplex: Simplex
    epsilon: float
    center: np.ndarray
    vertices: np.ndarray


def shrink(verts, epsilon: float, simplex: Simplex = ()) -> Shrinking:
    """Image of a simplex under the homothety at its barycenter, ratio ``1 - epsilon``."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    verts = np.asarray(verts, dtype=float)
    c = verts.mean(axis=0)
    return Shrinking(tuple(simplex), float(epsilon), c, c + (1 - epsilon) * (verts - c))


def core_threshold(epsilon: float, dim: int) -> float:
    """Barycentric lower bound describing the shrunk simplex."""
    return epsilon / (dim + 1)


def tubular_project(verts, x, tol: float = 1e-9):
    """Foot on the affine hull and distance, for a point whose foot is in the open simplex."""
    fr = AffineFrame(np.asarray(verts, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    lam = fr.coords(x)
    if fr.dim > 0 and (lam <= tol).any():
        raise OutsideTube("foot is outside the open simplex")
    foot = lam @ fr.verts
    return foot[0], float(np.linalg.norm(x[0] - foot[0]))


@dataclass(frozen=True)
class Widening:
    """``{x : foot(x) in shrunk core, dist(x, foot) < eta}``."""

    simplex: Simplex
    verts: np.ndarray
    epsilon: float
    eta: float

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")

    @property
    def frame(self) -> AffineFrame:
        return AffineFrame(self.verts)

    def contains(self, x, closed: bool = False) -> np.ndarray:
        fr = self.frame
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lam = fr.coords(x)
        d = np.linalg.norm(x - lam @ fr.verts, axis=1)
        lo = core_threshold(self.epsilon, fr.dim) if fr.dim > 0 else -np.inf
        if closed:
            return (lam >= lo).all(axis=1) & (d <= self.eta)
        return (lam > lo).all(axis=1) & (d < self.eta)


def membership_widened(w: Widening, x) -> bool:
    return bool(w.contains(x)[0])


# -- covering ----------------------------------------------------------------

@dataclass
class CoverSet:
    simplex: Simplex
    verts: np.ndarray
    epsilon: float  # core of U
    epsilon_inner: float  # core of the plateau set
    eta_prime: float
    eta: float
    base_case: bool
    frame: AffineFrame = field(repr=False, default=None)

    def __post_init__(self):
        if self.frame is None:
            self.frame = AffineFrame(self.verts)

    @property
    def dim(self) -> int:
        return len(self.simplex) - 1

    def coords(self, x):
        """Barycentric weights of the foot and distance to it."""
        lam = self.frame.coords(x)
        d = np.linalg.norm(x - lam @ self.frame.verts, axis=1)
        return lam, d

    def contains(self, x, closed: bool = False) -> np.ndarray:
        lam, d = self.coords(np.atleast_2d(x))
        if self.base_case:
            return d <= self.eta_prime if closed else d < self.eta_prime
        lo = core_threshold(self.epsilon, self.dim)
        if closed:
            return (lam >= lo).all(axis=1) & (d <= self.eta_prime)
        return (lam > lo).all(axis=1) & (d < self.eta_prime)

    def inner(self, x, strict: bool = True) -> np.ndarray:
        lam, d = self.coords(np.atleast_2d(x))
        r = self.eta_prime / 2
        if self.base_case:
            return d < r if strict else d <= r
        lo = core_threshold(self.epsilon_inner, self.dim)
        if strict:
            return (lam > lo).all(axis=1) & (d < r)
        return (lam >= lo).all(axis=1) & (d <= r)

    def retract(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.base_case:
            return np.repeat(self.verts[:1], len(x), axis=0)
        return self.frame.foot(x)

    def record(self) -> dict:
        return {"simplex": list(self.simplex), "epsilon": self.epsilon,
                "epsilon_inner": self.epsilon_inner, "eta_prime": self.eta_prime,
                "eta": self.eta, "base_case": self.base_case}


@dataclass
class Covering:
    complex: Complex
    sets: dict  # simplex -> CoverSet, ordered by dimension

    def __getitem__(self, s) -> CoverSet:
        return self.sets[tuple(s)]

    def __iter__(self):
        return iter(self.sets.values())

    def members(self, x) -> np.ndarray:
        """Boolean matrix ``(N, n_sets)`` of membership in each ``U``."""
        x = np.atleast_2d(x)
        out = np.zeros((len(x), len(self.sets)), bool)
        sets = list(self)
        for rows, idx in self.blocks(x):
            for j in idx:
                out[rows, j] = sets[j].contains(x[rows])
        return out

    def _reach(self):
        key = tuple(map(id, self.sets.values()))
        cached = self.__dict__.get("_reach_cache")
        if cached is None or cached[0] != key:
            lo = np.array([c.verts.min(axis=0) - c.eta_prime for c in self])
            hi = np.array([c.verts.max(axis=0) + c.eta_prime for c in self])
            cached = (key, lo, hi)
            self.__dict__["_reach_cache"] = cached
        return cached[1], cached[2]

    def blocks(self, x, min_sets: int = 16) -> list:
        """Rows of ``x`` grouped into spatial cells, each with its :meth:`active` sets."""
        x = np.atleast_2d(x)
        if len(self.sets) <= min_sets or len(x) < 64:
            return [(np.arange(len(x)), self.active(x))]
        lo, hi = self._reach()
        cell = max(float(np.median((hi - lo).max(axis=1))), 1e-12)
        keys = np.floor((x - x.min(axis=0)) / cell).astype(np.int64)
        _, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.ravel()
        order = np.argsort(inv, kind="stable")
        cuts = np.flatnonzero(np.diff(inv[order])) + 1
        return [(rows, self.active(x[rows])) for rows in np.split(order, cuts)]

    def active(self, x) -> np.ndarray:
        """Indices of sets whose bounding box meets the bounding box of ``x``.

        Each ``U`` lies within ``eta_prime`` of its simplex, so the other sets
        cannot contain any of the points.
        """
        x = np.atleast_2d(x)
        if not len(x):
            return np.zeros(0, int)
        lo, hi = self._reach()
        hit = (lo <= x.max(axis=0)).all(axis=1) & (hi >= x.min(axis=0)).all(axis=1)
        return np.flatnonzero(hit)

    def to_dict(self) -> dict:
        return {"complex": self.complex.to_dict(), "sets": [c.record() for c in self]}

    @classmethod
    def from_dict(cls, data: dict) -> "Covering":
        K = Complex.from_dict(data["complex"], validate=False)
        sets = {}
        for r in data["sets"]:
            s = tuple(r["simplex"])
            sets[s] = CoverSet(s, K.coords(s), r["epsilon"], r["epsilon_inner"],
                               r["eta_prime"], r["eta"], r["base_case"])
        return cls(K, sets)

    def with_eta_scaled(self, factor: float) -> "Covering":
        """Copy whose declared ``eta`` is scaled while the sets stay put (fault injection)."""
        sets = {s: CoverSet(c.simplex, c.verts, c.epsilon, c.epsilon_inner, c.eta_prime,
                            c.eta * factor, c.base_case) for s, c in self.sets.items()}
        return Covering(self.complex, sets)


def _eta_fn(eta) -> Callable:
    if callable(eta):
        return eta
    if isinstance(eta, dict):
        return lambda s: eta[tuple(s)]
    return lambda s, e=float(eta): e


def _residual_samples(K: Complex, s: Simplex, density: int, rng) -> np.ndarray:
    d = len(s) - 1
    res = max(2, int(round(density ** (1 / max(d, 1)))) * 2)
    pts = [lattice_weights(d, res) @ K.coords(s),
           sample_simplex(K.coords(s), density, rng, concentrate=0.5)]
    return np.vstack(pts)


def _residual_floor(lam: np.ndarray, verts: np.ndarray, faces: list, grid: int = 48,
                    halvings: int = 40) -> float:
    """Smallest barycentric weight of the residual, refined along rays.

    Each uncovered sample spans a ray from the barycenter to the boundary;
    the last uncovered point on the ray is located by a grid scan and then
    bisection, so the estimate does not depend on the sample spacing.
    """
    k = lam.shape[1]
    c = 1.0 / k
    floor = float(lam.min())
    lam = lam[lam.min(axis=1) < c - 1e-9]  # the barycenter spans no ray
    if not len(lam):
        return floor
    lo = lam.min(axis=1)
    t_exit = c / (c - lo)  # ray parameter where the weight reaches 0

    def uncovered(t):  # t: (n, m)
        w = c + t[..., None] * (lam[:, None, :] - c)
        x = w.reshape(-1, k) @ verts
        hit = np.zeros(len(x), bool)
        for f in faces:
            hit |= f.inner(x)
        return ~hit.reshape(t.shape)

    ts = 1.0 + (t_exit - 1.0)[:, None] * np.linspace(0.0, 1.0, grid + 1)[None, :-1]
    free = uncovered(ts)
    last = np.where(free, np.arange(grid)[None, :], -1).max(axis=1)
    a = ts[np.arange(len(ts)), np.maximum(last, 0)]
    b = np.where(last + 1 < grid, ts[np.arange(len(ts)), np.minimum(last + 1, grid - 1)], t_exit)
    for _ in range(halvings):
        m = 0.5 * (a + b)
        f = uncovered(m[:, None])[:, 0]
        a = np.where(f, m, a)
        b = np.where(f, b, m)
    return min(floor, float((c + b * (lo - c)).min()))


def _boxes(K: Complex):
    lo = np.array([K.coords(t).min(axis=0) for t in K.simplices])
    hi = np.array([K.coords(t).max(axis=0) for t in K.simplices])
    return lo, hi


def _gap(K: Complex, boxes, s: Simplex, pts: np.ndarray, enough: float) -> float:
    """Distance from the hull of ``pts`` to simplices not having ``s`` as a face.

    Box distances bound the exact ones from below, so candidates are scanned
    nearest box first and the scan stops once no box can beat the current
    best, or once every remaining box is farther than ``enough``.
    """
    lo, hi = boxes
    box = np.linalg.norm(np.maximum(0.0, np.maximum(lo - pts.max(axis=0), pts.min(axis=0) - hi)),
                         axis=1)
    ss = set(s)
    best = np.inf
    for i in np.argsort(box, kind="stable"):
        if box[i] >= min(best, enough):
            break
        t = K.simplices[i]
        if ss <= set(t):
            continue
        best = min(best, simplex_distance(pts, K.coords(t)))
    return best


def build_covering(K: Complex, eta, density: int = 1000, seed: int = 0,
                   chart=None, safety: float = 0.9) -> Covering:
    """Covering of ``|K|`` by widened shrunk open simplices, by induction on dimension.

    ``eta`` is a positive constant, a dict keyed by simplex, or a callable.
    """
    if chart is not None:
        raise NotImplementedError("only the identity chart is supported")
    eta = _eta_fn(eta)
    rng = np.random.default_rng(seed)
    boxes = _boxes(K)
    sets: dict = {}
    for s in K.simplices:  # ordered by dimension
        e = float(eta(s))
        if e <= 0:
            raise ValueError(f"eta must be positive on {s}")
        verts = K.coords(s)
        if len(s) == 1:
            gap = _gap(K, boxes, s, verts, 2 * safety * e)
            if gap < 1e-12:
                raise DegenerateComplex(f"vertex {s} touches a non-incident simplex")
            ep = min(safety * e, gap / 2) if np.isfinite(gap) else safety * e
            sets[s] = CoverSet(s, verts, 0.0, 0.0, ep, e, True)
            continue
        d = len(s) - 1
        pts = _residual_samples(K, s, density, rng)
        covered = np.zeros(len(pts), bool)
        for f in sets:
            if set(f) < set(s):
                covered |= sets[f].inner(pts)
        faces = [sets[f] for f in sets if set(f) < set(s)]
        lam = AffineFrame(verts).coords(pts[~covered])
        raw = (d + 1) * _residual_floor(lam, verts, faces) if len(lam) else 1.0
        if raw < 1e-12:
            raise DegenerateComplex(f"residual of {s} reaches its boundary")
        eps_inner = min(safety * raw, 0.999)
        eps_core = safety * eps_inner
        core = shrink(verts, eps_core).vertices if eps_core > 0 else verts
        gap = _gap(K, boxes, s, core, 2 * safety * e)
        if gap < 1e-12:
            raise DegenerateComplex(f"shrunk {s} touches a disjoint simplex")
        ep = min(safety * e, gap / 2) if np.isfinite(gap) else safety * e
        sets[s] = CoverSet(s, verts, eps_core, eps_inner, ep, e, False)
    return Covering(K, sets)


# -- locally finite shrinking of neighbourhood families ----------------------

class _Target:
    def __init__(self, obj, density: int, rng):
        if isinstance(obj, Complex):
            self.complex = obj
            self.samples = np.vstack([obj.vertices] + [
                sample_simplex(obj.coords(s), density, rng) for s in obj.maximal if len(s) > 1])
            self.tree = None
        else:
            self.complex = None
            self.samples = np.atleast_2d(np.asarray(obj, dtype=float))
            self.tree = cKDTree(self.samples)

    def distance(self, x) -> np.ndarray:
        if self.complex is not None:
            return self.complex.distance(x)
        return self.tree.query(np.atleast_2d(x))[0]

    def gap(self, other: "_Target") -> float:
        if self.complex is not None and other.complex is not None:
            A, B = self.complex, other.complex
            return min(simplex_distance(A.coords(s), B.coords(t))
                       for s in A.maximal for t in B.maximal)
        if self.complex is None:
            return float(other.distance(self.samples).min())
        return float(self.distance(other.samples).min())


@dataclass
class ShrunkNeighborhood:
    base: Callable
    target: _Target
    radius: float

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        inside = np.asarray(self.base(x), dtype=bool)
        if np.isfinite(self.radius):
            inside &= self.target.distance(x) < self.radius
        return inside


def shrink_family(neighborhoods: list, targets: list, density: int = 200, seed: int = 0,
                  collar: float = 1 / 3) -> list:
    """Cut each neighbourhood down to a distance collar around its target.

    Collar radii are a fraction of the gap to every disjoint target, so
    collars of disjoint targets never meet.
    """
    if len(neighborhoods) != len(targets):
        raise ValueError("one neighbourhood per target")
    rng = np.random.default_rng(seed)
    tg = [_Target(t, density, rng) for t in targets]
    for k, (V, T) in enumerate(zip(neighborhoods, tg)):
        if not np.asarray(V(T.samples), dtype=bool).all():
            raise ContainmentError(f"target {k} is not inside its neighbourhood")
    out = []
    for k, (V, T) in enumerate(zip(neighborhoods, tg)):
        gaps = [T.gap(S) for j, S in enumerate(tg) if j != k]
        gaps = [g for g in gaps if g > 1e-12]
        radius = collar * min(gaps) if gaps else np.inf
        out.append(ShrunkNeighborhood(V, T, radius))
    return out
