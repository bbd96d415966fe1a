"""Finite geometric simplicial complexes.

Simplices are sorted tuples of vertex ids.  A :class:`Complex` stores its
simplices in a canonical order (by dimension, then lexicographically), and a
simplex id is a position in that order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from .geometry import TOL, AffineFrame, gram_volume, is_affinely_independent

Simplex = tuple


class InvalidComplex(ValueError):
    pass


class NotInPolyhedron(ValueError):
    """Raised when a query point is farther than tolerance from ``|K|``."""

    def __init__(self, msg, points=None):
        super().__init__(msg)
        self.points = points


def faces_of(s: Simplex, proper: bool = False) -> list[Simplex]:
    n = len(s)
    top = n - 1 if proper else n
    return [f for k in range(1, top + 1) for f in combinations(s, k)]


def close_faces(simplices: Iterable[Sequence[int]]) -> set[Simplex]:
    out: set[Simplex] = set()
    for s in simplices:
        s = tuple(sorted(int(v) for v in s))
        if s in out:
            continue
        out.update(faces_of(s))
    return out


def _order(simplices) -> list[Simplex]:
    return sorted(simplices, key=lambda s: (len(s), s))


@dataclass(frozen=True)
class Location:
    """Point-location result for a batch of points.

    ``vertex_ids`` and ``weights`` are padded to ``dim + 1`` columns with
    ``-1`` / ``0``.  Weights are clipped at zero but not snapped; those at
    or below ``tol`` do not count toward the carrier.
    """

    complex: "Complex"
    vertex_ids: np.ndarray
    weights: np.ndarray
    tol: float = TOL

    @property
    def live(self) -> np.ndarray:
        return (self.weights > self.tol) & (self.vertex_ids >= 0)

    def hat(self, u: int) -> np.ndarray:
        """Value of the piecewise-linear hat function of vertex ``u``."""
        return np.where(self.vertex_ids == u, self.weights, 0.0).sum(axis=1)

    @cached_property
    def carrier_ids(self) -> np.ndarray:
        idx = self.complex.index
        out = np.empty(len(self.weights), dtype=int)
        for i, (v, m) in enumerate(zip(self.vertex_ids, self.live)):
            out[i] = idx[tuple(sorted(v[m].tolist()))]
        return out


class Complex:
    """A finite geometric simplicial complex in R^p.

    Parameters
    ----------
    vertices : (n, p) array of coordinates.
    simplices : iterable of vertex-id sequences; face closure is completed and
        every vertex of the table becomes a 0-simplex.
    check : verify finiteness, ids and affine independence.  The (quadratic)
        pairwise intersection check lives in :meth:`validate_geometry`.
    """

    def __init__(self, vertices, simplices, check: bool = True):
        verts = np.array(vertices, dtype=float)
        if verts.ndim == 1:
            verts = verts[:, None]
        if verts.ndim != 2:
            raise InvalidComplex("vertices must be a 2-d array")
        verts.setflags(write=False)
        self.vertices = verts
        closed = close_faces(simplices)
        closed.update((i,) for i in range(len(verts)))
        self.simplices: tuple[Simplex, ...] = tuple(_order(closed))
        self.index = {s: i for i, s in enumerate(self.simplices)}
        if check:
            self._check()

    def _check(self):
        if not np.isfinite(self.vertices).all():
            raise InvalidComplex("non-finite vertex coordinates")
        n = len(self.vertices)
        for s in self.simplices:
            if len(set(s)) != len(s):
                raise InvalidComplex(f"repeated vertex in {s}")
            if s[0] < 0 or s[-1] >= n:
                raise InvalidComplex(f"vertex id out of range in {s}")
        for s in self.maximal:
            if not is_affinely_independent(self.vertices[list(s)]):
                raise InvalidComplex(f"simplex {s} is degenerate")

    # -- basic structure -------------------------------------------------

    @property
    def ambient_dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @cached_property
    def dim(self) -> int:
        return max(len(s) for s in self.simplices) - 1

    @cached_property
    def maximal(self) -> tuple[Simplex, ...]:
        cofaced = set()
        for s in self.simplices:
            cofaced.update(faces_of(s, proper=True))
        return tuple(s for s in self.simplices if s not in cofaced)

    def of_dim(self, k: int) -> list[Simplex]:
        return [s for s in self.simplices if len(s) == k + 1]

    def coords(self, s: Simplex) -> np.ndarray:
        return self.vertices[list(s)]

    def barycenter(self, s: Simplex) -> np.ndarray:
        return self.coords(s).mean(axis=0)

    def frame(self, s: Simplex) -> AffineFrame:
        return self._frames[s]

    @cached_property
    def _frames(self) -> dict:
        return {s: AffineFrame(self.coords(s)) for s in self.simplices}

    def __contains__(self, s) -> bool:
        return tuple(s) in self.index

    def __len__(self) -> int:
        return len(self.simplices)

    def __repr__(self) -> str:
        return (f"Complex(n_vertices={self.n_vertices}, n_simplices={len(self)}, "
                f"dim={self.dim}, ambient={self.ambient_dim})")

    def subcomplex(self, simplices: Iterable[Sequence[int]]) -> frozenset:
        """Validate and return a face-closed set of simplices of this complex."""
        sub = {tuple(sorted(s)) for s in simplices}
        for s in sub:
            if s not in self.index:
                raise InvalidComplex(f"{s} is not a simplex of the complex")
            for f in faces_of(s, proper=True):
                if f not in sub:
                    raise InvalidComplex(f"subcomplex is not face-closed: {f} < {s}")
        return frozenset(sub)

    def star(self, w: Simplex) -> list[Simplex]:
        """All simplices having ``w`` as a face (``w`` included)."""
        w = tuple(w)
        if w not in self.index:
            raise KeyError(f"unknown simplex {w}")
        ws = set(w)
        return [s for s in self.simplices if ws.issubset(s)]

    @cached_property
    def vertex_star(self) -> list[list[Simplex]]:
        out: list[list[Simplex]] = [[] for _ in range(self.n_vertices)]
        for s in self.simplices:
            for v in s:
                out[v].append(s)
        return out

    def volume(self, k: int | None = None) -> float:
        k = self.dim if k is None else k
        return sum(gram_volume(self.coords(s)) for s in self.of_dim(k))

    def vertex_at(self, x, tol: float = 1e-12) -> int | None:
        d = np.abs(self.vertices - np.asarray(x, dtype=float)).max(axis=1)
        i = int(np.argmin(d))
        return i if d[i] <= tol else None

    # -- barycentric coordinates and point location ----------------------

    def barycentric_coords(self, s: Simplex, x, tol: float = TOL) -> np.ndarray:
        """Affine coordinates of ``x`` w.r.t. the vertices of ``s``.

        Raises ``ValueError`` when ``x`` is off the affine hull of ``s``.
        """
        s = tuple(s)
        if s not in self.index:
            raise KeyError(f"unknown simplex {s}")
        fr = self.frame(s)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lam = fr.coords(x)
        res = np.linalg.norm(x - lam @ fr.verts, axis=1)
        if (res > tol).any():
            raise ValueError(f"point off the affine hull of {s} (residual {res.max():.3g})")
        return lam[0] if len(lam) == 1 else lam

    def locate(self, points, tol: float = TOL, strict: bool = True) -> Location:
        """Find, for each point, a maximal simplex containing it and its weights.

        Unlocated points raise :class:`NotInPolyhedron` when ``strict``;
        otherwise they keep vertex id ``-1`` in every column.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = len(pts)
        width = self.dim + 1
        vids = np.full((n, width), -1, dtype=int)
        w = np.zeros((n, width))
        found = np.zeros(n, dtype=bool)
        # smallest weight minus residual: the most interior candidate wins
        score = np.full(n, -np.inf)
        for s, idx in self._candidates(pts, tol):
            idx = idx[score[idx] < tol]
            if not len(idx):
                continue
            fr = self.frame(s)
            lam = fr.coords(pts[idx])
            res = np.linalg.norm(pts[idx] - lam @ fr.verts, axis=1)
            m = lam.min(axis=1) - res
            ok = (lam.min(axis=1) >= -tol) & (res <= tol) & (m > score[idx])
            if not ok.any():
                continue
            idx, lam = idx[ok], lam[ok]
            score[idx] = m[ok]
            lam = np.maximum(lam, 0.0)
            lam /= lam.sum(axis=1, keepdims=True)
            vids[idx] = -1
            w[idx] = 0.0
            vids[idx, : len(s)] = s
            w[idx, : len(s)] = lam
            found[idx] = True
        if strict and not found.all():
            bad = pts[~found]
            raise NotInPolyhedron(f"{len(bad)} point(s) outside |K|, e.g. {bad[0]}", bad)
        return Location(self, vids, w, tol)

    def _candidates(self, pts: np.ndarray, tol: float):
        """Yield ``(maximal simplex, candidate point ids)`` via a bucket grid."""
        mx = self.maximal
        if len(mx) <= 16 or len(pts) < 64:
            for s in mx:
                lo, hi = self._bbox[s]
                yield s, np.flatnonzero((pts >= lo - tol).all(axis=1) & (pts <= hi + tol).all(axis=1))
            return
        lo0, cell, shape, cells = self._grid
        c = np.floor((pts - lo0) / cell).astype(int)
        inside = ((c >= 0) & (c < shape)).all(axis=1)
        lin = np.full(len(pts), -1)
        lin[inside] = np.ravel_multi_index(c[inside].T, shape)
        order = np.argsort(lin, kind="stable")
        starts = np.searchsorted(lin[order], np.arange(int(np.prod(shape)) + 1))
        for s, cs in zip(mx, cells):
            parts = [order[starts[k]:starts[k + 1]] for k in cs]
            yield s, np.concatenate(parts) if parts else np.zeros(0, int)

    @cached_property
    def _grid(self):
        lo0 = self.vertices.min(axis=0) - 1e-6
        hi0 = self.vertices.max(axis=0) + 1e-6
        per = max(1, int(np.ceil(2 * len(self.maximal) ** (1 / self.ambient_dim))))
        shape = np.full(self.ambient_dim, per)
        cell = (hi0 - lo0) / per
        cells = []
        for s in self.maximal:
            lo, hi = self._bbox[s]
            a = np.clip(np.floor((lo - 1e-6 - lo0) / cell).astype(int), 0, per - 1)
            b = np.clip(np.floor((hi + 1e-6 - lo0) / cell).astype(int), 0, per - 1)
            rng = np.stack(np.meshgrid(*[np.arange(i, j + 1) for i, j in zip(a, b)],
                                       indexing="ij"), -1).reshape(-1, self.ambient_dim)
            cells.append(np.ravel_multi_index(rng.T, shape).tolist())
        return lo0, cell, shape, cells

    @cached_property
    def _bbox(self) -> dict:
        return {s: (self.coords(s).min(axis=0), self.coords(s).max(axis=0)) for s in self.simplices}

    def carrier(self, x, tol: float = TOL) -> Simplex:
        """The unique simplex whose open simplex contains ``x``."""
        loc = self.locate(np.atleast_2d(x), tol)
        return self.simplices[int(loc.carrier_ids[0])]

    def contains(self, points, tol: float = TOL) -> np.ndarray:
        loc = self.locate(points, tol, strict=False)
        return loc.vertex_ids[:, 0] >= 0

    def nearest(self, points, simplices: Iterable[Simplex] | None = None,
                tol: float = 1e-12):
        """Nearest points of ``|K|`` (or of the union of ``simplices``).

        Returns ``(feet, dist, gap)`` where ``gap`` is the difference between
        the two smallest candidate distances over distinct feet (inf if unique).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = len(pts)
        best = np.full(n, np.inf)
        second = np.full(n, np.inf)
        feet = np.full_like(pts, np.inf)
        cands = self.simplices if simplices is None else _order(close_faces(simplices))
        for s in cands:
            fr = self.frame(s)
            lam = fr.coords(pts)
            ok = (lam >= -tol).all(axis=1)
            if not ok.any():
                continue
            idx = np.flatnonzero(ok)
            foot = lam[ok] @ fr.verts
            d = np.linalg.norm(pts[idx] - foot, axis=1)
            same = np.linalg.norm(foot - feet[idx], axis=1) <= 1e-12
            better = d < best[idx]
            # runner-up among geometrically different feet
            demote = better & ~same & np.isfinite(best[idx])
            second[idx[demote]] = np.minimum(second[idx[demote]], best[idx[demote]])
            lose = ~better & ~same
            second[idx[lose]] = np.minimum(second[idx[lose]], d[lose])
            best[idx[better]] = d[better]
            feet[idx[better]] = foot[better]
        with np.errstate(invalid="ignore"):
            gap = np.where(np.isfinite(second), second - best, np.inf)
        return feet, best, gap

    def distance(self, points, simplices: Iterable[Simplex] | None = None) -> np.ndarray:
        return self.nearest(points, simplices)[1]

    # -- geometric validation --------------------------------------------

    def validate_geometry(self, tol: float = TOL) -> None:
        """Check that maximal simplices meet exactly in common faces."""
        mx = self.maximal
        boxes = [self._bbox[s] for s in mx]
        for i in range(len(mx)):
            lo_i, hi_i = boxes[i]
            for j in range(i + 1, len(mx)):
                lo_j, hi_j = boxes[j]
                if (lo_i > hi_j + tol).any() or (lo_j > hi_i + tol).any():
                    continue
                if not self._meet_in_face(mx[i], mx[j], tol):
                    raise InvalidComplex(f"simplices {mx[i]} and {mx[j]} overlap improperly")

    def _meet_in_face(self, s: Simplex, t: Simplex, tol: float) -> bool:
        shared = sorted(set(s) & set(t))
        p = self.ambient_dim
        ds, dt = len(s) - 1, len(t) - 1
        if ds == dt == p and len(shared) == p:
            # full-dimensional neighbours across a facet: opposite sides suffice
            fr = self.frame(tuple(shared))
            a = [v for v in s if v not in shared][0]
            b = [v for v in t if v not in shared][0]
            normal = self.vertices[a] - fr.foot(self.vertices[a])[0]
            other = self.vertices[b] - fr.foot(self.vertices[b])[0]
            return float(normal @ other) < 0
        A, B = self.coords(s), self.coords(t)
        na, nb = len(s), len(t)
        free = np.array([0.0 if v in shared else -1.0 for v in s] + [0.0] * nb)
        A_eq = np.vstack([
            np.hstack([A.T, -B.T]),
            np.concatenate([np.ones(na), np.zeros(nb)]),
            np.concatenate([np.zeros(na), np.ones(nb)]),
        ])
        b_eq = np.concatenate([np.zeros(p), [1.0, 1.0]])
        res = linprog(free, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        if res.status == 2:  # infeasible: disjoint
            return not shared
        return -res.fun <= 1e-7

    # -- serialisation ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "simplices": [list(s) for s in self.maximal],
        }

    @classmethod
    def from_dict(cls, data: dict, validate: bool = True) -> "Complex":
        verts = data["vertices"]
        if len(verts) and len(verts[0]) > 4:
            raise InvalidComplex("ambient dimension above 4 is not supported")
        K = cls(verts, data.get("simplices", []))
        if validate:
            K.validate_geometry()
        return K

    def dumps(self) -> str:
        return json.dumps(self.to_dict())


def simplex_complex(verts) -> Complex:
    """The complex of one simplex and all its faces."""
    verts = np.asarray(verts, dtype=float)
    if verts.ndim == 1:
        verts = verts[:, None]
    return Complex(verts, [tuple(range(len(verts)))])
