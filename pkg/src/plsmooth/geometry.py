"""Affine primitives on simplices given as vertex arrays.

A simplex here is just an ``(k+1, p)`` array of vertex coordinates.  Functions
accept a batch of query points ``(N, p)`` and are vectorised over the batch.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

TOL = 1e-9


class AffineFrame:
    """Precomputed affine solve for one simplex.

    ``weights(x)`` returns barycentric coordinates of the orthogonal projection
    of ``x`` onto the affine hull, ``foot(x)`` that projection.
    """

    def __init__(self, verts: np.ndarray):
        verts = np.asarray(verts, dtype=float)
        self.verts = verts
        self.origin = verts[0]
        self.edges = verts[1:] - verts[0]  # (d, p)
        self.dim = len(verts) - 1
        if self.dim > 0:
            self.pinv = np.linalg.pinv(self.edges)  # (p, d)
            # orthogonal projector onto the direction space
            self.proj = self.edges.T @ self.pinv.T  # (p, p)
        else:
            self.pinv = np.zeros((verts.shape[1], 0))
            self.proj = np.zeros((verts.shape[1], verts.shape[1]))

    def coords(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        c = (x - self.origin) @ self.pinv
        return np.column_stack([1.0 - c.sum(axis=1), c])

    def weight_gradients(self) -> np.ndarray:
        """Constant gradients of the barycentric weights, shape ``(d+1, p)``."""
        g = self.pinv.T
        return np.vstack([-g.sum(axis=0, keepdims=True), g])

    def foot(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return self.origin + (x - self.origin) @ self.proj.T

    def offset(self, x: np.ndarray) -> np.ndarray:
        """Normal component ``x - foot(x)``."""
        x = np.atleast_2d(x)
        return x - self.foot(x)


def gram_volume(verts: np.ndarray) -> float:
    """k-dimensional volume of a k-simplex embedded in R^p."""
    verts = np.asarray(verts, dtype=float)
    k = len(verts) - 1
    if k == 0:
        return 1.0
    e = verts[1:] - verts[0]
    det = np.linalg.det(e @ e.T)
    return float(np.sqrt(max(det, 0.0)) / np.prod(np.arange(1, k + 1)))


def is_affinely_independent(verts: np.ndarray, tol: float = 1e-10) -> bool:
    verts = np.asarray(verts, dtype=float)
    if len(verts) <= 1:
        return True
    e = verts[1:] - verts[0]
    if len(e) > verts.shape[1]:
        return False
    s = np.linalg.svd(e, compute_uv=False)
    scale = max(1.0, float(np.abs(e).max()))
    return bool(s.min() > tol * scale)


def diameter(verts: np.ndarray) -> float:
    verts = np.asarray(verts, dtype=float)
    if len(verts) < 2:
        return 0.0
    d = verts[:, None, :] - verts[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


def _faces(n: int):
    for k in range(1, n + 1):
        yield from combinations(range(n), k)


def project_to_simplex(verts: np.ndarray, x: np.ndarray, tol: float = 1e-12):
    """Closest points of a closed simplex to each query point.

    The closest point lies in the relative interior of some face, where it is
    the orthogonal projection onto that face's affine hull; we take the best
    admissible face.  Returns ``(points, distances)``.
    """
    verts = np.asarray(verts, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    best = np.full(len(x), np.inf)
    out = np.empty_like(x)
    for face in _faces(len(verts)):
        fr = AffineFrame(verts[list(face)])
        lam = fr.coords(x)
        ok = (lam >= -tol).all(axis=1)
        if not ok.any():
            continue
        foot = fr.foot(x[ok])
        d = np.linalg.norm(x[ok] - foot, axis=1)
        idx = np.flatnonzero(ok)
        better = d < best[idx]
        best[idx[better]] = d[better]
        out[idx[better]] = foot[better]
    return out, best


def simplex_distance(a: np.ndarray, b: np.ndarray, tol: float = 1e-12) -> float:
    """Euclidean distance between two closed simplices.

    Enumerates face pairs; the minimising pair lies in relative interiors of
    some faces where it solves an unconstrained least-squares problem.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    best = np.inf
    for fa in _faces(len(a)):
        A = a[list(fa)]
        for fb in _faces(len(b)):
            B = b[list(fb)]
            # minimise |A0 + sA - B0 - tB| over (s, t)
            Ea = (A[1:] - A[0]).T
            Eb = (B[1:] - B[0]).T
            M = np.hstack([Ea, -Eb])
            rhs = B[0] - A[0]
            if M.shape[1]:
                st, *_ = np.linalg.lstsq(M, rhs, rcond=None)
            else:
                st = np.zeros(0)
            s, t = st[: Ea.shape[1]], st[Ea.shape[1]:]
            la = np.concatenate([[1 - s.sum()], s])
            lb = np.concatenate([[1 - t.sum()], t])
            if (la < -tol).any() or (lb < -tol).any():
                continue
            d = float(np.linalg.norm(A[0] + Ea @ s - B[0] - Eb @ t))
            best = min(best, d)
    return best


def sample_simplex(verts: np.ndarray, n: int, rng: np.random.Generator,
                   concentrate: float = 0.0) -> np.ndarray:
    """Random points of a closed simplex.

    Uniform Dirichlet weights; a fraction ``concentrate`` of the draws uses a
    small Dirichlet parameter so that points crowd towards faces.
    """
    verts = np.asarray(verts, dtype=float)
    k = len(verts)
    if k == 1:
        return np.repeat(verts, n, axis=0)
    n_edge = int(round(concentrate * n))
    w1 = rng.dirichlet(np.ones(k), size=n - n_edge)
    w2 = rng.dirichlet(np.full(k, 0.3), size=n_edge)
    w = np.vstack([w1, w2])
    return w @ verts


def lattice_weights(k: int, res: int) -> np.ndarray:
    """All barycentric weight vectors with denominators ``res`` on a k-simplex."""
    if k == 0:
        return np.ones((1, 1))
    pts = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            pts.append(prefix + [remaining])
            return
        for i in range(remaining + 1):
            rec(prefix + [i], remaining - i, slots - 1)

    rec([], res, k + 1)
    return np.asarray(pts, dtype=float) / res
