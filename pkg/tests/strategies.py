"""Hypothesis strategies and independent oracles shared by the tests."""

import itertools

import numpy as np
from hypothesis import strategies as st
from scipy.spatial import Delaunay

from plsmooth.complex import Complex, close_faces


@st.composite
def simplices_in_plane(draw, max_dim: int = 2):
    """A well-conditioned simplex of dimension 1..max_dim in the plane."""
    d = draw(st.integers(1, max_dim))
    angle = draw(st.floats(0, 2 * np.pi))
    sx, sy = draw(st.floats(0.2, 3)), draw(st.floats(0.2, 3))
    shear = draw(st.floats(-1, 1))
    shift = np.array([draw(st.floats(-5, 5)), draw(st.floats(-5, 5))])
    c, s = np.cos(angle), np.sin(angle)
    A = np.array([[c, -s], [s, c]]) @ np.array([[sx, shear], [0, sy]])
    std = np.vstack([np.zeros(2), np.eye(2)])[: d + 1]
    return std @ A.T + shift


def delaunay_complex(rng, n: int = 7) -> Complex:
    pts = rng.uniform(0, 1, (n, 2))
    tri = Delaunay(pts)
    return Complex(pts, tri.simplices.tolist())


def random_subcomplex(K: Complex, rng, p: float = 0.3) -> list:
    picked = [s for s in K.simplices if rng.random() < p]
    return sorted(close_faces(picked), key=lambda s: (len(s), s))


def lstsq_weights(verts: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Barycentric weights by a direct augmented solve."""
    A = np.vstack([verts.T, np.ones(len(verts))])
    b = np.append(x, 1.0)
    return np.linalg.lstsq(A, b, rcond=None)[0]


def sd_by_permutations(verts: np.ndarray) -> set:
    """Top children of one simplex via vertex orderings: barycenters of growing prefixes."""
    out = set()
    for perm in itertools.permutations(range(len(verts))):
        pts = [verts[list(perm[: k + 1])].mean(axis=0) for k in range(len(perm))]
        out.add(frozenset(tuple(np.round(p, 12)) for p in pts))
    return out


def shoelace(verts: np.ndarray) -> float:
    (x0, y0), (x1, y1), (x2, y2) = verts
    return abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)) / 2
