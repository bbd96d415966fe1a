"""Built-in complexes and named evaluators used by demos, tests and the CLI."""

from __future__ import annotations

import numpy as np

from .complex import Complex
from .maps import MapEvaluator

_SQ3 = np.sqrt(3.0) / 2


def vertex() -> Complex:
    return Complex([[0.0, 0.0]], [[0]])


def edge() -> Complex:
    return Complex([[0.0], [1.0]], [[0, 1]])


def edge_2d() -> Complex:
    return Complex([[0.0, 0.0], [1.0, 0.0]], [[0, 1]])


def triangle() -> Complex:
    return Complex([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [[0, 1, 2]])


def equilateral() -> Complex:
    return Complex([[0.0, 0.0], [1.0, 0.0], [0.5, _SQ3]], [[0, 1, 2]])


def two_triangles() -> Complex:
    return Complex([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]])


def bowtie() -> Complex:
    v = [[-1, -1], [-1, 1], [0, 0], [1, -1], [1, 1]]
    return Complex(v, [[0, 1, 2], [2, 3, 4]])


def diamond() -> Complex:
    """Boundary of the square with vertices on the axes, a PL circle."""
    v = [[1, 0], [0, 1], [-1, 0], [0, -1]]
    return Complex(v, [[0, 1], [1, 2], [2, 3], [0, 3]])


def interval(n: int = 3, length: float | None = None) -> Complex:
    length = float(n) if length is None else length
    v = np.linspace(0.0, length, n + 1)[:, None]
    return Complex(v, [[i, i + 1] for i in range(n)])


def cross_domain() -> Complex:
    """``[-1, 1]`` with a vertex at the origin."""
    return Complex([[-1.0], [0.0], [1.0]], [[0, 1], [1, 2]])


def cross_target() -> Complex:
    """Two unit segments of ``{xy = 0}`` meeting at the origin."""
    return Complex([[0.0, -1.0], [0.0, 0.0], [1.0, 0.0]], [[0, 1], [1, 2]])


COMPLEXES = {
    "vertex": vertex,
    "edge": edge,
    "edge2d": edge_2d,
    "triangle": triangle,
    "equilateral": equilateral,
    "two_triangles": two_triangles,
    "bowtie": bowtie,
    "diamond": diamond,
    "interval3": interval,
    "cross_domain": cross_domain,
    "cross_target": cross_target,
}


# -- evaluators ----------------------------------------------------------------

def _example_1_11(x):
    t = x[:, 0]
    neg = t < 0
    return np.column_stack([np.where(neg, 0.0, t), np.where(neg, t, 0.0)])


def example_1_11() -> MapEvaluator:
    """``t -> (0, t)`` for ``t < 0`` and ``(t, 0)`` otherwise."""
    return MapEvaluator(_example_1_11, "example_1_11", lipschitz=1.0)


_DIAMOND = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])


def diamond_param(x) -> np.ndarray:
    """Position in ``[0, 4)`` along the diamond, one unit per edge, from (1, 0)."""
    x = np.atleast_2d(x)
    ang = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * np.pi)
    q = np.minimum(np.floor(ang / (np.pi / 2)), 3).astype(int)
    p = x / np.abs(x).sum(axis=1, keepdims=True)
    t = np.choose(q, [p[:, 1], -p[:, 0], -p[:, 1], p[:, 0]])
    return q + t


def diamond_point(s) -> np.ndarray:
    s = np.mod(np.asarray(s, dtype=float), 4.0)
    q = np.minimum(np.floor(s), 3).astype(int)
    t = (s - q)[:, None]
    return (1 - t) * _DIAMOND[q] + t * _DIAMOND[(q + 1) % 4]


def _degree2(x):
    s = diamond_param(x)
    return diamond_point(2 * s - np.sin(np.pi * s) / (4 * np.pi))


def degree2_circle() -> MapEvaluator:
    """Smooth degree-2 self-map of the diamond fixing the vertex (1, 0)."""
    return MapEvaluator(_degree2, "degree2_circle", lipschitz=2.25)


def affine(A, b=None) -> MapEvaluator:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float)
    return MapEvaluator(lambda x: x @ A.T + b, "affine",
                        lipschitz=float(np.linalg.norm(A, 2)))


def identity(dim: int) -> MapEvaluator:
    return affine(np.eye(dim))


def wobble(length: float = 3.0) -> MapEvaluator:
    """Monotone smooth self-map of ``[0, length]`` fixing both ends."""
    def f(x):
        t = x[:, :1] / length
        return length * (t - np.sin(2 * np.pi * t) / (4 * np.pi))
    return MapEvaluator(f, "wobble", lipschitz=1.5)


EVALUATORS = {
    "example_1_11": example_1_11,
    "degree2_circle": degree2_circle,
    "wobble": wobble,
}
