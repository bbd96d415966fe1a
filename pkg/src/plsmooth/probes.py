"""Finite-difference probes for derivative continuity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class StepUnderflow(ValueError):
    pass


@dataclass
class ProbeTable:
    points: np.ndarray
    directions: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def mismatch(self) -> np.ndarray:
        return np.linalg.norm(self.right - self.left, axis=1)

    @property
    def max_mismatch(self) -> float:
        return float(self.mismatch.max(initial=0.0))

    def rows(self) -> list:
        return [{"point": p.tolist(), "direction": d.tolist(), "mismatch": float(m)}
                for p, d, m in zip(self.points, self.directions, self.mismatch)]


def one_sided(A, p, v, h: float):
    """Second-order one-sided derivatives of ``A`` at ``p`` along ``v``."""
    f0 = A(p)
    fp1, fp2 = A(p + h * v), A(p + 2 * h * v)
    fm1, fm2 = A(p - h * v), A(p - 2 * h * v)
    right = (-3 * f0 + 4 * fp1 - fp2) / (2 * h)
    left = (3 * f0 - 4 * fm1 + fm2) / (2 * h)
    return left, right


def c1_probe(A, points, directions, h: float = 1e-5, refine: int = 2) -> ProbeTable:
    """Compare left and right directional derivatives at each crossing point.

    The step is refined ``refine`` times by a factor 10 and the smallest
    mismatch per point is kept: a jump in the derivative does not shrink with
    the step, while a steep but smooth layer does.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    v = np.broadcast_to(np.atleast_2d(np.asarray(directions, dtype=float)), p.shape).copy()
    n = np.linalg.norm(v, axis=1, keepdims=True)
    if (n == 0).any():
        raise ValueError("zero probe direction")
    v = v / n
    smallest = h * 10.0**-refine
    if smallest <= np.finfo(float).eps * max(1.0, float(np.abs(p).max(initial=0.0))) * 10:
        raise StepUnderflow("step too small for the coordinates")

    def F(x):
        return np.atleast_2d(np.asarray(A(x), dtype=float)).reshape(len(x), -1)

    left, right = one_sided(F, p, v, h)
    best = np.linalg.norm(right - left, axis=1)
    for k in range(1, refine + 1):
        lk, rk = one_sided(F, p, v, h * 10.0**-k)
        mk = np.linalg.norm(rk - lk, axis=1)
        better = mk < best
        left[better], right[better], best[better] = lk[better], rk[better], mk[better]
    return ProbeTable(p, v, left, right)
