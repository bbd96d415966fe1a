"""Coordinate normal-crossings weak retraction and the singular lift model."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .probes import c1_probe
from .profile import DEFAULT_PROFILE


@dataclass(frozen=True)
class NormalCrossingsModel:
    """``X = {x_1 ... x_r = 0}`` in ``R^d`` with one gauge per active coordinate."""

    dim: int
    active: int
    eta: tuple

    def __post_init__(self):
        if not 1 <= self.active <= self.dim:
            raise ValueError("need 1 <= active <= dim")
        if len(self.eta) != self.active or min(self.eta) <= 0:
            raise ValueError("one positive gauge per active coordinate")


def squash(M: NormalCrossingsModel, x, j: int) -> np.ndarray:
    """Multiply coordinate ``j`` by ``f(x_j^2 / eta_j^2)``; ``f`` vanishes up to 1/4."""
    x = np.array(np.atleast_2d(x), dtype=float)
    t = x[:, j] ** 2 / M.eta[j] ** 2
    x[:, j] = x[:, j] * DEFAULT_PROFILE.rising(t)
    return x


def weak_retract(M: NormalCrossingsModel, x, order=None) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    for j in (range(M.active) if order is None else order):
        x = squash(M, x, j)
    return x


def on_X(M: NormalCrossingsModel, x) -> np.ndarray:
    return (np.atleast_2d(x)[:, : M.active] == 0).any(axis=1)


def grid(M: NormalCrossingsModel, axis=None) -> np.ndarray:
    axis = np.arange(-200, 201) / 100 if axis is None else np.asarray(axis, dtype=float)
    mesh = np.meshgrid(*([axis] * M.dim), indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def retraction_report(M: NormalCrossingsModel, axis=None, h: float = 1e-5) -> dict:
    pts = grid(M, axis)
    eta = np.asarray(M.eta)
    act = pts[:, : M.active]
    out = weak_retract(M, pts)
    X = on_X(M, pts)
    near = (np.abs(act) < eta / 2).any(axis=1)
    far = (np.abs(act) >= eta).all(axis=1)
    disp = np.linalg.norm(out - pts, axis=1)
    swapped = weak_retract(M, pts, order=range(M.active - 1, -1, -1))
    kept = all(((pts[:, k] == 0) <= (out[:, k] == 0)).all() for k in range(M.active))

    # derivative continuity of each factor across |x_j| = eta_j/2 and eta_j
    probes = []
    for j in range(M.active):
        for c in (eta[j] / 2, eta[j], -eta[j] / 2, -eta[j]):
            p = np.zeros((1, M.dim))
            p[0, j] = c
            d = np.zeros(M.dim)
            d[j] = 1.0
            probes.append(c1_probe(lambda x: weak_retract(M, x), p, d, h).max_mismatch)
    return {
        "n_points": int(len(pts)),
        "max_displacement_on_X": float(disp[X].max(initial=0.0)),
        "max_gauge": float(eta.max()),
        "near_points": int(near.sum()),
        "near_mapped_into_X": int(on_X(M, out[near]).sum()),
        "identity_far_exact": bool((out[far] == pts[far]).all()),
        "X_preserved": bool(on_X(M, out[X]).all()),
        "components_preserved": bool(kept),
        "commutator_max": float(np.abs(out - swapped).max()),
        "max_abs_product_near": float(np.abs(np.prod(out[near][:, : M.active], axis=1)).max(initial=0.0)),
        "c1_mismatch_max": float(max(probes)),
    }


# -- singular lift -----------------------------------------------------------------

@dataclass
class SingularEmbedding:
    """``g(x, y1, y2) = f(x)^2 + y1^2 - y2^3``."""

    f: Callable
    grad_f: Callable
    n: int = 1
    coeffs: tuple | None = field(default=None)

    @classmethod
    def from_coeffs(cls, coeffs) -> "SingularEmbedding":
        """One-variable polynomial, coefficients in ascending powers."""
        P = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
        dP = P.deriv()
        return cls(lambda x: P(x[:, 0]), lambda x: dP(x[:, 0])[:, None], 1, tuple(coeffs))

    def g(self, z) -> np.ndarray:
        z = np.atleast_2d(z)
        x, y1, y2 = z[:, : self.n], z[:, self.n], z[:, self.n + 1]
        return self.f(x) ** 2 + y1**2 - y2**3

    def grad_g(self, z) -> np.ndarray:
        z = np.atleast_2d(z)
        x, y1, y2 = z[:, : self.n], z[:, self.n], z[:, self.n + 1]
        gx = 2 * self.f(x)[:, None] * self.grad_f(x)
        return np.column_stack([gx, 2 * y1, -3 * y2**2])


def singular_lift(E: SingularEmbedding, x, y1) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float)).reshape(-1, E.n)
    y1 = np.asarray(y1, dtype=float).reshape(-1)
    y2 = np.cbrt(E.f(x) ** 2 + y1**2)
    return np.column_stack([x, y1, y2])


def project(E: SingularEmbedding, z) -> np.ndarray:
    return np.atleast_2d(z)[:, : E.n + 1]


def singular_locus_scan(E: SingularEmbedding, x, y1, tol: float = 1e-8) -> dict:
    z = singular_lift(E, x, y1)
    base = np.column_stack([np.atleast_2d(x).reshape(-1, E.n), np.asarray(y1).reshape(-1)])
    gz = E.g(z)
    scale = np.maximum(1.0, E.f(z[:, : E.n]) ** 2 + z[:, E.n] ** 2)
    crit = np.linalg.norm(E.grad_g(z), axis=1) < tol
    expected = ((np.abs(E.f(z[:, : E.n])) < tol) & (np.abs(z[:, E.n]) < tol)
                & (np.abs(z[:, E.n + 1]) < tol))
    return {
        "n_points": int(len(z)),
        "max_relative_residual": float((np.abs(gz) / scale).max()),
        "critical_points": int(crit.sum()),
        "critical_matches_expected": bool((crit == expected).all()),
        "critical_locus": z[crit].tolist(),
        "projection_exact": bool(np.array_equal(project(E, z), base)),
    }
