"""Smooth cutoff profile built from ``exp(-1/t)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _psi(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def _dpsi(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos]) / u[pos] ** 2
    return out


def smoothstep(u):
    """0 for u <= 0, 1 for u >= 1, C-infinity and increasing in between."""
    a, b = _psi(u), _psi(1.0 - np.asarray(u, dtype=float))
    return a / (a + b)


def smoothstep_prime(u):
    u = np.asarray(u, dtype=float)
    a, b = _psi(u), _psi(1.0 - u)
    da, db = _dpsi(u), -_dpsi(1.0 - u)
    return (da * b - a * db) / (a + b) ** 2


@dataclass(frozen=True)
class BumpProfile:
    """Equal to 1 on ``[0, a]``, 0 on ``[b, inf)``, smooth and decreasing between."""

    a: float = 0.25
    b: float = 1.0

    def __post_init__(self):
        if not 0 < self.a < self.b:
            raise ValueError("need 0 < a < b")

    def __call__(self, t):
        return smoothstep((self.b - np.asarray(t, dtype=float)) / (self.b - self.a))

    def derivative(self, t):
        w = self.b - self.a
        return -smoothstep_prime((self.b - np.asarray(t, dtype=float)) / w) / w

    def rising(self, t):
        """The complementary profile ``1 - value``: 0 up to ``a``, 1 from ``b``."""
        return smoothstep((np.asarray(t, dtype=float) - self.a) / (self.b - self.a))

    def rising_derivative(self, t):
        w = self.b - self.a
        return smoothstep_prime((np.asarray(t, dtype=float) - self.a) / w) / w


DEFAULT_PROFILE = BumpProfile()
