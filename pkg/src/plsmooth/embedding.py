"""Closed embedding of a locally closed set as the graph of ``1/theta``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class GraphEmbedding:
    theta: Callable

    def forward(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.asarray(self.theta(x), dtype=float).reshape(len(x))
        if (t <= 0).any():
            raise ValueError("theta must be strictly positive on the domain")
        return np.column_stack([x, 1.0 / t])

    @staticmethod
    def inverse(y) -> np.ndarray:
        return np.atleast_2d(np.asarray(y, dtype=float))[:, :-1]


def graph_embed(theta: Callable, samples=None) -> GraphEmbedding:
    """``x -> (x, 1/theta(x))``; ``samples`` of the domain are checked for ``theta > 0``."""
    emb = GraphEmbedding(theta)
    if samples is not None:
        emb.forward(samples)
    return emb
