"""Barycentric subdivision, optionally relative to a retained subcomplex."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .complex import Complex, InvalidComplex, Simplex, faces_of
from .geometry import diameter


@dataclass(frozen=True)
class Subdivision:
    child: Complex
    parent: Complex
    carrier_of: dict  # child simplex -> parent simplex containing it
    levels: int = 1
    retained: frozenset = field(default_factory=frozenset)

    def carrier(self, s: Simplex) -> Simplex:
        return self.carrier_of[tuple(s)]

    def to_dict(self) -> dict:
        d = self.child.to_dict()
        d["carriers"] = [[list(c), list(p)] for c, p in self.carrier_of.items()]
        d["levels"] = self.levels
        d["retained"] = [list(s) for s in sorted(self.retained, key=lambda s: (len(s), s))]
        return d


def _chains(K: Complex, free: set) -> dict:
    """Strict chains of ``free`` simplices, keyed by their top element."""
    memo: dict = {}

    def up_to(s):
        if s in memo:
            return memo[s]
        out = [(s,)]
        for f in faces_of(s, proper=True):
            if f in free:
                out.extend(c + (s,) for c in up_to(f))
        memo[s] = out
        return out

    for s in K.simplices:
        if s in free:
            up_to(s)
    return memo


def sd_mod(K: Complex, H=()) -> Subdivision:
    """Subdivide ``K`` barycentrically away from the subcomplex ``H``.

    Original vertex ids are kept; barycenters of the non-retained simplices of
    positive dimension are appended in simplex order.
    """
    H = K.subcomplex(H)
    free = [s for s in K.simplices if s not in H]
    free_set = set(free)

    verts = [K.vertices]
    bary: dict = {}
    nxt = K.n_vertices
    for s in free:
        if len(s) == 1:
            bary[s] = s[0]
        else:
            bary[s] = nxt
            verts.append(K.barycenter(s)[None, :])
            nxt += 1
    coords = np.vstack(verts)

    carrier_of: dict = {}
    for h in H:
        carrier_of[h] = h
    chains = _chains(K, free_set)
    for top, cs in chains.items():
        for chain in cs:
            bids = [bary[s] for s in chain]
            base = chain[0]
            # retained faces of the bottom of the chain, plus the empty face
            heads = [()] + [f for f in faces_of(base, proper=True) if f in H]
            for h in heads:
                c = tuple(sorted(h + tuple(bids)))
                carrier_of[c] = top

    child = Complex(coords, carrier_of.keys(), check=False)
    if len(child.simplices) != len(carrier_of):
        raise InvalidComplex("subdivision produced an inconsistent simplex table")
    # reorder to match the child's canonical order
    carrier_of = {s: carrier_of[s] for s in child.simplices}
    return Subdivision(child, K, carrier_of, 1, H)


def sd(K: Complex) -> Subdivision:
    return sd_mod(K, ())


def identity_subdivision(K: Complex, H=()) -> Subdivision:
    return Subdivision(K, K, {s: s for s in K.simplices}, 0, K.subcomplex(H))


def sd_iter(K: Complex, H=(), k: int = 1) -> Subdivision:
    """``k``-fold relative subdivision with the composed carrier table."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    cur = identity_subdivision(K, H)
    for _ in range(k):
        step = sd_mod(cur.child, cur.retained)
        composed = {c: cur.carrier_of[p] for c, p in step.carrier_of.items()}
        cur = Subdivision(step.child, K, composed, cur.levels + 1, step.retained)
    return cur


def mesh_size(K: Complex, away_from=None) -> float:
    """Largest simplex diameter, ignoring simplices of ``away_from``."""
    skip = set() if away_from is None else {tuple(s) for s in away_from}
    best = 0.0
    for s in K.simplices:
        if len(s) < 2 or s in skip:
            continue
        best = max(best, diameter(K.coords(s)))
    return best


def top_children(sub: Subdivision) -> list:
    """Child simplices of the top dimension of the parent."""
    d = sub.parent.dim
    return [c for c in sub.child.simplices if len(c) == d + 1]


def chain_count(d: int) -> int:
    """Top children of a single d-simplex, i.e. ``(d+1)!``."""
    return int(np.prod(np.arange(1, d + 2)))


__all__ = [
    "Subdivision", "sd", "sd_mod", "sd_iter", "mesh_size", "identity_subdivision",
    "top_children", "chain_count",
]
