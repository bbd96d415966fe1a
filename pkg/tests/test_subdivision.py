import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plsmooth import catalog, io
from plsmooth.complex import InvalidComplex, simplex_complex
from plsmooth.geometry import sample_simplex
from plsmooth.subdivision import chain_count, mesh_size, sd, sd_iter, sd_mod, top_children

from .strategies import (delaunay_complex, lstsq_weights, random_subcomplex, sd_by_permutations,
                         shoelace)


def labels(sub, c):
    """A child simplex as the set of parent simplices whose barycenters it spans."""
    return frozenset(sub.carrier_of[(u,)] for u in c)


def chains_oracle(K, H):
    """Child simplices from the definition: a retained face followed by a chain of free simplices."""
    Hs = set(H)
    free = [s for s in K.simplices if s not in Hs]
    out = set()
    heads = [()] + list(Hs)
    for r in range(0, K.dim + 2):
        for chain in itertools.permutations(free, r):
            if any(not set(a) < set(b) for a, b in zip(chain, chain[1:])):
                continue
            for h in heads:
                if not h and not chain:
                    continue
                if h and chain and not set(h) < set(chain[0]):
                    continue
                out.add(frozenset([(v,) for v in h] + list(chain)))
    return out


class TestBarycentric:
    def test_edge(self):
        s = sd(catalog.edge())
        np.testing.assert_allclose(np.sort(s.child.vertices[:, 0]), [0, 0.5, 1])
        got = {tuple(sorted(s.child.coords(e)[:, 0])) for e in s.child.of_dim(1)}
        assert got == {(0.0, 0.5), (0.5, 1.0)}

    def test_triangle_counts(self):
        s = sd(catalog.triangle())
        assert len(top_children(s)) == 6 == chain_count(2)
        assert s.child.n_vertices == 7

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_matches_permutation_oracle(self, d):
        verts = np.vstack([np.zeros(d), np.eye(d)]) + 0.1 * np.arange(d + 1)[:, None] ** 2
        s = sd(simplex_complex(verts))
        got = {frozenset(tuple(np.round(p, 12)) for p in s.child.coords(c)) for c in top_children(s)}
        assert got == sd_by_permutations(verts)

    def test_equilateral_mesh_bound(self):
        s = sd(catalog.equilateral())
        diam = max(np.linalg.norm(a - b) for c in s.child.simplices
                   for a, b in itertools.combinations(s.child.coords(c), 2))
        assert diam <= 2 / 3 + 1e-12
        assert mesh_size(s.child) == pytest.approx(diam)


class TestRelative:
    def test_edge_with_one_kept_vertex(self):
        K = catalog.edge()
        s = sd_mod(K, [(0,)])
        assert list(s.child.simplices) == [(0,), (1,), (2,), (0, 2), (1, 2)]
        assert s.child.vertices[2, 0] == 0.5

    def test_keep_everything(self):
        K = catalog.bowtie()
        s = sd_mod(K, K.simplices)
        assert s.child.simplices == K.simplices
        np.testing.assert_array_equal(s.child.vertices, K.vertices)

    def test_keep_nothing_is_barycentric(self):
        K = catalog.two_triangles()
        a, b = sd_mod(K, []), sd(K)
        assert a.child.simplices == b.child.simplices
        np.testing.assert_array_equal(a.child.vertices, b.child.vertices)

    def test_rejects_non_subcomplex(self):
        with pytest.raises(InvalidComplex):
            sd_mod(catalog.triangle(), [(0, 1)])

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_chain_oracle(self, seed):
        rng = np.random.default_rng(seed)
        K = delaunay_complex(rng, 5)
        H = random_subcomplex(K, rng)
        s = sd_mod(K, H)
        assert {labels(s, c) for c in s.child.simplices} == chains_oracle(K, H)


def test_volume_conserved_against_shoelace(rng):
    K = delaunay_complex(rng, 8)
    s = sd_iter(K, (), 2)
    parent = sum(shoelace(K.coords(t)) for t in K.of_dim(2))
    child = sum(shoelace(s.child.coords(t)) for t in s.child.of_dim(2))
    assert abs(child - parent) / parent < 1e-9


def test_carriers_contain_children(rng):
    K = catalog.bowtie()
    H = [(2,), (0,), (0, 2)]
    s = sd_iter(K, H, 2)
    for c, p in s.carrier_of.items():
        pts = s.child.coords(c)
        if len(c) > 1:
            pts = np.vstack([pts, sample_simplex(pts, 20, rng)])
        for x in pts:
            w = lstsq_weights(K.coords(p), x)
            assert w.min() >= -1e-9
            assert np.linalg.norm(w @ K.coords(p) - x) < 1e-9


def test_same_polyhedron(rng):
    K = catalog.two_triangles()
    s = sd_iter(K, [(0,), (1,), (0, 1)], 2)
    pts = np.vstack([sample_simplex(K.coords(t), 300, rng) for t in K.maximal])
    assert s.child.contains(pts).all()
    back = np.vstack([sample_simplex(s.child.coords(t), 5, rng) for t in s.child.maximal])
    assert K.contains(back).all()


class TestIterated:
    def test_zero_is_identity(self):
        K = catalog.triangle()
        s = sd_iter(K, (), 0)
        assert s.child is K and all(c == p for c, p in s.carrier_of.items())

    def test_edge_two_levels(self):
        s = sd_iter(catalog.edge(), (), 2)
        lengths = [np.ptp(s.child.coords(e)) for e in s.child.of_dim(1)]
        np.testing.assert_allclose(lengths, [0.25] * 4)

    @pytest.mark.parametrize("k", range(5))
    def test_mesh_halves(self, k):
        assert mesh_size(sd_iter(catalog.edge(), (), k).child) == pytest.approx(2.0**-k)

    def test_kept_at_every_level(self):
        K = catalog.two_triangles()
        H = [(0,), (2,), (0, 2)]
        for k in range(4):
            assert set(H) <= set(sd_iter(K, H, k).child.simplices)

    def test_shrinks_away_from_kept(self):
        K = catalog.edge()
        H = [(0,)]
        sizes = [mesh_size(sd_iter(K, H, k).child, away_from=H) for k in range(1, 7)]
        assert all(a >= b for a, b in zip(sizes, sizes[1:]))
        assert sizes[-1] <= 2.0**-6 + 1e-15

    def test_single_vertex_mesh(self):
        assert mesh_size(catalog.vertex()) == 0.0


@given(st.integers(0, 10_000))
def test_random_relative_subdivisions_keep_H(seed):
    rng = np.random.default_rng(seed)
    K = delaunay_complex(rng, int(rng.integers(4, 8)))
    H = random_subcomplex(K, rng, float(rng.uniform(0, 0.6)))
    s = sd_iter(K, H, int(rng.integers(1, 3)))
    assert set(H) <= set(s.child.simplices)
    for h in H:  # literal vertex identity
        np.testing.assert_array_equal(s.child.coords(h), K.coords(h))
    assert abs(s.child.volume(2) - K.volume(2)) <= 1e-9 * K.volume(2)


def test_serialization_roundtrip(tmp_path):
    s = sd_mod(catalog.two_triangles(), [(0,), (2,), (0, 2)])
    io.save(s, tmp_path / "s.json")
    r = io.load(tmp_path / "s.json")
    assert r.carrier_of == s.carrier_of
    assert r.retained == s.retained
    assert r.child.simplices == s.child.simplices
