import numpy as np
import pytest

from plsmooth import catalog, io
from plsmooth.complex import Complex
from plsmooth.geometry import sample_simplex
from plsmooth.maps import (IterationCapExceeded, MapEvaluator, PLMap, SimplicialMap, StageFailure,
                           check_star_condition, retract, staged_weakly_simplicial, zeeman_relative)
from plsmooth.subdivision import sd_iter

from .strategies import lstsq_weights


def triangle_circle() -> Complex:
    ang = np.deg2rad([0, 120, 240])
    return Complex(np.column_stack([np.cos(ang), np.sin(ang)]), [[0, 1], [1, 2], [0, 2]])


def radial_onto(L: Complex) -> MapEvaluator:
    """Send x to the point of |L| on the ray through x (L star-shaped about 0)."""
    edges = [L.coords(e) for e in L.of_dim(1)]

    def f(x):
        d = x / np.linalg.norm(x, axis=1, keepdims=True)
        out = np.empty_like(d)
        for i, di in enumerate(d):
            for a, b in edges:
                # t*di = a + s*(b-a), solve for (t, s)
                t, s = np.linalg.solve(np.column_stack([di, a - b]), a)
                if t > 0 and -1e-12 <= s <= 1 + 1e-12:
                    out[i] = t * di
                    break
        return out

    return MapEvaluator(f, "radial")


class TestStarCondition:
    def test_identity_gives_identity(self):
        K = catalog.two_triangles()
        r = check_star_condition(catalog.identity(2), K, K, density=200)
        assert r.status == "pass"
        assert r.assignment == {v: v for v in range(K.n_vertices)}

    def test_recovers_simplicial_vertex_map(self):
        K, L = catalog.interval(3), catalog.interval(2)
        vmap = [0, 1, 1, 2]
        G = SimplicialMap(K, L, vmap)
        r = check_star_condition(G.evaluator(), K, L, density=300)
        assert r.status == "pass"
        assert [r.assignment[v] for v in range(4)] == vmap

    def test_square_to_triangle_circle(self):
        K, L = catalog.diamond(), triangle_circle()
        F = radial_onto(L)
        first = None
        for k in range(4):
            r = check_star_condition(F, sd_iter(K, (), k).child, L, density=1000)
            if k == 0:
                assert r.status == "fail" and r.witness is not None
            if r.status == "pass" and first is None:
                first = k
        assert first in (1, 2)

    def test_witness_vertex_has_no_valid_target(self):
        K, L = catalog.diamond(), triangle_circle()
        F = radial_onto(L)
        v, x = check_star_condition(F, K, L, density=1000).witness
        assert any(v in e for e in K.of_dim(1) if K.distance(x[None], [e])[0] < 1e-12)

        def in_open_star(u, y):
            for e in L.of_dim(1):
                w = lstsq_weights(L.coords(e), y)
                on = np.linalg.norm(w @ L.coords(e) - y) < 1e-9 and (w >= -1e-9).all()
                if u in e and on and w[list(e).index(u)] > 1e-9:
                    return True
            return False

        t = np.linspace(0.01, 0.99, 99)[:, None]
        star_pts = np.vstack([(1 - t) * K.vertices[v] + t * K.vertices[e[0] + e[1] - v]
                              for e in K.of_dim(1) if v in e] + [K.vertices[[v]]])
        images = F(star_pts)
        for u in range(L.n_vertices):
            assert not all(in_open_star(u, y) for y in images)


class TestZeeman:
    def test_already_simplicial(self):
        K, L = catalog.interval(3), catalog.interval(2)
        G = SimplicialMap(K, L, [0, 1, 1, 2])
        z = zeeman_relative(G.evaluator(), K, [(0,)], L, 0.1, density=200, min_samples=0)
        assert (z.kappa, z.ell) == (0, 0)
        assert z.G.vertex_image.tolist() == [0, 1, 1, 2]
        assert z.sup_error < 1e-12

    def test_identity_relative_to_everything(self):
        K = catalog.triangle()
        z = zeeman_relative(catalog.identity(2), K, K.simplices, K, 0.01, density=200)
        assert (z.kappa, z.ell) == (0, 0) and z.pinned_exact
        assert z.sup_error < 1e-12

    def test_degree_two_circle(self):
        K = catalog.diamond()
        F = catalog.degree2_circle()
        z = zeeman_relative(F, K, [(0,)], K, 0.5)
        assert z.kappa <= 4 and z.ell <= 3
        assert z.pinned_exact and z.G.vertex_image[0] == 0
        np.testing.assert_array_equal(z.G(K.vertices[[0]])[0], F(K.vertices[[0]])[0])
        # independent sup check on fresh samples of the subdivided circle
        rng = np.random.default_rng(7)
        Ks = z.source.child
        x = np.vstack([sample_simplex(Ks.coords(e), 10_000 // len(Ks.of_dim(1)) + 1, rng)
                       for e in Ks.of_dim(1)])
        assert len(x) >= 10_000
        assert np.linalg.norm(z.G(x) - F(x), axis=1).max() < 0.5
        assert not z.G.violations()

    def test_cap_exceeded(self):
        K = catalog.diamond()
        with pytest.raises(IterationCapExceeded):
            zeeman_relative(catalog.degree2_circle(), K, [(0,)], K, 0.5, cap=0, min_samples=0)

    def test_rejects_nonpositive_epsilon(self):
        K = catalog.edge()
        with pytest.raises(ValueError):
            zeeman_relative(catalog.identity(1), K, (), K, 0.0)

    def test_agrees_on_H_samples(self):
        K = catalog.interval(3)
        F = catalog.wobble()
        z = zeeman_relative(F, K, [(0,), (3,)], catalog.interval(1, 3.0), 0.3, min_samples=2000)
        assert z.pinned_exact
        np.testing.assert_array_equal(z.G(K.vertices[[0, 3]]), F(K.vertices[[0, 3]]))


class TestStaged:
    L = catalog.interval(1, 3.0)

    def test_interval_three_stages(self):
        K = catalog.interval(3)
        F = catalog.wobble()
        filt = [[(0, 1)], [(0, 1), (1, 2)], K.simplices]
        res = staged_weakly_simplicial(F, K, filt, self.L, 0.2, density=400)
        Fs = res.F_star
        for st in res.stages:
            assert st["zeeman_error"] < st["epsilon"] / 3
        x = np.linspace(0, 3, 10_000)[:, None]
        assert np.linalg.norm(Fs(x) - F(x), axis=1).max() < 0.2
        assert not Fs.incoherent()
        # stability: the last evaluator equals the previous one two stages back
        x0 = np.linspace(0, 1, 1000)[:, None]
        np.testing.assert_allclose(res.evaluators[3](x0), res.evaluators[2](x0), atol=1e-12)

    def test_single_stage_matches_zeeman(self):
        K = catalog.interval(3)
        F = catalog.wobble()
        res = staged_weakly_simplicial(F, K, [K.simplices], self.L, 0.3, density=400)
        assert len(set(res.F_star.level_of.values())) == 1
        # a single stage spends a sixth of the tolerance on the approximation
        z = zeeman_relative(F, K, (), self.L, 0.3 / 6, density=400, seed=0)
        assert res.stages[0]["kappa"] == z.kappa and res.stages[0]["ell"] == z.ell

    def test_already_weakly_simplicial(self):
        K = catalog.interval(3)
        G = SimplicialMap(K, self.L, [0, 0, 1, 1])
        res = staged_weakly_simplicial(G.evaluator(), K, [[(0, 1)], K.simplices], self.L, 0.2,
                                       density=200)
        x = np.linspace(0, 3, 2000)[:, None]
        assert np.abs(res.F_star(x) - G(x)).max() < 1e-12

    def test_rejects_bad_filtration(self):
        K = catalog.interval(3)
        with pytest.raises(ValueError):
            staged_weakly_simplicial(catalog.wobble(), K, [[(0, 1)]], self.L, 0.2)
        with pytest.raises(ValueError):
            staged_weakly_simplicial(catalog.wobble(), K, [[(1, 2)], [(0, 1)], K.simplices],
                                     self.L, 0.2)

    def test_stage_failure_carries_index(self):
        K = catalog.interval(3)
        with pytest.raises(StageFailure) as err:
            staged_weakly_simplicial(catalog.wobble(), K, [K.simplices], self.L, 1e-6, cap=1,
                                     density=100)
        assert err.value.stage == 0


@pytest.fixture(scope="module")
def staged():
    K = catalog.interval(3)
    L = catalog.interval(1, 3.0)
    return staged_weakly_simplicial(catalog.wobble(), K, [[(0, 1)], K.simplices], L, 0.3,
                                    density=300)


class TestWeaklySimplicial:
    def test_vertices_and_midpoints(self, staged):
        Fs = staged.F_star
        K = Fs.source
        np.testing.assert_allclose(Fs(K.vertices), Fs.images, atol=1e-15)
        for a, b in K.of_dim(1):
            mid = (K.vertices[a] + K.vertices[b]) / 2
            np.testing.assert_allclose(Fs(mid[None])[0], (Fs.images[a] + Fs.images[b]) / 2,
                                       atol=1e-14)

    def test_images_in_certificates(self, staged):
        Fs = staged.F_star
        K, L = Fs.source, Fs.target
        rng = np.random.default_rng(1)
        for s in K.simplices:
            xi = Fs.certificate(s)
            y = Fs(sample_simplex(K.coords(s), 1000, rng))
            w = np.array([lstsq_weights(L.coords(xi), p) for p in y])
            assert w.min() >= -1e-9
            assert np.abs(w @ L.coords(xi) - y).max() < 1e-9

    def test_levels_cumulative(self, staged):
        ells = [st["ell"] for st in staged.stages]
        assert max(staged.F_star.level_of.values()) == sum(ells)

    def test_serialized_form(self, staged):
        d = staged.F_star.to_dict()
        assert set(d) == {"vertex_image", "levels"}
        r = io.decode(io.encode(staged.F_star))
        np.testing.assert_array_equal(r.image_ids, staged.F_star.image_ids)
        assert r.level_of == staged.F_star.level_of


def test_pl_map_interpolates():
    K = catalog.triangle()
    f = PLMap(K, [[0.0], [2.0], [4.0]])
    assert f([[0.25, 0.25]])[0, 0] == pytest.approx(1.5)
    assert f.lipschitz() == pytest.approx(np.hypot(2, 4))


def test_retract_projects_and_breaks_ties():
    L = catalog.cross_target()
    np.testing.assert_allclose(retract(L, [[0.5, 0.2]]), [[0.5, 0.0]])
    tie = np.array([[0.3, -0.3]])
    assert retract(L, tie, previous=[[0.3, 0.0]])[0, 1] == 0.0
    assert retract(L, tie, previous=[[0.0, -0.3]])[0, 0] == 0.0
