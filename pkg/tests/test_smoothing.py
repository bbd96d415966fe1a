import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plsmooth import catalog
from plsmooth.geometry import sample_simplex
from plsmooth.maps import MapEvaluator, PLMap
from plsmooth.profile import BumpProfile, smoothstep, smoothstep_prime
from plsmooth.shrink_widen import build_covering
from plsmooth.smoothing import (CoveringDefect, approximate, estimate_lipschitz, identity_smoother,
                                partition_of_unity, smoother_sequence, synthesize)


def samples(K, n, rng):
    return np.vstack([K.vertices] + [sample_simplex(K.coords(s), n, rng, 0.3)
                                     for s in K.simplices if len(s) > 1])


class TestProfile:
    def test_ends_and_midpoint(self):
        np.testing.assert_array_equal(smoothstep([-1.0, 0.0, 1.0, 2.0]), [0, 0, 1, 1])
        assert smoothstep(0.5) == pytest.approx(0.5)

    @given(st.floats(0.01, 0.99))
    def test_derivative_matches_difference(self, u):
        h = 1e-6
        fd = (smoothstep(u + h) - smoothstep(u - h)) / (2 * h)
        assert smoothstep_prime(u) == pytest.approx(fd, rel=1e-5, abs=1e-8)
        assert smoothstep_prime(u) > 0

    def test_all_derivatives_vanish_at_ends(self):
        # exp(-1/t) is flat at 0: the first difference quotient is below any power
        for t in [1e-2, 1e-3]:
            assert smoothstep(t) / t**6 < 1e-10

    def test_bump(self):
        p = BumpProfile(0.25, 1.0)
        np.testing.assert_array_equal(p([0.0, 0.1, 0.25, 1.0, 3.0]), [1, 1, 1, 0, 0])
        t = np.linspace(0.25, 1.0, 200)
        assert (np.diff(p(t)) <= 0).all()
        np.testing.assert_allclose(p(t) + p.rising(t), 1.0, atol=1e-15)
        h = 1e-6
        np.testing.assert_allclose(p.derivative(0.6), (p(0.6 + h) - p(0.6 - h)) / (2 * h), rtol=1e-5)

    @pytest.mark.parametrize("a,b", [(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)])
    def test_bump_rejects(self, a, b):
        with pytest.raises(ValueError):
            BumpProfile(a, b)


class TestPartition:
    @pytest.fixture(params=["edge", "triangle", "bowtie"])
    def cover(self, request):
        K = catalog.COMPLEXES[request.param]()
        return K, build_covering(K, 0.2)

    def test_sums_to_one_and_nonnegative(self, cover, rng):
        K, C = cover
        th = partition_of_unity(C).weights(samples(K, 2000, rng))
        assert np.abs(th.sum(axis=1) - 1).max() < 1e-10
        assert th.min() >= 0

    def test_support_inside_sets(self, cover, rng):
        K, C = cover
        x = samples(K, 2000, rng)
        th = partition_of_unity(C).weights(x)
        assert not (th > 0)[~C.members(x)].any()

    def test_gradients_match_differences(self, cover, rng):
        K, C = cover
        P = partition_of_unity(C)
        x = samples(K, 40, rng)
        v = rng.normal(size=x.shape)
        _, g = P.weights_and_gradients(x)
        h = 1e-7
        fd = (P.weights(x + h * v) - P.weights(x - h * v)) / (2 * h)
        np.testing.assert_allclose(np.einsum("nsp,np->ns", g, v), fd, atol=1e-4 * max(1, np.abs(fd).max()))

    def test_defect_outside(self):
        C = build_covering(catalog.edge(), 0.1)
        with pytest.raises(CoveringDefect) as err:
            partition_of_unity(C).weights([[5.0]])
        assert err.value.points.shape == (1, 1)


class TestSynthesis:
    def test_constant_map_stays_constant(self, rng):
        K = catalog.triangle()
        g = PLMap(K, np.tile([0.3, 0.4], (3, 1)))
        sm = synthesize(g, K, K, 0.1)
        y = sm(samples(K, 500, rng))
        np.testing.assert_allclose(y, np.broadcast_to([0.3, 0.4], y.shape), atol=1e-14)

    @pytest.mark.parametrize("delta", [0.2, 0.02])
    def test_within_delta_of_pl_map(self, delta, rng):
        K = catalog.two_triangles()
        g = PLMap(K, K.vertices[:, ::-1] * [1.0, 0.5])
        sm = synthesize(g, K, K, delta)
        x = samples(K, 3000, rng)
        assert np.linalg.norm(sm(x) - g(x), axis=1).max() < delta
        assert sm.lipschitz == pytest.approx(g.lipschitz())
        assert sm.meta["delta"] == delta

    def test_derivative_matches_difference(self, rng):
        K = catalog.triangle()
        sm = identity_smoother(K, 0.1)
        x = sample_simplex(K.coords((0, 1, 2)), 50, rng)
        v = rng.normal(size=x.shape)
        h = 1e-6
        fd = (sm(x + h * v) - sm(x - h * v)) / (2 * h)
        np.testing.assert_allclose(sm.derivative(x, v), fd, atol=1e-4 * max(1, np.abs(fd).max()))

    def test_evaluator_input_uses_declared_lipschitz(self, rng):
        K = catalog.interval(3)
        f = catalog.wobble()
        sm = synthesize(f, K, catalog.interval(1, 3.0), 0.05)
        assert not sm.lipschitz_estimated and sm.lipschitz == 1.5
        x = samples(K, 3000, rng)
        assert np.abs(sm(x) - f(x)).max() < 0.05

    def test_lipschitz_estimate_is_upper(self):
        K = catalog.interval(3)
        f = MapEvaluator(catalog.wobble().func, "anon")
        assert estimate_lipschitz(f, K) >= 1.5 - 1e-3

    def test_rejects_nonpositive_delta(self):
        K = catalog.edge()
        with pytest.raises(ValueError):
            synthesize(PLMap(K, K.vertices), K, K, 0.0)


class TestIdentitySmoother:
    @pytest.mark.parametrize("eps", [0.3, 0.05])
    def test_displacement_and_simplices_kept(self, eps, rng):
        K = catalog.bowtie()
        sm = identity_smoother(K, eps, density=300)
        x = samples(K, 2000, rng)
        y = sm(x)
        assert np.linalg.norm(y - x, axis=1).max() < eps
        # each top simplex is mapped into itself
        for t in K.maximal:
            xt = sample_simplex(K.coords(t), 300, rng)
            lam = K.frame(t).coords(sm(xt))
            assert lam.min() >= -1e-9

    def test_rejects_bad_epsilon(self):
        with pytest.raises(ValueError):
            identity_smoother(catalog.edge(), 0.0)
        with pytest.raises(ValueError):
            smoother_sequence(catalog.edge(), -1)

    def test_sequence(self, rng):
        K = catalog.edge()
        seq = smoother_sequence(K, 3, density=200)
        x = samples(K, 5000, rng)
        errs = [np.abs(s(x) - x).max() for s in seq]
        assert all(e < 2.0**-n for n, e in enumerate(errs))


def test_pipeline_rejects_nonpositive_epsilon():
    with pytest.raises(ValueError):
        approximate(catalog.example_1_11(), catalog.cross_domain(), catalog.cross_target(), 0.0)


def test_pipeline_interval(rng):
    K, L = catalog.interval(3), catalog.interval(1, 3.0)
    f = catalog.wobble()
    res = approximate(f, K, L, 0.2, density=300)
    assert res.budget.budget == pytest.approx(min(1.0 / 4, 0.2 / 2))
    x = np.linspace(0, 3, 10_000)[:, None]
    y = res.H(x)
    assert np.abs(y - f(x)).max() < 0.2
    assert y.min() >= -1e-9 and y.max() <= 3 + 1e-9
