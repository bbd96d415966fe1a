import numpy as np
import pytest

from plsmooth import catalog, io
from plsmooth.maps import PLMap, SimplicialMap
from plsmooth.shrink_widen import build_covering
from plsmooth.smoothing import identity_smoother
from plsmooth.subdivision import sd_mod


def roundtrip(obj, tmp_path):
    return io.load(io.save(obj, tmp_path / "obj.json"))


def test_complex(tmp_path):
    K = catalog.bowtie()
    R = roundtrip(K, tmp_path)
    np.testing.assert_array_equal(R.vertices, K.vertices)
    assert R.simplices == K.simplices


def test_subdivision(tmp_path):
    sub = sd_mod(catalog.two_triangles(), [(0,), (1,), (0, 1)])
    R = roundtrip(sub, tmp_path)
    assert R.carrier_of == sub.carrier_of and R.retained == sub.retained
    np.testing.assert_array_equal(R.child.vertices, sub.child.vertices)


def test_maps(tmp_path):
    K = catalog.interval(3)
    G = SimplicialMap(K, catalog.interval(2), [0, 1, 1, 2])
    assert roundtrip(G, tmp_path).vertex_image.tolist() == [0, 1, 1, 2]
    f = PLMap(K, [[0.0], [2.0], [1.0], [3.0]])
    x = np.linspace(0, 3, 50)[:, None]
    np.testing.assert_array_equal(roundtrip(f, tmp_path)(x), f(x))


def test_covering_and_smooth_map(tmp_path):
    K = catalog.triangle()
    C = build_covering(K, 0.2)
    x = np.random.default_rng(0).uniform(0, 1, (500, 2))
    np.testing.assert_array_equal(roundtrip(C, tmp_path).members(x), C.members(x))
    sm = identity_smoother(K, 0.1, density=200)
    x = x[x.sum(axis=1) <= 1]
    np.testing.assert_allclose(roundtrip(sm, tmp_path)(x), sm(x), atol=1e-15)


def test_builtin_and_errors(tmp_path):
    assert io.load("@edge").n_vertices == 2
    with pytest.raises(ValueError):
        io.load("@missing")
    with pytest.raises(ValueError):
        io.decode({"kind": "nonsense"})
    with pytest.raises(TypeError):
        io.encode(object())
