"""JSON envelopes for complexes, maps, coverings, smooth maps and reports.

Every document carries a ``kind`` field; :func:`load` dispatches on it.
A bare ``{"vertices", "simplices"}`` object is read as a complex.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import catalog
from .complex import Complex
from .maps import PLMap, SimplicialMap, WeaklySimplicialMap, _LevelCache
from .shrink_widen import Covering
from .smoothing import SmoothMap, partition_of_unity
from .subdivision import Subdivision


def _key(s) -> str:
    return ",".join(map(str, s))


def _unkey(k: str) -> tuple:
    return tuple(int(v) for v in k.split(",")) if k else ()


def encode(obj) -> dict:
    if isinstance(obj, Complex):
        return {"kind": "complex", **obj.to_dict()}
    if isinstance(obj, Subdivision):
        return {"kind": "subdivision", "parent": obj.parent.to_dict(), **obj.to_dict()}
    if isinstance(obj, WeaklySimplicialMap):
        return {"kind": "weakly_simplicial_map", "source": obj.source.to_dict(),
                "target": obj.target.to_dict(), **obj.to_dict()}
    if isinstance(obj, SimplicialMap):
        return {"kind": "simplicial_map", "source": obj.source.to_dict(),
                "target": obj.target.to_dict(), "vertex_image": obj.vertex_image.tolist()}
    if isinstance(obj, PLMap):
        return {"kind": "pl_map", "source": obj.source.to_dict(), "images": obj.images.tolist()}
    if isinstance(obj, Covering):
        return {"kind": "covering", **obj.to_dict()}
    if isinstance(obj, SmoothMap):
        return _encode_smooth(obj)
    if isinstance(obj, list) and all(hasattr(r, "to_dict") for r in obj):
        return {"kind": "reports", "reports": [r.to_dict() for r in obj]}
    raise TypeError(f"cannot encode {type(obj).__name__}")


def _encode_smooth(sm: SmoothMap) -> dict:
    if sm.post is not None:
        raise TypeError("smooth maps with an outer map are not serialisable")
    if isinstance(sm.g, PLMap):
        g = {"pl_images": sm.g.images.tolist(), "source": sm.g.source.to_dict()}
    else:
        g = {"evaluator": sm.g.name}
    delta = sm.meta.get("delta")
    if delta is None:
        delta = float(np.min(sm.delta(sm.source.vertices)))
    return {"kind": "smooth_map", "map": g, "covering": sm.covering.to_dict(),
            "target": sm.target.to_dict(), "delta": delta, "lipschitz": sm.lipschitz,
            "certificates": {_key(s): list(t) for s, t in sm.certificates.items()}}


def decode(data: dict):
    kind = data.get("kind", "complex" if "vertices" in data else None)
    if kind == "complex":
        return Complex.from_dict(data)
    if kind == "subdivision":
        parent = Complex.from_dict(data["parent"], validate=False)
        child = Complex.from_dict(data, validate=False)
        carriers = {tuple(c): tuple(p) for c, p in data["carriers"]}
        return Subdivision(child, parent, carriers, data.get("levels", 1),
                           frozenset(tuple(s) for s in data.get("retained", [])))
    if kind == "pl_map":
        return PLMap(Complex.from_dict(data["source"], validate=False), data["images"])
    if kind == "simplicial_map":
        return SimplicialMap(Complex.from_dict(data["source"], validate=False),
                             Complex.from_dict(data["target"], validate=False),
                             data["vertex_image"])
    if kind == "weakly_simplicial_map":
        src = Complex.from_dict(data["source"], validate=False)
        tgt = Complex.from_dict(data["target"], validate=False)
        ids = np.array([data["vertex_image"][str(i)] for i in range(src.n_vertices)])
        levels = {_unkey(k): int(v) for k, v in data["levels"].items()}
        return WeaklySimplicialMap(src, tgt, ids, levels, _LevelCache(tgt))
    if kind == "covering":
        return Covering.from_dict(data)
    if kind == "smooth_map":
        return _decode_smooth(data)
    if kind == "reports":
        return data["reports"]
    raise ValueError(f"unknown document kind {kind!r}")


def _decode_smooth(data: dict) -> SmoothMap:
    C = Covering.from_dict(data["covering"])
    g = data["map"]
    if "pl_images" in g:
        fn = PLMap(Complex.from_dict(g["source"], validate=False), g["pl_images"])
    else:
        fn = catalog.EVALUATORS[g["evaluator"]]()
    d = float(data["delta"])
    sm = SmoothMap(fn, C, partition_of_unity(C), Complex.from_dict(data["target"], validate=False),
                   {_unkey(k): tuple(v) for k, v in data["certificates"].items()},
                   lambda x: np.full(len(np.atleast_2d(x)), d), data.get("lipschitz", 0.0))
    sm.meta["delta"] = d
    return sm


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"{type(o).__name__} is not JSON serialisable")


def dumps(obj) -> str:
    data = obj if isinstance(obj, dict) else encode(obj)
    return json.dumps(data, default=_default, indent=1)


def save(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def read_json(source) -> dict:
    """Parse a path, or ``@name`` for a built-in complex."""
    s = str(source)
    if s.startswith("@"):
        name = s[1:]
        if name not in catalog.COMPLEXES:
            raise ValueError(f"unknown built-in complex {name!r}")
        return encode(catalog.COMPLEXES[name]())
    return json.loads(Path(s).read_text())


def load(source):
    return decode(read_json(source))
