"""Diagnostic SVG figures (headless matplotlib)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .complex import Complex  # noqa: E402
from .geometry import sample_simplex  # noqa: E402
from .maps import PLMap  # noqa: E402
from .shrink_widen import Covering  # noqa: E402
from .smoothing import SmoothMap  # noqa: E402
from .subdivision import Subdivision  # noqa: E402

# fixed view for ambient dimension 3 and above
_VIEW = np.array([[0.8944, -0.4472, 0.0], [0.1826, 0.3651, 0.9129]])


def planar(x) -> np.ndarray:
    """Orthographic view of points in the plane."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    p = x.shape[1]
    if p == 1:
        return np.column_stack([x[:, 0], np.zeros(len(x))])
    if p == 2:
        return x
    return x[:, :3] @ _VIEW.T


def draw_complex(ax, K: Complex, color: str = "k", lw: float = 1.0, fill: bool = True,
                 labels: bool = False) -> None:
    V = planar(K.vertices)
    if fill:
        for s in K.of_dim(2):
            ax.fill(*V[list(s)].T, color=color, alpha=0.08, lw=0)
    for a, b in K.of_dim(1):
        ax.plot(*V[[a, b]].T, color=color, lw=lw)
    ax.plot(*V.T, "o", color=color, ms=3)
    if labels:
        for i, v in enumerate(V):
            ax.annotate(str(i), v, fontsize=7, xytext=(3, 3), textcoords="offset points")
    ax.set_aspect("equal", adjustable="datalim")


def _samples(K: Complex, n: int = 400, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pts = [K.vertices] + [sample_simplex(K.coords(s), n, rng) for s in K.maximal if len(s) > 1]
    return np.vstack(pts)


def figure(obj, title: str = "") -> plt.Figure:
    fig, ax = plt.subplots(figsize=(5, 5))
    if isinstance(obj, Subdivision):
        draw_complex(ax, obj.child, "tab:blue", 0.6)
        draw_complex(ax, obj.parent, "k", 1.4, fill=False)
    elif isinstance(obj, Complex):
        draw_complex(ax, obj, labels=obj.n_vertices <= 30)
    elif isinstance(obj, Covering):
        K = obj.complex
        draw_complex(ax, K, fill=False)
        x = _samples(K, 1500)
        n = obj.members(x).sum(axis=1)
        sc = ax.scatter(*planar(x).T, c=n, s=3, cmap="viridis")
        fig.colorbar(sc, ax=ax, label="sets containing point")
    elif isinstance(obj, (SmoothMap, PLMap)):
        _draw_map(fig, ax, obj)
    else:
        raise TypeError(f"no figure for {type(obj).__name__}")
    ax.set_title(title or type(obj).__name__, fontsize=9)
    return fig


def _draw_map(fig, ax, F) -> None:
    K = F.source
    target = getattr(F, "target", None)
    x = _samples(K, 800)
    y = F(x)
    if K.dim == 1:
        order = np.argsort(x[:, 0]) if K.ambient_dim == 1 else np.arange(len(x))
        if target is not None:
            draw_complex(ax, target, "0.6", fill=False)
        yy = planar(y)
        if K.ambient_dim == 1:
            ax.plot(*yy[order].T, ".", ms=2, color="tab:red", label="image")
        else:
            ax.scatter(*yy.T, s=2, color="tab:red", label="image")
        ax.legend(fontsize=7)
        return
    draw_complex(ax, K, fill=False)
    disp = np.linalg.norm(y - x, axis=1) if y.shape[1] == x.shape[1] else np.linalg.norm(y, axis=1)
    sc = ax.scatter(*planar(x).T, c=disp, s=3, cmap="magma")
    fig.colorbar(sc, ax=ax, label="displacement" if y.shape[1] == x.shape[1] else "image norm")


def scatter_values(points, values, title: str = "", label: str = "") -> plt.Figure:
    fig, ax = plt.subplots(figsize=(5, 5))
    sc = ax.scatter(*planar(points).T, c=values, s=2, cmap="viridis")
    fig.colorbar(sc, ax=ax, label=label)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_title(title, fontsize=9)
    return fig


def contour(X, Y, Z, title: str = "", xlabel: str = "", ylabel: str = "") -> plt.Figure:
    fig, ax = plt.subplots(figsize=(5, 4.5))
    cs = ax.contourf(X, Y, Z, levels=20, cmap="viridis")
    ax.contour(X, Y, Z, levels=10, colors="k", linewidths=0.4)
    fig.colorbar(cs, ax=ax)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title, fontsize=9)
    return fig


def curve(xs, ys, title: str = "", labels=None) -> plt.Figure:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ys = np.atleast_2d(np.asarray(ys))
    for i, row in enumerate(ys):
        ax.plot(xs, row, lw=1, label=None if labels is None else labels[i])
    if labels is not None:
        ax.legend(fontsize=7)
    ax.set_title(title, fontsize=9)
    return fig


def save_svg(fig_or_obj, path, title: str = "") -> Path:
    fig = fig_or_obj if isinstance(fig_or_obj, plt.Figure) else figure(fig_or_obj, title)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    return path
