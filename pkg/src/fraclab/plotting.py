"""SVG figures for solutions, conjugates, capacities, sequences and evolutions."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402
from matplotlib.tri import Triangulation  # noqa: E402

from .geometry import Crack, Domain, components  # noqa: E402

# fixed salt and no date stamp keep the SVG output reproducible
plt.rcParams["svg.hashsalt"] = "fraclab"
_SAVE = {"format": "svg", "metadata": {"Date": None}, "bbox_inches": "tight"}
_PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path


def draw_domain(ax, dom: Domain, *, lw: float = 1.2) -> None:
    """Outer boundary and holes; Dirichlet edges solid black, Neumann dashed grey."""
    for v, tags in dom.loops():
        for i, tag in enumerate(tags):
            a, b = v[i], v[(i + 1) % len(v)]
            style = {"color": "k", "ls": "-"} if tag == "D" else {"color": "0.5", "ls": "--"}
            ax.plot([a[0], b[0]], [a[1], b[1]], lw=lw, **style)


def draw_crack(ax, K: Crack, *, color="#d62728", lw: float = 2.0, by_component: bool = False) -> None:
    pieces = components(K) if by_component else [K]
    for k, piece in enumerate(pieces):
        segs = piece.segments()
        if not len(segs):
            continue
        c = _PALETTE[k % len(_PALETTE)] if by_component else color
        ax.add_collection(LineCollection(segs, colors=c, linewidths=lw))
        pts = segs[np.all(segs[:, 0] == segs[:, 1], axis=1), 0]
        if len(pts):
            ax.plot(pts[:, 0], pts[:, 1], "o", color=c, ms=3)


def _frame(ax, dom: Domain) -> None:
    x0, y0, x1, y1 = dom.bbox()
    pad = 0.03 * max(x1 - x0, y1 - y0)
    ax.set_xlim(x0 - pad, x1 + pad)
    ax.set_ylim(y0 - pad, y1 + pad)
    ax.set_aspect("equal")


def plot_geometry(dom: Domain, K: Crack, path) -> Path:
    fig, ax = plt.subplots(figsize=(4, 4))
    draw_domain(ax, dom)
    draw_crack(ax, K, by_component=True)
    _frame(ax, dom)
    ax.set_title("domain and crack")
    return _save(fig, path)


def plot_solution(sol, path, title: str = "u") -> Path:
    mesh = sol.mesh
    tri = Triangulation(mesh.points[:, 0], mesh.points[:, 1], mesh.triangles)
    fig, ax = plt.subplots(figsize=(5, 4.2))
    # per-triangle mean keeps both sides of a crack visible
    face = sol.u[mesh.triangles].mean(axis=1)
    pc = ax.tripcolor(tri, facecolors=face, cmap="viridis", rasterized=True)
    fig.colorbar(pc, ax=ax, shrink=0.85)
    draw_domain(ax, mesh.domain)
    draw_crack(ax, mesh.crack, color="w")
    _frame(ax, mesh.domain)
    ax.set_title(title)
    return _save(fig, path)


def plot_conjugate(v, path) -> Path:
    mesh = v.mesh
    P = mesh.geo_points
    tri = Triangulation(P[:, 0], P[:, 1], mesh.geo_triangles[v.triangles])
    fig, ax = plt.subplots(figsize=(5, 4.2))
    pc = ax.tripcolor(tri, facecolors=v.center, cmap="coolwarm", rasterized=True)
    fig.colorbar(pc, ax=ax, shrink=0.85, label="v")
    xy = v.midpoints_xy
    if len(xy) > 3:
        try:
            ax.tricontour(xy[:, 0], xy[:, 1], v.midpoint, levels=12, colors="k", linewidths=0.4)
        except (ValueError, RuntimeError):
            pass
    draw_domain(ax, mesh.domain)
    draw_crack(ax, mesh.crack, by_component=True, lw=2.5)
    _frame(ax, mesh.domain)
    ax.set_title(f"conjugate v  (circulation {v.circulation_residual:.1e})")
    return _save(fig, path)


def plot_capacity(res, B: Domain, path) -> Path:
    m = res.mesh
    tri = Triangulation(m.points[:, 0], m.points[:, 1], m.triangles)
    fig, ax = plt.subplots(figsize=(5, 4.2))
    pc = ax.tripcolor(tri, res.u, cmap="magma", shading="gouraud", rasterized=True)
    fig.colorbar(pc, ax=ax, shrink=0.85)
    draw_domain(ax, B, lw=0.8)
    _frame(ax, B)
    ax.set_title(f"capacity potential, value {res.value:.4g}")
    return _save(fig, path)


def plot_error_decay(tables: dict, path, ylabel: str = "relative gradient error") -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for k, (label, table) in enumerate(tables.items()):
        h = table.column("h")
        e = table.column("rel_error_p")
        ok = np.isfinite(e)
        ax.loglog(h[ok], e[ok], "o-", color=_PALETTE[k % len(_PALETTE)], label=label)
    ax.set_xlabel("sequence index h")
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", lw=0.3)
    ax.legend()
    return _save(fig, path)


def plot_crack_history(dom: Domain, state, path, max_panels: int = 12) -> Path:
    n = len(state.times)
    if n == 0:
        fig, ax = plt.subplots(figsize=(3, 3))
        ax.set_title("no recorded steps")
        return _save(fig, path)
    idx = np.unique(np.linspace(0, n - 1, min(n, max_panels)).round().astype(int))
    fig, axes = plt.subplots(1, len(idx), figsize=(1.8 * len(idx), 2.2), squeeze=False)
    for ax, i in zip(axes[0], idx):
        draw_domain(ax, dom, lw=0.8)
        draw_crack(ax, state.cracks[i])
        _frame(ax, dom)
        ax.set_xticks([])
        ax.set_yticks([])
        ax.set_title(f"t={state.times[i]:.3g}", fontsize=8)
    return _save(fig, path)
