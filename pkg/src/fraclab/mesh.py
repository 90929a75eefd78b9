"""Structured crack-conforming triangulations.

Grid squares of side 1/n are split along the (0,0)-(1,1) diagonal.  Crack
segments must run along mesh edges; nodes on a crack are duplicated once
per fan of triangles separated by crack edges, so crack tips keep a
single node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .fem import P1Space
from .geometry import DIRICHLET, NEUMANN, Crack, Domain, point_in_polygon

GRID_TOL = 1e-7

TAG_INTERIOR = 0
TAG_DIRICHLET = 1
TAG_NEUMANN = 2
TAG_CRACK = 3


class MeshError(ValueError):
    pass


def _grid_coord(v: float, origin: float, n: int) -> int:
    r = (v - origin) * n
    k = round(r)
    if abs(r - k) > GRID_TOL:
        raise MeshError(f"coordinate {v!r} is not on the grid of resolution {n}")
    return int(k)


def _unique_edges(tri: np.ndarray):
    """Sorted unique edges of a triangle list with up to two adjacent triangles."""
    T = len(tri)
    e = np.concatenate([tri[:, [1, 2]], tri[:, [2, 0]], tri[:, [0, 1]]])
    owner = np.tile(np.arange(T), 3)
    e_sorted = np.sort(e, axis=1)
    edges, inv = np.unique(e_sorted, axis=0, return_inverse=True)
    inv = inv.ravel()
    adj = np.full((len(edges), 2), -1, np.int64)
    order = np.argsort(inv, kind="stable")
    inv_s = inv[order]
    first = np.ones(len(order), bool)
    first[1:] = inv_s[1:] != inv_s[:-1]
    adj[inv_s[first], 0] = owner[order][first]
    adj[inv_s[~first], 1] = owner[order][~first]
    return edges, adj


@dataclass(eq=False)
class CrackedMesh:
    """Triangulation of a polygonal domain minus a polyline crack.

    ``points``/``triangles`` use duplicated node ids; ``parent`` maps each
    node to its geometric grid node and ``geo_triangles`` uses those ids.
    Geometric edges (``edges``) keep both adjacent triangles even across a
    crack; ``crack_edge`` flags the ones on K.
    """

    domain: Domain
    crack: Crack
    n: int
    origin: tuple[float, float]
    shape: tuple[int, int]
    points: np.ndarray
    triangles: np.ndarray
    parent: np.ndarray
    geo_points: np.ndarray
    geo_triangles: np.ndarray
    edges: np.ndarray
    edge_tris: np.ndarray
    crack_edge: np.ndarray
    boundary_tag: np.ndarray  # per geometric edge: "", "D" or "N"
    cell_lookup: np.ndarray   # (ny, nx, 2) triangle index or -1
    node_tag: np.ndarray
    dirichlet: np.ndarray
    n_duplicated: int

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @cached_property
    def space(self) -> P1Space:
        return P1Space(self.points, self.triangles)

    @property
    def areas(self) -> np.ndarray:
        return self.space.areas

    @property
    def barycenters(self) -> np.ndarray:
        return self.space.barycenters

    @cached_property
    def removed(self) -> np.ndarray:
        # polyline cracks have no area, so no triangle lies inside K
        return np.zeros(len(self.triangles), bool)

    @cached_property
    def triangle_components(self) -> tuple[int, np.ndarray]:
        """Connected components of the triangle graph of Omega minus K."""
        edges, adj = _unique_edges(self.triangles)
        inner = adj[:, 1] >= 0
        a, b = adj[inner, 0], adj[inner, 1]
        T = len(self.triangles)
        g = coo_matrix((np.ones(len(a)), (a, b)), shape=(T, T))
        return connected_components(g, directed=False)

    @cached_property
    def node_components(self) -> np.ndarray:
        _, lab = self.triangle_components
        out = np.empty(len(self.points), np.int64)
        out[self.triangles.ravel()] = np.repeat(lab, 3)
        return out

    @property
    def n_components(self) -> int:
        return self.triangle_components[0]

    def pinned_nodes(self) -> np.ndarray:
        """Lowest-index node of every component without Dirichlet nodes."""
        ncomp, _ = self.triangle_components
        comp = self.node_components
        has_d = np.zeros(ncomp, bool)
        has_d[comp[self.dirichlet]] = True
        pins = []
        for c in np.nonzero(~has_d)[0]:
            pins.append(int(np.min(np.nonzero(comp == c)[0])))
        return np.asarray(sorted(pins), np.int64)

    def locate(self, pts) -> np.ndarray:
        """Triangle index containing each point (-1 outside the mesh)."""
        pts = np.atleast_2d(np.asarray(pts, float))
        ny, nx = self.shape
        s = (pts[:, 0] - self.origin[0]) * self.n
        t = (pts[:, 1] - self.origin[1]) * self.n
        i = np.floor(s).astype(np.int64)
        j = np.floor(t).astype(np.int64)
        i = np.where(i == nx, nx - 1, i)
        j = np.where(j == ny, ny - 1, j)
        ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
        upper = (t - j) > (s - i)
        out = np.full(len(pts), -1, np.int64)
        out[ok] = self.cell_lookup[j[ok], i[ok], upper[ok].astype(np.int64)]
        return out

    def crack_edges_on(self, piece: Crack, tol: float = 1e-9) -> np.ndarray:
        """Indices of geometric crack/boundary edges lying on ``piece``."""
        mids = 0.5 * (self.geo_points[self.edges[:, 0]] + self.geo_points[self.edges[:, 1]])
        segs = piece.segments()
        hit = np.zeros(len(mids), bool)
        for a, b in segs:
            d = b - a
            L2 = float(d @ d)
            if L2 == 0:
                continue
            t = np.clip(((mids - a) @ d) / L2, 0, 1)
            dist = np.hypot(*(mids - a - t[:, None] * d).T)
            hit |= dist <= tol
        return np.nonzero(hit)[0]


def build_mesh(dom: Domain, K: Crack, n: int) -> CrackedMesh:
    """Crack-conforming structured mesh of ``dom`` at ``n`` cells per unit length."""
    if n < 1:
        raise MeshError("resolution must be a positive integer")
    dom.validate_crack(K)
    x0, y0, x1, y1 = dom.bbox()
    nx = _grid_coord(x1, x0, n)
    ny = _grid_coord(y1, y0, n)
    for v, _t in dom.loops():
        for x, y in v:
            _grid_coord(x, x0, n)
            _grid_coord(y, y0, n)
    h = 1.0 / n
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    centers = np.c_[x0 + (ii.ravel() + 0.5) * h, y0 + (jj.ravel() + 0.5) * h]
    keep = point_in_polygon(centers, dom.vertices)
    for hv, _ in dom.holes:
        keep &= ~point_in_polygon(centers, hv)
    ci, cj = ii.ravel()[keep], jj.ravel()[keep]
    if ci.size == 0:
        raise MeshError("domain contains no grid cell")

    def gid(i, j):
        return j * (nx + 1) + i

    a, b, c, d = gid(ci, cj), gid(ci + 1, cj), gid(ci + 1, cj + 1), gid(ci, cj + 1)
    tri = np.empty((2 * ci.size, 3), np.int64)
    tri[0::2] = np.c_[a, b, c]
    tri[1::2] = np.c_[a, c, d]
    used, inv = np.unique(tri.ravel(), return_inverse=True)
    tri = inv.reshape(-1, 3)
    gi, gj = used % (nx + 1), used // (nx + 1)
    geo_points = np.c_[x0 + gi * h, y0 + gj * h]
    node_of = -np.ones((ny + 1) * (nx + 1), np.int64)
    node_of[used] = np.arange(len(used))
    lookup = -np.ones((ny, nx, 2), np.int64)
    k = np.arange(ci.size)
    lookup[cj, ci, 0] = 2 * k
    lookup[cj, ci, 1] = 2 * k + 1

    edges, edge_tris = _unique_edges(tri)
    edge_index = {(int(p), int(q)): e for e, (p, q) in enumerate(edges)}

    # crack edges
    crack_edge = np.zeros(len(edges), bool)
    for p0, p1 in K.segments():
        i0, j0 = _grid_coord(p0[0], x0, n), _grid_coord(p0[1], y0, n)
        i1, j1 = _grid_coord(p1[0], x0, n), _grid_coord(p1[1], y0, n)
        if (i0, j0) == (i1, j1):
            continue
        di, dj = i1 - i0, j1 - j0
        g = math.gcd(abs(di), abs(dj))
        si, sj = di // g, dj // g
        if (si, sj) not in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1)):
            raise MeshError(f"crack segment {tuple(p0)}-{tuple(p1)} does not follow mesh edges")
        for s in range(g):
            u = node_of[gid(i0 + s * si, j0 + s * sj)]
            w = node_of[gid(i0 + (s + 1) * si, j0 + (s + 1) * sj)]
            key = (int(min(u, w)), int(max(u, w)))
            if u < 0 or w < 0 or key not in edge_index:
                raise MeshError("crack leaves the meshed domain")
            crack_edge[edge_index[key]] = True

    # boundary tags
    boundary = edge_tris[:, 1] < 0
    boundary_tag = np.full(len(edges), "", dtype="<U1")
    bidx = np.nonzero(boundary)[0]
    mids = 0.5 * (geo_points[edges[bidx, 0]] + geo_points[edges[bidx, 1]])
    for v, tags in dom.loops():
        m = len(v)
        for e in range(m):
            pa, pb = v[e], v[(e + 1) % m]
            dd = pb - pa
            t = np.clip(((mids - pa) @ dd) / float(dd @ dd), 0, 1)
            on = np.hypot(*(mids - pa - t[:, None] * dd).T) <= 1e-9
            boundary_tag[bidx[on]] = tags[e]
    if np.any(boundary_tag[bidx] == ""):
        raise MeshError("domain boundary does not follow mesh edges")

    # node duplication
    parent = list(range(len(geo_points)))
    new_tri = tri.copy()
    interior_crack = crack_edge & ~boundary
    crack_nodes = np.unique(edges[interior_crack].ravel())
    node_tris: dict[int, list[int]] = {int(z): [] for z in crack_nodes}
    mask = np.isin(tri, crack_nodes)
    for t_id, col in zip(*np.nonzero(mask)):
        node_tris[int(tri[t_id, col])].append(int(t_id))
    n_dup = 0
    for z in crack_nodes:
        z = int(z)
        ts = node_tris[z]
        uf = {t: t for t in ts}

        def find(t):
            while uf[t] != t:
                t = uf[t]
            return t

        for t in ts:
            for w in tri[t]:
                if w == z:
                    continue
                e = edge_index[(min(z, int(w)), max(z, int(w)))]
                if crack_edge[e] or edge_tris[e, 1] < 0:
                    continue
                ta, tb = edge_tris[e]
                ra, rb = find(int(ta)), find(int(tb))
                if ra != rb:
                    uf[ra] = rb
        groups: dict[int, list[int]] = {}
        for t in ts:
            groups.setdefault(find(t), []).append(t)
        for gi_, members in enumerate(sorted(groups.values(), key=min)):
            if gi_ == 0:
                continue
            new_id = len(parent)
            parent.append(z)
            n_dup += 1
            for t in members:
                new_tri[t][tri[t] == z] = new_id
    parent = np.asarray(parent, np.int64)
    points = geo_points[parent]

    # isolated single-edge crack pieces are invisible to the P1 space
    for e in np.nonzero(interior_crack)[0]:
        ta, tb = edge_tris[e]
        sa = set(new_tri[ta].tolist())
        sb = set(new_tri[tb].tolist())
        if len(sa & sb) == 2:
            raise MeshError("resolution too coarse to resolve a crack component")

    # node tags; Dirichlet nodes touch a D-tagged boundary edge outside K
    node_tag = np.full(len(points), TAG_INTERIOR, np.int8)
    dirichlet = np.zeros(len(points), bool)
    for e in np.nonzero(crack_edge)[0]:
        for t in edge_tris[e]:
            if t < 0:
                continue
            p, q = edges[e]
            for col in range(3):
                if tri[t, col] in (p, q):
                    node_tag[new_tri[t, col]] = TAG_CRACK
    for e in bidx:
        t = edge_tris[e, 0]
        p, q = edges[e]
        cols = [col for col in range(3) if tri[t, col] in (p, q)]
        nodes = new_tri[t, cols]
        if crack_edge[e]:
            continue
        if boundary_tag[e] == DIRICHLET:
            dirichlet[nodes] = True
        elif boundary_tag[e] == NEUMANN:
            node_tag[nodes] = np.where(node_tag[nodes] == TAG_INTERIOR, TAG_NEUMANN, node_tag[nodes])
    node_tag[dirichlet] = TAG_DIRICHLET

    return CrackedMesh(
        domain=dom, crack=K, n=n, origin=(x0, y0), shape=(ny, nx), points=points,
        triangles=new_tri, parent=parent, geo_points=geo_points, geo_triangles=tri,
        edges=edges, edge_tris=edge_tris, crack_edge=crack_edge, boundary_tag=boundary_tag,
        cell_lookup=lookup, node_tag=node_tag, dirichlet=dirichlet, n_duplicated=n_dup,
    )
