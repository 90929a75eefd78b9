"""Rotated-flux conjugates of discrete minimizers.

For a piecewise-constant flux sigma the field R sigma (R the quarter turn)
is exactly the gradient of a nonconforming piecewise-affine function that
is continuous at edge midpoints, provided its circulation around every
interior vertex vanishes.  That circulation equals (up to sign) the
Euler-Lagrange pairing with the vertex hat function, so a conjugate with
zero circulation and constant values on the traction-free parts of the
boundary certifies the minimizer, and conversely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .fem import lq_norm
from .geometry import components
from .mesh import CrackedMesh, _unique_edges
from .solver import FieldSolution

__all__ = ["ConjugateField", "ConjugateVerdict", "rotate", "build_conjugate",
           "build_local_conjugate", "verify_solution_via_conjugate", "DualityError"]


class DualityError(ValueError):
    pass


def rotate(y: np.ndarray) -> np.ndarray:
    """R(y1, y2) = (-y2, y1)."""
    y = np.asarray(y, float)
    return np.stack([-y[..., 1], y[..., 0]], axis=-1)


@dataclass
class ConjugateField:
    """Nonconforming conjugate v on (a subset of) a cracked mesh.

    ``center`` holds v at triangle barycenters and ``grad`` its constant
    gradient, so v_T(x) = center_T + grad_T . (x - b_T).  ``midpoint``
    gives one value per geometric edge (mean over the adjacent triangles),
    ``mismatch`` the disagreement of the two sides at that midpoint.
    """

    mesh: CrackedMesh
    triangles: np.ndarray          # indices of triangles carrying v
    grad: np.ndarray               # (T_sub, 2)
    center: np.ndarray             # (T_sub,)
    edge_ids: np.ndarray           # geometric edges touched by the subset
    midpoint: np.ndarray           # v at those edge midpoints
    mismatch: np.ndarray           # |v_T(m) - v_T'(m)| per edge
    circulation: np.ndarray        # per geometric vertex, NaN if not interior
    sigma_norm: float
    groups: list = field(default_factory=list)  # [{"edges": ids, "oscillation": float}]
    max_degree: int = 0

    @property
    def midpoints_xy(self) -> np.ndarray:
        m = self.mesh
        return 0.5 * (m.geo_points[m.edges[self.edge_ids, 0]] + m.geo_points[m.edges[self.edge_ids, 1]])

    @property
    def v_inf(self) -> float:
        return float(np.max(np.abs(self.midpoint))) if self.midpoint.size else 0.0

    @property
    def circulation_max(self) -> float:
        c = self.circulation[np.isfinite(self.circulation)]
        return float(np.max(np.abs(c))) if c.size else 0.0

    @property
    def circulation_residual(self) -> float:
        """Largest vertex circulation divided by ||sigma||_q."""
        return self.circulation_max / self.sigma_norm if self.sigma_norm > 0 else 0.0

    @property
    def oscillation(self) -> float:
        return max((g["oscillation"] for g in self.groups), default=0.0)

    @property
    def max_mismatch(self) -> float:
        return float(np.max(self.mismatch)) if self.mismatch.size else 0.0

    def diagnostics(self) -> dict:
        return {
            "triangles": int(len(self.triangles)),
            "sigma_norm_q": self.sigma_norm,
            "circulation_max": self.circulation_max,
            "circulation_residual": self.circulation_residual,
            "max_midpoint_mismatch": self.max_mismatch,
            "v_inf": self.v_inf,
            "oscillation_max": self.oscillation,
            "components": [{"edges": int(len(g["edges"])), "oscillation": g["oscillation"]}
                           for g in self.groups],
            "max_vertex_degree": self.max_degree,
        }


def _local_edges(mesh: CrackedMesh) -> np.ndarray:
    """(T, 3) geometric edge id opposite each local vertex."""
    tri = mesh.geo_triangles
    N = len(mesh.geo_points)
    e = np.sort(np.stack([tri[:, [1, 2]], tri[:, [2, 0]], tri[:, [0, 1]]], axis=1), axis=2)
    keys = e[..., 0] * N + e[..., 1]
    ref = mesh.edges[:, 0] * N + mesh.edges[:, 1]
    return np.searchsorted(ref, keys)


def _circulation(mesh: CrackedMesh, rs: np.ndarray, tris: np.ndarray, interior: np.ndarray) -> np.ndarray:
    """sum over the fan of z of R sigma . (b - a) / 2 for CCW triangles (z, a, b)."""
    P = mesh.geo_points
    tri = mesh.geo_triangles[tris]
    out = np.zeros(len(P))
    for k in range(3):
        z, a, b = tri[:, k], tri[:, (k + 1) % 3], tri[:, (k + 2) % 3]
        out += np.bincount(z, np.einsum("ti,ti->t", rs, P[b] - P[a]) / 2, minlength=len(P))
    out[~interior] = np.nan
    return out


def _integrate(mesh: CrackedMesh, tris: np.ndarray, rs: np.ndarray, loc_edges: np.ndarray):
    """Spanning-tree integration of the per-triangle gradients ``rs``."""
    P = mesh.geo_points
    bary = P[mesh.geo_triangles[tris]].mean(axis=1)
    pos = -np.ones(len(mesh.geo_triangles), np.int64)
    pos[tris] = np.arange(len(tris))
    et = mesh.edge_tris
    both = (et[:, 1] >= 0) & (pos[np.maximum(et[:, 0], 0)] >= 0) & (pos[np.maximum(et[:, 1], 0)] >= 0)
    a, b = pos[et[both, 0]], pos[et[both, 1]]
    n = len(tris)
    g = coo_matrix((np.arange(1, both.sum() + 1, dtype=float), (a, b)), shape=(n, n)).tocsr()
    g = g + g.T
    ncomp, _ = connected_components(g, directed=False)
    if ncomp != 1:
        raise DualityError("triangle set is not connected")
    order, pred = breadth_first_order(g, 0, directed=False, return_predecessors=True)
    mids = 0.5 * (P[mesh.edges[:, 0]] + P[mesh.edges[:, 1]])
    child = order[1:]
    par = pred[child]
    cand = loc_edges[tris[child]]                     # (n-1, 3)
    hit = (et[cand, 0] == tris[par][:, None]) | (et[cand, 1] == tris[par][:, None])
    m = mids[cand[np.arange(len(child)), np.argmax(hit, axis=1)]]
    delta = np.einsum("ti,ti->t", rs[par], m - bary[par]) - np.einsum("ti,ti->t", rs[child], m - bary[child])
    step = np.zeros(n)
    step[child] = delta
    center = np.zeros(n)
    for t, s in zip(child.tolist(), par.tolist()):
        center[t] = center[s] + step[t]
    return center, bary


def _build(sol: FieldSolution, tris: np.ndarray, interior_vertex: np.ndarray,
           edge_groups: list[np.ndarray]) -> ConjugateField:
    mesh = sol.mesh
    sigma = sol.flux
    sigma[mesh.removed] = 0.0
    rs = rotate(sigma[tris])
    loc = _local_edges(mesh)
    center, bary = _integrate(mesh, tris, rs, loc)
    areas = mesh.areas[tris]
    center = center - np.sum(areas * center) / np.sum(areas)

    # per (triangle, local edge) midpoint values
    P = mesh.geo_points
    mids = 0.5 * (P[mesh.edges[:, 0]] + P[mesh.edges[:, 1]])
    le = loc[tris]
    vals = center[:, None] + np.einsum("ti,tki->tk", rs, mids[le] - bary[:, None, :])
    eids = le.ravel()
    v = vals.ravel()
    uniq, inv = np.unique(eids, return_inverse=True)
    cnt = np.bincount(inv)
    vmean = np.bincount(inv, v) / cnt
    vmax = np.full(len(uniq), -np.inf)
    vmin = np.full(len(uniq), np.inf)
    np.maximum.at(vmax, inv, v)
    np.minimum.at(vmin, inv, v)

    space_sigma = lq_norm(mesh.space, sigma, sol.density.q)
    # the norm is taken over the triangles carrying v
    sig_sub = float(np.sum(mesh.areas[tris] * np.hypot(*sigma[tris].T) ** sol.density.q)
                    ** (1 / sol.density.q)) if len(tris) < len(mesh.triangles) else space_sigma
    circ = _circulation(mesh, rs, tris, interior_vertex)

    lookup = -np.ones(len(mesh.edges), np.int64)
    lookup[uniq] = np.arange(len(uniq))
    groups = []
    for ids in edge_groups:
        ids = ids[lookup[ids] >= 0]
        if ids.size == 0:
            continue
        k = lookup[ids]
        osc = float(np.max(vmax[k]) - np.min(vmin[k]))
        groups.append({"edges": ids, "oscillation": osc})
    deg = np.bincount(mesh.geo_triangles[tris].ravel(), minlength=len(P))
    return ConjugateField(mesh=mesh, triangles=tris, grad=rs, center=center, edge_ids=uniq,
                          midpoint=vmean, mismatch=vmax - vmin, circulation=circ,
                          sigma_norm=sig_sub, groups=groups, max_degree=int(deg.max()))


def _boundary_vertices(mesh: CrackedMesh) -> np.ndarray:
    on = np.zeros(len(mesh.geo_points), bool)
    on[mesh.edges[mesh.edge_tris[:, 1] < 0].ravel()] = True
    return on


def _component_edges(mesh: CrackedMesh) -> list[np.ndarray]:
    """Crack or Neumann edges grouped by the components of K u Neumann part."""
    comps = components(mesh.crack, mesh.domain.neumann_part())
    keep = mesh.crack_edge | (mesh.boundary_tag == "N")
    out = []
    for c in comps:
        ids = mesh.crack_edges_on(c)
        ids = ids[keep[ids]]
        if ids.size:
            out.append(ids)
    return out


def _require_converged(sol: FieldSolution, require: bool):
    if require and not sol.converged:
        raise DualityError("field is not converged; pass require_converged=False to inspect it anyway")


def build_conjugate(sol: FieldSolution, *, require_converged: bool = True) -> ConjugateField:
    """Global conjugate on a simply connected domain, normalized to zero mean."""
    _require_converged(sol, require_converged)
    if not sol.mesh.domain.is_simply_connected():
        raise DualityError("domain has holes; use build_local_conjugate on rectangles")
    mesh = sol.mesh
    tris = np.arange(len(mesh.geo_triangles))
    interior = ~_boundary_vertices(mesh)
    return _build(sol, tris, interior, _component_edges(mesh))


def _euler_characteristic(tri: np.ndarray) -> int:
    edges, _ = _unique_edges(tri)
    return len(np.unique(tri)) - len(edges) + len(tri)


def build_local_conjugate(sol: FieldSolution, U, *, require_converged: bool = True) -> ConjugateField:
    """Conjugate on the triangles with barycenter inside the open rectangle ``U``.

    ``U = (x0, y0, x1, y1)``.  Circulation is checked at vertices whose whole
    star lies in the patch; crack and Neumann edges are grouped by
    connectivity through such vertices.
    """
    _require_converged(sol, require_converged)
    x0, y0, x1, y1 = map(float, U)
    if not (x0 < x1 and y0 < y1):
        raise DualityError("rectangle must have positive width and height")
    mesh = sol.mesh
    b = mesh.geo_points[mesh.geo_triangles].mean(axis=1)
    inside = (b[:, 0] > x0) & (b[:, 0] < x1) & (b[:, 1] > y0) & (b[:, 1] < y1)
    tris = np.nonzero(inside)[0]
    if tris.size == 0:
        raise DualityError("rectangle does not meet the domain")
    sub = mesh.geo_triangles[tris]
    et = _unique_edges(sub)[1]
    T = len(sub)
    g = coo_matrix((np.ones(int((et[:, 1] >= 0).sum())), (et[et[:, 1] >= 0, 0], et[et[:, 1] >= 0, 1])),
                   shape=(T, T))
    if connected_components(g, directed=False)[0] != 1 or _euler_characteristic(sub) != 1:
        raise DualityError("rectangle meets the domain in a set that is not simply connected")

    full_deg = np.bincount(mesh.geo_triangles.ravel(), minlength=len(mesh.geo_points))
    sub_deg = np.bincount(sub.ravel(), minlength=len(mesh.geo_points))
    star_in = (full_deg == sub_deg) & (sub_deg > 0)
    interior = star_in & ~_boundary_vertices(mesh)

    # crack/Neumann edges of the patch, linked through vertices with full stars
    loc = _local_edges(mesh)[tris]
    cand = np.unique(loc.ravel())
    keep = mesh.crack_edge[cand] | (mesh.boundary_tag[cand] == "N")
    cand = cand[keep]
    groups: list[np.ndarray] = []
    if cand.size:
        ends = mesh.edges[cand]
        parent = list(range(len(cand)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        by_vertex: dict[int, list[int]] = {}
        for i, (p, q) in enumerate(ends):
            for z in (int(p), int(q)):
                if star_in[z] and not mesh.dirichlet[mesh.parent == z].any():
                    by_vertex.setdefault(z, []).append(i)
        for members in by_vertex.values():
            for j in members[1:]:
                ra, rb = find(members[0]), find(j)
                if ra != rb:
                    parent[ra] = rb
        buckets: dict[int, list[int]] = {}
        for i in range(len(cand)):
            buckets.setdefault(find(i), []).append(i)
        groups = [cand[np.asarray(v)] for v in buckets.values()]
    return _build(sol, tris, interior, groups)


@dataclass
class ConjugateVerdict:
    passed: bool
    gradient_error: float
    circulation_residual: float
    oscillation: float
    el_residual: float
    bound: float
    tol: float

    @property
    def bound_holds(self) -> bool:
        return self.el_residual <= self.bound * (1 + 1e-9) + 1e-15

    def to_dict(self) -> dict:
        return {"passed": self.passed, "gradient_error": self.gradient_error,
                "circulation_residual": self.circulation_residual, "oscillation": self.oscillation,
                "el_residual": self.el_residual, "el_bound": self.bound,
                "bound_holds": self.bound_holds, "tol": self.tol}


def verify_solution_via_conjugate(u: FieldSolution, v: ConjugateField, tol: float = 1e-6,
                                  grad_tol: float = 1e-10) -> ConjugateVerdict:
    """Certify ``u`` from a conjugate claiming grad v = R f_xi(grad u) off K.

    Passes iff the gradient identity holds to ``grad_tol`` on every
    triangle of v, the circulation of R f_xi(grad u) is at most ``tol``
    (relative to ||f_xi||_q), and every component oscillation of v is at
    most ``tol * ||v||_inf``.  The Euler-Lagrange residual of ``u`` is
    reported next to the bound implied by those three quantities.
    """
    from .solver import el_residual

    if u.mesh is not v.mesh:
        raise DualityError("solution and conjugate live on different meshes")
    mesh = u.mesh
    sigma = u.flux
    sigma[mesh.removed] = 0.0
    rs = rotate(sigma[v.triangles])
    scale = max(1.0, float(np.max(np.abs(rs))) if rs.size else 1.0)
    grad_err = float(np.max(np.abs(rs - v.grad))) / scale if rs.size else 0.0
    circ = _circulation(mesh, rs, v.triangles, np.isfinite(v.circulation))
    finite = circ[np.isfinite(circ)]
    circ_max = float(np.max(np.abs(finite))) if finite.size else 0.0
    circ_res = circ_max / v.sigma_norm if v.sigma_norm > 0 else 0.0
    osc = v.oscillation
    vinf = v.v_inf
    osc_ok = osc <= tol * max(vinf, np.finfo(float).tiny)
    passed = grad_err <= grad_tol and circ_res <= tol and (osc_ok or osc == 0.0)
    # a free hat function pairs to a circulation, or to a difference of v on one component
    bound = max(circ_max, osc + v.max_degree * v.max_mismatch) / v.sigma_norm if v.sigma_norm > 0 else 0.0
    return ConjugateVerdict(passed=bool(passed), gradient_error=grad_err, circulation_residual=circ_res,
                            oscillation=osc, el_residual=el_residual(u), bound=bound, tol=tol)
