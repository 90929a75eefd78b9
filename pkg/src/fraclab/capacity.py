"""Numerical (1, r)-capacity of compact sets in a polygonal container."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import isotropic
from .fem import P1Space, minimize_energy
from .geometry import Crack, Domain, GeometryError, point_in_polygon
from .mesh import _unique_edges


@dataclass(frozen=True)
class Disk:
    """Closed disk; a set with interior alongside points and polylines."""

    center: tuple[float, float]
    radius: float

    def distance(self, pts: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center, float)
        return np.maximum(np.hypot(*(pts - c).T) - self.radius, 0.0)

    def sample(self) -> np.ndarray:
        c = np.asarray(self.center, float)
        th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        return np.r_[[c], c + self.radius * np.c_[np.cos(th), np.sin(th)]]


@dataclass(frozen=True)
class CapacitySet:
    """Union of polyline pieces (points, segments) and closed disks."""

    crack: Crack = Crack()
    disks: tuple[Disk, ...] = ()

    def is_empty(self) -> bool:
        return self.crack.is_empty() and not self.disks

    def union(self, other: "CapacitySet") -> "CapacitySet":
        return CapacitySet(self.crack.union(other.crack), self.disks + other.disks)

    def distance(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        out = np.full(len(pts), np.inf)
        for a, b in self.crack.segments():
            d = b - a
            L2 = float(d @ d)
            t = np.clip(((pts - a) @ d) / L2, 0, 1) if L2 > 0 else np.zeros(len(pts))
            out = np.minimum(out, np.hypot(*(pts - a - t[:, None] * d).T))
        for disk in self.disks:
            out = np.minimum(out, disk.distance(pts))
        return out

    def sample(self) -> np.ndarray:
        parts = [self.crack.vertices()]
        parts += [disk.sample() for disk in self.disks]
        return np.concatenate([p for p in parts if len(p)]) if parts else np.zeros((0, 2))

    def to_dict(self) -> dict:
        return {"crack": self.crack.to_dict(),
                "disks": [{"center": list(dk.center), "radius": dk.radius} for dk in self.disks]}

    @classmethod
    def from_dict(cls, d: dict) -> "CapacitySet":
        crack = Crack.from_dict(d.get("crack", {"polylines": []}))
        pts = d.get("points")
        if pts:
            crack = crack.union(Crack.points(pts))
        disks = tuple(Disk(tuple(x["center"]), float(x["radius"])) for x in d.get("disks", []))
        return cls(crack, disks)


def as_capacity_set(E) -> CapacitySet:
    if isinstance(E, CapacitySet):
        return E
    if isinstance(E, Crack):
        return CapacitySet(E)
    if isinstance(E, Disk):
        return CapacitySet(Crack(), (E,))
    raise TypeError(f"cannot interpret {E!r} as a set")


@dataclass
class GridMesh:
    points: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    h: float

    @property
    def space(self) -> P1Space:
        return P1Space(self.points, self.triangles)


def container_mesh(B: Domain, n: int) -> GridMesh:
    """Grid squares of side 1/n lying entirely in the closed container polygon."""
    x0, y0, x1, y1 = B.bbox()
    h = 1.0 / n
    nx = int(np.ceil((x1 - x0) * n - 1e-9))
    ny = int(np.ceil((y1 - y0) * n - 1e-9))
    gx = x0 + h * np.arange(nx + 1)
    gy = y0 + h * np.arange(ny + 1)
    X, Y = np.meshgrid(gx, gy)
    P = np.c_[X.ravel(), Y.ravel()]
    inside = point_in_polygon(P, B.vertices)
    for hv, _ in B.holes:
        inside &= ~point_in_polygon(P, hv)
    ins = inside.reshape(ny + 1, nx + 1)
    cell = ins[:-1, :-1] & ins[1:, :-1] & ins[:-1, 1:] & ins[1:, 1:]
    cj, ci = np.nonzero(cell)

    def gid(i, j):
        return j * (nx + 1) + i

    a, b, c, d = gid(ci, cj), gid(ci + 1, cj), gid(ci + 1, cj + 1), gid(ci, cj + 1)
    tri = np.empty((2 * ci.size, 3), np.int64)
    tri[0::2] = np.c_[a, b, c]
    tri[1::2] = np.c_[a, c, d]
    used, inv = np.unique(tri.ravel(), return_inverse=True)
    tri = inv.reshape(-1, 3)
    pts = P[used]
    edges, adj = _unique_edges(tri)
    bnd = np.zeros(len(pts), bool)
    bnd[edges[adj[:, 1] < 0].ravel()] = True
    return GridMesh(pts, tri, bnd, h)


@dataclass
class CapacityResult:
    value: float
    mesh: GridMesh
    u: np.ndarray
    constrained: np.ndarray
    residual: float
    iterations: int


def capacity(E, B: Domain, r: float, n: int, *, tol: float = 1e-9) -> CapacityResult:
    """Discrete (1, r)-capacity of E in B at ``n`` cells per unit length.

    Minimizes sum_T |T| |grad u|^r over P1 functions with u = 1 at every
    node within one cell (distance <= 1/n) of E and u = 0 on the boundary
    of the meshed container.
    """
    E = as_capacity_set(E)
    if not 1 < r < np.inf:
        raise ValueError("exponent r must lie in (1, inf)")
    if not E.is_empty():
        s = E.sample()
        if len(s) and not np.all(point_in_polygon(s, B.vertices)):
            raise GeometryError("set is not contained in the container")
    mesh = container_mesh(B, n)
    space = mesh.space
    if E.is_empty():
        u = np.zeros(len(mesh.points))
        return CapacityResult(0.0, mesh, u, np.zeros(len(u), bool), 0.0, 0)
    one = E.distance(mesh.points) < mesh.h * (1 - 1e-9)
    one &= ~mesh.boundary
    if not np.any(one):
        raise GeometryError("set is not resolved away from the container boundary")
    fixed = one | mesh.boundary
    vals = one.astype(float)
    d = isotropic(r)
    coef = np.ones(len(space.triangles))
    u0, _ = minimize_energy(space, isotropic(2.0), coef, fixed, vals, vals.copy(), tol=1e-12,
                            max_iter=3, raise_on_failure=False)
    sched = (0.0,) if r == 2 else ((1e-2, 1e-5, 1e-8) if r < 2 else (1e-8,))
    u, info = minimize_energy(space, d, coef, fixed, vals, u0, tol=tol, eps_schedule=sched)
    value = float(np.sum(space.areas * np.hypot(*space.grad(u).T) ** r))
    return CapacityResult(value, mesh, u, one, info.residual, info.iterations)
