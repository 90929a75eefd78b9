"""Polygonal domains, polyline cracks and the set operations used on them.

Cracks are finite unions of closed segments (a polyline with a single
vertex is a point).  Everything here is exact segment arithmetic with a
fixed coincidence tolerance ``TOL``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TOL = 1e-12

DIRICHLET = "D"
NEUMANN = "N"


class GeometryError(ValueError):
    """Invalid geometric input."""


# ---------------------------------------------------------------------------
# elementary segment arithmetic
# ---------------------------------------------------------------------------


def point_segment_distance(p, a, b) -> float:
    p = np.asarray(p, float)
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    d = b - a
    L2 = float(d @ d)
    if L2 <= TOL * TOL:
        return float(np.hypot(*(p - a)))
    t = min(1.0, max(0.0, float((p - a) @ d) / L2))
    return float(np.hypot(*(p - a - t * d)))


def _cross(u, v) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


def segments_intersect(a, b, c, d) -> bool:
    """Closed-segment intersection test (touching counts)."""
    return segment_segment_distance(a, b, c, d)[0] <= TOL


def segment_segment_distance(a, b, c, d):
    """Distance between closed segments [a,b] and [c,d] with witness points."""
    a, b, c, d = (np.asarray(v, float) for v in (a, b, c, d))
    r = b - a
    s = d - c
    denom = _cross(r, s)
    if abs(denom) > TOL * max(1.0, float(np.hypot(*r)) * float(np.hypot(*s))):
        t = _cross(c - a, s) / denom
        u = _cross(c - a, r) / denom
        if -TOL <= t <= 1 + TOL and -TOL <= u <= 1 + TOL:
            x = a + min(1.0, max(0.0, t)) * r
            return 0.0, x, x
    best = None
    for p, (q0, q1), swap in ((a, (c, d), False), (b, (c, d), False),
                              (c, (a, b), True), (d, (a, b), True)):
        q = _closest_on_segment(p, q0, q1)
        dist = float(np.hypot(*(p - q)))
        if best is None or dist < best[0]:
            best = (dist, q, p) if swap else (dist, p, q)
    return best


def _closest_on_segment(p, a, b):
    d = b - a
    L2 = float(d @ d)
    if L2 <= TOL * TOL:
        return a.copy()
    t = min(1.0, max(0.0, float((p - a) @ d) / L2))
    return a + t * d


def _directed_sup_distance(A: np.ndarray, B: np.ndarray) -> float:
    """sup_{x in A} dist(x, B) for segment arrays of shape (k, 2, 2).

    Along a segment of A the function dist(., B) is the lower envelope of
    convex pieces (distances to the endpoints and to the supporting lines of
    B), so its maximum sits at an endpoint or where two pieces tie.  All
    tie points are enumerated in closed form.
    """
    pts = B.reshape(-1, 2)
    seg_a, seg_b = B[:, 0], B[:, 1]
    dirs = seg_b - seg_a
    lens = np.hypot(dirs[:, 0], dirs[:, 1])
    proper = lens > TOL
    lines = []
    for a0, dv, L in zip(seg_a[proper], dirs[proper], lens[proper]):
        u = dv / L
        lines.append((a0, u, np.array([-u[1], u[0]]), L))

    def dist_to_B(x: np.ndarray) -> np.ndarray:
        # x: (m, 2) -> (m,)
        diff = x[:, None, :] - seg_a[None, :, :]
        L2 = np.einsum("ij,ij->i", dirs, dirs)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(L2 > TOL * TOL, np.einsum("mkj,kj->mk", diff, dirs) / np.where(L2 > 0, L2, 1.0), 0.0)
        t = np.clip(t, 0.0, 1.0)
        proj = seg_a[None, :, :] + t[:, :, None] * dirs[None, :, :]
        return np.min(np.hypot(*(x[:, None, :] - proj).transpose(2, 0, 1)), axis=1)

    best = 0.0
    for p0, p1 in A:
        d = p1 - p0
        cand = [0.0, 1.0]
        if float(np.hypot(*d)) > TOL:
            # point/point ties: |p0 + t d - q|^2 equal -> linear in t
            for q1, q2 in itertools.combinations(pts, 2):
                coef = 2.0 * float(d @ (q2 - q1))
                rhs = float(q2 @ q2 - q1 @ q1) - 2.0 * float(p0 @ (q2 - q1))
                if abs(coef) > TOL:
                    cand.append(rhs / coef)
            # point/line ties: |w + t d|^2 = (n.(w' + t d))^2 -> quadratic
            for q in pts:
                for c0, _u, nrm, _L in lines:
                    w = p0 - q
                    wn = float(nrm @ (p0 - c0))
                    dn = float(nrm @ d)
                    A2 = float(d @ d) - dn * dn
                    A1 = 2.0 * (float(w @ d) - wn * dn)
                    A0 = float(w @ w) - wn * wn
                    cand.extend(_real_roots(A2, A1, A0))
            # line/line ties: n1.(x-c1) = +-n2.(x-c2) -> linear
            for (c1, _u1, n1, _), (c2, _u2, n2, _) in itertools.combinations(lines, 2):
                for sgn in (1.0, -1.0):
                    coef = float(n1 @ d) - sgn * float(n2 @ d)
                    rhs = -(float(n1 @ (p0 - c1)) - sgn * float(n2 @ (p0 - c2)))
                    if abs(coef) > TOL:
                        cand.append(rhs / coef)
        ts = np.array([t for t in cand if -TOL <= t <= 1 + TOL])
        ts = np.clip(ts, 0.0, 1.0)
        x = p0[None, :] + ts[:, None] * d[None, :]
        best = max(best, float(np.max(dist_to_B(x))))
    return best


def _real_roots(a2: float, a1: float, a0: float) -> list[float]:
    if abs(a2) <= TOL:
        return [-a0 / a1] if abs(a1) > TOL else []
    disc = a1 * a1 - 4 * a2 * a0
    if disc < 0:
        if disc > -TOL:
            disc = 0.0
        else:
            return []
    r = math.sqrt(disc)
    return [(-a1 - r) / (2 * a2), (-a1 + r) / (2 * a2)]


# ---------------------------------------------------------------------------
# cracks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Crack:
    """Finite union of polylines.

    A polyline with one vertex is an isolated point.  Instances are
    immutable; set-like operations return new cracks.
    """

    polylines: tuple[tuple[tuple[float, float], ...], ...] = ()

    def __init__(self, polylines: Iterable[Sequence[Sequence[float]]] = ()):
        pls = []
        for pl in polylines:
            pts = tuple((float(x), float(y)) for x, y in pl)
            if len(pts) == 0:
                continue
            pls.append(pts)
        object.__setattr__(self, "polylines", tuple(pls))

    # construction helpers --------------------------------------------------

    @classmethod
    def empty(cls) -> "Crack":
        return cls(())

    @classmethod
    def segment(cls, a, b) -> "Crack":
        return cls([[a, b]])

    @classmethod
    def points(cls, pts) -> "Crack":
        return cls([[p] for p in pts])

    @classmethod
    def from_segments(cls, segs) -> "Crack":
        return cls([[tuple(s[0]), tuple(s[1])] for s in np.asarray(segs, float).reshape(-1, 2, 2)])

    # basic views -------------------------------------------------------------

    def is_empty(self) -> bool:
        return len(self.polylines) == 0

    def segments(self) -> np.ndarray:
        """All pieces as an (k, 2, 2) array; points become zero-length segments."""
        segs = []
        for pl in self.polylines:
            if len(pl) == 1:
                segs.append((pl[0], pl[0]))
            else:
                segs.extend(zip(pl[:-1], pl[1:]))
        if not segs:
            return np.zeros((0, 2, 2))
        return np.asarray(segs, float)

    def vertices(self) -> np.ndarray:
        if self.is_empty():
            return np.zeros((0, 2))
        return np.asarray([p for pl in self.polylines for p in pl], float)

    def union(self, *others: "Crack") -> "Crack":
        pls = list(self.polylines)
        for o in others:
            pls.extend(o.polylines)
        return Crack(pls)

    __or__ = union

    def length(self) -> float:
        return h1_length(self)

    def contains(self, other: "Crack", tol: float = 1e-9) -> bool:
        """True when every point of ``other`` lies on ``self`` (within tol)."""
        if other.is_empty():
            return True
        if self.is_empty():
            return False
        return _directed_sup_distance(other.segments(), self.segments()) <= tol

    def contains_point(self, p, tol: float = 1e-9) -> bool:
        return any(point_segment_distance(p, s[0], s[1]) <= tol for s in self.segments())

    def to_dict(self) -> dict:
        return {"polylines": [[list(p) for p in pl] for pl in self.polylines]}

    @classmethod
    def from_dict(cls, d) -> "Crack":
        if isinstance(d, dict):
            d = d.get("polylines", [])
        return cls(d)

    def __len__(self) -> int:
        return len(self.polylines)


def h1_length(K: Crack) -> float:
    """One-dimensional Hausdorff measure of a polyline union.

    Collinear overlapping pieces are merged before summing, so shared
    stretches count once; non-collinear intersections have zero length.
    """
    segs = [s for s in K.segments() if np.hypot(*(s[1] - s[0])) > TOL]
    groups: list[tuple[np.ndarray, float, list]] = []
    for a, b in segs:
        d = b - a
        u = d / np.hypot(*d)
        if u[0] < -TOL or (abs(u[0]) <= TOL and u[1] < 0):
            u = -u
        nrm = np.array([-u[1], u[0]])
        off = float(nrm @ a)
        for gu, goff, members in groups:
            if abs(_cross(gu, u)) <= 1e-10 and abs(goff - off) <= 1e-10:
                members.append((float(gu @ a), float(gu @ b)))
                break
        else:
            groups.append((u, off, [(float(u @ a), float(u @ b))]))
    total = 0.0
    for _u, _off, members in groups:
        iv = sorted((min(s, t), max(s, t)) for s, t in members)
        lo, hi = iv[0]
        for s, t in iv[1:]:
            if s <= hi + TOL:
                hi = max(hi, t)
            else:
                total += hi - lo
                lo, hi = s, t
        total += hi - lo
    return total


def hausdorff_distance(A: Crack, B: Crack, domain: "Domain | None" = None,
                       diam: float | None = None) -> float:
    """Hausdorff distance between two polyline unions, computed exactly.

    Empty sets follow dist(x, {}) = diam(domain) and sup {} = 0, so the
    distance between the empty set and a nonempty one is the domain
    diameter.  That case needs ``domain`` or ``diam``.
    """
    ea, eb = A.is_empty(), B.is_empty()
    if ea and eb:
        return 0.0
    if ea or eb:
        if diam is None:
            if domain is None:
                raise GeometryError("distance to the empty set needs the domain diameter")
            diam = domain.diameter()
        return float(diam)
    sa, sb = A.segments(), B.segments()
    return max(_directed_sup_distance(sa, sb), _directed_sup_distance(sb, sa))


def set_distance(A: Crack, B: Crack):
    """Smallest distance between two nonempty cracks with witness points."""
    best = (math.inf, None, None)
    for s in A.segments():
        for t in B.segments():
            d = segment_segment_distance(s[0], s[1], t[0], t[1])
            if d[0] < best[0]:
                best = d
    return best


def components(K: Crack, gamma: Crack | None = None) -> list[Crack]:
    """Maximal connected pieces of K ∪ gamma.

    Pieces touching at a single point are connected.  Output order follows
    the first segment of each component in input order.
    """
    whole = K if gamma is None else K.union(gamma)
    segs = whole.segments()
    n = len(segs)
    if n == 0:
        return []
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    lo = np.minimum(segs[:, 0], segs[:, 1])
    hi = np.maximum(segs[:, 0], segs[:, 1])
    for i in range(n):
        # bounding-box prefilter
        near = np.nonzero(np.all(lo[i + 1:] <= hi[i] + 1e-9, axis=1)
                          & np.all(hi[i + 1:] >= lo[i] - 1e-9, axis=1))[0] + i + 1
        for j in near:
            if find(i) == find(j):
                continue
            if segment_segment_distance(segs[i, 0], segs[i, 1], segs[j, 0], segs[j, 1])[0] <= 1e-9:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    ordered = sorted(groups.values(), key=lambda g: g[0])
    return [Crack.from_segments(segs[g]) for g in ordered]


def join_components(K: Crack, gamma: Crack | None, delta: float) -> tuple[Crack, list[Crack]]:
    """Connect components of K ∪ gamma lying closer than ``delta``.

    Pairs are processed by increasing distance (Kruskal order); each
    accepted pair gets the straight segment between its closest points.
    Returns the enlarged crack K ∪ arcs and the list of added arcs.
    Components at distance >= delta are never merged.
    """
    if not delta > 0:
        raise GeometryError(f"joining distance must be positive, got {delta!r}")
    comps = components(K, gamma)
    n = len(comps)
    pairs = []
    for i, j in itertools.combinations(range(n), 2):
        d, x, y = set_distance(comps[i], comps[j])
        if d < delta:
            pairs.append((d, i, j, x, y))
    pairs.sort(key=lambda t: (t[0], t[1], t[2]))
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    arcs = []
    for d, i, j, x, y in pairs:
        ri, rj = find(i), find(j)
        if ri == rj:
            continue
        parent[ri] = rj
        arcs.append(Crack.segment(tuple(x), tuple(y)))
    return K.union(*arcs), arcs


def extend_sequence(K_h: Crack, H: Crack, K_limit: Crack) -> Crack:
    """Competitor H_h = K_h ∪ H for a sequence K_h -> K_limit ⊆ H."""
    if not H.contains(K_limit):
        raise GeometryError("H must contain the limit crack")
    return K_h.union(H)


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------


def _polygon_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _is_simple(v: np.ndarray) -> bool:
    n = len(v)
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            c, d = v[j], v[(j + 1) % n]
            if segments_intersect(a, b, c, d):
                return False
    return True


def point_in_polygon(pts, poly) -> np.ndarray:
    """Even-odd test for points strictly inside; boundary points are unspecified."""
    pts = np.atleast_2d(np.asarray(pts, float))
    poly = np.asarray(poly, float)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), bool)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        cond = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= cond & (x < xint)
    return inside


@dataclass(frozen=True)
class Domain:
    """Polygonal domain with a Dirichlet/Neumann boundary partition.

    ``tags[i]`` labels the outer edge from ``vertices[i]`` to
    ``vertices[i+1]``; each hole carries its own tag list.
    """

    vertices: np.ndarray
    tags: tuple[str, ...]
    holes: tuple[tuple[np.ndarray, tuple[str, ...]], ...] = field(default=())

    def __post_init__(self):
        v = np.asarray(self.vertices, float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("domain needs at least three 2D vertices")
        if _polygon_area(v) < 0:
            v = v[::-1].copy()
            tags = tuple(self.tags)
            # edge i (v_i -> v_{i+1}) becomes edge n-2-i after reversal
            n = len(v)
            object.__setattr__(self, "tags", tuple(tags[(n - 2 - i) % n] for i in range(n)))
        object.__setattr__(self, "vertices", v)
        if len(self.tags) != len(v):
            raise GeometryError("one boundary tag per outer edge required")
        holes = []
        for hv, ht in self.holes:
            hv = np.asarray(hv, float)
            if len(ht) != len(hv):
                raise GeometryError("one boundary tag per hole edge required")
            holes.append((hv, tuple(ht)))
        object.__setattr__(self, "holes", tuple(holes))
        for t in self.all_tags():
            if t not in (DIRICHLET, NEUMANN):
                raise GeometryError(f"unknown boundary tag {t!r}")
        if DIRICHLET not in self.all_tags():
            raise GeometryError("Dirichlet part of the boundary must be nonempty")
        if not _is_simple(v):
            raise GeometryError("outer boundary is not a simple polygon")

    # factories ----------------------------------------------------------------

    @classmethod
    def rectangle(cls, x0=0.0, y0=0.0, x1=1.0, y1=1.0, tags="DDDD", holes=()) -> "Domain":
        """Axis-aligned rectangle; tags ordered bottom, right, top, left."""
        v = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], float)
        return cls(v, tuple(tags), tuple(holes))

    @classmethod
    def unit_square(cls, tags="DDDD") -> "Domain":
        return cls.rectangle(0, 0, 1, 1, tags)

    @classmethod
    def disk(cls, radius=1.0, center=(0.0, 0.0), sides=256) -> "Domain":
        th = 2 * np.pi * np.arange(sides) / sides
        v = np.c_[center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)]
        return cls(v, (DIRICHLET,) * sides)

    # queries ------------------------------------------------------------------

    def all_tags(self) -> tuple[str, ...]:
        out = tuple(self.tags)
        for _hv, ht in self.holes:
            out += tuple(ht)
        return out

    def loops(self):
        yield self.vertices, self.tags
        for hv, ht in self.holes:
            yield hv, ht

    def boundary_segments(self, tag: str | None = None) -> np.ndarray:
        segs = []
        for v, tags in self.loops():
            n = len(v)
            for i in range(n):
                if tag is None or tags[i] == tag:
                    segs.append((v[i], v[(i + 1) % n]))
        return np.asarray(segs, float).reshape(-1, 2, 2)

    def neumann_part(self) -> Crack:
        return Crack.from_segments(self.boundary_segments(NEUMANN))

    def dirichlet_part(self) -> Crack:
        return Crack.from_segments(self.boundary_segments(DIRICHLET))

    def neumann_component_count(self) -> int:
        return len(components(self.neumann_part()))

    def dirichlet_arc_count(self) -> int:
        return len(_open_arcs(self, DIRICHLET))

    def diameter(self) -> float:
        v = self.vertices
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", d, d))))

    def bbox(self) -> tuple[float, float, float, float]:
        v = self.vertices
        return float(v[:, 0].min()), float(v[:, 1].min()), float(v[:, 0].max()), float(v[:, 1].max())

    def area(self) -> float:
        return _polygon_area(self.vertices) - sum(abs(_polygon_area(hv)) for hv, _ in self.holes)

    def contains(self, pts, closed: bool = True) -> np.ndarray:
        """Membership in the closure of the domain (``closed``) or its interior."""
        pts = np.atleast_2d(np.asarray(pts, float))
        inside = point_in_polygon(pts, self.vertices)
        for hv, _ in self.holes:
            inside &= ~point_in_polygon(pts, hv)
        bd = self.boundary_segments()
        on = np.array([min(point_segment_distance(p, s[0], s[1]) for s in bd) <= 1e-9 for p in pts])
        return inside | on if closed else inside & ~on

    def is_simply_connected(self) -> bool:
        return len(self.holes) == 0

    def validate_crack(self, K: Crack) -> None:
        v = K.vertices()
        if len(v) and not np.all(self.contains(v)):
            raise GeometryError("crack leaves the closure of the domain")
        for s in K.segments():
            mid = 0.5 * (s[0] + s[1])
            if not self.contains(mid)[0]:
                raise GeometryError("crack leaves the closure of the domain")

    def to_dict(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "tags": "".join(self.tags),
            "holes": [{"vertices": hv.tolist(), "tags": "".join(ht)} for hv, ht in self.holes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Domain":
        if "rectangle" in d:
            x0, y0, x1, y1 = d["rectangle"]
            holes = [(np.asarray(h["vertices"], float), tuple(h["tags"])) for h in d.get("holes", [])]
            return cls.rectangle(x0, y0, x1, y1, d.get("tags", "DDDD"), holes)
        if "disk" in d:
            return cls.disk(d["disk"].get("radius", 1.0), tuple(d["disk"].get("center", (0.0, 0.0))),
                            d["disk"].get("sides", 256))
        holes = tuple((np.asarray(h["vertices"], float), tuple(h["tags"])) for h in d.get("holes", []))
        return cls(np.asarray(d["vertices"], float), tuple(d["tags"]), holes)

    def __hash__(self):
        return hash((self.vertices.tobytes(), self.tags))

    def __eq__(self, other):
        if not isinstance(other, Domain):
            return NotImplemented
        return (np.array_equal(self.vertices, other.vertices) and self.tags == other.tags
                and len(self.holes) == len(other.holes)
                and all(np.array_equal(a[0], b[0]) and a[1] == b[1] for a, b in zip(self.holes, other.holes)))


def _open_arcs(dom: Domain, tag: str) -> list[list[int]]:
    """Maximal runs of consecutive boundary edges carrying ``tag`` (outer loop and holes)."""
    arcs = []
    for _v, tags in dom.loops():
        n = len(tags)
        if all(t == tag for t in tags):
            arcs.append(list(range(n)))
            continue
        start = next(i for i in range(n) if tags[i] != tag)
        run: list[int] = []
        for k in range(1, n + 1):
            i = (start + k) % n
            if tags[i] == tag:
                run.append(i)
            elif run:
                arcs.append(run)
                run = []
        if run:
            arcs.append(run)
    return arcs
