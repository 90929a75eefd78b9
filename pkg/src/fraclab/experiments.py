"""Crack sequences, stability studies and quasi-static unilateral evolution."""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .energy import EnergyDensity, EnergyReport, bulk_energy, total_energy
from .expr import Expression
from .fem import ConvergenceError
from .geometry import (Crack, Domain, GeometryError, components, h1_length, hausdorff_distance,
                       join_components)
from .mesh import MeshError, build_mesh
from .solver import FieldSolution, as_datum, solve_elastic

log = logging.getLogger(__name__)

KINDS = ("constant", "grow_to_limit", "merge_gap", "translate", "boundary_touch")
UNILATERAL_TOL = 1e-8
REFERENCE_N = 256


class SequenceError(ValueError):
    pass


# ---------------------------------------------------------------------------
# sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrackSequence:
    """Cracks K_h indexed by h, each meshed at resolution n_h, converging to ``limit``."""

    kind: str
    domain: Domain
    limit: Crack
    hs: tuple[int, ...]
    cracks: tuple[Crack, ...]
    resolutions: tuple[int, ...]
    distances: tuple[float, ...]
    lam: float = math.inf
    m: int | None = None
    joined_with: float | None = None

    def __len__(self) -> int:
        return len(self.hs)

    def rows(self):
        return zip(self.hs, self.cracks, self.resolutions, self.distances)

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(h1_length(K) for K in self.cracks)

    @property
    def component_counts(self) -> tuple[int, ...]:
        return tuple(len(components(K)) for K in self.cracks)

    def lower_semicontinuity_gap(self) -> float:
        """liminf H^1(K_h) - H^1(K), estimated over the last half of the indices."""
        tail = self.lengths[len(self) // 2:]
        return min(tail) - h1_length(self.limit)

    def joined(self, delta: float | Callable[[int], float], gamma: Crack | None = None) -> "CrackSequence":
        """H_h obtained by connecting components of K_h (and ``gamma``) closer than delta."""
        cracks = []
        for h, K in zip(self.hs, self.cracks):
            dl = delta(h) if callable(delta) else delta
            H, _arcs = join_components(K, gamma, dl)
            try:
                self.domain.validate_crack(H)
            except GeometryError as exc:
                # straight joins can leave a nonconvex domain
                raise SequenceError(f"joined crack for h={h} leaves the domain: {exc}") from None
            cracks.append(H)
        dist = tuple(hausdorff_distance(H, self.limit, self.domain) for H in cracks)
        return dataclasses.replace(self, cracks=tuple(cracks), distances=dist,
                                   joined_with=None if callable(delta) else float(delta))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "limit": self.limit.to_dict(), "hs": list(self.hs),
                "resolutions": list(self.resolutions), "distances": list(self.distances),
                "lam": None if math.isinf(self.lam) else self.lam, "m": self.m,
                "cracks": [K.to_dict() for K in self.cracks]}


def _on_grid(K: Crack, origin, n: int) -> bool:
    v = K.vertices()
    if not len(v):
        return True
    s = (v - np.asarray(origin)) * n
    return bool(np.all(np.abs(s - np.round(s)) <= 1e-7))


def _single_polyline(K: Crack) -> np.ndarray:
    if len(K.polylines) != 1 or len(K.polylines[0]) < 2:
        raise SequenceError("this sequence kind needs a limit crack made of one polyline")
    return np.asarray(K.polylines[0], float)


def _shorten(poly: np.ndarray, amount: float, at_end: bool = True) -> np.ndarray:
    """Remove ``amount`` of arc length from one end of a polyline."""
    pts = poly if at_end else poly[::-1]
    pts = [p.copy() for p in pts]
    left = amount
    while left > 1e-15:
        a, b = pts[-2], pts[-1]
        L = float(np.hypot(*(b - a)))
        if L > left + 1e-15:
            pts[-1] = b + (a - b) * (left / L)
            left = 0.0
        else:
            pts.pop()
            left -= L
            if len(pts) < 2:
                raise SequenceError("shortening exceeds the crack length")
    out = np.asarray(pts)
    return out if at_end else out[::-1]


def _cut_gap(poly: np.ndarray, at: float, gap: float) -> tuple[np.ndarray, np.ndarray]:
    """Split a polyline by removing the open stretch of length ``gap`` centered at arc length ``at``."""
    seg_len = np.hypot(*np.diff(poly, axis=0).T)
    cum = np.r_[0.0, np.cumsum(seg_len)]
    lo, hi = at - gap / 2, at + gap / 2
    if lo <= 0 or hi >= cum[-1]:
        raise SequenceError("gap does not fit inside the crack")

    def point_at(s):
        i = min(int(np.searchsorted(cum, s, side="right")) - 1, len(seg_len) - 1)
        return poly[i] + (poly[i + 1] - poly[i]) * ((s - cum[i]) / seg_len[i]), i

    pa, ia = point_at(lo)
    pb, ib = point_at(hi)
    first = np.vstack([poly[: ia + 1], pa])
    second = np.vstack([pb, poly[ib + 1:]])
    return first, second


def make_sequence(kind: str, dom: Domain, K: Crack, hs: Sequence[int], *, n: int | None = None,
                  n_per_index: int | None = None, lam: float = math.inf, m: int | None = None,
                  at: float | None = None, direction=(1.0, 0.0), end: str = "last") -> CrackSequence:
    """Grid-aligned sequence K_h -> K with certified Hausdorff distances.

    Resolution is either fixed (``n``) or proportional to the index
    (``n_per_index * h``).  Kinds:

    constant        K_h = K
    grow_to_limit   K_h is K with 1/h removed from one end (``end``)
    boundary_touch  K touches the boundary; K_h backs off from it by 1/h
    merge_gap       K_h is K minus an open gap of length 1/h centered at arc length ``at``
    translate       K_h = K + direction / h
    """
    if kind not in KINDS:
        raise SequenceError(f"unknown sequence kind {kind!r}; expected one of {KINDS}")
    hs = tuple(int(h) for h in hs)
    if not hs or any(h <= 0 for h in hs):
        raise SequenceError("indices must be positive integers")
    if (n is None) == (n_per_index is None):
        raise SequenceError("give exactly one of n or n_per_index")
    res = tuple(n if n is not None else n_per_index * h for h in hs)
    x0, y0, *_ = dom.bbox()

    cracks = []
    for h in hs:
        if kind == "constant":
            Kh = K
        elif kind in ("grow_to_limit", "boundary_touch"):
            poly = _single_polyline(K)
            if kind == "boundary_touch":
                on = [bool(dom.contains(p)[0] and not dom.contains(p, closed=False)[0])
                      for p in (poly[0], poly[-1])]
                if not any(on):
                    raise SequenceError("boundary_touch needs a limit crack with an endpoint on the boundary")
                at_end = on[1]
            else:
                at_end = end == "last"
            Kh = Crack([_shorten(poly, 1.0 / h, at_end)])
        elif kind == "merge_gap":
            poly = _single_polyline(K)
            s = at if at is not None else 0.5 * h1_length(K)
            a, b = _cut_gap(poly, s, 1.0 / h)
            Kh = Crack([a, b])
        else:  # translate
            dvec = np.asarray(direction, float)
            dvec = dvec / np.hypot(*dvec)
            Kh = Crack([np.asarray(p, float) + dvec / h for p in K.polylines])
        cracks.append(Kh)

    for h, Kh, nh in zip(hs, cracks, res):
        if not _on_grid(Kh, (x0, y0), nh):
            raise SequenceError(f"K_h for h={h} is not aligned with the grid of resolution {nh}")
        try:
            dom.validate_crack(Kh)
        except GeometryError as exc:
            raise SequenceError(f"K_h for h={h}: {exc}") from None
        if h1_length(Kh) > lam + 1e-12:
            raise SequenceError(f"length bound exceeded at h={h}: {h1_length(Kh):.6g} > {lam:.6g}")
        if m is not None and len(components(Kh)) > m:
            raise SequenceError(f"component bound exceeded at h={h}")
    dist = tuple(hausdorff_distance(Kh, K, dom) for Kh in cracks)
    return CrackSequence(kind, dom, K, hs, tuple(cracks), res, dist, lam, m)


# ---------------------------------------------------------------------------
# stability experiments
# ---------------------------------------------------------------------------


def evaluation_points(dom: Domain, n: int = REFERENCE_N) -> tuple[np.ndarray, np.ndarray]:
    """Barycenters and areas of the uncracked grid triangulation at resolution ``n``."""
    mesh = build_mesh(dom, Crack.empty(), n)
    return mesh.barycenters, mesh.areas


def _lp(values: np.ndarray, areas: np.ndarray, p: float) -> float:
    return float(np.sum(areas * np.hypot(*values.T) ** p) ** (1.0 / p))


@dataclass
class ExperimentTable:
    rows: list[dict]
    reference: dict
    exponent: float

    COLUMNS = ("h", "n_h", "d_H", "H1", "bulk_h", "error_p", "rel_error_p", "energy_total",
               "residual", "iterations", "status")

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, np.nan) for r in self.rows], float)

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(r.get(c)) for c in self.COLUMNS])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v


def convergence_experiment(seq: CrackSequence, g, d: EnergyDensity, *,
                           g_h: Callable[[int], object] | None = None,
                           reference_n: int = REFERENCE_N, reference: FieldSolution | None = None,
                           exponent: float | None = None, threads: int = 1) -> ExperimentTable:
    """Solve on every K_h and compare gradients with the limit solution.

    The limit solution (crack ``seq.limit``, datum ``g``) is computed at
    ``reference_n``; gradients are compared on the barycenters of that
    grid in L^exponent (default: the density exponent).  Failed rows are
    recorded with their message and the run continues.
    """
    p = float(exponent if exponent is not None else d.p)
    g = as_datum(g)
    if reference is None:
        reference = solve_elastic(build_mesh(seq.domain, seq.limit, reference_n), d, g)
    pts, areas = evaluation_points(seq.domain, reference.mesh.n)
    grad_ref = reference.gradient_at(pts)
    ref_norm = _lp(grad_ref, areas, p)
    ref_bulk = bulk_energy(reference)

    def run(item):
        h, Kh, nh, dist = item
        row = {"h": h, "n_h": nh, "d_H": dist, "H1": h1_length(Kh)}
        try:
            sol = solve_elastic(build_mesh(seq.domain, Kh, nh), d, g_h(h) if g_h else g)
        except (ConvergenceError, MeshError) as exc:
            row["status"] = f"failed: {exc}"
            return row
        err = _lp(sol.gradient_at(pts) - grad_ref, areas, p)
        rep = total_energy(sol, Kh)
        row.update(bulk_h=rep.bulk, error_p=err, rel_error_p=err / ref_norm if ref_norm > 0 else err,
                   energy_total=rep.total, residual=sol.residual, iterations=sol.iterations, status="ok")
        return row

    items = list(seq.rows())
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, items))
    else:
        rows = [run(it) for it in items]
    ref = {"n": reference.mesh.n, "bulk": ref_bulk, "norm_p": ref_norm, "H1": h1_length(seq.limit),
           "energy_total": ref_bulk + h1_length(seq.limit), "residual": reference.residual}
    return ExperimentTable(rows, ref, p)


# ---------------------------------------------------------------------------
# unilateral minimality and evolution
# ---------------------------------------------------------------------------


def griffith_energy(sol: FieldSolution, K: Crack) -> EnergyReport:
    return total_energy(sol, K)


@dataclass
class ArcTrial:
    arc: Crack
    energy: float
    gap: float
    solution: FieldSolution | None


def unilateral_trials(u: FieldSolution, K: Crack, dictionary: Sequence[Crack], d: EnergyDensity | None = None,
                      g=None) -> list[ArcTrial]:
    """E(w_H, H) - E(u, K) for every single-arc extension H = K u a not already in K."""
    d = d or u.density
    g = as_datum(g) if g is not None else u.datum
    base = total_energy(u, K).total
    out = []
    for a in dictionary:
        if K.contains(a):
            continue
        H = K.union(a)
        w = solve_elastic(build_mesh(u.mesh.domain, H, u.mesh.n), d, g)
        e = total_energy(w, H).total
        out.append(ArcTrial(a, e, e - base, w))
    return out


def unilateral_gap(u: FieldSolution, K: Crack, dictionary: Sequence[Crack], d: EnergyDensity | None = None,
                   g=None) -> float:
    """min over dictionary arcs a of E(w_{K u a}, K u a) - E(u, K); +inf when nothing is left to add."""
    trials = unilateral_trials(u, K, dictionary, d, g)
    return min((t.gap for t in trials), default=math.inf)


@dataclass
class LoadProgram:
    """Boundary datum g(x, y, t) sampled at times t_0 < ... < t_N."""

    times: tuple[float, ...]
    datum: str

    def __post_init__(self):
        self.times = tuple(float(t) for t in self.times)
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("load times must be strictly increasing")
        self._expr = Expression(self.datum)

    @classmethod
    def ramp(cls, datum: str, t0: float, t1: float, dt: float) -> "LoadProgram":
        k = int(round((t1 - t0) / dt))
        return cls(tuple(t0 + i * dt for i in range(k + 1)), datum)

    def at(self, t: float):
        return self._expr.at_time(t)


@dataclass
class EvolutionState:
    times: list[float] = field(default_factory=list)
    cracks: list[Crack] = field(default_factory=list)
    solutions: list[FieldSolution] = field(default_factory=list)
    energies: list[EnergyReport] = field(default_factory=list)
    gaps: list[float] = field(default_factory=list)
    added: list[list[Crack]] = field(default_factory=list)
    substep_energies: list[list[float]] = field(default_factory=list)
    dictionary: tuple[Crack, ...] = ()
    aborted: str | None = None

    def is_irreversible(self) -> bool:
        return all(b.contains(a) for a, b in zip(self.cracks, self.cracks[1:]))

    def first_growth_time(self) -> float | None:
        for t, K in zip(self.times, self.cracks):
            if h1_length(K) > h1_length(self.cracks[0]) + 1e-12:
                return t
        return None

    def to_records(self) -> list[dict]:
        out = []
        for i, t in enumerate(self.times):
            e = self.energies[i]
            out.append({"step": i, "t": t, "bulk": e.bulk, "surface": e.surface, "total": e.total,
                        "unilateral_gap": None if math.isinf(self.gaps[i]) else self.gaps[i],
                        "added": [a.to_dict() for a in self.added[i]],
                        "crack": self.cracks[i].to_dict()})
        return out


def quasistatic_evolve(dom: Domain, d: EnergyDensity, load: LoadProgram, dictionary: Sequence[Crack], *,
                       n: int, K0: Crack | None = None, tol: float = UNILATERAL_TOL,
                       max_additions: int = 1000) -> EvolutionState:
    """Greedy single-arc unilateral descent at each load step.

    At t_i the best dictionary arc is added while it lowers the Griffith
    energy by more than ``tol``; the crack never shrinks.  A solver failure
    stops the run and returns the partial history.
    """
    K = K0 if K0 is not None else Crack.empty()
    state = EvolutionState(dictionary=tuple(dictionary))
    for t in load.times:
        g = load.at(t)
        added: list[Crack] = []
        try:
            u = solve_elastic(build_mesh(dom, K, n), d, g)
            sub = [total_energy(u, K).total]
            while True:
                trials = unilateral_trials(u, K, dictionary, d, g)
                best = min(trials, key=lambda tr: tr.gap, default=None)
                if best is None or best.gap >= -tol or len(added) >= max_additions:
                    gap = best.gap if best is not None else math.inf
                    break
                K = K.union(best.arc)
                u = best.solution
                added.append(best.arc)
                sub.append(best.energy)
        except (ConvergenceError, MeshError) as exc:
            state.aborted = f"t={t}: {exc}"
            log.warning("evolution aborted at t=%s: %s", t, exc)
            break
        state.times.append(t)
        state.cracks.append(K)
        state.solutions.append(u)
        state.energies.append(total_energy(u, K))
        state.gaps.append(gap)
        state.added.append(added)
        state.substep_energies.append(sub)
    return state


def exhaustive_nucleation_time(dom: Domain, d: EnergyDensity, load: LoadProgram,
                               dictionary: Sequence[Crack], *, n: int) -> float | None:
    """First load time at which some nonempty dictionary subset beats the uncracked state.

    Brute force over all 2^k subsets; only meant for small dictionaries.
    """
    import itertools

    k = len(dictionary)
    if k > 12:
        raise ValueError("dictionary too large for exhaustive search")
    subsets = [Crack.empty().union(*c) for r in range(1, k + 1)
               for c in itertools.combinations(dictionary, r)]
    meshes = [build_mesh(dom, H, n) for H in subsets]
    base_mesh = build_mesh(dom, Crack.empty(), n)
    for t in load.times:
        g = load.at(t)
        e0 = total_energy(solve_elastic(base_mesh, d, g), Crack.empty()).total
        best = min(total_energy(solve_elastic(m, d, g), H).total for m, H in zip(meshes, subsets))
        if best < e0 - UNILATERAL_TOL:
            return t
    return None
