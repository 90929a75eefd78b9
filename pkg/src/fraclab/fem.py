"""Lowest-order conforming elements and a damped Newton minimizer.

Everything works on plain (points, triangles) arrays so the cracked
meshes and the capacity meshes share the same machinery.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, msg, info=None):
        super().__init__(msg)
        self.info = info


class P1Space:
    """Continuous piecewise-linear functions on a triangulation."""

    def __init__(self, points: np.ndarray, triangles: np.ndarray):
        self.points = np.asarray(points, float)
        self.triangles = np.asarray(triangles, np.int64)
        P = self.points[self.triangles]  # (T, 3, 2)
        e1 = P[:, 1] - P[:, 0]
        e2 = P[:, 2] - P[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 0):
            raise ValueError("triangles must be nondegenerate and counterclockwise")
        self.areas = 0.5 * det
        # gradient of barycentric coordinate k is R^T(opposite edge)/(2|T|)
        opp = np.stack([P[:, 2] - P[:, 1], P[:, 0] - P[:, 2], P[:, 1] - P[:, 0]], axis=1)
        self.B = np.stack([-opp[:, :, 1], opp[:, :, 0]], axis=1) / det[:, None, None]  # (T, 2, 3)
        self.barycenters = P.mean(axis=1)
        self.n_nodes = len(self.points)
        T = len(self.triangles)
        rows = np.repeat(np.arange(2 * T).reshape(T, 2), 3, axis=1).reshape(T, 2, 3)
        cols = np.broadcast_to(self.triangles[:, None, :], (T, 2, 3))
        self.G = sp.csr_matrix((self.B.ravel(), (rows.ravel(), cols.ravel())), shape=(2 * T, self.n_nodes))
        ii = np.broadcast_to(self.triangles[:, :, None], (T, 3, 3))
        jj = np.broadcast_to(self.triangles[:, None, :], (T, 3, 3))
        self._ii = ii.ravel()
        self._jj = jj.ravel()

    def grad(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("tkj,tj->tk", self.B, u[self.triangles])

    def assemble_vector(self, sigma: np.ndarray) -> np.ndarray:
        """Nodal pairing sum_T |T| sigma_T . grad(phi_z)."""
        loc = np.einsum("tk,tkj->tj", sigma * self.areas[:, None], self.B)
        return np.bincount(self.triangles.ravel(), loc.ravel(), minlength=self.n_nodes)

    def assemble_matrix(self, D: np.ndarray) -> sp.csr_matrix:
        loc = np.einsum("tki,tkl,tlj->tij", self.B, D, self.B) * self.areas[:, None, None]
        return sp.csr_matrix((loc.ravel(), (self._ii, self._jj)), shape=(self.n_nodes, self.n_nodes))


def lq_norm(space: P1Space, sigma: np.ndarray, q: float) -> float:
    mag = np.hypot(sigma[:, 0], sigma[:, 1])
    return float(np.sum(space.areas * mag ** q) ** (1.0 / q))


def el_pairings(space: P1Space, density, coef: np.ndarray, u: np.ndarray) -> np.ndarray:
    return space.assemble_vector(density.flux(coef, space.grad(u)))


def normalized_residual(space: P1Space, density, coef, u, free: np.ndarray) -> float:
    """max_z |sum_T |T| f_xi(grad u).grad(phi_z)| / ||f_xi(grad u)||_q over free z."""
    sigma = density.flux(coef, space.grad(u))
    nrm = lq_norm(space, sigma, density.q)
    if nrm == 0.0 or not np.any(free):
        return 0.0
    r = space.assemble_vector(sigma)
    return float(np.max(np.abs(r[free])) / nrm)


@dataclass
class NewtonInfo:
    iterations: int = 0
    residual: float = np.inf
    converged: bool = False
    energies: list = field(default_factory=list)
    eps_schedule: list = field(default_factory=list)
    message: str = ""


def minimize_energy(space: P1Space, density, coef: np.ndarray, fixed: np.ndarray,
                    fixed_values: np.ndarray, u0: np.ndarray, *, tol: float = 1e-9,
                    max_iter: int = 200, eps_schedule=(0.0,), raise_on_failure: bool = True):
    """Minimize sum_T |T| f_eps(a_T, grad u_T) with u = fixed_values on ``fixed``.

    Damped Newton with Armijo backtracking, run once per entry of
    ``eps_schedule``; only the last stage must reach ``tol`` in the
    normalized Euler-Lagrange residual of the unregularized density.
    Returns the nodal vector and a ``NewtonInfo``.
    """
    u = np.array(u0, float, copy=True)
    u[fixed] = fixed_values[fixed] if fixed_values.shape == u.shape else fixed_values
    free = ~fixed
    free_idx = np.nonzero(free)[0]
    info = NewtonInfo(eps_schedule=list(eps_schedule))
    areas = space.areas

    def energy(v, eps):
        return float(np.sum(areas * density.value(coef, space.grad(v), eps)))

    if free_idx.size == 0:
        info.residual = 0.0
        info.converged = True
        info.energies.append(energy(u, eps_schedule[-1]))
        return u, info

    n_stage = len(eps_schedule)
    for stage, eps in enumerate(eps_schedule):
        last = stage == n_stage - 1
        J = energy(u, eps)
        info.energies.append(J)
        stage_tol = tol if last else max(tol, 1e-6)
        while info.iterations < max_iter:
            xi = space.grad(u)
            sigma = density.flux(coef, xi, eps)
            g = space.assemble_vector(sigma)
            res = normalized_residual(space, density, coef, u, free)
            if not last:
                nrm = lq_norm(space, sigma, density.q)
                res = float(np.max(np.abs(g[free]))) / nrm if nrm > 0 else 0.0
            info.residual = res
            if res <= stage_tol:
                break
            H = space.assemble_matrix(density.hessian(coef, xi, eps))
            Hff = H[free_idx][:, free_idx].tocsc()
            gf = g[free_idx]
            try:
                d = spla.spsolve(Hff, -gf)
            except RuntimeError:
                d = np.full_like(gf, np.nan)
            slope = float(gf @ d)
            if not np.all(np.isfinite(d)) or slope >= 0:
                d = -gf
                slope = float(gf @ d)
            step = 1.0
            accepted = False
            while step > 1e-14:
                trial = u.copy()
                trial[free_idx] += step * d
                Jt = energy(trial, eps)
                if Jt <= J + 1e-4 * step * slope:
                    accepted = True
                    break
                # roundoff plateau: accept if energy is flat and the residual improves
                if step == 1.0 and Jt - J <= 1e-14 * max(1.0, abs(J)):
                    if normalized_residual(space, density, coef, trial, free) < res:
                        accepted = True
                        break
                step *= 0.5
            info.iterations += 1
            if not accepted:
                info.message = "line search stalled"
                break
            u = trial
            J = Jt
            info.energies.append(Jt)
        else:
            info.message = "iteration limit reached"
    info.residual = normalized_residual(space, density, coef, u, free)
    info.converged = info.residual <= tol
    if not info.converged:
        if not info.message:
            info.message = "iteration limit reached"
        if raise_on_failure:
            raise ConvergenceError(
                f"Newton did not converge: residual {info.residual:.3e} after "
                f"{info.iterations} iterations ({info.message})", info)
    return u, info
