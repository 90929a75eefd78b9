"""Elastic minimization on a cracked domain and its Euler-Lagrange residual."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .energy import EnergyDensity, PowerDensity
from .expr import Expression
from .fem import ConvergenceError, minimize_energy, normalized_residual
from .mesh import CrackedMesh

__all__ = ["FieldSolution", "solve_elastic", "el_residual", "as_datum", "ConvergenceError"]

TOL = 1e-9
MAX_ITER = 200

Datum = Callable[[np.ndarray], np.ndarray]


def as_datum(g) -> Datum:
    """Accept a callable on (m, 2) points, an expression string or a number."""
    if callable(g):
        return g
    if isinstance(g, (str, int, float)):
        return Expression(g)
    raise TypeError(f"cannot interpret boundary datum {g!r}")


@dataclass
class FieldSolution:
    """Discrete minimizer: nodal values and per-triangle gradients.

    Gradients are extended by zero on removed triangles (none for
    polyline cracks).  ``pinned`` lists the nodes fixed to 0 in mesh
    components that carry no Dirichlet node.
    """

    mesh: CrackedMesh
    density: EnergyDensity
    datum: Datum
    u: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    energies: list = field(default_factory=list)
    pinned: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    @property
    def grad(self) -> np.ndarray:
        g = self.mesh.space.grad(self.u)
        g[self.mesh.removed] = 0.0
        return g

    @property
    def coef(self) -> np.ndarray:
        return self.density.coef(self.mesh.barycenters)

    @property
    def flux(self) -> np.ndarray:
        return self.density.flux(self.coef, self.grad)

    def with_density(self, d: EnergyDensity) -> "FieldSolution":
        return dataclasses.replace(self, density=d)

    def with_values(self, u: np.ndarray) -> "FieldSolution":
        return dataclasses.replace(self, u=np.asarray(u, float), converged=False,
                                   residual=np.nan, iterations=0, energies=[])

    def gradient_at(self, pts) -> np.ndarray:
        """Gradient sampled at points; zero outside the mesh or on K."""
        tri = self.mesh.locate(pts)
        out = np.zeros((len(tri), 2))
        ok = tri >= 0
        out[ok] = self.grad[tri[ok]]
        return out


def _datum_scale(mesh: CrackedMesh, values: np.ndarray) -> float:
    dv = values[mesh.dirichlet]
    if dv.size == 0:
        return 1.0
    span = float(dv.max() - dv.min())
    return span / mesh.domain.diameter() if span > 0 else 1.0


def eps_schedule(p: float, scale: float) -> tuple[float, ...]:
    if p == 2:
        return (0.0,)
    if p < 2:
        return tuple(scale * e for e in (1e-2, 1e-5, 1e-8))
    return (scale * 1e-8,)


def solve_elastic(mesh: CrackedMesh, d: EnergyDensity, g, *, u0: np.ndarray | None = None,
                  tol: float = TOL, max_iter: int = MAX_ITER) -> FieldSolution:
    """Minimize sum_T |T| f(x_T, grad v_T) with v = g at Dirichlet nodes off K.

    Without ``u0`` the iteration starts from the weighted p = 2 solution.
    Raises ``ConvergenceError`` when the normalized Euler-Lagrange residual
    stays above ``tol``.
    """
    g = as_datum(g)
    space = mesh.space
    coef = d.coef(mesh.barycenters)
    pins = mesh.pinned_nodes()
    fixed = mesh.dirichlet.copy()
    fixed[pins] = True
    gvals = np.asarray(g(mesh.points), float)
    values = np.where(mesh.dirichlet, gvals, 0.0)

    iters = 0
    energies: list = []
    rough = 0.0
    if u0 is not None:
        # a user start may be far from smooth; open the schedule at its gradient scale
        g0 = space.grad(np.where(fixed, values, np.asarray(u0, float)))
        rough = float(np.sqrt(np.sum(mesh.areas * np.sum(g0 ** 2, axis=1)) / np.sum(mesh.areas)))
    if u0 is None:
        quad = PowerDensity(2.0, coefficient=None)
        start = np.where(fixed, values, 0.0)
        u0, info0 = minimize_energy(space, quad, coef, fixed, values, start, tol=min(tol, 1e-12),
                                    max_iter=5, raise_on_failure=False)
        iters += info0.iterations
    is_quadratic = d.p == 2 and getattr(d, "exponent", d.p) == 2
    if is_quadratic and u0 is not None:
        sched = (0.0,)
    else:
        sched = eps_schedule(getattr(d, "exponent", d.p), _datum_scale(mesh, gvals))
        if len(sched) > 1 and rough > sched[0]:
            sched = (rough,) + sched
    u, info = minimize_energy(space, d, coef, fixed, values, u0, tol=tol, max_iter=max_iter,
                              eps_schedule=sched, raise_on_failure=False)
    iters += info.iterations
    energies.extend(info.energies)
    sol = FieldSolution(mesh=mesh, density=d, datum=g, u=u, iterations=iters, residual=info.residual,
                        converged=info.converged, energies=energies, pinned=pins)
    if not info.converged:
        raise ConvergenceError(
            f"solver stopped with residual {info.residual:.3e} after {iters} iterations "
            f"({info.message})", sol)
    return sol


def el_residual(sol: FieldSolution) -> float:
    """Normalized Euler-Lagrange residual over hat functions vanishing on the Dirichlet part."""
    mesh = sol.mesh
    return normalized_residual(mesh.space, sol.density, sol.coef, sol.u, ~mesh.dirichlet)


def nodal_pairings(sol: FieldSolution) -> np.ndarray:
    """Unnormalized pairings sum_T |T| f_xi(grad u).grad(phi_z) for every node."""
    return sol.mesh.space.assemble_vector(sol.flux)
