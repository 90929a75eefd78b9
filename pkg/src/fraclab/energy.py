"""Bulk densities with p-growth and the Griffith energy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import Crack, h1_length


class EnergyError(ValueError):
    pass


CoefficientField = Callable[[np.ndarray], np.ndarray]


class EnergyDensity:
    """Density f(x, xi) = a(x) * phi(|xi|) with growth exponent ``p``.

    The coefficient ``a`` is sampled at triangle barycenters, so the
    x-dependence is piecewise constant on any mesh.  Subclasses provide
    the radial profile; ``PowerDensity`` covers the built-in families.

    Parameters
    ----------
    p : float
        Growth exponent, 1 < p < inf.
    alpha, beta, gamma : float
        Claimed growth constants: alpha|xi|^p <= f <= beta|xi|^p + gamma.
    coefficient : callable, optional
        Maps an (m, 2) array of points to m positive coefficients.
    """

    name = "density"

    def __init__(self, p: float, alpha: float, beta: float, gamma: float = 0.0,
                 coefficient: CoefficientField | None = None):
        if not 1.0 < p < np.inf:
            raise EnergyError(f"exponent must lie in (1, inf), got {p!r}")
        if min(alpha, beta, gamma) < 0:
            raise EnergyError("growth constants must be nonnegative")
        self.p = float(p)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.gamma = float(gamma)
        self.coefficient = coefficient

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    def coef(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.coefficient is None:
            return np.ones(len(x))
        return np.asarray(self.coefficient(x), float).reshape(len(x))

    # evaluators take per-point coefficients and (m, 2) gradients
    def value(self, a: np.ndarray, xi: np.ndarray, eps: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def flux(self, a: np.ndarray, xi: np.ndarray, eps: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, a: np.ndarray, xi: np.ndarray, eps: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    # convenience wrappers on positions
    def f(self, x, xi) -> np.ndarray:
        return self.value(self.coef(x), np.atleast_2d(xi))

    def f_xi(self, x, xi) -> np.ndarray:
        return self.flux(self.coef(x), np.atleast_2d(xi))

    def to_dict(self) -> dict:
        return {"family": self.name, "p": self.p, "alpha": self.alpha,
                "beta": self.beta, "gamma": self.gamma}


class PowerDensity(EnergyDensity):
    """a(x) |xi|^s, with s the actual exponent (normally s == p).

    The regularized version replaces |xi|^2 by |xi|^2 + eps^2 in value,
    flux and Hessian alike.
    """

    def __init__(self, p, alpha=1.0, beta=1.0, gamma=0.0, coefficient=None,
                 exponent: float | None = None, name: str = "isotropic", spec: dict | None = None):
        super().__init__(p, alpha, beta, gamma, coefficient)
        self.exponent = float(p if exponent is None else exponent)
        self.name = name
        self._spec = spec

    def value(self, a, xi, eps=0.0):
        s = np.einsum("ij,ij->i", xi, xi) + eps * eps
        return a * s ** (0.5 * self.exponent)

    def flux(self, a, xi, eps=0.0):
        s = np.einsum("ij,ij->i", xi, xi) + eps * eps
        e = self.exponent
        if e >= 2:
            w = e * s ** (0.5 * e - 1.0)
        else:
            with np.errstate(divide="ignore"):
                w = np.where(s > 0, e * s ** (0.5 * e - 1.0), 0.0)
        return (a * w)[:, None] * xi

    def hessian(self, a, xi, eps=0.0):
        s = np.einsum("ij,ij->i", xi, xi) + eps * eps
        e = self.exponent
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(s > 0, e * s ** (0.5 * e - 1.0), 0.0 if e > 2 else (e if e == 2 else np.inf))
            w2 = np.where(s > 0, e * (e - 2.0) * s ** (0.5 * e - 2.0), 0.0)
        H = w[:, None, None] * np.eye(2)[None] + w2[:, None, None] * np.einsum("ij,ik->ijk", xi, xi)
        return a[:, None, None] * H

    def to_dict(self):
        d = super().to_dict()
        if self.exponent != self.p:
            d["exponent"] = self.exponent
        if self._spec is not None:
            d.update(self._spec)
        return d


def isotropic(p: float) -> PowerDensity:
    """f(x, xi) = |xi|^p with alpha = beta = 1, gamma = 0."""
    return PowerDensity(p, 1.0, 1.0, 0.0)


def weighted(p: float, coefficient: CoefficientField, a_min: float, a_max: float,
             spec: dict | None = None) -> PowerDensity:
    """f(x, xi) = a(x)|xi|^p with a_min <= a <= a_max."""
    if not 0 < a_min <= a_max:
        raise EnergyError("need 0 < a_min <= a_max")
    return PowerDensity(p, a_min, a_max, 0.0, coefficient, name="weighted", spec=spec)


# ---------------------------------------------------------------------------
# checks of the structural assumptions
# ---------------------------------------------------------------------------


@dataclass
class GrowthReport:
    lower_margin: float
    upper_margin: float
    worst_lower_sample: int
    worst_upper_sample: int

    @property
    def passed(self) -> bool:
        return self.lower_margin >= -1e-12 and self.upper_margin >= -1e-12


def check_growth(d: EnergyDensity, points, vectors) -> GrowthReport:
    """Worst-case margins of alpha|xi|^p <= f(x, xi) <= beta|xi|^p + gamma."""
    points = np.atleast_2d(np.asarray(points, float))
    vectors = np.atleast_2d(np.asarray(vectors, float))
    if len(points) == 0:
        raise EnergyError("empty sample set")
    fx = d.f(points, vectors)
    nrm = np.hypot(vectors[:, 0], vectors[:, 1]) ** d.p
    lo = fx - d.alpha * nrm
    hi = d.beta * nrm + d.gamma - fx
    return GrowthReport(float(lo.min()), float(hi.min()), int(lo.argmin()), int(hi.argmin()))


def check_strict_convexity(d: EnergyDensity, points, xi1, xi2) -> float:
    """Smallest midpoint gap (f(a)+f(b))/2 - f((a+b)/2) over distinct pairs.

    Positive means every sampled pair satisfies strict midpoint convexity.
    """
    points = np.atleast_2d(points)
    xi1, xi2 = np.atleast_2d(xi1), np.atleast_2d(xi2)
    keep = np.hypot(*(xi1 - xi2).T) > 1e-8
    a = d.coef(points[keep])
    gap = 0.5 * (d.value(a, xi1[keep]) + d.value(a, xi2[keep])) - d.value(a, 0.5 * (xi1[keep] + xi2[keep]))
    return float(gap.min()) if gap.size else np.inf


def check_flux_consistency(d: EnergyDensity, points, xis, step: float = 1e-6) -> float:
    """Max relative mismatch between flux and a central difference of f."""
    points = np.atleast_2d(points)
    xis = np.atleast_2d(xis)
    a = d.coef(points)
    fd = np.empty_like(xis)
    for k in range(2):
        e = np.zeros(2)
        e[k] = 1.0
        hk = step * np.maximum(1.0, np.abs(xis[:, k]))
        fd[:, k] = (d.value(a, xis + hk[:, None] * e) - d.value(a, xis - hk[:, None] * e)) / (2 * hk)
    an = d.flux(a, xis)
    scale = np.maximum(np.hypot(*an.T), 1e-300)
    return float(np.max(np.hypot(*(fd - an).T) / scale))


# ---------------------------------------------------------------------------
# Griffith energy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyReport:
    bulk: float
    surface: float

    @property
    def total(self) -> float:
        return self.bulk + self.surface


def bulk_energy(sol) -> float:
    """Exact triangle-wise integral of f at the piecewise-constant gradient."""
    mesh = sol.mesh
    a = sol.density.coef(mesh.barycenters)
    vals = sol.density.value(a, sol.grad)
    vals = np.where(mesh.removed, 0.0, vals)
    # sort for order-independent summation
    return float(np.sum(np.sort(mesh.areas * vals)))


def total_energy(sol, K: Crack, d: EnergyDensity | None = None, tol: float = 1e-9) -> EnergyReport:
    """E(u, K) = bulk + H^1(K) for a solution on a mesh conforming to K."""
    from .geometry import hausdorff_distance

    mesh_crack = sol.mesh.crack
    if (mesh_crack.is_empty() != K.is_empty()) or (
            not K.is_empty() and hausdorff_distance(mesh_crack, K) > tol):
        raise EnergyError("solution mesh does not conform to the given crack")
    if d is not None and d is not sol.density:
        sol = sol.with_density(d)
    return EnergyReport(bulk_energy(sol), h1_length(K))
