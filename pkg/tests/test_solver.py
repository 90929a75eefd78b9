import numpy as np
import pytest

from fraclab.energy import bulk_energy, isotropic, weighted
from fraclab.expr import Expression
from fraclab.fem import ConvergenceError
from fraclab.geometry import Crack, Domain
from fraclab.mesh import build_mesh
from fraclab.solver import el_residual, solve_elastic

SQ = Domain.unit_square()
SLIT = Crack.segment((0.5, 0.25), (0.5, 0.75))


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_affine_reproduced(p):
    sol = solve_elastic(build_mesh(SQ, Crack.empty(), 16), isotropic(p), "x")
    assert np.max(np.abs(sol.u - sol.mesh.points[:, 0])) <= 1e-10
    assert np.max(np.abs(sol.grad - [1.0, 0.0])) <= 1e-10
    assert el_residual(sol) <= 1e-10


def test_full_cut_piecewise_constant():
    dom = Domain.unit_square("NDND")
    K = Crack.segment((0.5, 0), (0.5, 1))
    sol = solve_elastic(build_mesh(dom, K, 16), isotropic(3), "x")
    left = sol.mesh.points[:, 0] < 0.5 - 1e-9
    right = sol.mesh.points[:, 0] > 0.5 + 1e-9
    assert np.allclose(sol.u[left], 0.0, atol=1e-12)
    assert np.allclose(sol.u[right], 1.0, atol=1e-12)
    assert bulk_energy(sol) == pytest.approx(0.0, abs=1e-20)


def test_harmonic_polynomial_first_order():
    errs = []
    for n in (8, 16, 32):
        sol = solve_elastic(build_mesh(SQ, Crack.empty(), n), isotropic(2), "x*y")
        b = sol.mesh.barycenters
        errs.append(np.max(np.abs(sol.grad - np.c_[b[:, 1], b[:, 0]])))
    assert errs[-1] <= 1.0 / 32
    assert errs[0] / errs[-1] >= 3.5


def test_el_residual_examples():
    sol = solve_elastic(build_mesh(SQ, SLIT, 32), isotropic(3), "x+y^2")
    assert el_residual(sol) <= 1e-9
    rng = np.random.default_rng(5)
    noisy = sol.with_values(sol.u + 0.1 * rng.standard_normal(len(sol.u)) * ~sol.mesh.dirichlet)
    assert el_residual(noisy) > 1e-3
    zero = solve_elastic(build_mesh(SQ, SLIT, 8), isotropic(2), 0.0)
    assert el_residual(zero) == 0.0


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_gradient_unique_from_random_starts(p):
    mesh = build_mesh(Domain.unit_square("NDND"), SLIT, 16)
    d = isotropic(p)
    rng = np.random.default_rng(1)
    a = solve_elastic(mesh, d, "x", u0=rng.standard_normal(len(mesh.points)))
    b = solve_elastic(mesh, d, "x", u0=rng.standard_normal(len(mesh.points)))
    diff = np.sum(mesh.areas * np.hypot(*(a.grad - b.grad).T) ** p) ** (1 / p)
    assert diff <= 1e-8


def test_descent_and_extension_bound():
    mesh = build_mesh(Domain.unit_square("NDND"), SLIT, 16)
    sol = solve_elastic(mesh, isotropic(4), "x+0.3*y")
    e = np.asarray(sol.energies)
    assert np.all(np.diff(e) <= 1e-12 * abs(e[0]))
    ext = sol.with_values(np.where(mesh.dirichlet, sol.u, 0.0))
    assert bulk_energy(sol) <= bulk_energy(ext)


def test_comparison_principle_p2():
    sol = solve_elastic(build_mesh(Domain.unit_square("DNDN"), SLIT, 16), isotropic(2), "x^2-y")
    g = Expression("x^2-y")(sol.mesh.points[sol.mesh.dirichlet])
    assert sol.u.min() >= g.min() - 1e-12
    assert sol.u.max() <= g.max() + 1e-12


def test_weighted_density_converges():
    d = weighted(2.5, Expression("1+0.5*x"), 1.0, 1.5)
    sol = solve_elastic(build_mesh(SQ, SLIT, 16), d, "x*y")
    assert sol.converged and el_residual(sol) <= 1e-9


def test_floating_component_pinned():
    dom = Domain.unit_square("NDNN")
    sol = solve_elastic(build_mesh(dom, Crack.segment((0.5, 0), (0.5, 1)), 8), isotropic(2), "x")
    assert len(sol.pinned) == 1
    assert sol.u[sol.pinned[0]] == 0.0


def test_nonconvergence_reported():
    mesh = build_mesh(SQ, SLIT, 16)
    with pytest.raises(ConvergenceError) as info:
        solve_elastic(mesh, isotropic(4), "x^3*y", max_iter=1)
    assert info.value.info is not None
    assert info.value.info.residual > 1e-9


def test_gradient_zero_outside_mesh():
    sol = solve_elastic(build_mesh(SQ, SLIT, 8), isotropic(2), "x")
    assert np.all(sol.gradient_at([[5.0, 5.0]]) == 0.0)
    assert not sol.mesh.removed.any()
