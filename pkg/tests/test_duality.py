import numpy as np
import pytest

from fraclab.duality import (DualityError, build_conjugate, build_local_conjugate, rotate,
                             verify_solution_via_conjugate)
from fraclab.energy import isotropic
from fraclab.geometry import Crack, Domain
from fraclab.mesh import build_mesh
from fraclab.solver import el_residual, solve_elastic

SLIT = Crack.segment((0.5, 0.25), (0.5, 0.75))
HOLE = np.array([[0.375, 0.375], [0.625, 0.375], [0.625, 0.625], [0.375, 0.625]])


def test_rotation():
    assert np.array_equal(rotate(np.array([1.0, 0.0])), [0.0, 1.0])
    assert np.array_equal(rotate(rotate(np.array([0.3, -2.0]))), [-0.3, 2.0])


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_affine_conjugate_is_linear_in_y(p):
    # u = x, sigma = (p, 0), R sigma = (0, p): v = p y + c with zero mean
    sol = solve_elastic(build_mesh(Domain.unit_square(), Crack.empty(), 8), isotropic(p), "x")
    v = build_conjugate(sol)
    assert np.allclose(v.grad, [0.0, p], atol=1e-10)
    b = sol.mesh.barycenters[v.triangles]
    assert np.allclose(v.center, p * b[:, 1] - p / 2, atol=1e-10)
    assert v.max_mismatch <= 1e-10
    assert v.circulation_residual <= 1e-10


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_slit_conjugate_constant_on_crack(p):
    sol = solve_elastic(build_mesh(Domain.unit_square(), SLIT, 64), isotropic(p), "x+0.3*y")
    v = build_conjugate(sol)
    el = el_residual(sol)
    assert v.circulation_residual <= 10 * el + 1e-14
    assert v.oscillation <= 1e-6 * v.v_inf
    assert len(v.groups) == 1
    verdict = verify_solution_via_conjugate(sol, v)
    assert verdict.passed and verdict.bound_holds


def test_local_without_crack_matches_global():
    sol = solve_elastic(build_mesh(Domain.unit_square(), Crack.empty(), 16), isotropic(3), "x*y+x")
    g = build_conjugate(sol)
    loc = build_local_conjugate(sol, (0.2, 0.2, 0.7, 0.9))
    assert np.allclose(loc.grad, g.grad[loc.triangles], atol=1e-14)
    # same gradients, so the two differ by a constant
    assert np.ptp(loc.center - g.center[loc.triangles]) <= 1e-10


def test_annulus_by_four_rectangles():
    dom = Domain.rectangle(0, 0, 1, 1, "DDDD", holes=[(HOLE, "NNNN")])
    sol = solve_elastic(build_mesh(dom, Crack.empty(), 32), isotropic(3), "x+0.5*y^2")
    with pytest.raises(DualityError):
        build_conjugate(sol)
    with pytest.raises(DualityError):
        build_local_conjugate(sol, (-0.1, -0.1, 1.1, 1.1))
    for U in ([-0.1, -0.1, 1.1, 0.4], [-0.1, 0.6, 1.1, 1.1], [-0.1, -0.1, 0.4, 1.1], [0.6, -0.1, 1.1, 1.1]):
        v = build_local_conjugate(sol, U)
        assert v.circulation_residual <= 10 * el_residual(sol) + 1e-14
        assert v.oscillation <= 1e-6 * v.v_inf
        assert verify_solution_via_conjugate(sol, v).passed


def test_local_clipping_the_slit():
    sol = solve_elastic(build_mesh(Domain.unit_square(), SLIT, 32), isotropic(2), "x")
    v = build_local_conjugate(sol, (0.3, 0.1, 0.7, 0.5))
    assert v.oscillation <= 1e-6 * v.v_inf
    assert verify_solution_via_conjugate(sol, v).passed


def test_perturbed_field_rejected():
    sol = solve_elastic(build_mesh(Domain.unit_square(), SLIT, 32), isotropic(3), "x")
    pts = sol.mesh.points
    bump = np.exp(-((pts[:, 0] - 0.25) ** 2 + (pts[:, 1] - 0.5) ** 2) / 0.01)
    pert = sol.with_values(sol.u + 0.1 * bump * ~sol.mesh.dirichlet)
    v = build_conjugate(pert, require_converged=False)
    verdict = verify_solution_via_conjugate(pert, v)
    assert not verdict.passed
    assert verdict.el_residual > 1e-3
    assert verdict.bound_holds


def test_disconnected_domain_certified():
    cut = Crack.segment((0.5, 0.0), (0.5, 1.0))
    sol = solve_elastic(build_mesh(Domain.unit_square(), cut, 16), isotropic(2.5), "x*y")
    v = build_conjugate(sol)
    assert verify_solution_via_conjugate(sol, v).passed


def test_zero_flux_exact():
    sol = solve_elastic(build_mesh(Domain.unit_square("NDND"), SLIT, 8), isotropic(2), 0.0)
    v = build_conjugate(sol)
    verdict = verify_solution_via_conjugate(sol, v)
    assert verdict.passed
    assert verdict.circulation_residual == 0.0 and verdict.oscillation == 0.0


def test_errors():
    mesh = build_mesh(Domain.unit_square(), SLIT, 16)
    sol = solve_elastic(mesh, isotropic(2), "x")
    bad = sol.with_values(sol.u + 0.01)
    with pytest.raises(DualityError):
        build_conjugate(bad)
    with pytest.raises(DualityError):
        build_local_conjugate(sol, (0.5, 0.5, 0.4, 0.9))
    with pytest.raises(DualityError):
        build_local_conjugate(sol, (2.0, 2.0, 3.0, 3.0))
    other = solve_elastic(build_mesh(Domain.unit_square(), SLIT, 16), isotropic(2), "x")
    with pytest.raises(DualityError):
        verify_solution_via_conjugate(other, build_conjugate(sol))
