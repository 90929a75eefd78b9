import math

import numpy as np
import pytest

from fraclab.capacity import CapacitySet, Disk, capacity, container_mesh
from fraclab.geometry import Crack, Domain, GeometryError

B = Domain.disk(1.0)


def test_empty_set_zero():
    assert capacity(Crack.empty(), B, 2.0, 16).value == 0.0


def test_disk_radial_oracle():
    # u = log(R/|x|)/log(R/rho); coarser than the acceptance run, so a looser band
    exact = 2 * math.pi / math.log(10.0)
    val = capacity(Disk((0.0, 0.0), 0.1), B, 2.0, 64).value
    assert abs(val - exact) / exact < 0.08


def test_monotone_on_nested_sets():
    small = Crack.segment((0.0, 0.0), (0.25, 0.0))
    big = small.union(Crack.segment((0.0, 0.0), (0.0, 0.25)))
    c1 = capacity(small, B, 2.0, 16).value
    c2 = capacity(big, B, 2.0, 16).value
    c3 = capacity(CapacitySet(big, (Disk((0.0, 0.0), 0.3),)), B, 2.0, 16).value
    assert 0 < c1 <= c2 <= c3


def test_point_dichotomy_trend():
    pt = Crack.points([(0.0, 0.0)])
    c2 = [capacity(pt, B, 2.0, n).value for n in (8, 16, 32)]
    c3 = [capacity(pt, B, 3.0, n).value for n in (8, 16, 32)]
    assert c2[0] > c2[1] > c2[2]
    # r > 2: stays above the continuum point capacity pi/2
    assert min(c3) > math.pi / 2


def test_errors():
    with pytest.raises(GeometryError):
        capacity(Crack.points([(2.0, 0.0)]), B, 2.0, 8)
    with pytest.raises(ValueError):
        capacity(Crack.points([(0.0, 0.0)]), B, 1.0, 8)


def test_container_mesh_inside():
    m = container_mesh(B, 8)
    assert np.all(np.hypot(*m.points.T) <= 1.0 + 1e-12)
    assert m.boundary.any() and not m.boundary.all()


def test_capacity_set_roundtrip():
    E = CapacitySet(Crack.points([(0.1, 0.2)]), (Disk((0.0, 0.0), 0.2),))
    F = CapacitySet.from_dict(E.to_dict())
    assert F.crack == E.crack and F.disks == E.disks
    G = CapacitySet.from_dict({"points": [[0, 0]]})
    assert G.distance(np.array([[3.0, 4.0]]))[0] == pytest.approx(5.0)
