import numpy as np
import pytest

from fraclab.geometry import Crack, Domain
from fraclab.mesh import TAG_CRACK, TAG_DIRICHLET, MeshError, build_mesh


def test_counts_empty_crack():
    mesh = build_mesh(Domain.unit_square(), Crack.empty(), 4)
    assert len(mesh.triangles) == 32
    assert len(mesh.points) == 25
    assert mesh.n_duplicated == 0
    assert mesh.areas.sum() == pytest.approx(1.0)


def test_full_cut_two_components():
    mesh = build_mesh(Domain.unit_square("NDND"), Crack.segment((0.5, 0), (0.5, 1)), 8)
    assert mesh.n_components == 2
    # every node on the cut, including both boundary endpoints, is split
    assert mesh.n_duplicated == 9


def test_interior_slit_duplicates_interior_nodes_only():
    n = 8
    K = Crack.segment((0.5, 0.25), (0.5, 0.75))
    mesh = build_mesh(Domain.unit_square(), K, n)
    assert mesh.n_components == 1
    # 4 crack edges, 3 interior nodes; tips keep a single node
    assert mesh.n_duplicated == 3
    on_slit = np.isclose(mesh.points[:, 0], 0.5) & (mesh.points[:, 1] > 0.25 + 1e-9) \
        & (mesh.points[:, 1] < 0.75 - 1e-9)
    assert on_slit.sum() == 6
    for tip in ((0.5, 0.25), (0.5, 0.75)):
        assert np.sum(np.all(np.isclose(mesh.points, tip), axis=1)) == 1
    assert np.all(mesh.node_tag[on_slit] == TAG_CRACK)


def test_duplicates_share_coordinates_not_adjacency():
    mesh = build_mesh(Domain.unit_square(), Crack.segment((0.25, 0.5), (0.75, 0.5)), 8)
    copies = np.nonzero(mesh.parent != np.arange(len(mesh.parent)))[0]
    for c in copies:
        z = mesh.parent[c]
        assert np.array_equal(mesh.points[c], mesh.points[z])
        tri_c = np.any(mesh.triangles == c, axis=1)
        tri_z = np.any(mesh.triangles == z, axis=1)
        assert not np.any(tri_c & tri_z)


def test_no_triangle_crosses_crack():
    K = Crack([[(0.25, 0.25), (0.5, 0.5), (0.5, 0.75)]])
    mesh = build_mesh(Domain.unit_square(), K, 16)
    assert mesh.crack_edge.sum() == 4 + 4


def test_diagonal_and_bent_cracks():
    K = Crack([[(0.25, 0.25), (0.75, 0.75)], [(0.25, 0.75), (0.25, 0.5)]])
    mesh = build_mesh(Domain.unit_square(), K, 8)
    assert mesh.n_components == 1


def test_dirichlet_nodes_off_crack():
    # a crack lying on the Dirichlet boundary cancels the condition there
    dom = Domain.unit_square("DDDD")
    mesh = build_mesh(dom, Crack.segment((0.0, 0.0), (0.5, 0.0)), 4)
    bottom = np.isclose(mesh.points[:, 1], 0.0) & (mesh.points[:, 0] < 0.5 - 1e-9)
    assert not np.any(mesh.dirichlet[bottom & (mesh.points[:, 0] > 1e-9)])
    assert np.all(mesh.node_tag[mesh.dirichlet] == TAG_DIRICHLET)


def test_errors():
    dom = Domain.unit_square()
    with pytest.raises(MeshError):
        build_mesh(dom, Crack.segment((0.3, 0.5), (0.7, 0.5)), 4)
    with pytest.raises(MeshError):
        build_mesh(dom, Crack.segment((0.25, 0.75), (0.75, 0.25)), 4)
    with pytest.raises(MeshError):
        build_mesh(dom, Crack.segment((0.5, 0.5), (0.75, 0.5)), 4)
    with pytest.raises(MeshError):
        build_mesh(Domain.rectangle(0, 0, 1, 0.3), Crack.empty(), 4)


def test_locate():
    mesh = build_mesh(Domain.unit_square(), Crack.empty(), 4)
    b = mesh.barycenters
    assert np.array_equal(mesh.locate(b), np.arange(len(b)))
    assert mesh.locate([[2.0, 2.0]])[0] == -1


def test_floating_components_pinned():
    dom = Domain.unit_square("NDNN")
    mesh = build_mesh(dom, Crack.segment((0.5, 0), (0.5, 1)), 4)
    pins = mesh.pinned_nodes()
    assert len(pins) == 1
    assert mesh.points[pins[0], 0] <= 0.5
