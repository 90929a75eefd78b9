import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclab.geometry import (Crack, Domain, GeometryError, components, extend_sequence, h1_length,
                              hausdorff_distance, join_components)

UNIT = Domain.unit_square()


def _sampled_hausdorff(A: Crack, B: Crack, k: int = 400) -> float:
    """Brute-force lower estimate from dense samples on both sets."""

    def sample(K):
        pts = []
        for a, b in K.segments():
            t = np.linspace(0, 1, k)[:, None]
            pts.append(a + t * (b - a))
        return np.concatenate(pts)

    pa, pb = sample(A), sample(B)
    d = np.hypot(pa[:, None, 0] - pb[None, :, 0], pa[:, None, 1] - pb[None, :, 1])
    return max(d.min(axis=1).max(), d.min(axis=0).max())


# ----------------------------------------------------------------- Hausdorff


def test_hausdorff_empty_conventions():
    K = Crack.segment((0.1, 0.1), (0.4, 0.2))
    assert hausdorff_distance(Crack.empty(), K, UNIT) == pytest.approx(math.sqrt(2), abs=0)
    assert hausdorff_distance(K, Crack.empty(), UNIT) == UNIT.diameter()
    assert hausdorff_distance(Crack.empty(), Crack.empty()) == 0.0


def test_hausdorff_empty_needs_diameter():
    with pytest.raises(GeometryError):
        hausdorff_distance(Crack.empty(), Crack.segment((0, 0), (1, 0)))
    assert hausdorff_distance(Crack.empty(), Crack.points([(0, 0)]), diam=3.0) == 3.0


def test_hausdorff_identity_and_singletons():
    K = Crack([[(0, 0), (1, 0), (1, 1)]])
    assert hausdorff_distance(K, K) == 0.0
    assert hausdorff_distance(Crack.points([(0, 0)]), Crack.points([(3, 4)])) == 5.0


def test_hausdorff_segment_cases():
    # parallel unit segments at height 1, shifted by 1/2
    A = Crack.segment((0, 0), (1, 0))
    B = Crack.segment((0.5, 1), (1.5, 1))
    assert hausdorff_distance(A, B) == pytest.approx(math.hypot(0.5, 1), abs=1e-14)
    # sup attained at an interior point: equidistant from two pieces of B
    A = Crack.segment((0, 0), (2, 0))
    B = Crack.points([(0, 0), (2, 0)])
    assert hausdorff_distance(A, B) == pytest.approx(1.0, abs=1e-14)


def test_hausdorff_against_sampling():
    rng = np.random.default_rng(3)
    for _ in range(30):
        A = Crack([rng.random((3, 2))])
        B = Crack([rng.random((2, 2)), rng.random((2, 2))])
        exact = hausdorff_distance(A, B)
        approx = _sampled_hausdorff(A, B)
        # sampling never overestimates by more than half the sample spacing
        assert approx <= exact + 5e-3
        assert exact <= approx + 5e-3


points = st.tuples(st.floats(0, 1), st.floats(0, 1))
polylines = st.lists(points, min_size=1, max_size=3)
cracks = st.lists(polylines, min_size=1, max_size=3).map(Crack)


@settings(max_examples=150, deadline=None)
@given(cracks, cracks)
def test_hausdorff_symmetric(A, B):
    assert hausdorff_distance(A, B) == hausdorff_distance(B, A)


@settings(max_examples=150, deadline=None)
@given(cracks, cracks, cracks)
def test_hausdorff_triangle_inequality(A, B, C):
    assert hausdorff_distance(A, C) <= hausdorff_distance(A, B) + hausdorff_distance(B, C) + 1e-12


# ----------------------------------------------------------------- length


def test_h1_length_examples():
    assert h1_length(Crack.segment((0, 0), (1, 0))) == 1.0
    assert h1_length(Crack([[(0, 0), (1, 0)], [(0, 1), (1, 1)]])) == 2.0
    assert h1_length(Crack.empty()) == 0.0


def test_h1_length_overlap_counted_once():
    K = Crack([[(0, 0), (1, 0)], [(0.5, 0), (1.5, 0)], [(2, 0), (1.5, 0)]])
    assert h1_length(K) == pytest.approx(2.0, abs=1e-14)
    X = Crack([[(0, 0), (1, 1)], [(0, 1), (1, 0)]])
    assert h1_length(X) == pytest.approx(2 * math.sqrt(2), abs=1e-14)


# ----------------------------------------------------------------- components


def test_components_examples():
    cross = Crack([[(0, 0), (1, 1)], [(0, 1), (1, 0)]])
    assert len(components(cross)) == 1
    par = Crack([[(0, 0), (1, 0)], [(0, 1), (1, 1)]])
    assert len(components(par)) == 2
    touching = components(Crack.segment((0.5, 0.2), (0.5, 0.0)), Crack.segment((0, 0), (1, 0)))
    assert len(touching) == 1
    assert h1_length(touching[0]) == pytest.approx(1.2)


@settings(max_examples=100, deadline=None)
@given(cracks)
def test_components_idempotent(K):
    for c in components(K):
        assert len(components(c)) == 1


def test_neumann_part_components():
    dom = Domain.unit_square("NDND")
    assert dom.neumann_component_count() == 2
    assert len(components(dom.neumann_part())) == 2


# ----------------------------------------------------------------- joining


def test_join_collinear_gap():
    h = 16
    K = Crack([[(0.5, 0.0), (0.5, 0.5 - 0.5 / h)], [(0.5, 0.5 + 0.5 / h), (0.5, 1.0)]])
    H, arcs = join_components(K, None, 2.0 / h)
    assert len(components(H)) == 1
    added = h1_length(H) - h1_length(K)
    assert added == pytest.approx(1.0 / h, abs=1e-14)
    assert added <= len(arcs) * max(h1_length(a) for a in arcs) + 1e-15


def test_join_connected_is_identity():
    K = Crack([[(0, 0), (1, 0), (1, 1)]])
    H, arcs = join_components(K, None, 0.3)
    assert arcs == [] and H == K


def test_join_far_components_unchanged():
    K = Crack([[(0, 0), (1, 0)], [(0, 0.5), (1, 0.5)]])
    H, arcs = join_components(K, None, 0.01)
    assert arcs == [] and H == K


def test_join_rejects_nonpositive_delta():
    with pytest.raises(GeometryError):
        join_components(Crack.segment((0, 0), (1, 0)), None, 0.0)


@settings(max_examples=80, deadline=None)
@given(cracks, st.floats(0.01, 1.0))
def test_join_invariants(K, delta):
    H, arcs = join_components(K, None, delta)
    assert H.contains(K)
    assert len(components(H)) <= len(components(K))
    assert all(h1_length(a) < delta + 1e-12 for a in arcs)


# ----------------------------------------------------------------- extension


def test_extend_sequence():
    K = Crack.segment((0.2, 0.5), (0.8, 0.5))
    assert extend_sequence(K, K, K) == K.union(K)
    assert h1_length(extend_sequence(K, K, K)) == pytest.approx(h1_length(K))
    S = Crack.segment((0.5, 0.5), (0.5, 0.9))
    Kh = Crack.segment((0.2, 0.5), (0.7, 0.5))
    Hh = extend_sequence(Kh, K.union(S), K)
    assert Hh.contains(Kh) and Hh.contains(S) and Hh.contains(K)
    with pytest.raises(GeometryError):
        extend_sequence(Kh, S, K)


def test_extend_sequence_length_convergence():
    K = Crack.segment((0.0, 0.5), (1.0, 0.5))
    H = K.union(Crack.segment((0.5, 0.0), (0.5, 1.0)))
    target = h1_length(H) - h1_length(K)
    diffs = []
    for h in (4, 8, 16, 32, 64):
        Kh = Crack.segment((0.0, 0.5), (1.0 - 1.0 / h, 0.5))
        Hh = extend_sequence(Kh, H, K)
        diffs.append(abs((h1_length(Hh) - h1_length(Kh)) - target))
    assert diffs[-1] <= 1 / 64 + 1e-12
    assert all(b < a for a, b in zip(diffs, diffs[1:]))


# ----------------------------------------------------------------- domains


def test_domain_validation():
    with pytest.raises(GeometryError):
        Domain.unit_square("NNNN")
    with pytest.raises(GeometryError):
        Domain.unit_square("DDDX")
    with pytest.raises(GeometryError):
        Domain(np.array([[0, 0], [1, 1], [1, 0], [0, 1]]), tuple("DDDD"))


def test_domain_orientation_keeps_tags():
    cw = Domain(np.array([[0, 0], [0, 1], [1, 1], [1, 0]], float), ("N", "D", "N", "D"))
    # left edge (0,0)-(0,1) is N; after reorientation it must still be N
    segs = cw.boundary_segments("N")
    xs = sorted(float(s[:, 0].mean()) for s in segs)
    assert xs == [0.0, 1.0]


def test_domain_roundtrip_and_queries():
    dom = Domain.rectangle(0, 0, 2, 1, "NDND")
    assert Domain.from_dict(dom.to_dict()) == dom
    assert dom.area() == pytest.approx(2.0)
    assert dom.diameter() == pytest.approx(math.sqrt(5))
    assert dom.dirichlet_arc_count() == 2
    with pytest.raises(GeometryError):
        dom.validate_crack(Crack.segment((1, 0.5), (3, 0.5)))


def test_crack_roundtrip():
    K = Crack([[(0, 0), (1, 0)], [(0.5, 0.5)]])
    assert Crack.from_dict(K.to_dict()) == K
