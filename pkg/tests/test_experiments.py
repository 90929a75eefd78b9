import math

import numpy as np
import pytest

from fraclab.energy import isotropic
from fraclab.experiments import (LoadProgram, SequenceError, convergence_experiment, exhaustive_nucleation_time,
                                 make_sequence, quasistatic_evolve, unilateral_gap)
from fraclab.geometry import Crack, Domain, h1_length, hausdorff_distance
from fraclab.mesh import build_mesh
from fraclab.solver import solve_elastic

NDND = Domain.unit_square("NDND")
STRIP = Domain.unit_square("DNDN")
HALF = Crack.segment((0.5, 0.0), (0.5, 0.5))
FULL = Crack.segment((0.5, 0.0), (0.5, 1.0))


# ----------------------------------------------------------------- sequences


def test_grow_to_limit_distances():
    seq = make_sequence("grow_to_limit", NDND, HALF, (4, 8, 16), n=32)
    assert seq.distances == pytest.approx([1 / 4, 1 / 8, 1 / 16], abs=1e-14)
    for K, dist in zip(seq.cracks, seq.distances):
        assert hausdorff_distance(K, HALF) == pytest.approx(dist, abs=1e-14)
    assert seq.lengths == pytest.approx([0.25, 0.375, 0.4375])


def test_merge_gap_and_joining():
    seq = make_sequence("merge_gap", NDND, FULL, (4, 8, 16), n=32)
    assert seq.component_counts == (2, 2, 2)
    assert seq.lengths == pytest.approx([0.75, 0.875, 0.9375])
    # the length never drops below the limit once components are joined
    joined = seq.joined(lambda h: 2.0 / h)
    assert joined.component_counts == (1, 1, 1)
    assert all(K == FULL or h1_length(K) == pytest.approx(1.0) for K in joined.cracks)
    assert joined.lower_semicontinuity_gap() >= -1e-12
    assert max(joined.distances) <= 1e-12


def test_constant_and_translate():
    seq = make_sequence("constant", NDND, HALF, (2, 4), n_per_index=4)
    assert seq.resolutions == (8, 16) and seq.distances == (0.0, 0.0)
    K = Crack.segment((0.25, 0.25), (0.5, 0.25))
    tr = make_sequence("translate", Domain.unit_square(), K, (4, 8), n=16, direction=(0, 1))
    assert tr.distances == pytest.approx([0.25, 0.125])


def test_boundary_touch():
    seq = make_sequence("boundary_touch", NDND, HALF, (4, 8), n=16)
    assert all(np.min(K.vertices()[:, 1]) > 0 for K in seq.cracks)


def test_sequence_errors():
    with pytest.raises(SequenceError):
        make_sequence("spiral", NDND, HALF, (4,), n=8)
    with pytest.raises(SequenceError):
        make_sequence("grow_to_limit", NDND, HALF, (4,))
    with pytest.raises(SequenceError):
        make_sequence("grow_to_limit", NDND, HALF, (0, 4), n=8)
    with pytest.raises(SequenceError):
        make_sequence("grow_to_limit", NDND, HALF, (3,), n=8)
    with pytest.raises(SequenceError):
        make_sequence("constant", NDND, FULL, (4,), n=8, lam=0.5)
    with pytest.raises(SequenceError):
        make_sequence("merge_gap", NDND, FULL, (4,), n=8, m=1)
    with pytest.raises(SequenceError):
        make_sequence("boundary_touch", NDND, Crack.segment((0.25, 0.5), (0.75, 0.5)), (4,), n=8)


# ----------------------------------------------------------------- stability


def test_constant_sequence_error_decreases():
    seq = make_sequence("constant", NDND, HALF, (1, 2, 4), n_per_index=8)
    tab = convergence_experiment(seq, "x", isotropic(2.0), reference_n=64)
    err = tab.column("rel_error_p")
    assert all(b < a for a, b in zip(err, err[1:]))
    assert set(r["status"] for r in tab.rows) == {"ok"}


def test_full_cut_limit_exact():
    # K_h = K: both sides constant, gradient error vanishes identically
    seq = make_sequence("constant", NDND, FULL, (4, 8), n=16)
    tab = convergence_experiment(seq, "x", isotropic(3.0), reference_n=32)
    assert np.all(tab.column("error_p") == 0.0)
    assert tab.reference["energy_total"] == pytest.approx(1.0)


def test_experiment_threads_deterministic(tmp_path):
    seq = make_sequence("grow_to_limit", NDND, HALF, (4, 8), n=16)
    a = convergence_experiment(seq, "x", isotropic(2.0), reference_n=32, threads=1)
    b = convergence_experiment(seq, "x", isotropic(2.0), reference_n=32, threads=2)
    a.to_csv(tmp_path / "a.csv")
    b.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header = (tmp_path / "a.csv").read_text().splitlines()[0]
    assert header.split(",")[:4] == ["h", "n_h", "d_H", "H1"]


def test_per_index_datum():
    seq = make_sequence("constant", NDND, HALF, (1,), n=8)
    tab = convergence_experiment(seq, "x", isotropic(2.0), reference_n=16, g_h=lambda h: "x*y*y")
    assert tab.rows[0]["status"] == "ok"
    assert tab.rows[0]["error_p"] > 0


# ----------------------------------------------------------------- unilateral


def test_strip_unilateral_gap():
    # uncracked: u = t y, E = t^2; one horizontal cut drops the bulk to 0 for length 1
    n = 8
    u = solve_elastic(build_mesh(STRIP, Crack.empty(), n), isotropic(2.0), "2*y")
    cuts = [Crack.segment((0.0, k / n), (1.0, k / n)) for k in (2, 4)]
    gap = unilateral_gap(u, Crack.empty(), cuts)
    assert gap == pytest.approx(-3.0, rel=0.02)
    w = solve_elastic(build_mesh(STRIP, cuts[0], n), isotropic(2.0), "2*y")
    assert unilateral_gap(w, cuts[0], [cuts[0]]) == math.inf


def test_evolution_strip():
    n = 8
    cuts = [Crack.segment((0.0, k / n), (1.0, k / n)) for k in range(1, n)]
    load = LoadProgram.ramp("t*y", 0.0, 1.5, 0.1)
    st = quasistatic_evolve(STRIP, isotropic(2.0), load, cuts, n=n)
    assert st.is_irreversible()
    assert st.first_growth_time() == pytest.approx(1.1)
    assert min(st.gaps) >= -1e-8
    assert all(len(a) <= 1 for a in st.added)
    for sub in st.substep_energies:
        assert all(b < a for a, b in zip(sub, sub[1:]))
    assert len(st.to_records()) == len(load.times)


def test_exhaustive_oracle_agrees():
    load = LoadProgram.ramp("t*y", 0.0, 1.5, 0.1)
    coarse = [Crack.segment((0.0, k / 4), (1.0, k / 4)) for k in range(1, 4)]
    assert exhaustive_nucleation_time(STRIP, isotropic(2.0), load, coarse, n=4) == pytest.approx(1.1)


def test_zero_load_static():
    cuts = [Crack.segment((0.0, k / 4), (1.0, k / 4)) for k in range(1, 4)]
    st = quasistatic_evolve(STRIP, isotropic(2.0), LoadProgram((0.0, 1.0), "0*t"), cuts, n=4)
    assert all(K.is_empty() for K in st.cracks)
    assert all(np.all(s.u == 0) for s in st.solutions)


def test_load_program_validation():
    with pytest.raises(ValueError):
        LoadProgram((0.0, 0.0), "t")
    assert LoadProgram.ramp("t", 0, 1, 0.25).times == (0.0, 0.25, 0.5, 0.75, 1.0)


def test_join_leaving_nonconvex_domain_rejected():
    L = Domain(np.array([[0, 0], [1, 0], [1, 0.5], [0.5, 0.5], [0.5, 1], [0, 1]], float), tuple("DNNNND"))
    K = Crack([[(0.75, 0.25), (0.75, 0.4375)], [(0.25, 0.75), (0.4375, 0.75)]])
    seq = make_sequence("constant", L, K, (1,), n=16)
    with pytest.raises(SequenceError, match="leaves the domain"):
        seq.joined(0.5)
    assert seq.joined(0.1).cracks[0] == K
