import math

import numpy as np
import pytest

from tipchain.dynamics import initial_adjacent_pair, propagate
from tipchain.fockspace import (
    OverlapStats,
    SortedSpBasis,
    band_overlap,
    bound_pair_filter,
    build_sorted_sp_basis,
    fock_hamiltonian,
    fock_propagate,
    fock_states,
    miniband_gaps,
    overlap_cross,
    overlap_matrix,
    overlap_self,
    overlap_statistics,
    pair_energies,
    pair_miniband,
    renormalized_energy,
    resonance_estimate,
    resonance_value,
    self_overlaps,
    site_pdf,
)
from tipchain.model import ModelParams, PairBasis, build_tp_hamiltonian
from tipchain.spectral import sp_eigensystem


@pytest.fixture(scope="module")
def basis30():
    return build_sorted_sp_basis(ModelParams(n=30, lam=2.5))


def delta_basis(n=6):
    return SortedSpBasis(
        energies=np.arange(n, dtype=float),
        vectors=np.eye(n),
        centers=np.arange(n, dtype=float),
        order=np.arange(n),
        params=ModelParams(n=n, lam=2.5),
    )


def test_sorted_basis_invariants():
    p = ModelParams(n=100, lam=2.5)
    b = build_sorted_sp_basis(p)
    assert np.all(np.diff(b.centers) >= 0)
    assert np.allclose(b.vectors.T @ b.vectors, np.eye(100), atol=1e-8)
    assert sorted(b.order) == list(range(100))
    eigs = sp_eigensystem(p)
    assert np.array_equal(b.energies, eigs.energies[b.order])
    # localized states: centres spread over the whole chain
    assert b.centers[0] < 5 and b.centers[-1] > 94
    assert not b.extended_warning
    assert b.sp_labels is not None


def test_sorting_permutation_roundtrip(basis30):
    inverse = np.argsort(basis30.order)
    assert np.array_equal(basis30.order[inverse], np.arange(30))
    assert np.array_equal(inverse[basis30.order], np.arange(30))


def test_extended_warning():
    with pytest.warns(RuntimeWarning):
        b = build_sorted_sp_basis(ModelParams(n=40, lam=0.0))
    assert b.extended_warning
    with pytest.raises(ValueError):
        bound_pair_filter(b)


def test_delta_overlaps():
    b = delta_basis()
    assert overlap_self(2, 2, b) == 1.0
    assert overlap_self(1, 4, b) == 0.0
    assert overlap_cross((1, 1), (1, 1), b) == 1.0
    assert overlap_cross((0, 1), (2, 3), b) == 0.0
    assert renormalized_energy(3, 3, 2.5, b) == 3 + 3 + 2.5
    with pytest.raises(ValueError):
        overlap_self(3, 1, b)
    with pytest.raises(ValueError):
        overlap_cross((3, 1), (0, 0), b)


def test_gram_matrix_matches_formulas(basis30):
    M = overlap_matrix(basis30)
    pb = basis30.pairs
    rng = np.random.default_rng(7)
    for a, c in rng.integers(0, pb.dim, size=(40, 2)):
        pa, pc = pb.pair(int(a)), pb.pair(int(c))
        assert M[a, c] == pytest.approx(overlap_cross(pa, pc, basis30), abs=1e-14)
        assert M[a, a] == pytest.approx(overlap_self(*pa, basis30), abs=1e-14)
        assert overlap_cross(pa, pa, basis30) == pytest.approx(overlap_self(*pa, basis30), abs=1e-15)
    i0 = self_overlaps(basis30)
    assert np.allclose(i0, np.diag(M), atol=1e-15)
    assert np.all(i0 >= 0) and np.all(i0 <= 2)


def test_renormalized_energy_noninteracting(basis30):
    e = pair_energies(basis30)
    pb = basis30.pairs
    for k in (0, 17, pb.dim - 1):
        mu, nu = pb.pair(k)
        assert renormalized_energy(mu, nu, 0.0, basis30) == e[k]


def test_fock_states_orthonormal(basis30):
    V = fock_states(basis30)
    assert np.abs(V.T @ V - np.eye(V.shape[1])).max() < 1e-12


@pytest.mark.parametrize("u", [2.0, 4.5, 7.9])
def test_rotated_hamiltonian(basis30, u):
    H = build_tp_hamiltonian(ModelParams(n=30, lam=2.5, u=u)).toarray()
    V = fock_states(basis30)
    F = fock_hamiltonian(basis30, u)
    assert np.abs(V.T @ H @ V - F).max() < 1e-9
    pb = basis30.pairs
    diag = [renormalized_energy(*pb.pair(k), u, basis30) for k in range(pb.dim)]
    assert np.abs(np.diag(F) - diag).max() < 1e-10


def test_cutoff(basis30):
    F = fock_hamiltonian(basis30, 4.5)
    assert np.array_equal(fock_hamiltonian(basis30, 4.5, cutoff=np.inf), F)
    D = fock_hamiltonian(basis30, 4.5, cutoff=-1.0)
    assert np.array_equal(D, np.diag(np.diag(F)))


def test_fock_propagate_noninteracting(basis30):
    pb = basis30.pairs
    rng = np.random.default_rng(2)
    phi0 = rng.normal(size=pb.dim) + 1j * rng.normal(size=pb.dim)
    phi0 /= np.linalg.norm(phi0)
    t = 13.0
    phi = fock_propagate(basis30, 0.0, phi0, t)
    assert np.abs(phi - np.exp(-1j * pair_energies(basis30) * t) * phi0).max() < 1e-10


def test_fock_propagate_matches_site_propagation(basis30):
    sb = PairBasis(30)
    psi0 = initial_adjacent_pair(14, sb)
    V = fock_states(basis30, sb)
    phi0 = V.T @ psi0
    t = 50.0
    phi = fock_propagate(basis30, 4.5, phi0, t)
    H = build_tp_hamiltonian(ModelParams(n=30, lam=2.5, u=4.5), sb)
    direct = propagate(H, psi0, t, [0.0, t], basis=sb)
    assert np.abs(site_pdf(basis30, phi, sb) - direct.pdf[-1]).max() < 1e-8


def test_fock_propagate_norm_long_time(basis30):
    pb = basis30.pairs
    phi0 = np.zeros(pb.dim)
    phi0[pb.index(10, 11)] = 1.0
    phi = fock_propagate(basis30, 7.9, phi0, 1000.0)
    assert abs(np.linalg.norm(phi) - 1) < 1e-9
    with pytest.raises(ValueError):
        fock_propagate(basis30, 7.9, 2 * phi0, 1.0)
    assert np.array_equal(fock_propagate(basis30, 7.9, phi0, 0.0), phi0)


def test_pair_labels(basis30):
    labels = pair_miniband(basis30)
    pb = basis30.pairs
    assert set(labels) <= {"TP1", "TP2", "TP3", "TP4", "TP5"}
    k = [i for i in range(pb.dim) if basis30.sp_labels[pb.left[i]] == "SP1" and basis30.sp_labels[pb.right[i]] == "SP1"]
    assert set(labels[k]) == {"TP1"}


def test_bound_pairs_close(basis30):
    sel = bound_pair_filter(basis30)
    pb = basis30.pairs
    d = np.abs(basis30.centers[pb.left[sel]] - basis30.centers[pb.right[sel]])
    assert np.all(d < basis30.params.xi1)
    # every diagonal pair is bound
    assert set(pb.index(np.arange(30), np.arange(30))) <= set(sel)


def test_resonance_value():
    assert resonance_value(2.0, 0.5) == 4.0
    assert resonance_value(2.0, 0.3) == pytest.approx(6.6667, abs=1e-4)
    assert resonance_value(2.0, 0.0) == math.inf


def test_resonance_estimate_fixed_gap(basis30):
    means = {"TP1": 0.5, "TP2": 0.1, "TP3": 0.3, "TP4": 0.1, "TP5": 0.5}
    stats = [OverlapStats(lab, 10, m, 0.1, 0.1, 5, m, 3) for lab, m in means.items()]
    res = resonance_estimate(basis30, (3.5, 7.5), gap=2.0, stats=stats)
    assert [(r.lower, r.upper) for r in res] == [("TP1", "TP2"), ("TP2", "TP3"), ("TP3", "TP4"), ("TP4", "TP5")]
    assert res[0].u_star == 4.0 and res[0].in_range
    assert res[2].u_star == pytest.approx(20 / 3)
    assert not res[1].in_range


def test_band_overlap_prefers_onsite():
    assert band_overlap(OverlapStats("TP1", 10, 0.3, 0.1, 0.1, 4, 0.45, 5)) == 0.45
    assert band_overlap(OverlapStats("TP2", 10, 0.1, 0.1, 0.1, 4)) == 0.1


def test_overlap_statistics_shape():
    b = build_sorted_sp_basis(ModelParams(n=100, lam=2.5))
    stats = {s.miniband: s for s in overlap_statistics(b)}
    assert list(stats) == ["TP1", "TP2", "TP3", "TP4", "TP5"]
    for lab in ("TP1", "TP3", "TP5"):
        assert stats[lab].onsite_pairs > 0
        assert stats[lab].mean_self_onsite >= stats[lab].mean_self
    assert stats["TP2"].onsite_pairs == 0
    gaps = miniband_gaps(b)
    # the boundary state inside the SP2|SP3 gap must not close any gap
    assert all(1.0 < g < 3.0 for g in gaps.values())


def test_classification_required():
    with pytest.warns(RuntimeWarning):
        b = build_sorted_sp_basis(ModelParams(n=40, lam=0.0))
    with pytest.raises(ValueError):
        resonance_estimate(b, gap=2.0)
