import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tipchain.model import (
    GOLDEN,
    ConfigurationError,
    ModelParams,
    PairBasis,
    build_sp_hamiltonian,
    build_tp_hamiltonian,
    potential,
    potential_at,
    upper_triplets,
)

# 2.5 cos(2 pi alpha j) at 40 digits (mpmath)
AA_J1 = -1.843422195195799753795601
AA_J2 = 0.2185643117924009991064241


def brute_force_two_bosons(params):
    """Hamiltonian on occupation vectors with sum n_j = 2, built from b^+ b rules."""
    n = params.n
    states = []
    for l, m in itertools.combinations_with_replacement(range(n), 2):
        occ = [0] * n
        occ[l] += 1
        occ[m] += 1
        states.append(tuple(occ))
    index = {s: k for k, s in enumerate(states)}
    eps = [potential_at(params, j) for j in range(n)]
    bonds = [(j, j + 1) for j in range(n - 1)]
    if params.boundary == "periodic":
        bonds.append((n - 1, 0))
    H = np.zeros((len(states), len(states)))
    for k, occ in enumerate(states):
        H[k, k] = sum(e * o for e, o in zip(eps, occ)) + params.u / 2 * sum(o * (o - 1) for o in occ)
        for a, b in bonds:
            for i, j in ((a, b), (b, a)):
                # b_i^+ b_j
                if occ[j] == 0:
                    continue
                amp = math.sqrt(occ[j])
                new = list(occ)
                new[j] -= 1
                amp *= math.sqrt(new[i] + 1)
                new[i] += 1
                H[index[tuple(new)], k] += amp
    return H


def test_default_alpha_is_golden_mean():
    assert ModelParams(n=5).alpha == GOLDEN
    assert abs(GOLDEN - 0.6180339887498948482) < 1e-15


@pytest.mark.parametrize(
    "kw",
    [
        dict(n=1),
        dict(n=5, lam=-1.0),
        dict(n=5, alpha=1.0),
        dict(n=5, alpha=0.0),
        dict(n=5, beta=7.0),
        dict(n=5, boundary="twisted"),
    ],
)
def test_invalid_params(kw):
    with pytest.raises(ConfigurationError):
        ModelParams(**kw)


def test_potential_examples():
    assert potential_at(ModelParams(n=10, lam=0.0, beta=1.3), 7) == 0.0
    assert potential_at(ModelParams(n=10, lam=2.5), 0) == 2.5
    assert potential_at(ModelParams(n=10, lam=2.5), 1) == pytest.approx(AA_J1, abs=1e-14)
    assert potential_at(ModelParams(n=10, lam=2.5), 2) == pytest.approx(AA_J2, abs=1e-14)


def test_potential_out_of_range():
    p = ModelParams(n=4)
    with pytest.raises(IndexError):
        potential_at(p, 4)
    with pytest.raises(IndexError):
        potential_at(p, -1)


def test_potential_rational_alpha_periodicity():
    # alpha = 1/2: shifting beta by 2 pi alpha equals relabelling j -> j + 1
    p = ModelParams(n=12, lam=1.7, alpha=0.5, beta=0.4)
    q = p.with_(beta=(0.4 + math.pi) % (2 * math.pi))
    assert np.allclose(potential(q)[:-1], potential(p)[1:], atol=1e-14)
    assert np.allclose(potential(p)[2:], potential(p)[:-2], atol=1e-14)


def test_sp_hamiltonian_two_sites():
    H = build_sp_hamiltonian(ModelParams(n=2, lam=0.0)).toarray()
    assert np.array_equal(H, [[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(np.linalg.eigvalsh(H), [-1.0, 1.0])


def test_sp_hamiltonian_three_sites():
    H = build_sp_hamiltonian(ModelParams(n=3, lam=2.5)).toarray()
    assert np.allclose(np.diag(H), [2.5, AA_J1, AA_J2], atol=1e-14)
    assert np.array_equal(np.diag(H, 1), [1.0, 1.0])
    assert H[0, 2] == 0.0


def test_sp_hamiltonian_periodic_corners():
    H = build_sp_hamiltonian(ModelParams(n=5, lam=1.0, boundary="periodic")).toarray()
    assert H[0, 4] == H[4, 0] == 1.0


def test_pair_basis_bijection():
    b = PairBasis(9)
    assert b.dim == 45
    seen = set()
    for l in range(9):
        for m in range(l, 9):
            k = b.index(l, m)
            assert b.pair(k) == (l, m)
            seen.add(k)
    assert seen == set(range(45))
    assert np.array_equal(b.index(b.left, b.right), np.arange(45))


def test_pair_basis_rejects_unordered():
    b = PairBasis(4)
    with pytest.raises(IndexError):
        b.index(2, 1)
    with pytest.raises(IndexError):
        b.pair(10)


def test_tp_hamiltonian_two_sites():
    u = 3.7
    H = build_tp_hamiltonian(ModelParams(n=2, lam=0.0, u=u)).toarray()
    r2 = math.sqrt(2.0)
    assert np.allclose(H, [[u, r2, 0], [r2, 0, r2], [0, r2, u]], atol=1e-15)


def test_tp_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        build_tp_hamiltonian(ModelParams(n=5), PairBasis(6))


@pytest.mark.parametrize("boundary", ["open", "periodic"])
@pytest.mark.parametrize("n", [2, 3, 5, 8, 12])
def test_tp_matches_occupation_number_construction(n, boundary):
    params = ModelParams(n=n, lam=2.5, u=4.5, beta=0.3, boundary=boundary)
    H = build_tp_hamiltonian(params).toarray()
    B = brute_force_two_bosons(params)
    assert np.allclose(np.linalg.eigvalsh(H), np.linalg.eigvalsh(B), atol=1e-10)
    # same ordering of states, so the matrices coincide entry-wise as well
    assert np.allclose(H, B, atol=1e-14)


def test_tp_symmetric_and_sparse():
    H = build_tp_hamiltonian(ModelParams(n=20, lam=2.5, u=7.9))
    assert (abs(H - H.T)).max() == 0.0
    nnz_per_row = np.diff(H.indptr)
    assert nnz_per_row.max() <= 5


def test_upper_triplets_reconstruct():
    H = build_tp_hamiltonian(ModelParams(n=7, lam=1.1, u=2.0))
    r, c, v = upper_triplets(H)
    assert np.all(r <= c)
    full = np.zeros(H.shape)
    full[r, c] = v
    full[c, r] = v
    assert np.array_equal(full, H.toarray())


def test_tp_noninteracting_is_pair_sums():
    params = ModelParams(n=14, lam=2.5, u=0.0, beta=1.0)
    e1 = np.linalg.eigvalsh(build_sp_hamiltonian(params).toarray())
    sums = np.sort([e1[a] + e1[b] for a in range(14) for b in range(a, 14)])
    e2 = np.linalg.eigvalsh(build_tp_hamiltonian(params).toarray())
    assert np.allclose(e2, sums, atol=1e-10)


def test_assembly_is_deterministic():
    p = ModelParams(n=15, lam=2.5, u=4.5)
    a, b = build_tp_hamiltonian(p), build_tp_hamiltonian(p)
    assert np.array_equal(a.indptr, b.indptr)
    assert np.array_equal(a.indices, b.indices)
    assert np.array_equal(a.data, b.data)


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(2, 9),
    lam=st.floats(0, 4),
    u=st.floats(-10, 10),
    beta=st.floats(0, 6.28),
)
def test_tp_hermitian_property(n, lam, u, beta):
    H = build_tp_hamiltonian(ModelParams(n=n, lam=lam, u=u, beta=beta))
    assert (abs(H - H.T)).max() == 0.0
