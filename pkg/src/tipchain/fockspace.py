"""Two-particle Fock space of noninteracting eigenstates.

Single-particle eigenstates ``A^nu`` are ordered by their centre of mass
along the chain. Symmetrised products ``|mu, nu>`` (mu <= nu) diagonalise the
U=0 problem; the Hubbard term couples them through overlap integrals

    I0[mu nu]          = 2 / (d + 1) * sum_j (A^mu_j A^nu_j)^2
    I[mu nu, mu' nu']  = 2 / sqrt((d + 1)(d' + 1)) * sum_j A^mu_j A^nu_j A^mu'_j A^nu'_j

with d = delta(mu, nu). Both are entries of the Gram matrix ``W^T W`` where
``W[j, (mu nu)] = sqrt(2 / (d + 1)) A^mu_j A^nu_j``, which is what the code
computes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .dynamics import AccuracyError
from .model import ModelParams, PairBasis, build_sp_hamiltonian, localization_length
from .spectral import TP_PRODUCTS, diagonalize, gap_clusters, pdf_of_state, sp_minibands, label_energies


@dataclass
class SortedSpBasis:
    """Single-particle eigenstates ordered by position along the chain.

    ``energies``, ``vectors`` (columns) and ``centers`` are already in sorted
    order; ``order[k]`` is the index of sorted state ``k`` in the
    energy-ordered diagonalisation.
    """

    energies: np.ndarray
    vectors: np.ndarray
    centers: np.ndarray
    order: np.ndarray
    params: ModelParams
    extended_warning: bool = False
    sp_labels: np.ndarray | None = None
    _w: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.energies)

    @property
    def pairs(self) -> PairBasis:
        """Triangular (mu <= nu) indexing of Fock pair states."""
        return PairBasis(self.n)

    def product_amplitudes(self) -> np.ndarray:
        """``W[j, k] = sqrt(2/(d+1)) A^mu_j A^nu_j`` for Fock pair ``k = (mu, nu)``."""
        if self._w is None:
            pb = self.pairs
            mu, nu = pb.left, pb.right
            norm = np.sqrt(2.0 / ((mu == nu) + 1.0))
            self._w = self.vectors[:, mu] * self.vectors[:, nu] * norm
        return self._w


def build_sorted_sp_basis(params: ModelParams) -> SortedSpBasis:
    """Diagonalise the single-particle chain and order states by centre of mass.

    Ties in the centre are broken by energy and then by the original index.
    For ``lam <= 2`` the states are extended, centres bunch near the middle
    and ``extended_warning`` is set.
    """
    eigs = diagonalize(build_sp_hamiltonian(params))
    A = eigs.vectors
    centers = np.arange(params.n) @ (A**2)
    order = np.lexsort((np.arange(params.n), eigs.energies, centers))
    extended = params.lam <= 2.0
    if extended:
        warnings.warn("single-particle states are extended; centres are not meaningful", RuntimeWarning, stacklevel=2)
    bands = sp_minibands(eigs.energies)
    labels = None if bands is None else label_energies(eigs.energies[order], bands)
    return SortedSpBasis(
        energies=eigs.energies[order],
        vectors=A[:, order],
        centers=centers[order],
        order=order,
        params=params,
        extended_warning=extended,
        sp_labels=labels,
    )


def overlap_self(mu: int, nu: int, basis: SortedSpBasis) -> float:
    if mu > nu:
        raise ValueError("expected mu <= nu")
    a, b = basis.vectors[:, mu], basis.vectors[:, nu]
    return 2.0 / ((mu == nu) + 1.0) * float(np.sum((a * b) ** 2))


def overlap_cross(pair1: tuple[int, int], pair2: tuple[int, int], basis: SortedSpBasis) -> float:
    (mu, nu), (mu2, nu2) = pair1, pair2
    if mu > nu or mu2 > nu2:
        raise ValueError("expected ordered pairs")
    A = basis.vectors
    norm = 2.0 / math.sqrt(((mu == nu) + 1.0) * ((mu2 == nu2) + 1.0))
    return norm * float(np.sum(A[:, mu] * A[:, nu] * A[:, mu2] * A[:, nu2]))


def self_overlaps(basis: SortedSpBasis) -> np.ndarray:
    """All ``I0`` in Fock pair order."""
    W = basis.product_amplitudes()
    return np.einsum("jk,jk->k", W, W)


def overlap_matrix(basis: SortedSpBasis) -> np.ndarray:
    """Dense matrix of all overlap integrals; the diagonal holds ``I0``."""
    W = basis.product_amplitudes()
    return W.T @ W


def renormalized_energy(mu: int, nu: int, u: float, basis: SortedSpBasis) -> float:
    return float(basis.energies[mu] + basis.energies[nu]) + u * overlap_self(mu, nu, basis)


def pair_energies(basis: SortedSpBasis) -> np.ndarray:
    pb = basis.pairs
    return basis.energies[pb.left] + basis.energies[pb.right]


def fock_states(basis: SortedSpBasis, site_basis: PairBasis | None = None) -> np.ndarray:
    """Matrix whose columns are the Fock states ``|mu, nu>`` in the site pair basis.

    For l < m the amplitude is ``(A^mu_l A^nu_m + A^mu_m A^nu_l) / sqrt(1 + d)``,
    on the diagonal it is ``sqrt(2) A^mu_l A^nu_l / sqrt(1 + d)``.
    """
    if site_basis is None:
        site_basis = PairBasis(basis.params.n)
    A = basis.vectors
    fb = basis.pairs
    mu, nu = fb.left, fb.right
    l, m = site_basis.left, site_basis.right
    norm = 1.0 / np.sqrt(1.0 + (mu == nu))
    V = (A[l][:, mu] * A[m][:, nu] + A[m][:, mu] * A[l][:, nu]) * norm
    diag = l == m
    V[diag] *= 1.0 / math.sqrt(2.0)
    return V


def fock_hamiltonian(basis: SortedSpBasis, u: float, cutoff: float | None = None) -> np.ndarray:
    """Coefficient matrix of the coupled Fock amplitudes.

    Diagonal: renormalized energies. Off-diagonal: ``U * I``. With
    ``cutoff`` (in sites) couplings between pairs whose four centres spread
    over more than ``cutoff`` are dropped; this is an approximation.
    """
    F = u * overlap_matrix(basis)
    F[np.diag_indices_from(F)] += pair_energies(basis)
    if cutoff is not None:
        pb = basis.pairs
        c = basis.centers
        lo = np.minimum(c[pb.left], c[pb.right])
        hi = np.maximum(c[pb.left], c[pb.right])
        spread = np.maximum(hi[:, None], hi[None, :]) - np.minimum(lo[:, None], lo[None, :])
        off = spread > cutoff
        np.fill_diagonal(off, False)
        F[off] = 0.0
    return F


def fock_propagate(basis: SortedSpBasis, u: float, phi0, t_final: float, cutoff: float | None = None) -> np.ndarray:
    """Fock amplitudes at ``t_final`` starting from ``phi0`` (mu <= nu order).

    The coefficient matrix is dense, so it is diagonalised once and the
    evolution applied as phases; this is exact for any ``t_final``.
    """
    phi = np.asarray(phi0, dtype=complex)
    if abs(np.linalg.norm(phi) - 1.0) > 1e-9:
        raise ValueError("Fock amplitudes are not normalized")
    if t_final == 0:
        return phi.copy()
    w, Q = sla.eigh(fock_hamiltonian(basis, u, cutoff), driver="evd")
    phi = Q @ (np.exp(-1j * w * t_final) * (Q.T @ phi))
    drift = abs(np.linalg.norm(phi) - 1.0)
    if drift > 1e-9:
        raise AccuracyError(f"Fock propagation norm drift {drift:.3e}")
    return phi


def site_pdf(basis: SortedSpBasis, phi, site_basis: PairBasis | None = None) -> np.ndarray:
    """Per-site PDF of the two-particle state with Fock amplitudes ``phi``."""
    if site_basis is None:
        site_basis = PairBasis(basis.params.n)
    psi = fock_states(basis, site_basis) @ phi
    return pdf_of_state(psi, site_basis, check=False)


# -- bound pairs, miniband statistics, resonances ----------------------------


def bound_pair_filter(basis: SortedSpBasis, lam: float | None = None) -> np.ndarray:
    """Fock pair indices whose two centres are closer than ``xi1 = 1/ln(lam/2)``."""
    lam = basis.params.lam if lam is None else lam
    if lam <= 2.0:
        raise ValueError(f"localization length undefined for lam={lam} <= 2")
    xi = localization_length(lam)
    pb = basis.pairs
    dist = np.abs(basis.centers[pb.left] - basis.centers[pb.right])
    return np.flatnonzero(dist < xi)


def pair_miniband(basis: SortedSpBasis) -> np.ndarray:
    """TP label of every Fock pair from the SP labels of its two states."""
    if basis.sp_labels is None:
        raise ValueError("single-particle spectrum has no miniband gaps")
    sp_index = np.array([int(s[2]) - 1 for s in basis.sp_labels])
    pb = basis.pairs
    a = np.minimum(sp_index[pb.left], sp_index[pb.right])
    b = np.maximum(sp_index[pb.left], sp_index[pb.right])
    table = {}
    for lab, prods in TP_PRODUCTS.items():
        for x, y in prods:
            table[(x, y)] = lab
    return np.array([table[(x, y)] for x, y in zip(a, b)])


@dataclass
class OverlapStats:
    miniband: str
    pairs: int
    mean_self: float
    std_self: float
    mean_cross: float
    neighbors: int
    mean_self_onsite: float = math.nan
    onsite_pairs: int = 0


def overlap_statistics(basis: SortedSpBasis, neighbor_distance: float | None = None) -> list[OverlapStats]:
    """Per-miniband averages over bound Fock pairs.

    ``mean_self`` averages ``I0`` over all bound pairs of the miniband;
    ``mean_self_onsite`` only over pairs with both particles in the same
    single-particle state (``mu == nu``), which exist in TP1, TP3 and TP5 and
    carry the strong renormalization. ``mean_cross`` averages ``|I|`` over
    distinct bound pairs of the same miniband that share one single-particle
    state and whose pair centres lie within ``neighbor_distance`` (default
    ``xi1``) of each other.
    """
    xi = localization_length(basis.params.lam)
    if neighbor_distance is None:
        neighbor_distance = xi
    bound = bound_pair_filter(basis)
    labels = pair_miniband(basis)
    i0 = self_overlaps(basis)
    W = basis.product_amplitudes()
    pb = basis.pairs
    c = basis.centers
    out = []
    for lab in TP_PRODUCTS:
        sel = bound[labels[bound] == lab]
        if len(sel) == 0:
            out.append(OverlapStats(lab, 0, math.nan, math.nan, math.nan, 0))
            continue
        mu, nu = pb.left[sel], pb.right[sel]
        cross = W[:, sel].T @ W[:, sel]
        share = (
            (mu[:, None] == mu[None, :])
            | (mu[:, None] == nu[None, :])
            | (nu[:, None] == mu[None, :])
            | (nu[:, None] == nu[None, :])
        )
        pc = 0.5 * (c[mu] + c[nu])
        close = np.abs(pc[:, None] - pc[None, :]) < neighbor_distance
        nb = share & close
        np.fill_diagonal(nb, False)
        iu = np.triu(nb, 1)
        vals = np.abs(cross[iu])
        onsite = sel[mu == nu]
        out.append(
            OverlapStats(
                lab,
                len(sel),
                float(np.mean(i0[sel])),
                float(np.std(i0[sel])),
                float(np.mean(vals)) if len(vals) else math.nan,
                int(iu.sum()),
                float(np.mean(i0[onsite])) if len(onsite) else math.nan,
                len(onsite),
            )
        )
    return out


@dataclass
class Resonance:
    lower: str
    upper: str
    gap: float
    mean_overlap: float
    u_star: float
    in_range: bool


def resonance_value(gap: float, mean_overlap: float) -> float:
    """Interaction at which a band shifted by ``U * mean_overlap`` closes ``gap``."""
    if mean_overlap <= 0:
        return math.inf
    return gap / mean_overlap


def miniband_gaps(basis: SortedSpBasis) -> dict[str, float]:
    """Distance from the mean bound-pair energy of each TP band to the bottom of the next one."""
    clusters = gap_clusters(basis.energies, 3)
    if clusters is None:
        raise ValueError("single-particle spectrum has no miniband gaps")
    rng = [(c[0], c[-1]) for c in clusters]
    bottoms = {lab: min(rng[a][0] + rng[b][0] for a, b in p) for lab, p in TP_PRODUCTS.items()}
    energies = pair_energies(basis)
    bound = bound_pair_filter(basis)
    labels = pair_miniband(basis)
    names = list(TP_PRODUCTS)
    out = {}
    for lo, hi in zip(names[:-1], names[1:]):
        sel = bound[labels[bound] == lo]
        out[lo] = float(bottoms[hi] - np.mean(energies[sel]))
    return out


def band_overlap(stats: OverlapStats) -> float:
    """Representative ``I0`` of a miniband: the onsite mean where onsite pairs exist."""
    if stats.onsite_pairs:
        return stats.mean_self_onsite
    return stats.mean_self


def resonance_estimate(
    basis: SortedSpBasis,
    u_range: tuple[float, float] = (0.0, math.inf),
    gap: float | dict[str, float] | None = None,
    stats: list[OverlapStats] | None = None,
) -> list[Resonance]:
    """First-order resonance interactions ``U* = gap / I0`` between adjacent TP bands.

    ``I0`` is :func:`band_overlap` of the lower band. ``gap`` may be a single
    number applied to every band pair, a mapping from lower band label to
    gap, or ``None`` to measure it with :func:`miniband_gaps`. Estimates
    outside ``u_range`` are flagged, and a vanishing overlap gives
    ``u_star = inf``.
    """
    if basis.sp_labels is None:
        raise ValueError("miniband classification unavailable")
    if stats is None:
        stats = overlap_statistics(basis)
    by_label = {s.miniband: s for s in stats}
    if gap is None:
        gap = miniband_gaps(basis)
    names = list(TP_PRODUCTS)
    out = []
    for lo, hi in zip(names[:-1], names[1:]):
        g = gap[lo] if isinstance(gap, dict) else float(gap)
        m = band_overlap(by_label[lo])
        u_star = resonance_value(g, m if math.isfinite(m) else 0.0)
        out.append(Resonance(lo, hi, g, m, u_star, bool(u_range[0] <= u_star <= u_range[1])))
    return out
