"""Model definition: parameters, quasiperiodic potential, pair basis, Hamiltonians.

Units: nearest-neighbour hopping is 1 and hbar is 1. Sites are ``0 .. N-1``.

The two-boson Hamiltonian is written in the symmetrised pair basis

    |l, m> = b_l^+ b_m^+ |0> / sqrt(1 + delta_lm),   l <= m,

which is an orthonormal occupation-number basis. Hopping of a boson from
site ``s`` to a neighbour ``t`` therefore carries the bosonic factor
``sqrt(n_s * (n_t + 1))``. For N=2 with open boundaries and pairs ordered
(0,0), (0,1), (1,1) this gives::

    [[U,  r2, 0 ],
     [r2, 0,  r2],
     [0,  r2, U ]]      r2 = sqrt(2)

which is the usual place an off-by-sqrt(2) slips in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

BOUNDARIES = ("open", "periodic")


class ConfigurationError(ValueError):
    """Inconsistent or invalid model configuration."""


@dataclass(frozen=True)
class ModelParams:
    """Physical and numerical parameters of the two-boson chain.

    Attributes
    ----------
    n : int
        Number of lattice sites.
    lam : float
        Strength of the quasiperiodic potential.
    u : float
        On-site interaction.
    beta : float
        Potential phase in ``[0, 2*pi)``.
    alpha : float
        Incommensurability, defaults to the golden mean.
    boundary : str
        ``"open"`` or ``"periodic"``.
    """

    n: int
    lam: float = 2.5
    u: float = 0.0
    beta: float = 0.0
    alpha: float = GOLDEN
    boundary: str = "open"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ConfigurationError(f"lattice size must be an integer >= 2, got {self.n}")
        if not self.lam >= 0:
            raise ConfigurationError(f"potential strength must be >= 0, got {self.lam}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 <= self.beta < 2 * math.pi:
            raise ConfigurationError(f"beta must lie in [0, 2pi), got {self.beta}")
        if not math.isfinite(self.u):
            raise ConfigurationError(f"interaction must be finite, got {self.u}")
        if self.boundary not in BOUNDARIES:
            raise ConfigurationError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        object.__setattr__(self, "n", int(self.n))

    def with_(self, **changes) -> ModelParams:
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "lam": self.lam,
            "u": self.u,
            "beta": self.beta,
            "alpha": self.alpha,
            "boundary": self.boundary,
        }

    @property
    def xi1(self) -> float:
        """Single-particle localization length ``1/ln(lam/2)`` (inf for lam <= 2)."""
        return localization_length(self.lam)


def localization_length(lam: float) -> float:
    if lam <= 2.0:
        return math.inf
    return 1.0 / math.log(lam / 2.0)


def potential_at(params: ModelParams, j: int) -> float:
    """On-site energy ``lam * cos(beta + 2 pi alpha j)``."""
    if not 0 <= j < params.n:
        raise IndexError(f"site {j} outside chain of {params.n} sites")
    return params.lam * math.cos(params.beta + 2.0 * math.pi * params.alpha * j)


def potential(params: ModelParams) -> np.ndarray:
    j = np.arange(params.n)
    return params.lam * np.cos(params.beta + 2.0 * np.pi * params.alpha * j)


def _bonds(n: int, boundary: str) -> np.ndarray:
    left = np.arange(n - 1)
    bonds = np.column_stack([left, left + 1])
    if boundary == "periodic":
        bonds = np.vstack([bonds, [[n - 1, 0]]])
    return bonds


def build_sp_hamiltonian(params: ModelParams) -> sp.csr_array:
    """Tridiagonal single-particle Hamiltonian (plus corner terms if periodic)."""
    n = params.n
    bonds = _bonds(n, params.boundary)
    rows = np.concatenate([np.arange(n), bonds[:, 0], bonds[:, 1]])
    cols = np.concatenate([np.arange(n), bonds[:, 1], bonds[:, 0]])
    vals = np.concatenate([potential(params), np.ones(2 * len(bonds))])
    return sp.coo_array((vals, (rows, cols)), shape=(n, n)).tocsr()


@dataclass(frozen=True)
class PairBasis:
    """Index map between ordered site pairs ``l <= m`` and ``0 .. D-1``.

    Pairs are enumerated row-major: (0,0), (0,1), ..., (0,N-1), (1,1), ...
    """

    n: int
    dim: int = field(init=False)

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError(f"lattice size must be positive, got {self.n}")
        object.__setattr__(self, "dim", self.n * (self.n + 1) // 2)

    def index(self, l, m):
        """Basis index of the pair (l, m); works elementwise on arrays."""
        l = np.asarray(l)
        m = np.asarray(m)
        if np.any(l > m) or np.any(l < 0) or np.any(m >= self.n):
            raise IndexError(f"pair ({l}, {m}) not an ordered pair on {self.n} sites")
        idx = l * (2 * self.n - l + 1) // 2 + (m - l)
        return int(idx) if idx.ndim == 0 else idx

    def pair(self, idx: int) -> tuple[int, int]:
        if not 0 <= idx < self.dim:
            raise IndexError(f"basis index {idx} outside [0, {self.dim})")
        return int(self.left[idx]), int(self.right[idx])

    @cached_property
    def _pairs(self) -> tuple[np.ndarray, np.ndarray]:
        l, m = np.triu_indices(self.n)
        return l, m

    @property
    def left(self) -> np.ndarray:
        """Site ``l`` of every basis state, in index order."""
        return self._pairs[0]

    @property
    def right(self) -> np.ndarray:
        """Site ``m`` of every basis state, in index order."""
        return self._pairs[1]


def build_tp_hamiltonian(params: ModelParams, basis: PairBasis | None = None) -> sp.csr_array:
    """Two-boson Hamiltonian in the symmetrised pair basis.

    Diagonal: ``eps_l + eps_m + U delta_lm``. Off-diagonal: a boson hops from
    an occupied site ``s`` to a neighbour ``t`` with amplitude
    ``sqrt(n_s (n_t + 1))``, i.e. 1 between distinct-site pairs and sqrt(2)
    into or out of a doubly occupied site.
    """
    if basis is None:
        basis = PairBasis(params.n)
    if basis.n != params.n:
        raise ConfigurationError(f"basis built for N={basis.n}, params have N={params.n}")
    n = params.n
    eps = potential(params)
    L, M = basis.left, basis.right
    src = np.arange(basis.dim)
    diag = eps[L] + eps[M] + params.u * (L == M)

    bonds = _bonds(n, params.boundary)
    # neighbour table: each bond in both directions
    hop_from = np.concatenate([bonds[:, 0], bonds[:, 1]])
    hop_to = np.concatenate([bonds[:, 1], bonds[:, 0]])

    rows, cols, vals = [src], [src], [diag]
    double = L == M
    # moving the boson at l; for l == m this is the only distinct occupied site
    for mover, other, movers in ((L, M, np.ones_like(double)), (M, L, ~double)):
        for a, b in zip(hop_from, hop_to):
            sel = movers & (mover == a)
            if not sel.any():
                continue
            n_src = np.where(double[sel], 2, 1)
            n_tgt = (other[sel] == b).astype(int)
            amp = np.sqrt(n_src * (n_tgt + 1.0))
            new_l = np.minimum(b, other[sel])
            new_r = np.maximum(b, other[sel])
            rows.append(basis.index(new_l, new_r))
            cols.append(src[sel])
            vals.append(amp)
    H = sp.coo_array(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(basis.dim, basis.dim),
    )
    return H.tocsr()


def upper_triplets(H) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nonzeros ``(row, col, value)`` with ``row <= col``, sorted row-major."""
    U = sp.triu(sp.coo_array(H)).tocsr()
    U.sort_indices()
    coo = U.tocoo()
    return coo.row, coo.col, coo.data


def spectral_bounds(H) -> tuple[float, float]:
    """Gershgorin interval of a real symmetric matrix."""
    H = sp.csr_array(H)
    d = H.diagonal()
    radius = np.asarray(abs(H).sum(axis=1)).ravel() - np.abs(d)
    return float(np.min(d - radius)), float(np.max(d + radius))
