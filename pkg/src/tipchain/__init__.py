"""Two interacting bosons in a one-dimensional Aubry-Andre chain.

Exact diagonalization, Chebyshev wave-packet propagation, Fock-space overlap
analysis and a (U, lambda) phase-diagram scan.
"""

from .dynamics import (
    ChebyshevPropagator,
    WavePacketTrace,
    initial_adjacent_pair,
    propagate,
    second_moment,
    transport_run,
)
from .fockspace import (
    SortedSpBasis,
    build_sorted_sp_basis,
    fock_propagate,
    overlap_cross,
    overlap_self,
    overlap_statistics,
    renormalized_energy,
    resonance_estimate,
)
from .model import (
    GOLDEN,
    ModelParams,
    PairBasis,
    build_sp_hamiltonian,
    build_tp_hamiltonian,
    potential_at,
)
from .scan import PhaseDiagram, ScanSpec, classify_cells, run_scan
from .spectral import (
    EigenSet,
    classify_minibands,
    diagonalize,
    max_participation_sweep,
    participation_number,
    pdf_of_state,
)

__version__ = "0.1.0"
