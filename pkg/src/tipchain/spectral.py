"""Eigenstates, participation numbers and miniband structure."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import ModelParams, PairBasis, build_sp_hamiltonian, build_tp_hamiltonian, spectral_bounds

log = logging.getLogger(__name__)

DENSE_LIMIT = 20_000
SP_LABELS = ("SP1", "SP2", "SP3")
TP_LABELS = ("TP1", "TP2", "TP3", "TP4", "TP5")
# TPp = (SPa x SPb), 0-based SP indices
TP_PRODUCTS = {
    "TP1": [(0, 0)],
    "TP2": [(0, 1)],
    "TP3": [(1, 1), (0, 2)],
    "TP4": [(1, 2)],
    "TP5": [(2, 2)],
}


class EigensolverError(RuntimeError):
    """Iterative eigensolver failed to converge or to meet the residual bound."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


@dataclass
class EigenSet:
    """Eigenpairs in ascending order with per-state observables.

    ``vectors`` holds eigenvectors as columns, ``pdf`` one row per state.
    """

    energies: np.ndarray
    vectors: np.ndarray
    pdf: np.ndarray
    participation: np.ndarray
    labels: np.ndarray | None = None

    def __len__(self):
        return len(self.energies)

    @property
    def max_pdf_site(self) -> np.ndarray:
        return np.argmax(self.pdf, axis=1)


@dataclass(frozen=True)
class Miniband:
    label: str
    lower: float
    upper: float

    def __contains__(self, energy):
        return self.lower <= energy < self.upper


# -- observables -------------------------------------------------------------


def pdf_of_state(vec, basis: PairBasis | None = None, *, check=True) -> np.ndarray:
    """Per-site probability of a single- or two-particle state.

    Without a basis the vector is read as a single-particle amplitude and the
    PDF is ``|A_j|^2``. With a :class:`PairBasis` the two-particle density is
    halved so that it sums to one. ``vec`` may be a matrix of column vectors,
    in which case one PDF row per column is returned.
    """
    vec = np.asarray(vec)
    w = np.abs(vec) ** 2
    if check:
        norms = w.sum(axis=0)
        if np.any(np.abs(np.sqrt(norms) - 1.0) > 1e-8):
            raise ValueError(f"state not normalized: |v| = {np.sqrt(norms)}")
    if basis is None:
        return w.T.copy()
    if vec.shape[0] != basis.dim:
        raise ValueError(f"vector length {vec.shape[0]} does not match basis dimension {basis.dim}")
    if w.ndim == 1:
        return 0.5 * (
            np.bincount(basis.left, w, minlength=basis.n) + np.bincount(basis.right, w, minlength=basis.n)
        )
    out = np.zeros((w.shape[1], basis.n))
    # column blocks keep the scatter temporaries small
    for start in range(0, w.shape[1], 256):
        blk = w[:, start : start + 256]
        acc = np.zeros((basis.n, blk.shape[1]))
        np.add.at(acc, basis.left, blk)
        np.add.at(acc, basis.right, blk)
        out[start : start + blk.shape[1]] = 0.5 * acc.T
    return out


def participation_number(p) -> np.ndarray | float:
    """``1 / sum_l p_l^2`` along the last axis."""
    p = np.asarray(p, dtype=float)
    s = np.sum(p**2, axis=-1)
    if np.any(s == 0):
        raise ValueError("participation number undefined for an all-zero PDF")
    out = 1.0 / s
    return float(out) if np.ndim(out) == 0 else out


# -- diagonalization ---------------------------------------------------------


def _operator_norm(H) -> float:
    lo, hi = spectral_bounds(H)
    return max(abs(lo), abs(hi))


def _check_residuals(H, w, v, norm):
    if len(w) == 0:
        return
    r = np.linalg.norm(H @ v - v * w, axis=0)
    worst = float(r.max())
    if worst > 1e-8 * norm:
        raise EigensolverError(f"residual {worst:.3e} exceeds {1e-8 * norm:.3e}", residual=worst)


def _slice(H, sigma, k):
    n = H.shape[0]
    lu = spla.splu(sp.csc_array(H - sigma * sp.identity(n, format="csc")))
    opinv = spla.LinearOperator(H.shape, matvec=lu.solve, dtype=float)
    try:
        w, v = spla.eigsh(H, k=k, sigma=sigma, which="LM", OPinv=opinv, maxiter=50 * n)
    except spla.ArpackNoConvergence as exc:
        raise EigensolverError(
            f"shift-invert at sigma={sigma:.6g} did not converge ({len(exc.eigenvalues)}/{k} pairs)",
            iterations=50 * n,
        ) from exc
    return w, v


def window_eigenpairs(H, lower: float, upper: float, k: int = 200):
    """All eigenpairs of a sparse symmetric ``H`` with energies in ``[lower, upper]``.

    Spectrum slicing with shift-invert Lanczos: every slice returns the ``k``
    eigenvalues closest to its shift, so all eigenvalues strictly inside the
    radius of the farthest one are known. Shifts advance so consecutive
    slices overlap; a slice that would leave a hole is recomputed closer.
    """
    if not lower < upper:
        raise ValueError(f"empty window [{lower}, {upper}]")
    H = sp.csr_array(H)
    n = H.shape[0]
    norm = _operator_norm(H)
    k = min(k, n - 2)
    if k < 8:
        w, v = sla.eigh(H.toarray())
        sel = (w >= lower) & (w <= upper)
        return w[sel], v[:, sel]

    lo_b, hi_b = spectral_bounds(H)
    tol = 1e-10 * norm
    covered = lower
    # first guess of the slice radius from the mean level density
    radius = 0.5 * k * (hi_b - lo_b) / n
    sigma = lower + 0.8 * radius
    ws, vs = [], []
    while covered <= upper:
        w, v = _slice(H, sigma, k)
        d = float(np.max(np.abs(w - sigma)))
        if sigma - d > covered + tol:
            sigma = covered + 0.7 * d
            continue
        reach = sigma + d - tol
        sel = (w >= covered) & (w < reach) & (w <= upper)
        ws.append(w[sel])
        vs.append(v[:, sel])
        log.debug("slice sigma=%.6g radius=%.3g accepted=%d", sigma, d, sel.sum())
        if reach > upper:
            break
        covered = reach
        sigma = covered + 0.9 * d
    w = np.concatenate(ws)
    v = np.concatenate(vs, axis=1)
    order = np.argsort(w, kind="stable")
    w, v = w[order], v[:, order]
    if len(w) > 1:
        near = np.flatnonzero(np.diff(w) < tol)
        drop = [i + 1 for i in near if abs(v[:, i] @ v[:, i + 1]) > 0.9]
        if drop:
            keep = np.setdiff1d(np.arange(len(w)), drop)
            w, v = w[keep], v[:, keep]
    _check_residuals(H, w, v, norm)
    return w, v


def diagonalize(H, window: tuple[float, float] | None = None, basis: PairBasis | None = None) -> EigenSet:
    """Eigenpairs of ``H`` with PDFs and participation numbers.

    ``window=None`` returns the full spectrum (dense LAPACK up to
    ``DENSE_LIMIT``, spectrum slicing over the Gershgorin interval beyond).
    ``basis`` selects two-particle PDFs; without it states are single-particle.
    """
    H = sp.csr_array(H)
    n = H.shape[0]
    if window is None and n <= DENSE_LIMIT:
        w, v = sla.eigh(H.toarray(), driver="evd", overwrite_a=True, check_finite=False)
    else:
        if window is None:
            window = spectral_bounds(H)
        w, v = window_eigenpairs(H, *window)
    pdf = pdf_of_state(v, basis, check=False)
    return EigenSet(w, v, pdf, participation_number(pdf))


def sp_eigensystem(params: ModelParams) -> EigenSet:
    return diagonalize(build_sp_hamiltonian(params))


def tp_eigensystem(params: ModelParams, window=None) -> EigenSet:
    basis = PairBasis(params.n)
    eigs = diagonalize(build_tp_hamiltonian(params, basis), window=window, basis=basis)
    bands = tp_minibands(sp_eigensystem(params).energies)
    if bands is not None:
        eigs.labels = label_energies(eigs.energies, bands)
    return eigs


# -- minibands ---------------------------------------------------------------


def gap_clusters(energies, count: int, factor: float = 10.0):
    """Split a sorted spectrum at its ``count - 1`` widest gaps.

    Only gaps wider than ``factor`` times the median level spacing qualify;
    returns ``None`` when there are not enough of them. Isolated levels
    whose neighbouring gaps are all comparable to the widest one (boundary
    states sitting inside a main gap) are left out of the clusters.
    """
    e = np.sort(np.asarray(energies))
    gaps = np.diff(e)
    if len(gaps) < count:
        return None
    threshold = factor * np.median(gaps)
    wide = gaps > max(threshold, 0.25 * gaps.max())
    isolated = np.concatenate([[True], wide]) & np.concatenate([wide, [True]])
    if isolated.any():
        e = e[~isolated]
        gaps = np.diff(e)
        if len(gaps) < count:
            return None
    big = np.flatnonzero(gaps > threshold)
    if len(big) < count - 1:
        return None
    cut = np.sort(big[np.argsort(gaps[big])[::-1][: count - 1]])
    edges = np.concatenate([[0], cut + 1, [len(e)]])
    return [e[a:b] for a, b in zip(edges[:-1], edges[1:])]


def sp_minibands(sp_energies, factor: float = 10.0) -> list[Miniband] | None:
    """SP1..SP3 windows with boundaries at the midpoints of the two main gaps."""
    clusters = gap_clusters(sp_energies, 3, factor)
    if clusters is None:
        return None
    cuts = [0.5 * (a[-1] + b[0]) for a, b in zip(clusters[:-1], clusters[1:])]
    bounds = [-np.inf, *cuts, np.inf]
    return [Miniband(lab, lo, hi) for lab, lo, hi in zip(SP_LABELS, bounds[:-1], bounds[1:])]


def tp_minibands(sp_energies, factor: float = 10.0) -> list[Miniband] | None:
    """TP1..TP5 windows from sums of SP miniband ranges.

    Boundaries sit at midpoints of the gaps between consecutive product
    ranges; ``None`` if the SP spectrum has no miniband gaps or the product
    ranges overlap.
    """
    clusters = gap_clusters(sp_energies, 3, factor)
    if clusters is None:
        return None
    rng = [(c[0], c[-1]) for c in clusters]
    spans = []
    for lab in TP_LABELS:
        parts = TP_PRODUCTS[lab]
        spans.append(
            (min(rng[a][0] + rng[b][0] for a, b in parts), max(rng[a][1] + rng[b][1] for a, b in parts))
        )
    for (_, hi), (lo, _) in zip(spans[:-1], spans[1:]):
        if lo <= hi:
            return None
    cuts = [0.5 * (a[1] + b[0]) for a, b in zip(spans[:-1], spans[1:])]
    bounds = [-np.inf, *cuts, np.inf]
    return [Miniband(lab, lo, hi) for lab, lo, hi in zip(TP_LABELS, bounds[:-1], bounds[1:])]


def miniband_spans(sp_energies, factor: float = 10.0) -> dict[str, tuple[float, float]] | None:
    """Energy range actually occupied by each noninteracting TP miniband."""
    clusters = gap_clusters(sp_energies, 3, factor)
    if clusters is None:
        return None
    rng = [(c[0], c[-1]) for c in clusters]
    return {
        lab: (min(rng[a][0] + rng[b][0] for a, b in p), max(rng[a][1] + rng[b][1] for a, b in p))
        for lab, p in TP_PRODUCTS.items()
    }


def label_energies(energies, bands: list[Miniband]) -> np.ndarray:
    edges = np.array([b.upper for b in bands[:-1]])
    idx = np.searchsorted(edges, energies, side="right")
    return np.array([bands[i].label for i in idx])


def classify_minibands(eigs: EigenSet, sp_energies=None, factor: float = 10.0) -> np.ndarray | None:
    """Attach SP or TP miniband labels to ``eigs``; ``None`` if no gaps exist.

    With ``sp_energies`` the states are treated as two-particle states and
    labelled by the product rule; otherwise ``eigs`` is itself a
    single-particle spectrum.
    """
    if sp_energies is None:
        bands = sp_minibands(eigs.energies, factor)
    else:
        bands = tp_minibands(sp_energies, factor)
    if bands is None:
        eigs.labels = None
        return None
    eigs.labels = label_energies(eigs.energies, bands)
    return eigs.labels


# -- localization length -----------------------------------------------------


def decay_length(pdf, skip: int = 5, floor: float = 1e-14, min_points: int = 5) -> float:
    """Exponential decay length of a localized PDF, ``p ~ exp(-2|l - l_peak| / xi)``.

    Least squares on ``log p`` over both flanks, skipping ``skip`` sites next
    to the peak and entries below ``floor``. Returns nan if too few points.
    """
    p = np.asarray(pdf)
    peak = int(np.argmax(p))
    sites = np.arange(len(p))
    dist = np.abs(sites - peak)
    sel = (dist > skip) & (p > floor)
    if sel.sum() < min_points:
        return np.nan
    slope = np.polyfit(dist[sel], np.log(p[sel]), 1)[0]
    if slope >= 0:
        return np.nan
    return -2.0 / slope


def localization_length_fit(eigs: EigenSet, margin: int = 20, **kw) -> float:
    """Median decay length over states peaked at least ``margin`` sites from either edge."""
    n = eigs.pdf.shape[1]
    peaks = eigs.max_pdf_site
    rows = np.flatnonzero((peaks >= margin) & (peaks < n - margin))
    xs = np.array([decay_length(eigs.pdf[i], **kw) for i in rows])
    xs = xs[np.isfinite(xs)]
    if len(xs) == 0:
        return np.nan
    return float(np.median(xs))


# -- participation sweep -----------------------------------------------------


@dataclass
class SweepResult:
    u: np.ndarray
    max_participation: np.ndarray
    energy: np.ndarray
    params: ModelParams


def _sweep_point(args):
    params, window = args
    basis = PairBasis(params.n)
    H = build_tp_hamiltonian(params, basis)
    eigs = diagonalize(H, window=window, basis=basis)
    i = int(np.argmax(eigs.participation))
    return float(eigs.participation[i]), float(eigs.energies[i])


def max_participation_sweep(
    params: ModelParams, u_grid, window: tuple[float, float] | None = None, workers: int = 1
) -> SweepResult:
    """Largest participation number and its energy for each interaction in ``u_grid``."""
    u_grid = np.asarray(u_grid, dtype=float)
    if u_grid.ndim != 1 or not np.all(np.isfinite(u_grid)) or np.any(np.diff(u_grid) <= 0):
        raise ValueError("u_grid must be a finite ascending sequence")
    jobs = [(params.with_(u=float(u)), window) for u in u_grid]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            res = list(pool.map(_sweep_point, jobs))
    else:
        res = [_sweep_point(j) for j in jobs]
    pmax, energy = (np.array(x) for x in zip(*res))
    return SweepResult(u_grid, pmax, energy, params)
