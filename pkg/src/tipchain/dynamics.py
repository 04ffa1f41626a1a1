"""Real-time evolution of two-boson wave packets.

The propagator expands ``exp(-i H dt)`` in Chebyshev polynomials of the
rescaled Hamiltonian ``X = (H - centre) / halfwidth``::

    exp(-i H dt) = exp(-i centre dt) * sum_k c_k T_k(X),
    c_0 = J_0(halfwidth dt),  c_k = 2 (-i)^k J_k(halfwidth dt).

Long runs are split into equal macro steps so that the expansion stays
below ``MAX_ORDER`` terms; requested sample times are snapped onto that grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import jv

from ._kernels import chebyshev_series
from .model import ModelParams, PairBasis, build_tp_hamiltonian, spectral_bounds
from .spectral import pdf_of_state

MAX_ORDER = 10_000
TAIL_TOL = 1e-14
NORM_ABORT = 1e-8
EDGE_PDF = 1e-8


class AccuracyError(RuntimeError):
    """Propagation lost unitarity beyond the allowed drift."""


class SpectralBoundsError(RuntimeError):
    pass


def chebyshev_coefficients(halfwidth_dt: float, tol: float = TAIL_TOL) -> np.ndarray:
    """Expansion coefficients of ``exp(-i x tau)`` on ``[-1, 1]`` with ``tau = halfwidth_dt``.

    Truncated where the Bessel tail drops below ``tol``; for ``k > tau`` the
    ``J_k`` decay faster than geometrically, so the first sub-threshold
    coefficient bounds the rest.
    """
    tau = float(halfwidth_dt)
    kmax = int(tau + 20 * tau ** (1 / 3) + 40)
    k = np.arange(kmax + 1)
    J = jv(k, tau)
    # tail[i] = sum of |c_k| for k >= i
    tail = np.cumsum(np.abs(2 * J)[::-1])[::-1]
    order = max(1, int(np.argmax(tail < tol)))
    c = 2.0 * J[:order] * (-1j) ** k[:order]
    c[0] = J[0]
    return c


@dataclass
class ChebyshevPropagator:
    """Applies ``exp(-i H dt)`` for a fixed real symmetric ``H`` and step ``dt``."""

    H: sp.csr_array
    dt: float
    bounds: tuple[float, float] | None = None
    tol: float = TAIL_TOL
    compiled: bool = True
    coefficients: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.H = sp.csr_array(self.H)
        if self.bounds is None:
            lo, hi = spectral_bounds(self.H)
            pad = 0.01 * (hi - lo)
            self.bounds = (lo - pad, hi + pad)
        lo, hi = self.bounds
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
            raise SpectralBoundsError(f"unusable spectral bounds ({lo}, {hi})")
        self.centre = 0.5 * (hi + lo)
        self.halfwidth = 0.5 * (hi - lo)
        self.coefficients = chebyshev_coefficients(self.halfwidth * self.dt, self.tol)
        if len(self.coefficients) > MAX_ORDER:
            raise ValueError(f"step {self.dt} needs {len(self.coefficients)} terms (> {MAX_ORDER})")
        Hs = ((self.H - self.centre * sp.identity(self.H.shape[0], format="csr")) / self.halfwidth).tocsr()
        Hs.sort_indices()
        self._Hs = Hs
        self._phase = np.exp(-1j * self.centre * self.dt)

    @property
    def order(self) -> int:
        return len(self.coefficients)

    def step(self, psi: np.ndarray) -> np.ndarray:
        """One step for a state vector or a block of column vectors."""
        if self.compiled:
            Hs = self._Hs
            return self._phase * chebyshev_series(Hs.indptr, Hs.indices, Hs.data, psi, self.coefficients)
        c = self.coefficients
        X = self._Hs
        t_prev = np.asarray(psi, dtype=complex)
        out = c[0] * t_prev
        if len(c) == 1:
            return self._phase * out
        t_cur = X @ t_prev
        out += c[1] * t_cur
        for ck in c[2:]:
            t_next = 2.0 * (X @ t_cur) - t_prev
            out += ck * t_next
            t_prev, t_cur = t_cur, t_next
        return self._phase * out


def macro_step(t_final: float, halfwidth: float, n_intervals: int = 1, max_order: int = MAX_ORDER) -> tuple[float, int]:
    """Step length and count covering ``t_final`` with bounded expansion order.

    The step count is a multiple of ``n_intervals`` so that evenly spaced
    samples fall exactly on the grid.
    """
    per = max(1, math.ceil(halfwidth * t_final / (n_intervals * 0.8 * max_order)))
    steps = n_intervals * per
    return t_final / steps, steps


@dataclass
class WavePacketTrace:
    """Sampled observables of one propagation run.

    ``pdf`` has one row per sample time. ``sigma`` is measured from ``center``.
    """

    times: np.ndarray
    pdf: np.ndarray
    norm: np.ndarray
    energy: np.ndarray
    sigma: np.ndarray
    center: float
    params: ModelParams | None = None
    gamma: float = float("nan")
    gamma_residual: float = float("nan")
    boundary_time: float | None = None
    boundary_limited: bool = False
    final_state: np.ndarray | None = field(default=None, repr=False)

    def metadata(self) -> dict:
        return {
            "params": None if self.params is None else self.params.as_dict(),
            "center": self.center,
            "gamma": self.gamma,
            "gamma_residual": self.gamma_residual,
            "boundary_time": self.boundary_time,
            "boundary_limited": self.boundary_limited,
            "t_final": float(self.times[-1]),
            "samples": len(self.times),
        }


def second_moment(p, center: float):
    """Root mean square distance ``sqrt(sum_l (l - center)^2 p_l)`` along the last axis."""
    p = np.asarray(p, dtype=float)
    l = np.arange(p.shape[-1])
    out = np.sqrt(np.sum((l - center) ** 2 * p, axis=-1))
    return float(out) if np.ndim(out) == 0 else out


def initial_adjacent_pair(l0: int, basis: PairBasis) -> np.ndarray:
    """Both bosons on neighbouring sites ``l0`` and ``l0 + 1``."""
    if not 0 <= l0 < basis.n - 1:
        raise IndexError(f"l0={l0} outside [0, {basis.n - 1})")
    psi = np.zeros(basis.dim)
    psi[basis.index(l0, l0 + 1)] = 1.0
    return psi


def _snap(sample_times, t_final, dt):
    grid_idx = np.rint(np.asarray(sample_times, dtype=float) / dt).astype(int)
    return np.unique(grid_idx)


def propagate(
    H,
    psi0,
    t_final: float,
    sample_times=None,
    basis: PairBasis | None = None,
    center: float | None = None,
    bounds: tuple[float, float] | None = None,
) -> WavePacketTrace:
    """Evolve ``psi0`` under ``H`` up to ``t_final`` and sample observables.

    Without ``basis`` the state is single-particle and its PDF is
    ``|psi_j|^2``. ``center`` is the reference site for the second moment
    (defaults to the centroid of the initial PDF). Sample times are snapped
    to the macro-step grid; the trace records the times actually used.
    """
    H = sp.csr_array(H)
    psi = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi) - 1.0) > 1e-8:
        raise ValueError("initial state is not normalized")
    if t_final < 0:
        raise ValueError("t_final must be non-negative")
    if sample_times is None:
        sample_times = np.linspace(0.0, t_final, 101)
    sample_times = np.asarray(sample_times, dtype=float)
    if np.any(np.diff(sample_times) < 0) or sample_times.min() < 0 or sample_times.max() > t_final * (1 + 1e-12):
        raise ValueError("sample times must be ascending within [0, t_final]")

    if bounds is None:
        lo, hi = spectral_bounds(H)
        pad = 0.01 * (hi - lo)
        bounds = (lo - pad, hi + pad)
    halfwidth = 0.5 * (bounds[1] - bounds[0])
    if t_final == 0:
        dt, steps, idx = 0.0, 0, np.zeros(1, dtype=int)
    else:
        dt, steps = macro_step(t_final, halfwidth, max(1, len(sample_times) - 1))
        idx = _snap(sample_times, t_final, dt)
    prop = ChebyshevPropagator(H, dt, bounds) if steps else None

    def observe(state):
        return pdf_of_state(state, basis, check=False), np.vdot(state, H @ state).real

    pdfs, norms, energies, times = [], [], [], []
    wanted = set(idx.tolist())
    for s in range(steps + 1):
        if s > 0:
            psi = prop.step(psi)
        nrm = np.linalg.norm(psi)
        if abs(nrm - 1.0) > NORM_ABORT:
            raise AccuracyError(f"norm drifted to {nrm:.12f} at t={s * dt:.6g}")
        if s in wanted:
            p, e = observe(psi)
            pdfs.append(p)
            norms.append(nrm)
            energies.append(e)
            times.append(s * dt)
    pdf = np.array(pdfs)
    if center is None:
        center = float(np.arange(pdf.shape[1]) @ pdf[0])
    return WavePacketTrace(
        times=np.array(times),
        pdf=pdf,
        norm=np.array(norms),
        energy=np.array(energies),
        sigma=second_moment(pdf, center),
        center=center,
        final_state=psi,
    )


def boundary_contact(pdf: np.ndarray, times: np.ndarray, threshold: float = EDGE_PDF) -> float | None:
    """First sample time at which either edge site carries more than ``threshold``."""
    hit = np.flatnonzero((pdf[:, 0] > threshold) | (pdf[:, -1] > threshold))
    return float(times[hit[0]]) if len(hit) else None


def fit_exponent(times, sigma) -> tuple[float, float]:
    """Log-log least squares ``sigma ~ t**gamma``; returns (gamma, rms residual)."""
    t = np.asarray(times, dtype=float)
    s = np.asarray(sigma, dtype=float)
    ok = (t > 0) & (s > 0)
    if ok.sum() < 2:
        return float("nan"), float("nan")
    x, y = np.log(t[ok]), np.log(s[ok])
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    rms = math.sqrt(res[0] / ok.sum()) if len(res) else 0.0
    return float(coef[0]), rms


def classify_trace(trace: WavePacketTrace, t_final: float) -> WavePacketTrace:
    """Fill the spreading exponent and boundary flags of ``trace`` in place."""
    t_hit = boundary_contact(trace.pdf, trace.times)
    trace.boundary_time = t_hit
    trace.boundary_limited = t_hit is not None and t_hit < 0.5 * t_final
    pre = trace.times < t_hit if t_hit is not None else np.ones(len(trace.times), bool)
    pre &= trace.times > 0
    rows = np.flatnonzero(pre)
    rows = rows[len(rows) // 2 :]
    trace.gamma, trace.gamma_residual = fit_exponent(trace.times[rows], trace.sigma[rows])
    return trace


def default_l0(n: int) -> int:
    """Left site of the adjacent pair straddling the chain centre."""
    return n // 2 - 1


def transport_run(
    params: ModelParams, l0: int | None = None, t_final: float = 1000.0, samples: int = 101
) -> WavePacketTrace:
    """Adjacent-pair wave packet propagated and classified by its spreading exponent."""
    basis = PairBasis(params.n)
    if l0 is None:
        l0 = default_l0(params.n)
    H = build_tp_hamiltonian(params, basis)
    psi0 = initial_adjacent_pair(l0, basis)
    trace = propagate(H, psi0, t_final, np.linspace(0, t_final, samples), basis=basis, center=l0 + 0.5)
    trace.params = params
    return classify_trace(trace, t_final)
