"""(U, lambda) phase diagram from long-time wave-packet spreading.

Every cell runs ``R`` adjacent-pair wave packets started at evenly spaced
positions around the chain centre and keeps the largest final second moment.
All realizations of a cell share one Hamiltonian, so they are propagated
together as a block of vectors.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import (
    AccuracyError,
    ChebyshevPropagator,
    boundary_contact,
    fit_exponent,
    macro_step,
    second_moment,
)
from .model import ModelParams, PairBasis, build_tp_hamiltonian, spectral_bounds
from .spectral import pdf_of_state

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScanSpec:
    lambdas: tuple[float, ...]
    us: tuple[float, ...]
    n: int = 144
    t_final: float = 2000.0
    realizations: int = 12
    beta: float = 0.0
    samples: int = 41
    position_span: float = 0.25
    seed: int = 0
    boundary: str = "open"

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        object.__setattr__(self, "us", tuple(float(x) for x in self.us))
        if not self.lambdas or not self.us:
            raise ValueError("grids must be nonempty")
        if any(b <= a for a, b in zip(self.lambdas, self.lambdas[1:])) or any(
            b <= a for a, b in zip(self.us, self.us[1:])
        ):
            raise ValueError("grids must be strictly ascending")
        if self.realizations < 1:
            raise ValueError("need at least one realization")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if self.samples < 2:
            raise ValueError("need at least two samples")
        if len(set(initial_positions(self))) != self.realizations:
            raise ValueError("chain too short for the requested number of distinct positions")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> ScanSpec:
        data = json.loads(text)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown scan spec keys: {sorted(unknown)}")
        return cls(**data)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:12]

    def cells(self):
        return [(i, j) for i in range(len(self.lambdas)) for j in range(len(self.us))]


def desk_preset() -> ScanSpec:
    return ScanSpec(
        lambdas=tuple(np.linspace(2.1, 3.4, 12)),
        us=tuple(np.linspace(0.0, 16.0, 25)),
        n=144,
        t_final=2000.0,
        realizations=12,
    )


def paper_preset() -> ScanSpec:
    return ScanSpec(
        lambdas=tuple(np.linspace(2.0, 3.4, 15)),
        us=tuple(np.linspace(0.0, 16.0, 33)),
        n=610,
        t_final=1.5e4,
        realizations=60,
    )


PRESETS = {"desk": desk_preset, "paper": paper_preset}


def initial_positions(spec: ScanSpec) -> list[int]:
    """Left sites of the initial pairs: evenly spaced over a band around the centre.

    The band covers ``position_span * n`` sites; ``seed`` shifts the whole
    comb by whole sites (modulo its spacing) to pick a different but equally
    deterministic set.
    """
    n, r = spec.n, spec.realizations
    centre = n / 2 - 1
    if r == 1:
        base = np.array([centre])
        spacing = 1.0
    else:
        span = max(spec.position_span * n, r - 1)
        base = centre - span / 2 + span * np.arange(r) / (r - 1)
        spacing = span / (r - 1)
    shift = spec.seed % max(1, int(spacing))
    pos = np.rint(base + shift).astype(int)
    return [int(min(max(p, 0), n - 2)) for p in pos]


@dataclass
class CellResult:
    lam: float
    u: float
    sigma_max: float
    best_position: int
    gamma: float
    gamma_residual: float
    boundary_limited: bool
    sigma_final: list[float]
    error: str | None = None


def run_cell(spec: ScanSpec, lam: float, u: float) -> CellResult:
    """All realizations of one grid cell, propagated as a block."""
    params = ModelParams(n=spec.n, lam=lam, u=u, beta=spec.beta, boundary=spec.boundary)
    basis = PairBasis(spec.n)
    H = build_tp_hamiltonian(params, basis)
    positions = initial_positions(spec)
    psi = np.zeros((basis.dim, len(positions)), dtype=complex)
    for k, l0 in enumerate(positions):
        psi[basis.index(l0, l0 + 1), k] = 1.0
    centers = np.array(positions) + 0.5

    lo, hi = spectral_bounds(H)
    pad = 0.01 * (hi - lo)
    bounds = (lo - pad, hi + pad)
    dt, steps = macro_step(spec.t_final, 0.5 * (bounds[1] - bounds[0]), spec.samples - 1)
    prop = ChebyshevPropagator(H, dt, bounds)
    every = steps // (spec.samples - 1)

    times, sigmas, edges = [0.0], [np.full(len(positions), 0.5)], [np.zeros(len(positions))]
    for s in range(1, steps + 1):
        psi = prop.step(psi)
        if s % every:
            continue
        norms = np.linalg.norm(psi, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-8):
            raise AccuracyError(f"norm drift {np.abs(norms - 1).max():.3e} in cell lam={lam} U={u}")
        pdf = pdf_of_state(psi, basis, check=False)
        times.append(s * dt)
        sigmas.append(np.array([second_moment(pdf[k], centers[k]) for k in range(len(positions))]))
        edges.append(np.maximum(pdf[:, 0], pdf[:, -1]))
    times = np.array(times)
    sigmas = np.array(sigmas)
    edges = np.array(edges)

    final = sigmas[-1]
    best = int(np.argmax(final))
    edge_pdf = np.column_stack([edges[:, best], np.zeros_like(times), edges[:, best]])
    t_hit = boundary_contact(edge_pdf, times)
    pre = (times > 0) & (times < t_hit if t_hit is not None else True)
    rows = np.flatnonzero(pre)
    rows = rows[len(rows) // 2 :]
    gamma, resid = fit_exponent(times[rows], sigmas[rows, best])
    return CellResult(
        lam=lam,
        u=u,
        sigma_max=float(final[best]),
        best_position=positions[best],
        gamma=gamma,
        gamma_residual=resid,
        boundary_limited=bool(t_hit is not None and t_hit < 0.5 * spec.t_final),
        sigma_final=[float(x) for x in final],
    )


def _cell_job(args):
    spec, i, j = args
    try:
        return i, j, run_cell(spec, spec.lambdas[i], spec.us[j])
    except Exception as exc:  # recorded per cell; the scan carries on
        log.warning("cell (%s, %s) failed: %s", spec.lambdas[i], spec.us[j], exc)
        return i, j, CellResult(spec.lambdas[i], spec.us[j], math.nan, -1, math.nan, math.nan, False, [], repr(exc))


@dataclass
class PhaseDiagram:
    """Largest final second moment per (lambda, U) cell.

    ``sigma`` has shape ``(len(lambdas), len(us))``.
    """

    spec: ScanSpec
    sigma: np.ndarray
    cells: dict[tuple[int, int], CellResult] = field(default_factory=dict)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array(self.spec.lambdas)

    @property
    def us(self) -> np.ndarray:
        return np.array(self.spec.us)

    def metadata(self) -> dict:
        return {
            "spec": asdict(self.spec),
            "digest": self.spec.digest,
            "cells": [asdict(self.cells[k]) for k in sorted(self.cells)],
        }


def classify_cells(diagram: PhaseDiagram | np.ndarray, threshold: float | None = None) -> np.ndarray:
    """Boolean metal map: ``sigma* >= threshold`` (default ``N / 10``)."""
    if isinstance(diagram, PhaseDiagram):
        sigma = diagram.sigma
        if threshold is None:
            threshold = diagram.spec.n / 10
    else:
        sigma = np.asarray(diagram)
        if threshold is None:
            raise ValueError("threshold required for a bare array")
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    return np.nan_to_num(sigma, nan=-np.inf) >= threshold


# -- checkpointing -----------------------------------------------------------


def _load_state(path: Path, spec: ScanSpec) -> dict[tuple[int, int], CellResult]:
    if not path.exists() or path.stat().st_size == 0:
        return {}
    state = json.loads(path.read_text())
    if state.get("spec") != json.loads(spec.to_json()):
        raise ValueError(f"checkpoint {path} belongs to a different scan spec; refusing to resume")
    return {(c["i"], c["j"]): CellResult(**c["result"]) for c in state["cells"]}


def _save_state(path: Path, spec: ScanSpec, done: dict[tuple[int, int], CellResult]):
    state = {
        "spec": json.loads(spec.to_json()),
        "cells": [{"i": i, "j": j, "result": asdict(done[(i, j)])} for i, j in sorted(done)],
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(state))
    os.replace(tmp, path)


def run_scan(
    spec: ScanSpec,
    workers: int = 1,
    state_path: str | os.PathLike | None = None,
    max_cells: int | None = None,
    order: list[tuple[int, int]] | None = None,
    progress=None,
) -> PhaseDiagram:
    """Run (or resume) a scan.

    With ``state_path`` every finished cell is checkpointed and cells already
    in the file are skipped. ``max_cells`` stops after that many new cells,
    leaving a partial diagram (NaN for missing cells). ``order`` permutes the
    execution order; results do not depend on it.
    """
    path = Path(state_path) if state_path is not None else None
    done = _load_state(path, spec) if path is not None else {}
    todo = [c for c in (order or spec.cells()) if c not in done]
    if max_cells is not None:
        todo = todo[:max_cells]
    jobs = [(spec, i, j) for i, j in todo]

    def record(i, j, res):
        done[(i, j)] = res
        if path is not None:
            _save_state(path, spec, done)
        if progress is not None:
            progress(len(done), len(spec.cells()))

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            for i, j, res in pool.map(_cell_job, jobs):
                record(i, j, res)
    else:
        for job in jobs:
            record(*_cell_job(job))

    sigma = np.full((len(spec.lambdas), len(spec.us)), np.nan)
    for (i, j), res in done.items():
        sigma[i, j] = res.sigma_max
    return PhaseDiagram(spec, sigma, dict(done))
