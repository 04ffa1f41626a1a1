"""File emission: CSV tables, JSON sidecars, binary eigenvector dumps, plot data.

Floats are written as ``%.16e`` (17 significant digits), which round-trips
every IEEE double exactly through ``float()``.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .dynamics import WavePacketTrace
from .fockspace import OverlapStats, Resonance
from .model import ModelParams
from .scan import PhaseDiagram, classify_cells
from .spectral import EigenSet, SweepResult

FLOAT = "%.16e"
LOG_FLOOR = -16.0


def fmt(x) -> str:
    return FLOAT % x


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_json(path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default))
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


# -- per-state tables --------------------------------------------------------

STATE_COLUMNS = ("index", "energy", "participation", "miniband", "max_pdf_site")


def write_state_table(eigs: EigenSet, path) -> Path:
    path = Path(path)
    labels = eigs.labels if eigs.labels is not None else [""] * len(eigs)
    sites = eigs.max_pdf_site
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STATE_COLUMNS)
        for i, (e, p, lab, s) in enumerate(zip(eigs.energies, eigs.participation, labels, sites)):
            w.writerow([i, fmt(e), fmt(p), lab, int(s)])
    return path


def read_state_table(path) -> dict[str, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {
        "index": np.array([int(r["index"]) for r in rows]),
        "energy": np.array([float(r["energy"]) for r in rows]),
        "participation": np.array([float(r["participation"]) for r in rows]),
        "miniband": np.array([r["miniband"] for r in rows]),
        "max_pdf_site": np.array([int(r["max_pdf_site"]) for r in rows]),
    }


def write_eigenvectors(vectors: np.ndarray, path) -> Path:
    """Binary dump: int64 header (dimension, count), then one row of doubles per eigenvector."""
    path = Path(path)
    v = np.ascontiguousarray(np.asarray(vectors, dtype="<f8").T)
    with path.open("wb") as fh:
        fh.write(struct.pack("<qq", v.shape[1], v.shape[0]))
        fh.write(v.tobytes())
    return path


def read_eigenvectors(path) -> np.ndarray:
    """Inverse of :func:`write_eigenvectors`; returns eigenvectors as columns."""
    raw = Path(path).read_bytes()
    dim, count = struct.unpack("<qq", raw[:16])
    rows = np.frombuffer(raw[16:], dtype="<f8")
    if rows.size != dim * count:
        raise ValueError(f"{path}: header says {count}x{dim}, payload has {rows.size} values")
    return rows.reshape(count, dim).T.copy()


# -- wave packet traces ------------------------------------------------------


def write_trace(trace: WavePacketTrace, stem) -> tuple[Path, Path]:
    """PDF snapshots as CSV (rows = times, first column = time) plus a JSON sidecar."""
    stem = Path(stem)
    csv_path = stem.with_suffix(".csv")
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time"] + [f"site_{j}" for j in range(trace.pdf.shape[1])])
        for t, row in zip(trace.times, trace.pdf):
            w.writerow([fmt(t)] + [fmt(x) for x in row])
    meta = trace.metadata()
    meta.update(
        {
            "norm": trace.norm,
            "energy": trace.energy,
            "sigma": trace.sigma,
            "times": trace.times,
        }
    )
    json_path = write_json(stem.with_suffix(".json"), meta)
    return csv_path, json_path


def read_trace(stem) -> WavePacketTrace:
    stem = Path(stem)
    with stem.with_suffix(".csv").open(newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    data = np.array([[float(x) for x in r] for r in rows])
    meta = read_json(stem.with_suffix(".json"))
    params = ModelParams(**meta["params"]) if meta.get("params") else None
    return WavePacketTrace(
        times=data[:, 0],
        pdf=data[:, 1:],
        norm=np.array(meta["norm"]),
        energy=np.array(meta["energy"]),
        sigma=np.array(meta["sigma"]),
        center=meta["center"],
        params=params,
        gamma=_nan(meta["gamma"]),
        gamma_residual=_nan(meta["gamma_residual"]),
        boundary_time=meta["boundary_time"],
        boundary_limited=meta["boundary_limited"],
    )


def _nan(x):
    return math.nan if x is None else x


# -- Fock statistics ---------------------------------------------------------


def write_overlap_stats(stats: list[OverlapStats], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["miniband", "pairs", "mean_I0", "std_I0", "mean_abs_I_cross", "mean_I0_onsite", "onsite_pairs"])
        for s in stats:
            means = (s.mean_self, s.std_self, s.mean_cross, s.mean_self_onsite)
            w.writerow([s.miniband, s.pairs, *(fmt(x) for x in means), s.onsite_pairs])
    return path


def write_resonances(res: list[Resonance], path, extra: dict | None = None) -> Path:
    data = {"resonances": [asdict(r) for r in res]}
    for r in data["resonances"]:
        if not math.isfinite(r["u_star"]):
            r["u_star"] = None
    if extra:
        data.update(extra)
    return write_json(path, data)


# -- phase diagram -----------------------------------------------------------


def write_grid_csv(matrix, lambdas, us, path, as_int=False) -> Path:
    """Grid with a U header row and a lambda column; rows follow ``lambdas``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda\\U"] + [fmt(u) for u in us])
        for lam, row in zip(lambdas, matrix):
            w.writerow([fmt(lam)] + [str(int(x)) if as_int else fmt(x) for x in row])
    return path


def read_grid_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    us = np.array([float(x) for x in rows[0][1:]])
    lambdas = np.array([float(r[0]) for r in rows[1:]])
    grid = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    return grid, lambdas, us


def write_phase_diagram(diagram: PhaseDiagram, outdir, threshold: float | None = None) -> dict[str, Path]:
    """Sigma grid, metal map and metadata; file names carry the spec digest."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    tag = diagram.spec.digest
    metal = classify_cells(diagram, threshold)
    meta = diagram.metadata()
    meta["threshold"] = threshold if threshold is not None else diagram.spec.n / 10
    return {
        "sigma": write_grid_csv(diagram.sigma, diagram.lambdas, diagram.us, outdir / f"scan_{tag}_sigma.csv"),
        "metal": write_grid_csv(metal, diagram.lambdas, diagram.us, outdir / f"scan_{tag}_metal.csv", as_int=True),
        "meta": write_json(outdir / f"scan_{tag}_meta.json", meta),
    }


# -- plot data ---------------------------------------------------------------


def _write_matrix(path, matrix, header=None):
    with Path(path).open("w") as fh:
        if header:
            fh.write("# " + header + "\n")
        for row in np.atleast_2d(matrix):
            fh.write(" ".join(fmt(x) for x in row) + "\n")


def read_matrix(path) -> np.ndarray:
    return np.loadtxt(path, comments="#", ndmin=2)


def log10_floored(p, floor: float = LOG_FLOOR) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.maximum(np.log10(np.maximum(p, 0.0)), floor)


def emit_plot_data(result, kind: str, outdir, name: str | None = None, source: dict | None = None) -> tuple[Path, Path]:
    """Whitespace-separated matrix for gnuplot plus a JSON sidecar.

    ``kind`` is one of ``"pdf_heatmap"`` (trace; log10 PDF, rows = times,
    columns = sites), ``"participation"`` (EigenSet; energy and participation
    columns), ``"sweep"`` (SweepResult; U, max P, energy) or ``"phase"``
    (PhaseDiagram; first row U values, first column lambda values).
    ``source`` describes how to recompute the result and is stored verbatim.
    """
    outdir = Path(outdir)
    if not outdir.is_dir():
        raise OSError(f"output directory {outdir} does not exist")
    name = name or kind
    dat = outdir / f"{name}.dat"
    meta = {"kind": kind, "source": source or {}}
    if kind == "pdf_heatmap":
        if not isinstance(result, WavePacketTrace):
            raise TypeError("pdf_heatmap needs a WavePacketTrace")
        _write_matrix(dat, log10_floored(result.pdf), "log10 PDF, rows=time, columns=site")
        meta.update(result.metadata(), times=result.times, floor=LOG_FLOOR)
    elif kind == "participation":
        if not isinstance(result, EigenSet):
            raise TypeError("participation needs an EigenSet")
        _write_matrix(dat, np.column_stack([result.energies, result.participation]), "energy participation")
    elif kind == "sweep":
        if not isinstance(result, SweepResult):
            raise TypeError("sweep needs a SweepResult")
        cols = np.column_stack([result.u, result.max_participation, result.energy])
        _write_matrix(dat, cols, "U max_participation energy")
        meta["params"] = result.params.as_dict()
    elif kind == "phase":
        if not isinstance(result, PhaseDiagram):
            raise TypeError("phase needs a PhaseDiagram")
        grid = np.full((len(result.lambdas) + 1, len(result.us) + 1), np.nan)
        grid[0, 1:] = result.us
        grid[1:, 0] = result.lambdas
        grid[1:, 1:] = result.sigma
        _write_matrix(dat, grid, "first row: U; first column: lambda; entries: sigma*")
        meta["spec"] = json.loads(result.spec.to_json())
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    side = write_json(outdir / f"{name}.json", meta)
    return dat, side
