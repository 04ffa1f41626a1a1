"""Command line entry point: ``tipchain <subcommand> [options]``.

Exit status: 0 on success, 1 on usage errors, 2 on numerical or I/O failure.
Defaults come from the built-in table, then an optional ``--config`` JSON
file, then explicit flags. The output directory defaults to
``$TIPCHAIN_OUT`` or ``./tipchain_out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .dynamics import AccuracyError, SpectralBoundsError, transport_run
from .fockspace import build_sorted_sp_basis, overlap_statistics, resonance_estimate
from .model import ConfigurationError, ModelParams
from .scan import PRESETS, ScanSpec, run_scan
from .spectral import (
    EigensolverError,
    classify_minibands,
    localization_length_fit,
    max_participation_sweep,
    sp_eigensystem,
    tp_eigensystem,
)

log = logging.getLogger("tipchain")

ENV_OUT = "TIPCHAIN_OUT"
COMMANDS = ("sp-spectrum", "tp-spectrum", "sweep", "evolve", "scan", "fock")

DEFAULTS = {
    "lam": 2.5,
    "u": 0.0,
    "beta": 0.0,
    "n": 100,
    "t": 1000.0,
    "alpha": None,
    "boundary": "open",
    "threads": 1,
    "out": None,
    "preset": None,
    "seed_positions": 0,
    "window": None,
    "dump_vectors": False,
    "u_grid": None,
    "l0": None,
    "samples": 101,
    "gap": None,
    "spec": None,
    "state": None,
    "threshold": None,
    "verbose": 0,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


@dataclass
class RunConfig:
    command: str
    params: ModelParams
    options: dict = field(default_factory=dict)
    out: Path = Path("tipchain_out")
    threads: int = 1
    verbosity: int = 0

    def echo(self) -> dict:
        return {"command": self.command, "params": self.params.as_dict(), "options": self.options}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    g = common.add_argument_group("model")
    g.add_argument("--lambda", dest="lam", type=float, help="potential strength")
    g.add_argument("--u", type=float, help="on-site interaction")
    g.add_argument("--beta", type=float, help="potential phase")
    g.add_argument("--n", type=int, help="number of sites")
    g.add_argument("--alpha", type=float, help="incommensurability (default golden mean)")
    g.add_argument("--boundary", choices=["open", "periodic"])
    g.add_argument("--t", type=float, help="final time")
    r = common.add_argument_group("run")
    r.add_argument("--threads", type=int, help="worker processes / compute threads")
    r.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./tipchain_out)")
    r.add_argument("--config", help="JSON file with option defaults; flags win")
    r.add_argument("--preset", help="named scan preset: " + ", ".join(PRESETS))
    r.add_argument("--seed-positions", dest="seed_positions", type=int, help="shift of the initial-position comb")
    r.add_argument("-v", "--verbose", action="count")

    parser = _Parser(prog="tipchain", description="Two interacting bosons in a quasiperiodic chain.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help):
        return sub.add_parser(name, parents=[common], argument_default=argparse.SUPPRESS, help=help)

    p = add("sp-spectrum", "single-particle spectrum and minibands")
    p.add_argument("--dump-vectors", dest="dump_vectors", action="store_true")

    p = add("tp-spectrum", "two-particle eigenstates and participation numbers")
    p.add_argument("--window", type=float, nargs=2, metavar=("E_LO", "E_HI"))
    p.add_argument("--dump-vectors", dest="dump_vectors", action="store_true")

    p = add("sweep", "largest participation number versus U")
    p.add_argument("--u-grid", dest="u_grid", type=float, nargs=3, metavar=("START", "STOP", "STEP"))
    p.add_argument("--window", type=float, nargs=2, metavar=("E_LO", "E_HI"))

    p = add("evolve", "adjacent-pair wave packet spreading")
    p.add_argument("--l0", type=int, help="left site of the initial pair (default: centre)")
    p.add_argument("--samples", type=int)

    p = add("scan", "(U, lambda) phase diagram")
    p.add_argument("--spec", help="scan spec JSON file")
    p.add_argument("--state", help="checkpoint file for resumable scans")
    p.add_argument("--threshold", type=float, help="metal threshold for sigma* (default N/10)")

    p = add("fock", "overlap integrals and resonance estimates")
    p.add_argument("--gap", type=float, help="miniband distance (default: measured)")
    return parser


def resolve(argv) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    merged = dict(DEFAULTS)
    cfg_path = ns.pop("config", None)
    if cfg_path:
        try:
            cfg = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {cfg_path}: {exc}") from exc
        unknown = set(cfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged.update(cfg)
    merged.update(ns)
    kw = dict(n=merged["n"], lam=merged["lam"], u=merged["u"], beta=merged["beta"], boundary=merged["boundary"])
    if merged["alpha"] is not None:
        kw["alpha"] = merged["alpha"]
    try:
        params = ModelParams(**kw)
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(merged["out"] or os.environ.get(ENV_OUT) or "tipchain_out")
    model_keys = {"lam", "u", "beta", "n", "alpha", "boundary", "out", "threads", "verbose"}
    options = {k: v for k, v in merged.items() if k not in model_keys}
    return RunConfig(command, params, options, out, int(merged["threads"]), int(merged["verbose"] or 0))


# -- subcommands -------------------------------------------------------------


def _sp_spectrum(cfg: RunConfig) -> list[Path]:
    eigs = sp_eigensystem(cfg.params)
    classify_minibands(eigs)
    files = [io.write_state_table(eigs, cfg.out / "sp_spectrum.csv")]
    meta = cfg.echo()
    meta["minibands_available"] = eigs.labels is not None
    if cfg.params.lam > 2:
        meta["localization_length_fit"] = localization_length_fit(eigs)
        meta["localization_length_theory"] = cfg.params.xi1
    files.append(io.write_json(cfg.out / "sp_spectrum.json", meta))
    files += io.emit_plot_data(eigs, "participation", cfg.out, "sp_participation", source=cfg.echo())
    if cfg.options["dump_vectors"]:
        files.append(io.write_eigenvectors(eigs.vectors, cfg.out / "sp_vectors.bin"))
    return files


def _tp_spectrum(cfg: RunConfig) -> list[Path]:
    window = cfg.options["window"]
    eigs = tp_eigensystem(cfg.params, window=tuple(window) if window else None)
    files = [io.write_state_table(eigs, cfg.out / "tp_spectrum.csv")]
    meta = cfg.echo()
    meta["states"] = len(eigs)
    meta["median_participation"] = float(np.median(eigs.participation))
    files.append(io.write_json(cfg.out / "tp_spectrum.json", meta))
    files += io.emit_plot_data(eigs, "participation", cfg.out, "tp_participation", source=cfg.echo())
    if cfg.options["dump_vectors"]:
        files.append(io.write_eigenvectors(eigs.vectors, cfg.out / "tp_vectors.bin"))
    return files


def _sweep(cfg: RunConfig) -> list[Path]:
    start, stop, step = cfg.options["u_grid"] or (0.0, 15.0, 0.25)
    grid = start + step * np.arange(int(math.floor((stop - start) / step + 1e-9)) + 1)
    window = cfg.options["window"]
    res = max_participation_sweep(cfg.params, grid, window=tuple(window) if window else None, workers=cfg.threads)
    return list(io.emit_plot_data(res, "sweep", cfg.out, "sweep", source=cfg.echo()))


def _evolve(cfg: RunConfig) -> list[Path]:
    t = cfg.options["t"]
    trace = transport_run(cfg.params, cfg.options["l0"], t, cfg.options["samples"])
    files = list(io.write_trace(trace, cfg.out / "evolve"))
    files += io.emit_plot_data(trace, "pdf_heatmap", cfg.out, "evolve_heatmap", source=cfg.echo())
    log.info("gamma=%.3f sigma(t_final)=%.3f boundary_limited=%s", trace.gamma, trace.sigma[-1], trace.boundary_limited)
    return files


def _scan(cfg: RunConfig) -> list[Path]:
    opts = cfg.options
    if opts["spec"]:
        spec = ScanSpec.from_json(Path(opts["spec"]).read_text())
    elif opts["preset"]:
        if opts["preset"] not in PRESETS:
            raise UsageError(f"unknown preset {opts['preset']!r}; choose from {sorted(PRESETS)}")
        spec = PRESETS[opts["preset"]]()
    else:
        raise UsageError("scan needs --preset or --spec")
    if opts["seed_positions"]:
        spec = ScanSpec(**{**json.loads(spec.to_json()), "seed": opts["seed_positions"]})

    def progress(done, total):
        log.info("cells %d/%d", done, total)

    diagram = run_scan(spec, workers=cfg.threads, state_path=opts["state"], progress=progress)
    files = list(io.write_phase_diagram(diagram, cfg.out, opts["threshold"]).values())
    source = {"spec": json.loads(spec.to_json())}
    files += io.emit_plot_data(diagram, "phase", cfg.out, f"scan_{spec.digest}_plot", source=source)
    return files


def _fock(cfg: RunConfig) -> list[Path]:
    basis = build_sorted_sp_basis(cfg.params)
    stats = overlap_statistics(basis)
    res = resonance_estimate(basis, gap=cfg.options["gap"], stats=stats)
    return [
        io.write_overlap_stats(stats, cfg.out / "overlap_stats.csv"),
        io.write_resonances(res, cfg.out / "resonances.json", extra=cfg.echo()),
    ]


HANDLERS = {
    "sp-spectrum": _sp_spectrum,
    "tp-spectrum": _tp_spectrum,
    "sweep": _sweep,
    "evolve": _evolve,
    "scan": _scan,
    "fock": _fock,
}


def main(argv=None) -> int:
    try:
        cfg = resolve(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"tipchain: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.WARNING - 10 * min(cfg.verbosity, 2), format="%(levelname)s %(message)s")
    if cfg.threads > 1:
        try:
            import numba

            numba.set_num_threads(min(cfg.threads, numba.config.NUMBA_NUM_THREADS))
        except ImportError:
            pass
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
        files = HANDLERS[cfg.command](cfg)
    except UsageError as exc:
        print(f"tipchain: {exc}", file=sys.stderr)
        return 1
    except (EigensolverError, AccuracyError, SpectralBoundsError, OSError) as exc:
        print(f"tipchain: {exc}", file=sys.stderr)
        return 2
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
