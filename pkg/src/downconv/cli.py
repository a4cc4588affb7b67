"""Command-line entry point.

Examples
--------
    downconv foster configs/table1 --out results/
    downconv spectrum configs/table1 --smax 2
    downconv benchmark configs/appendix_d
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from .artifacts import ArtifactWriter, fmt
from .cache import StageCache
from .config import load_config
from .effective import EffectiveModel
from .errors import DownconvError
from .fluxonium import sweep_to_csv
from .pipeline import Pipeline, default_threads, gauge_benchmark, map_points
from .quantize import coupling_profile, el_curve_to_csv, el_renormalization_curve
from .spectra import map_to_csv, map_to_json

log = logging.getLogger("downconv")

SUBCOMMANDS = ("foster", "fluxonium", "modes", "polaritons", "spectrum", "s11", "benchmark", "sweep")

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4


def _check(cond: bool, what: str, failures: List[str]):
    if not cond:
        failures.append(what)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="downconv", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("config_pos", nargs="?", metavar="CONFIG", help="config file (YAML)")
    p.add_argument("--config", dest="config_opt", help="config file (YAML)")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--smax", type=int, choices=(1, 2, 3), help="max particle count in the effective model")
    p.add_argument("--gauge", help="charge | flux | mixed:<i0>")
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--no-cache", action="store_true", help="bypass the stage cache")
    p.add_argument("--verify", action="store_true", help="re-check invariants and fail on violation")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


# -- subcommands -----------------------------------------------------------

def cmd_foster(pipe: Pipeline, w: ArtifactWriter, args, failures):
    net = pipe.network()
    w.text("foster.csv", net.to_csv(w.header))
    if args.verify:
        _check(bool(np.all(net.inductances > 0) and np.all(net.capacitances > 0)), "foster: positive elements", failures)
        lc = np.abs(net.poles_omega * np.sqrt(net.inductances * net.capacitances) - 1)
        _check(float(lc.max()) < 1e-12, "foster: pole consistency", failures)


def cmd_fluxonium(pipe: Pipeline, w: ArtifactWriter, args, failures):
    phis = pipe.cfg.sweep.phi_grid()
    specs = map_points(pipe, "fluxonium", phis, threads=args.threads)
    w.text("fluxonium.csv", sweep_to_csv(specs, w.header))
    if args.verify:
        for s in specs:
            _check(bool(np.all(np.diff(s.energies) >= 0)), "fluxonium: ascending energies", failures)
            _check(bool(np.allclose(s.phi_matrix, s.phi_matrix.T)), "fluxonium: symmetric phi", failures)
            _check(bool(np.allclose(s.n_matrix, -s.n_matrix.T)), "fluxonium: antisymmetric n", failures)


def cmd_modes(pipe: Pipeline, w: ArtifactWriter, args, failures):
    qc = pipe.quantized()
    fit = pipe.cfg.numerics.coupling_fit_window
    prof = coupling_profile(qc, tuple(fit) if fit else None)
    w.text("modes.csv", _modes_csv(qc, w.header))
    w.text("couplings.csv", prof.to_csv(w.header))
    m = qc.matrices
    w.json("circuit.json", {
        "i0": qc.gauge.i0, "x": qc.gauge.x, "x_tilde": m.x_tilde, "L_sum_henry": m.L_sum,
        "EL_GHz": m.el_bare, "EL_tilde_GHz": m.el_tilde, "inductance_form": qc.gauge.inductance_form,
        "exponent_flux": prof.exponent_flux, "exponent_charge": prof.exponent_charge,
        "fit_window": list(prof.window),
    })
    curve = pipe.cfg.numerics.el_curve
    if curve is not None:
        net = pipe.network()
        rows = el_renormalization_curve(net, curve.x_values, [n for n in curve.n_values if n <= net.size],
                                        pipe.cfg.loop_inductance, pipe.cfg.junction_capacitance,
                                        inductance_form=pipe.cfg.gauge.inductance_form)
        w.text("el_curve.csv", el_curve_to_csv(rows, w.header))
    if args.verify:
        c_j = pipe.cfg.junction_capacitance
        _check(abs(m.cap_inv[0, 0] * c_j - 1) < 1e-10, "modes: (C^-1)_00 C_J = 1", failures)
        norm = np.sum(qc.bog_U**2 - qc.bog_V**2, axis=0)
        _check(float(np.max(np.abs(norm - 1))) < 1e-8, "modes: symplectic normalization", failures)
        _check(bool(np.all(np.diff(qc.mode_freqs) > 0) and qc.mode_freqs[0] > 0), "modes: ascending positive", failures)


def _modes_csv(qc, header) -> str:
    lines = [f"# {h}" for h in header]
    lines.append("i,freq_GHz,g_flux_GHz,g_charge_GHz")
    for i, (f, gf, gc) in enumerate(zip(qc.mode_freqs, qc.g_flux, qc.g_charge), 1):
        lines.append(f"{i},{fmt(f)},{fmt(gf)},{fmt(gc)}")
    return "\n".join(lines) + "\n"


def _check_model(model: EffectiveModel, failures):
    _check(abs(float(np.sum(model.polaritons.qubit_weight**2)) - 1) < 1e-10, "effective: qubit weight sum", failures)
    _check(bool(np.allclose(model.H_eff, model.H_eff.T, atol=0, rtol=0)), "effective: H_eff symmetric", failures)
    v = model.eigenvectors
    if v.size:
        _check(float(np.max(np.abs(v.T @ v - np.eye(v.shape[1])))) < 1e-10, "effective: orthonormal eigenvectors", failures)


def cmd_polaritons(pipe: Pipeline, w: ArtifactWriter, args, failures, s_max=1):
    phis = pipe.cfg.sweep.phi_grid()
    models = map_points(pipe, "effective", phis, s_max, threads=args.threads)
    lines = [f"# {h}" for h in w.header] + ["phi_ext,k,Omega_GHz,qubit_weight"]
    summary = [f"# {h}" for h in w.header] + ["phi_ext,f_eg_GHz,gamma_GHz,g_GHz,max_A"]
    for phi, m in zip(phis, models):
        pb = m.polaritons
        for k, om, w0 in zip(pb.labels, pb.omega, pb.qubit_weight):
            lines.append(f"{fmt(phi)},{k},{fmt(om)},{fmt(w0)}")
        summary.append(f"{fmt(phi)},{fmt(pb.f_eg)},{fmt(m.gamma)},{fmt(m.g)},{fmt(float(m.A.max()))}")
        if args.verify:
            _check_model(m, failures)
    w.text("polaritons.csv", "\n".join(lines) + "\n")
    w.text("polaritons_summary.csv", "\n".join(summary) + "\n")
    return models


def cmd_spectrum(pipe: Pipeline, w: ArtifactWriter, args, failures):
    phis = pipe.cfg.sweep.phi_grid()
    s_max = pipe.cfg.sweep.s_max
    models = map_points(pipe, "effective", phis, s_max, threads=args.threads)
    lines = [f"# {h}" for h in w.header]
    lines.append(f"# s_max={s_max}")
    lines.append("phi_ext,eigenfreq_GHz,polariton_weight")
    for phi, m in zip(phis, models):
        for val, wt in zip(m.eigenvalues, m.single_polariton_weight):
            lines.append(f"{fmt(phi)},{fmt(val)},{fmt(wt)}")
        if args.verify:
            _check_model(m, failures)
    w.text(f"spectrum_s{s_max}.csv", "\n".join(lines) + "\n")
    if models:
        w.json(f"basis_s{s_max}.json", {"phi_ext": float(phis[0]), "states": json.loads(models[0].basis_manifest())})
    return models


def cmd_s11(pipe: Pipeline, w: ArtifactWriter, args, failures):
    phis = pipe.cfg.sweep.phi_grid()
    s_max = pipe.cfg.sweep.s_max
    grid = pipe.probe_grid(phis)
    rows = map_points(pipe, "s11", phis, (s_max, grid), threads=args.threads)
    mag = np.array(rows)
    w.text(f"s11_s{s_max}.csv", map_to_csv(phis, grid, mag, w.header))
    w.text(f"s11_s{s_max}.json", map_to_json(phis, grid, mag, w.config_hash) + "\n")
    if args.verify:
        _check(bool(np.all(mag <= 1 + 1e-12)), "s11: passivity", failures)


def cmd_benchmark(pipe: Pipeline, w: ArtifactWriter, args, failures):
    phis = pipe.cfg.sweep.phi_grid()
    report = gauge_benchmark(pipe, phis, threads=args.threads)
    report["i0_effective"] = pipe.i0
    report["s_max"] = pipe.cfg.sweep.s_max
    w.json("benchmark.json", report)
    if args.verify:
        _check(report["max_charge_vs_flux_rel_dev"] < 0.05, "benchmark: charge vs flux within 5%", failures)


def cmd_sweep(pipe: Pipeline, w: ArtifactWriter, args, failures):
    cmd_fluxonium(pipe, w, args, failures)
    cmd_polaritons(pipe, w, args, failures)
    cmd_spectrum(pipe, w, args, failures)
    cmd_s11(pipe, w, args, failures)


COMMANDS = {
    "foster": cmd_foster,
    "fluxonium": cmd_fluxonium,
    "modes": cmd_modes,
    "polaritons": cmd_polaritons,
    "spectrum": cmd_spectrum,
    "s11": cmd_s11,
    "benchmark": cmd_benchmark,
    "sweep": cmd_sweep,
}


def _format_validation(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"])
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    path = args.config_opt or args.config_pos
    if path is None:
        print("error: a config file is required (positional or --config)", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        cfg = load_config(path).with_overrides(args.smax, args.gauge)
    except ValidationError as exc:
        print(f"config error: {_format_validation(exc)}", file=sys.stderr)
        return EXIT_SCHEMA
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    args.threads = args.threads or default_threads()
    cache = StageCache(enabled=not args.no_cache)
    pipe = Pipeline(cfg, cache)
    writer = ArtifactWriter(Path(args.out), cfg.digest())
    failures: List[str] = []
    start = time.perf_counter()
    try:
        COMMANDS[args.subcommand](pipe, writer, args, failures)
    except DownconvError as exc:
        print(f"numeric error in {args.subcommand} ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric error in {args.subcommand}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    writer.manifest(args.subcommand, time.perf_counter() - start, {
        "cache": cache.stats(),
        "verify": {"requested": bool(args.verify), "failures": failures},
    })
    if failures:
        for f in failures:
            print(f"verify failed: {f}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
