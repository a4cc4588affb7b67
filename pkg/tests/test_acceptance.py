"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line that pytest prints in an "acceptance
criteria" section at the end of the run.
"""

import time
import warnings

import numpy as np
import pytest
from scipy.optimize import brentq

from downconv import constants as K
from downconv.cache import StageCache
from downconv.config import load_config
from downconv.effective import SQRT_I, BasisState, build_effective_model, build_polaritons
from downconv.errors import ValidityWarning
from downconv.exactdiag import ExactDiagConfig, exact_spectrum, match_nearest
from downconv.fluxonium import FluxoniumParams, solve_fluxonium
from downconv.foster import network_admittance, synthesize
from downconv.pipeline import Pipeline
from downconv.quantize import (
    GaugeConfig,
    build_matrices,
    bogoliubov_diagonalize,
    coupling_profile,
    el_renormalization_curve,
    quantize,
)
from downconv.spectra import QualityModel, count_new_filaments, flux_probe_map, s11_bare

from conftest import EC, EJ, EL, short_line, record_criterion, table_line
from oracles import fluxonium_phase_grid, open_line_admittance

LOOP_L = K.el_to_inductance(EL)
CJ = K.ec_to_cj(EC)


def test_criterion_1_foster_fidelity():
    t0 = time.perf_counter()
    spec = table_line(400)
    net = synthesize(spec)
    delta = spec.delta
    rng = np.random.default_rng(1)
    f_max = net.freqs_ghz[199] * 1e9
    poles = net.freqs_ghz * 1e9
    samples = []
    while len(samples) < 100:
        f = rng.uniform(0, f_max)
        if np.min(np.abs(poles - f)) > 0.05 * delta:
            samples.append(f)
    w = 2 * np.pi * np.array(samples)
    exact = open_line_admittance(w, spec.length, spec.light_speed, spec.wave_impedance)
    rel = np.abs(network_admittance(net, w) - exact) / np.abs(exact)
    elapsed = time.perf_counter() - t0
    ok = bool(np.all(rel < 0.01) and elapsed < 1.0)
    record_criterion(1, "Foster fidelity (N=400, 1%)", ok,
                     f"max rel {rel.max():.3g}, median {np.median(rel):.3g}, "
                     f"{np.mean(rel < 0.01):.0%} of points below 1%, {elapsed:.2f} s")
    assert ok


def test_criterion_2_gauge_audit_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst_cap, worst_norm = 0.0, 0.0
    for _ in range(20):
        n = int(rng.integers(1, 51))
        i0 = int(rng.integers(0, n + 1))
        x = float(rng.uniform(0.01, 1.0))
        qc = quantize(synthesize(table_line(n)), GaugeConfig(i0, x, LOOP_L, CJ))
        worst_cap = max(worst_cap, abs(qc.matrices.cap_inv[0, 0] * CJ - 1))
        worst_norm = max(worst_norm, float(np.max(np.abs(np.sum(qc.bog_U**2 - qc.bog_V**2, axis=0) - 1))))
    elapsed = time.perf_counter() - t0
    ok = worst_cap < 1e-10 and worst_norm < 1e-8 and elapsed < 30
    record_criterion(2, "gauge-audit identities", ok,
                     f"max |C^-1_00 C_J - 1| {worst_cap:.2g}, max |sum(U^2-V^2) - 1| {worst_norm:.2g}, {elapsed:.2f} s")
    assert ok


def test_criterion_3_inductive_renormalization():
    t0 = time.perf_counter()
    net = synthesize(table_line(2000))
    n_half = [10, 20, 50, 100, 200, 300, 400, 500]
    half = [r["ratio"] for r in el_renormalization_curve(net, [0.5], n_half, LOOP_L, CJ)]
    r09 = el_renormalization_curve(net, [0.9], [2000], LOOP_L, CJ)[0]["ratio"]
    elapsed = time.perf_counter() - t0
    monotone = bool(np.all(np.diff(half) > 0))
    ok = monotone and abs(half[-1] / 2.0 - 1) < 0.05 and abs(r09 / 10.0 - 1) < 0.10 and elapsed < 60
    record_criterion(3, "E_L renormalization (flux gauge)", ok,
                     f"x=0.5: monotone={monotone}, ratio(N=500)={half[-1]:.4f} (target 2.0 +-5%); "
                     f"x=0.9: ratio(N=2000)={r09:.4f} (target 10 +-10%); {elapsed:.2f} s")
    assert ok


def test_criterion_4_coupling_scaling():
    t0 = time.perf_counter()
    net = synthesize(table_line())
    flux = coupling_profile(quantize(net, GaugeConfig(net.size, 0.5, LOOP_L, CJ)))
    charge = coupling_profile(quantize(net, GaugeConfig(0, 0.5, LOOP_L, CJ)))
    elapsed = time.perf_counter() - t0
    ok_flux = abs(flux.exponent_flux - 0.5) <= 0.1
    ok_charge = charge.exponent_charge <= -0.5
    ok = ok_flux and ok_charge and elapsed < 60
    record_criterion(4, "coupling scaling", ok,
                     f"flux-gauge exponent {flux.exponent_flux:+.3f} (target +0.5 +-0.1, {'ok' if ok_flux else 'fail'}); "
                     f"charge-gauge exponent {charge.exponent_charge:+.3f} (target <= -0.5, "
                     f"{'ok' if ok_charge else 'fail'}); fit window {flux.window}; {elapsed:.2f} s")
    assert ok


SEVEN_STATES = [BasisState(3), BasisState(4), BasisState(5), BasisState(3, (1,)), BasisState(4, (1,)),
                BasisState(2, (1, 1)), BasisState(3, (1, 1))]


def test_criterion_5_gauge_invariance_benchmark(config_dir):
    t0 = time.perf_counter()
    cfg = load_config(config_dir / "appendix_d")
    pipe = Pipeline(cfg, StageCache(enabled=False))
    net = pipe.network()
    qc = pipe.quantized()

    def bare_fluxonium(phi):
        return FluxoniumParams(EJ, EC, EL, phi)

    # anticrossings where a single polariton meets a polariton plus one low photon
    def detuning(phi):
        pb = build_polaritons(qc, solve_fluxonium(bare_fluxonium(phi).with_el(qc.matrices.el_tilde)))
        return pb.omega[pb.index_of(4)] - pb.omega[pb.index_of(3)] - qc.mode_freqs[0]

    anticrossings = [brentq(detuning, 1.3, 1.9), brentq(detuning, 1.9, 2.5)]
    phis = sorted(set(np.round(cfg.sweep.phi_grid(), 12)) | set(anticrossings))
    gauge_dev = 0.0
    eff_dev = []
    for phi in phis:
        ex_cfg = ExactDiagConfig(net, bare_fluxonium(phi), cfg.x, "charge")
        charge = exact_spectrum(ex_cfg, 30).excitation_freqs[:30]
        flux = exact_spectrum(ex_cfg.with_(gauge="flux"), 30).excitation_freqs[:30]
        gauge_dev = max(gauge_dev, float(np.max(np.abs(charge - flux) / charge)))
        if phi in anticrossings:
            flx = solve_fluxonium(bare_fluxonium(phi).with_el(qc.matrices.el_tilde))
            model = build_effective_model(qc, flx, s_max=3, basis=SEVEN_STATES)
            _, rel = match_nearest(exact_spectrum(ex_cfg, 80).excitation_freqs, model.eigenvalues)
            eff_dev.append(float(rel.max()))
    elapsed = time.perf_counter() - t0
    ok = gauge_dev < 0.05 and max(eff_dev) < 0.05 and elapsed < 600
    record_criterion(5, "gauge-invariance benchmark", ok,
                     f"charge vs flux (30 levels, {len(phis)} flux points) max rel dev {gauge_dev:.3%}; "
                     f"effective vs charge at phi={anticrossings[0]:.4f}, {anticrossings[1]:.4f}: "
                     f"{eff_dev[0]:.3%}, {eff_dev[1]:.3%}; {elapsed:.1f} s")
    assert ok


def test_criterion_6_symmetry_gate():
    qc = bogoliubov_diagonalize(build_matrices(synthesize(table_line()), GaugeConfig(15, 0.5, LOOP_L, CJ)))
    flx = solve_fluxonium(FluxoniumParams(EJ, EC, qc.matrices.el_tilde, np.pi))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        one = build_effective_model(qc, flx, s_max=1)
        two = build_effective_model(qc, flx, s_max=2)
    eps = np.finfo(float).eps
    g_rel = abs(two.g) / abs(qc.g_flux[0])
    singles = np.sort([v for v, b in zip(np.diag(two.H_eff), two.basis) if b.particle_count == 1])
    nearest = two.eigenvalues[np.abs(two.eigenvalues[None, :] - singles[:, None]).argmin(axis=1)]
    spec_dev = max(float(np.max(np.abs(np.sort(one.eigenvalues) - singles) / singles)),
                   float(np.max(np.abs(nearest - singles) / singles)))
    offsets = np.linspace(0.05, 1.5, 12)
    odd = max(abs(solve_fluxonium(FluxoniumParams(EJ, EC, EL, np.pi + d)).dipole_asymmetry
                  + solve_fluxonium(FluxoniumParams(EJ, EC, EL, np.pi - d)).dipole_asymmetry) for d in offsets)
    ok = g_rel < 100 * eps and spec_dev < 8 * eps and odd < 1e-9
    record_criterion(6, "half-flux symmetry gate", ok,
                     f"|g|/|g_flux_1| {g_rel:.2g}, s=1 vs s=2 max rel dev {spec_dev:.2g}, "
                     f"dipole asymmetry oddness {odd:.2g}")
    assert ok


def _operating_point(qc, label):
    target = qc.mode_freqs[label - 1]
    params = FluxoniumParams(EJ, EC, qc.matrices.el_tilde)
    return brentq(lambda p: solve_fluxonium(params.at_flux(p)).f_eg - target, 0.5, np.pi)


def test_criterion_7_fine_structure_chain():
    t0 = time.perf_counter()
    qc = bogoliubov_diagonalize(build_matrices(synthesize(table_line()), GaugeConfig(15, 0.5, LOOP_L, CJ)))
    phi = _operating_point(qc, 49)
    flx = solve_fluxonium(FluxoniumParams(EJ, EC, qc.matrices.el_tilde, phi))
    model = build_effective_model(qc, flx, s_max=2)
    chain = [BasisState(49 - j, (j,)) for j in range(1, 16)]
    present = set(model.basis)
    missing = [s.label() for s in chain if s not in present]
    pb = model.polaritons
    a_ratio = abs(model.A[pb.index_of(49), pb.index_of(34)]) / np.max(np.abs(model.A))
    max_off = model.max_offdiag() * 1e3
    idx = {s: j for j, s in enumerate(model.basis)}
    chain_max = max(abs(model.H_eff[idx[BasisState(49)], idx[s]]) for s in chain if s in idx) * 1e3
    sqrt_model = build_effective_model(qc, flx, s_max=2, low_mode_factor=SQRT_I)
    elapsed = time.perf_counter() - t0
    ok = not missing and a_ratio < 1e-3 and 0.3 <= max_off <= 30 and elapsed < 900
    record_criterion(7, "fine-structure chain", ok,
                     f"phi_ext={phi:.4f}, basis {len(model.basis)} states, chain missing {missing or 'none'}; "
                     f"|A_49,34|/max|A| = {a_ratio:.3g} (need < 1e-3); max off-diagonal {max_off:.2f} MHz "
                     f"(need 0.3-30); diagnostics: p49 chain max {chain_max:.2f} MHz, "
                     f"sqrt(i) factors max {sqrt_model.max_offdiag() * 1e3:.2f} MHz; {elapsed:.1f} s")
    assert ok


def test_criterion_8_reflection(config_dir):
    crit = abs(s11_bare([8.7], QualityModel(2000.0, 2000.0), np.array([8.7])).s11[0])
    grid = np.linspace(8.6, 8.8, 4001)
    lossless = float(np.max(np.abs(np.abs(s11_bare([8.7], QualityModel(np.inf, 2000.0), grid).s11) - 1)))
    two_thirds = abs(s11_bare([8.7], QualityModel(10000.0, 2000.0), np.array([8.7])).s11[0])

    cfg = load_config(config_dir / "table1")
    pipe = Pipeline(cfg, StageCache(enabled=False))
    phis = cfg.sweep.phi_grid()
    freq = pipe.probe_grid(phis)
    qm = pipe.quality()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        m1 = flux_probe_map(lambda p: pipe.effective_at(p, 1), phis, freq, qm)
        m2 = flux_probe_map(lambda p: pipe.effective_at(p, 2), phis, freq, qm)
    center = float(np.mean(freq))
    qi, qe = qm.inverse(1)
    linewidth = center * float(qi[0] + qe[0])
    filaments = count_new_filaments(m2, m1, freq, linewidth)
    ok = crit < 1e-12 and lossless < 1e-12 and abs(two_thirds - 2 / 3) < 1e-12 and filaments >= 5
    record_criterion(8, "reflection sanity", ok,
                     f"critical |S11| {crit:.2g}, lossless max ||S11|-1| {lossless:.2g}, "
                     f"on-resonance |S11| {two_thirds:.12f}; s=2 map has {filaments} filaments absent at s=1 "
                     f"(linewidth {linewidth * 1e3:.2f} MHz, {len(phis)} x {freq.size} map)")
    assert ok


def test_criterion_9_oracle_independence():
    worst = 0.0
    for phi in np.linspace(0, 2 * np.pi, 11):
        mine = solve_fluxonium(FluxoniumParams(EJ, EC, EL, phi)).energies[:5]
        ref = fluxonium_phase_grid(EC, EJ, EL, phi, levels=5)
        worst = max(worst, float(np.max(np.abs(mine - ref))))
    ok = worst < 1e-6
    record_criterion(9, "fluxonium oracle independence", ok, f"max |dE| over 11 flux points {worst:.2g} GHz")
    assert ok
