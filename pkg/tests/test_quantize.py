import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import eigh

from downconv import constants as K
from downconv.errors import DomainError, ParameterError
from downconv.foster import LineSpec, synthesize
from downconv.quantize import (
    GaugeConfig,
    bogoliubov_diagonalize,
    bogoliubov_general,
    build_matrices,
    coupling_profile,
    default_i0,
    el_ratio,
    el_renormalization_curve,
    el_curve_to_csv,
    fit_exponent,
    flux_coupling_analytic,
    quantize,
)

from oracles import node_circuit_frequencies, single_lc_bogoliubov

EC, EL = 5.69, 1.42
LOOP_L = K.el_to_inductance(EL)
CJ = K.ec_to_cj(EC)
TABLE_LINE = LineSpec("open", 9695.0, 250, length=6e-3, light_speed=2.18e6)


@pytest.fixture(scope="module")
def table_net():
    return synthesize(TABLE_LINE)


def gauge(i0, x=0.5, form="exact"):
    return GaugeConfig(i0, x, LOOP_L, CJ, form)


def full_frequencies(mats, junction_l=None):
    """Normal modes of the whole circuit from the gauge-coordinate matrices."""
    ind = mats.ind_inv.copy()
    if junction_l is not None:
        ind[0, 0] += 1 / junction_l
    return np.sqrt(eigh(ind, mats.cap, eigvals_only=True))


def test_energy_conversions_roundtrip():
    assert K.cj_to_ec(CJ) == pytest.approx(EC, rel=1e-14)
    assert K.inductance_to_el(LOOP_L) == pytest.approx(EL, rel=1e-14)
    assert K.R_Q == pytest.approx(6453.2, rel=1e-4)


@pytest.mark.parametrize("x", [0.2, 0.5, 1.0])
@pytest.mark.parametrize("i0", [0, 1, 4, 12])
def test_gauge_coordinates_reproduce_node_circuit(x, i0):
    """Whole-circuit normal modes do not depend on the gauge and match a node-flux Kirchhoff model."""
    net = synthesize(TABLE_LINE.with_modes(12))
    lj = LOOP_L / 3  # junction linearized as an inductor
    ref = node_circuit_frequencies(CJ, LOOP_L, x, net.inductances, net.capacitances, junction_l=lj)
    mats = build_matrices(net, gauge(i0, x))
    np.testing.assert_allclose(full_frequencies(mats, lj), ref, rtol=1e-10)
    ref_open = node_circuit_frequencies(CJ, LOOP_L, x, net.inductances, net.capacitances)
    np.testing.assert_allclose(full_frequencies(mats), ref_open, rtol=1e-9)


def test_printed_inductance_form_breaks_gauge_invariance():
    net = synthesize(TABLE_LINE.with_modes(12))
    ref = node_circuit_frequencies(CJ, LOOP_L, 0.5, net.inductances, net.capacitances)
    printed = full_frequencies(build_matrices(net, gauge(6, form="printed")))
    assert np.max(np.abs(printed / ref - 1)) > 1e-3


def test_renormalized_inductive_energy_is_series_parallel(table_net):
    """The junction sees (1-x)L in series with xL parallel to the flux-coupled branch inductors."""
    for i0, x in [(15, 0.5), (250, 0.5), (3, 0.9), (0, 0.3)]:
        par = 1 / (1 / (x * LOOP_L) + np.sum(1 / table_net.inductances[:i0]))
        seen = (1 - x) * LOOP_L + par
        mats = build_matrices(table_net, gauge(i0, x))
        assert mats.el_tilde == pytest.approx(K.inductance_to_el(seen), rel=1e-12)
        assert el_ratio(table_net, gauge(i0, x)) == pytest.approx(LOOP_L / seen, rel=1e-12)


def test_table_inductive_energy_at_i0_15(table_net):
    mats = build_matrices(table_net, gauge(15))
    assert mats.el_tilde == pytest.approx(1.4645, abs=2e-4)
    assert mats.el_bare == pytest.approx(EL, rel=1e-12)


def test_charge_gauge_keeps_bare_inductive_energy(table_net):
    mats = build_matrices(table_net, gauge(0))
    assert mats.el_tilde == pytest.approx(EL, rel=1e-12)
    assert mats.x_tilde == pytest.approx(0.5, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 50), frac=st.floats(0, 1), x=st.floats(0.05, 1.0))
def test_audit_identities(n, frac, x):
    net = synthesize(TABLE_LINE.with_modes(n))
    i0 = int(round(frac * n))
    qc = quantize(net, gauge(i0, x))
    assert qc.matrices.cap_inv[0, 0] * CJ == pytest.approx(1, abs=1e-10)
    np.testing.assert_allclose(np.sum(qc.bog_U**2 - qc.bog_V**2, axis=0), 1, atol=1e-8)
    assert np.all(np.diff(qc.mode_freqs) > 0)


@settings(max_examples=15, deadline=None)
@given(n=st.integers(2, 30), frac=st.floats(0, 1), x=st.floats(0.05, 1.0))
def test_symmetric_and_general_routes_agree(n, frac, x):
    net = synthesize(TABLE_LINE.with_modes(n))
    mats = build_matrices(net, gauge(int(round(frac * n)), x))
    a = bogoliubov_diagonalize(mats)
    b = bogoliubov_general(mats)
    np.testing.assert_allclose(b.mode_freqs, a.mode_freqs, rtol=1e-10)
    np.testing.assert_allclose(b.bog_U, a.bog_U, atol=1e-8)
    np.testing.assert_allclose(b.bog_V, a.bog_V, atol=1e-8)
    np.testing.assert_allclose(b.g_flux, a.g_flux, atol=1e-10)
    np.testing.assert_allclose(b.g_charge, a.g_charge, atol=1e-10)


def test_full_bogoliubov_relations(table_net):
    """U^T U - V^T V = 1 and U^T V - V^T U = 0 across all mode pairs."""
    qc = quantize(table_net.truncated(40), gauge(10))
    u, v = qc.bog_U, qc.bog_V
    np.testing.assert_allclose(u.T @ u - v.T @ v, np.eye(40), atol=1e-8)
    np.testing.assert_allclose(u.T @ v - v.T @ u, 0, atol=1e-8)


@pytest.mark.parametrize("i0", [0, 1])
def test_single_mode_matches_closed_form(i0):
    net = synthesize(TABLE_LINE.with_modes(1))
    qc = quantize(net, gauge(i0, 0.4))
    kin = qc.matrices.cap_inv[1, 1]
    pot = qc.matrices.ind_inv[1, 1]
    u_ref, v_ref = single_lc_bogoliubov(1 / pot, 1 / kin, K.R_Q)
    assert qc.bog_U[0, 0] == pytest.approx(u_ref, rel=1e-12)
    assert abs(qc.bog_V[0, 0]) == pytest.approx(abs(v_ref), rel=1e-10)
    assert qc.mode_freqs[0] == pytest.approx(np.sqrt(kin * pot) / (2 * np.pi * 1e9), rel=1e-12)


def test_matched_reference_impedance_gives_identity():
    net = synthesize(TABLE_LINE.with_modes(1))
    mats = build_matrices(net, gauge(1, 0.4))
    z_mode = np.sqrt(mats.cap_inv[1, 1] / mats.ind_inv[1, 1])
    qc = bogoliubov_diagonalize(mats, r_ref=z_mode)
    assert qc.bog_U[0, 0] == pytest.approx(1, abs=1e-12)
    assert qc.bog_V[0, 0] == pytest.approx(0, abs=1e-12)


def test_x_one_is_continuous(table_net):
    net = table_net.truncated(30)
    a = quantize(net, gauge(8, 1.0))
    b = quantize(net, gauge(8, 1 - 1e-10))
    assert a.matrices.L_sum == 0
    np.testing.assert_allclose(a.mode_freqs, b.mode_freqs, rtol=1e-8)
    np.testing.assert_allclose(a.g_flux, b.g_flux, rtol=1e-6, atol=1e-12)


def test_gauge_extremes_zero_couplings(table_net):
    net = table_net.truncated(20)
    assert np.all(quantize(net, gauge(0)).g_flux == 0)
    assert np.all(quantize(net, gauge(20)).g_charge == 0)
    mixed = quantize(net, gauge(5))
    assert np.all(mixed.g_flux[:5] != 0)


def test_low_mode_flux_coupling_closed_form(table_net):
    qc = quantize(table_net, gauge(15))
    for i in range(1, 8):
        g = flux_coupling_analytic(qc, i)
        assert abs(qc.g_flux[i - 1]) == pytest.approx(abs(g), rel=1e-2)
    # open-line expression of the same quantity
    i = 3
    w = 2 * np.pi * qc.mode_freqs[i - 1] * 1e9
    delta = TABLE_LINE.delta
    open_form = K.PHI0_RED * 0.5 * np.sqrt(K.hbar * w * 4 * delta / (2 * 9695.0)) / K.h / 1e9
    assert flux_coupling_analytic(qc, i) == pytest.approx(open_form, rel=1e-12)
    ratio = flux_coupling_analytic(qc, i, form="printed") / flux_coupling_analytic(qc, i)
    # exact at the bare pole; the dressed frequency enters the two forms with different powers
    assert ratio == pytest.approx(np.sqrt(np.pi / 2), rel=2e-3)


def test_lowest_mode_coupling_table(table_net):
    qc = quantize(table_net, gauge(15))
    assert qc.g_flux[0] * 1e3 == pytest.approx(-11.78, abs=0.01)
    assert qc.mode_freqs[0] == pytest.approx(0.0907, abs=1e-3)


def test_analytic_coupling_domain(table_net):
    qc = quantize(table_net.truncated(20), gauge(5))
    with pytest.raises(DomainError):
        flux_coupling_analytic(qc, 5)
    with pytest.raises(DomainError):
        flux_coupling_analytic(qc, 0)
    with pytest.raises(ParameterError):
        flux_coupling_analytic(qc, 2, form="other")


def test_charge_gauge_couplings_decay(table_net):
    prof = coupling_profile(quantize(table_net, gauge(0)))
    assert prof.window == (125, 250)
    assert prof.exponent_charge <= -0.5
    assert np.isnan(prof.exponent_flux)


def test_fit_exponent_recovers_power_law():
    idx = np.arange(1, 101)
    assert fit_exponent(idx, 3.0 * idx**0.5) == pytest.approx(0.5, abs=1e-12)
    assert fit_exponent(idx, -2.0 * idx**-1.5) == pytest.approx(-1.5, abs=1e-12)


def test_el_curve(table_net):
    rows = el_renormalization_curve(table_net, [0.5, 0.9], [10, 50, 250], LOOP_L, CJ)
    for x in (0.5, 0.9):
        ratios = [r["ratio"] for r in rows if r["x"] == x]
        assert np.all(np.diff(ratios) > 0)
        assert ratios[-1] < 1 / (1 - x)
    text = el_curve_to_csv(rows, ["config_hash=abc"])
    assert text.splitlines()[1] == "x,N,EL_tilde_over_EL"
    with pytest.raises(ParameterError):
        el_renormalization_curve(table_net, [0.5], [300], LOOP_L, CJ)


def test_default_i0():
    assert default_i0(8.7, 2.18e6 / (2 * 6e-3)) == 24
    assert default_i0(0.0, 1e8) == 0


@pytest.mark.parametrize("kw", [dict(i0=-1), dict(x=0.0), dict(x=1.5), dict(inductance_form="other")])
def test_gauge_validation(kw):
    base = dict(i0=1, x=0.5, loop_inductance=LOOP_L, junction_capacitance=CJ)
    base.update(kw)
    with pytest.raises(ParameterError):
        GaugeConfig(**base)


def test_i0_larger_than_network(table_net):
    with pytest.raises(ParameterError):
        build_matrices(table_net.truncated(5), gauge(6))
