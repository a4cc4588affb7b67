"""Circuit matrices in the mixed gauge, quantization and Bogoliubov diagonalization.

Coordinates: index 0 is the junction flux. For Foster branch i <= i0 the
coordinate is minus its capacitor flux (the atom talks to it through the
inductive network, i.e. a flux coupling); for i > i0 it is the flux across the
branch inductor (charge coupling). The capacitance-free midpoint node of the
loop inductance is eliminated with current conservation.

The photonic block is quantized with dummy ladder operators defined at the
reference impedance R_Q = h/4e^2 and then brought to normal modes
a = U b + V b^dag.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eig, eigh

from . import constants as K
from .errors import (
    DomainError,
    IllConditionedError,
    InstabilityError,
    InvariantError,
    ParameterError,
)
from .foster import FosterNetwork

EXACT = "exact"
PRINTED = "printed"


@dataclass(frozen=True)
class GaugeConfig:
    """Gauge choice and atom-side circuit elements.

    Parameters
    ----------
    i0 : int
        Number of low Foster branches coupled through flux; 0 is the charge
        gauge, N the flux gauge.
    x : float
        Fraction of the loop inductance shared with the line, in (0, 1].
    loop_inductance : float
        Loop inductance L in henry.
    junction_capacitance : float
        C_J in farad.
    inductance_form : {"exact", "printed"}
        ``"printed"`` drops the -L_sum/(L_i L_j) term of the flux-coupled block
        of the inverse inductance matrix. Kept only to reproduce published
        figures; it breaks gauge invariance.
    """

    i0: int
    x: float
    loop_inductance: float
    junction_capacitance: float
    inductance_form: str = EXACT

    def __post_init__(self):
        if int(self.i0) != self.i0 or self.i0 < 0:
            raise ParameterError("i0 must be a non-negative integer")
        if not (0 < self.x <= 1):
            raise ParameterError("x must lie in (0, 1]")
        if not (self.loop_inductance > 0 and self.junction_capacitance > 0):
            raise ParameterError("loop inductance and junction capacitance must be positive")
        if self.inductance_form not in (EXACT, PRINTED):
            raise ParameterError(f"inductance_form must be {EXACT!r} or {PRINTED!r}")

    def with_i0(self, i0: int) -> "GaugeConfig":
        return GaugeConfig(i0, self.x, self.loop_inductance, self.junction_capacitance, self.inductance_form)


@dataclass(frozen=True)
class CircuitMatrices:
    cap: np.ndarray
    ind_inv: np.ndarray
    cap_inv: np.ndarray
    L_sum: float
    x_tilde: float
    el_tilde: float  # GHz
    el_bare: float  # GHz
    gauge: GaugeConfig
    network: FosterNetwork = field(repr=False)

    @property
    def size(self) -> int:
        return self.network.size


@dataclass(frozen=True)
class QuantizedCircuit:
    """Normal modes of the photonic sector and their couplings to the junction.

    Frequencies and couplings are in GHz. With the interaction written as
    -phi_J sum g_flux (b + b^dag) + i n_J sum g_charge (b - b^dag),
    signs follow the column convention of ``bog_U`` (largest entry positive).
    """

    mode_freqs: np.ndarray
    bog_U: np.ndarray
    bog_V: np.ndarray
    g_flux: np.ndarray
    g_charge: np.ndarray
    matrices: CircuitMatrices

    @property
    def gauge(self) -> GaugeConfig:
        return self.matrices.gauge

    @property
    def size(self) -> int:
        return self.mode_freqs.size


def _loop_sums(net: FosterNetwork, gauge: GaugeConfig):
    """Return (x_tilde, L_sum, 1/L_sum - 1/((1-x)L) ) in a form stable at x = 1."""
    L, x = gauge.loop_inductance, gauge.x
    shunt = 1.0 / (x * L) + np.sum(1.0 / net.inductances[: gauge.i0])
    eps = (1 - x) * L
    x_tilde = 1.0 / (1.0 + eps * shunt)
    return x_tilde, eps * x_tilde if eps > 0 else 0.0, shunt


def el_ratio(net: FosterNetwork, gauge: GaugeConfig) -> float:
    """E_L_tilde / E_L = L * (inverse inductance)_{0,0}."""
    x_tilde, _, shunt = _loop_sums(net, gauge)
    return gauge.loop_inductance * shunt * x_tilde


def build_matrices(net: FosterNetwork, gauge: GaugeConfig, cond_limit: float = 1e14) -> CircuitMatrices:
    """Assemble the capacitance and inverse inductance matrices.

    Raises
    ------
    ParameterError
        If ``i0`` exceeds the network size.
    IllConditionedError
        If the capacitance matrix is singular or its condition number exceeds
        ``cond_limit``.
    """
    n = net.size
    i0 = gauge.i0
    if i0 > n:
        raise ParameterError(f"i0={i0} exceeds the network size N={n}")
    li, ci = net.inductances, net.capacitances
    x_tilde, l_sum, shunt = _loop_sums(net, gauge)
    theta = np.arange(1, n + 1) > i0  # charge-coupled branches
    c_hi = np.sum(ci[theta])
    r = l_sum / li  # L_sum / L_i

    cap = np.zeros((n + 1, n + 1))
    cap[0, 0] = gauge.junction_capacitance + x_tilde**2 * c_hi
    cap[0, 1:] = -x_tilde * r * c_hi - x_tilde * ci * theta
    cap[1:, 0] = cap[0, 1:]
    ct = ci * theta
    cap[1:, 1:] = (
        np.diag(ci)
        + np.outer(ct, r)
        + np.outer(r, ct)
        + np.outer(r, r) * c_hi
    )

    ind = np.zeros((n + 1, n + 1))
    ind[0, 0] = shunt * x_tilde
    low = ~theta
    ind[0, 1:] = np.where(low, x_tilde / li, 0.0)
    ind[1:, 0] = ind[0, 1:]
    inv_l = 1.0 / li
    block = np.diag(inv_l)
    hi2 = np.outer(theta, theta)
    lo2 = np.outer(low, low)
    cross = l_sum * np.outer(inv_l, inv_l)
    block += np.where(hi2, cross, 0.0)
    if gauge.inductance_form == EXACT:
        block -= np.where(lo2, cross, 0.0)
    ind[1:, 1:] = block

    cap = 0.5 * (cap + cap.T)
    ind = 0.5 * (ind + ind.T)
    try:
        factor = cho_factor(cap)
    except LinAlgError as exc:
        raise IllConditionedError(f"capacitance matrix is not positive definite: {exc}") from exc
    cond = np.linalg.cond(cap)
    if not np.isfinite(cond) or cond > cond_limit:
        raise IllConditionedError(f"capacitance matrix condition number {cond:.3g} exceeds {cond_limit:.3g}")
    cap_inv = cho_solve(factor, np.eye(n + 1))
    cap_inv = 0.5 * (cap_inv + cap_inv.T)

    el_bare = K.inductance_to_el(gauge.loop_inductance)
    return CircuitMatrices(
        cap=cap,
        ind_inv=ind,
        cap_inv=cap_inv,
        L_sum=l_sum,
        x_tilde=x_tilde,
        el_tilde=K.inductance_to_el(1.0 / ind[0, 0]),
        el_bare=el_bare,
        gauge=gauge,
        network=net,
    )


def photonic_blocks(mats: CircuitMatrices):
    """Inverse-capacitance and inverse-inductance blocks of the photonic coordinates."""
    return mats.cap_inv[1:, 1:], mats.ind_inv[1:, 1:]


def dynamical_matrix(mats: CircuitMatrices, r_ref: float = K.R_Q) -> np.ndarray:
    """Equation-of-motion matrix of (a, a^dag) in units of rad/s.

    Built from X = R g + k / R and Y = R g - k / R, with g and k the photonic
    inverse-inductance and inverse-capacitance blocks. Eigenvalues come in
    +-omega pairs.
    """
    kin, pot = photonic_blocks(mats)
    x_blk = r_ref * pot + kin / r_ref
    y_blk = r_ref * pot - kin / r_ref
    return 0.5 * np.block([[x_blk, y_blk], [-y_blk, -x_blk]])


def _fix_columns(u, v):
    pivot = np.argmax(np.abs(u), axis=0)
    s = np.sign(u[pivot, np.arange(u.shape[1])])
    s[s == 0] = 1
    return u * s, v * s


def _couplings(mats: CircuitMatrices, u, v, r_ref):
    hbar, e = K.hbar, K.e
    gc = -2 * e * np.sqrt(hbar / (2 * r_ref)) * (mats.cap_inv[0, 1:] @ (u - v)) / K.h
    gf = -K.PHI0_RED * np.sqrt(hbar * r_ref / 2) * (mats.ind_inv[0, 1:] @ (u + v)) / K.h
    if mats.gauge.i0 == 0:
        gf = np.zeros_like(gf)
    if mats.gauge.i0 == mats.size:
        gc = np.zeros_like(gc)
    return gf / K.GHZ, gc / K.GHZ


def bogoliubov_diagonalize(mats: CircuitMatrices, r_ref: float = K.R_Q, check: bool = True) -> QuantizedCircuit:
    """Normal modes via the symmetric reduction sqrt(k) g sqrt(k).

    The squared frequencies are the eigenvalues of k^(1/2) g k^(1/2) = O w^2 O^T, and
    U + V = k^(1/2) O / sqrt(R w), U - V = sqrt(R w) k^(-1/2) O.
    This is equivalent to the eigenproblem of :func:`dynamical_matrix` but uses
    only symmetric eigensolvers.

    Raises
    ------
    InstabilityError
        If the photonic block has a non-positive squared frequency.
    """
    kin, pot = photonic_blocks(mats)
    kw, kv = eigh(kin)
    if np.any(kw <= 0):
        raise InstabilityError("photonic inverse-capacitance block is not positive definite")
    k_half = (kv * np.sqrt(kw)) @ kv.T
    k_mhalf = (kv / np.sqrt(kw)) @ kv.T
    dyn = k_half @ pot @ k_half
    w2, orth = eigh(0.5 * (dyn + dyn.T))
    scale = np.max(np.abs(w2))
    if np.any(w2 <= 1e-14 * scale):
        raise InstabilityError(f"non-positive squared mode frequency {w2.min():.3g} rad^2/s^2")
    omega = np.sqrt(w2)
    plus = (k_half @ orth) / np.sqrt(r_ref * omega)
    minus = np.sqrt(r_ref * omega) * (k_mhalf @ orth)
    u, v = _fix_columns(0.5 * (plus + minus), 0.5 * (plus - minus))
    if check:
        norm = np.sum(u**2 - v**2, axis=0)
        if np.max(np.abs(norm - 1)) > 1e-8:
            raise InvariantError(f"symplectic normalization violated by {np.max(np.abs(norm - 1)):.3g}")
    gf, gc = _couplings(mats, u, v, r_ref)
    return QuantizedCircuit(
        mode_freqs=omega / (2 * np.pi * K.GHZ),
        bog_U=u,
        bog_V=v,
        g_flux=gf,
        g_charge=gc,
        matrices=mats,
    )


def bogoliubov_general(mats: CircuitMatrices, r_ref: float = K.R_Q) -> QuantizedCircuit:
    """Normal modes from the non-symmetric dynamical matrix with a general eigensolver.

    Independent second route: the right eigenvector for +omega is (U, V), which is
    scaled to |U|^2 - |V|^2 = 1. Degenerate frequencies are not separated.
    """
    n = mats.size
    vals, vecs = eig(dynamical_matrix(mats, r_ref))
    if np.max(np.abs(vals.imag)) > 1e-6 * np.max(np.abs(vals.real)):
        raise InstabilityError("complex eigenvalue of the dynamical matrix")
    order = np.argsort(vals.real)[::-1][:n][::-1]
    omega = vals.real[order]
    if np.any(omega <= 0):
        raise InstabilityError("non-positive mode frequency")
    vec = vecs[:, order]
    # make each column real
    pivot = np.argmax(np.abs(vec), axis=0)
    vec = vec / (vec[pivot, np.arange(n)] / np.abs(vec[pivot, np.arange(n)]))
    vec = vec.real
    u, v = vec[:n], vec[n:]
    norm = np.sum(u**2 - v**2, axis=0)
    if np.any(norm <= 0):
        raise InstabilityError("negative symplectic norm for a positive frequency")
    u, v = _fix_columns(u / np.sqrt(norm), v / np.sqrt(norm))
    gf, gc = _couplings(mats, u, v, r_ref)
    return QuantizedCircuit(omega / (2 * np.pi * K.GHZ), u, v, gf, gc, mats)


def quantize(net: FosterNetwork, gauge: GaugeConfig) -> QuantizedCircuit:
    return bogoliubov_diagonalize(build_matrices(net, gauge))


def default_i0(f_eg_ghz: float, fsr_hz: float) -> int:
    """Half the number of modes below the qubit frequency, rounded."""
    return int(round(f_eg_ghz * K.GHZ / fsr_hz / 2))


def fit_exponent(index: np.ndarray, values: np.ndarray) -> float:
    """Slope of log|values| against log(index)."""
    mask = np.abs(values) > 0
    if mask.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(index[mask]), np.log(np.abs(values[mask])), 1)[0])


@dataclass(frozen=True)
class CouplingProfile:
    index: np.ndarray
    g_flux: np.ndarray
    g_charge: np.ndarray
    exponent_flux: float
    exponent_charge: float
    window: Tuple[int, int]

    def to_csv(self, header_lines: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        buf.write(f"# exponent_flux={self.exponent_flux:.12g} exponent_charge={self.exponent_charge:.12g} "
                  f"window={self.window[0]}-{self.window[1]}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "g_flux_GHz", "g_charge_GHz"])
        for i, gf, gc in zip(self.index, self.g_flux, self.g_charge):
            w.writerow([int(i), f"{gf:.12g}", f"{gc:.12g}"])
        return buf.getvalue()


def coupling_profile(qc: QuantizedCircuit, window: Optional[Tuple[int, int]] = None) -> CouplingProfile:
    """Per-mode couplings with power-law exponents fitted on ``window`` (inclusive, 1-based).

    The default window is the upper half of the spectrum, [N/2, N].
    """
    n = qc.size
    lo, hi = window if window is not None else (max(1, n // 2), n)
    if not (1 <= lo < hi <= n):
        raise ParameterError(f"fit window {lo}-{hi} invalid for N={n}")
    idx = np.arange(1, n + 1)
    sel = slice(lo - 1, hi)
    return CouplingProfile(
        index=idx,
        g_flux=qc.g_flux,
        g_charge=qc.g_charge,
        exponent_flux=fit_exponent(idx[sel], qc.g_flux[sel]),
        exponent_charge=fit_exponent(idx[sel], qc.g_charge[sel]),
        window=(lo, hi),
    )


def flux_coupling_analytic(qc: QuantizedCircuit, i: int, form: str = "circuit") -> float:
    """Closed-form flux coupling (GHz) of a low mode 1 <= i < i0.

    ``form="circuit"`` returns (hbar/2e) x sqrt(hbar w_i / 2 L_i) / h. The loop
    renormalization x -> x_tilde of the direct term is cancelled by the mutual
    dressing of the flux-coupled modes, so the bare ratio x appears. For the open
    line, with w_i at the bare pole, it equals w_i x sqrt(R_Q / (2 pi^2 Z (i - 1/2))) / 2 pi.
    ``form="printed"`` returns w_i x sqrt(R_Q / (4 pi Z (i - 1/2))) / 2 pi with Z
    inferred from L_i, which is larger by sqrt(pi/2).
    """
    i0 = qc.gauge.i0
    if not (1 <= i < i0):
        raise DomainError(f"analytic flux coupling needs 1 <= i < i0={i0}, got i={i}")
    omega = 2 * np.pi * K.GHZ * qc.mode_freqs[i - 1]
    ind = qc.matrices.network.inductances[i - 1]
    if form == "circuit":
        g = K.PHI0_RED * qc.gauge.x * np.sqrt(K.hbar * omega / (2 * ind)) / K.h
    elif form == "printed":
        # for the open line L_i = Z / 4 Delta and w_i = 2 pi Delta (i - 1/2)
        z_eff = ind * 4 * qc.matrices.network.poles_omega[i - 1] / (2 * np.pi * (i - 0.5))
        g = omega * qc.gauge.x * np.sqrt(K.R_Q / (4 * np.pi * z_eff * (i - 0.5))) / (2 * np.pi)
    else:
        raise ParameterError(f"unknown form {form!r}")
    return float(g / K.GHZ)


def el_renormalization_curve(
    net: FosterNetwork,
    x_values: Iterable[float],
    n_values: Iterable[int],
    loop_inductance: float,
    junction_capacitance: float,
    i0: Optional[int] = None,
    inductance_form: str = EXACT,
) -> List[Dict[str, float]]:
    """E_L_tilde / E_L for each (x, N); the flux gauge (i0 = N) unless ``i0`` is given."""
    rows = []
    for x in x_values:
        for n in n_values:
            if n > net.size:
                raise ParameterError(f"N={n} exceeds the supplied network size {net.size}")
            sub = net.truncated(int(n))
            g = GaugeConfig(int(n) if i0 is None else min(i0, n), float(x), loop_inductance,
                            junction_capacitance, inductance_form)
            rows.append({"x": float(x), "N": int(n), "ratio": el_ratio(sub, g)})
    return rows


def el_curve_to_csv(rows, header_lines: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "N", "EL_tilde_over_EL"])
    for r in rows:
        w.writerow([f"{r['x']:.12g}", r["N"], f"{r['ratio']:.12g}"])
    return buf.getvalue()
