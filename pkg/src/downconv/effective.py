"""Polaritons and the particle-number-non-conserving effective Hamiltonian.

High modes (index > i0) are hybridized with the qubit transition into
polaritons. The low modes (index <= i0) then couple a polariton to another
polariton plus one low photon through a three-wave term whose strength is set
by the flux coupling of the low mode and the static dipole difference of the
qubit levels.
"""

from __future__ import annotations

import json
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import curve_fit

from .errors import DomainError, InvariantError, ParameterError, ValidityWarning
from .fluxonium import FluxoniumSpectrum
from .quantize import QuantizedCircuit

EXACT_RATIO = "exact"
SQRT_I = "sqrt_i"
GAMMA_WARN_RATIO = 0.2


@dataclass(frozen=True)
class PolaritonBasis:
    """Single-excitation eigenstates above the split index.

    Attributes
    ----------
    labels : ndarray of int
        Polariton labels k = i0+1 ... N+1, ascending with frequency.
    omega : ndarray
        Polariton frequencies in GHz.
    W : ndarray
        Rows are polaritons; column 0 is the qubit amplitude, column j >= 1 the
        amplitude on bare mode i0 + j.
    """

    i0: int
    labels: np.ndarray
    omega: np.ndarray
    W: np.ndarray
    f_eg: float

    @property
    def qubit_weight(self) -> np.ndarray:
        return self.W[:, 0]

    @property
    def size(self) -> int:
        return self.labels.size

    def index_of(self, k: int) -> int:
        pos = int(k) - self.i0 - 1
        if not (0 <= pos < self.size):
            raise DomainError(f"polariton label {k} outside {self.i0 + 1}..{self.i0 + self.size}")
        return pos


def build_polaritons(qc: QuantizedCircuit, flx: FluxoniumSpectrum, i0: Optional[int] = None) -> PolaritonBasis:
    """Diagonalize the qubit plus modes k > i0 in the single-excitation sector.

    The qubit couples to |g, 1_k> with -(g_flux_k <e|phi|g> + g_charge_k r_eg),
    where <e|n|g> = i r_eg.
    """
    i0 = qc.gauge.i0 if i0 is None else int(i0)
    n = qc.size
    if not (0 <= i0 < n):
        raise DomainError(f"i0={i0} must satisfy 0 <= i0 < N={n}")
    f_eg = flx.f_eg
    phi_eg = flx.phi_matrix[1, 0]
    r_eg = float(np.imag(flx.n_matrix[1, 0]))
    hi = slice(i0, n)
    coupling = -(qc.g_flux[hi] * phi_eg + qc.g_charge[hi] * r_eg)
    m = n - i0 + 1
    h = np.zeros((m, m))
    h[0, 0] = f_eg
    h[np.arange(1, m), np.arange(1, m)] = qc.mode_freqs[hi]
    h[0, 1:] = coupling
    h[1:, 0] = coupling
    vals, vecs = eigh(h)
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(m)])
    signs[signs == 0] = 1
    vecs = vecs * signs
    return PolaritonBasis(
        i0=i0,
        labels=np.arange(i0 + 1, i0 + 1 + m),
        omega=vals,
        W=vecs.T.copy(),
        f_eg=f_eg,
    )


def conversion_amplitudes(pb: PolaritonBasis) -> np.ndarray:
    """A_kk' = W_k0^* W_k'0."""
    w0 = pb.qubit_weight
    return np.outer(np.conj(w0), w0).real


def three_wave_strength(qc: QuantizedCircuit, flx: FluxoniumSpectrum) -> float:
    """g = g_flux_1 (<e|phi|e> - <g|phi|g>), in GHz."""
    if qc.gauge.i0 < 1:
        return 0.0
    return float(qc.g_flux[0] * flx.dipole_asymmetry)


def low_mode_factors(qc: QuantizedCircuit, mode: str = EXACT_RATIO) -> np.ndarray:
    """Relative three-wave factors c_i for i = 1..i0 (c_1 = 1)."""
    i0 = qc.gauge.i0
    if i0 < 1:
        return np.zeros(0)
    if mode == SQRT_I:
        return np.sqrt(np.arange(1, i0 + 1))
    if mode != EXACT_RATIO:
        raise ParameterError(f"unknown low-mode factor mode {mode!r}")
    g1 = qc.g_flux[0]
    if g1 == 0:
        return np.zeros(i0)
    return qc.g_flux[:i0] / g1


def _lorentz(w, center, fwhm, area):
    return area * (fwhm / 2) / np.pi / ((w - center) ** 2 + (fwhm / 2) ** 2)


def estimate_gamma(pb: PolaritonBasis) -> float:
    """Hybridization bandwidth (GHz) from a Lorentzian fit of the qubit density.

    The qubit weight |W_k0|^2 divided by the local polariton spacing is a
    spectral density of unit area; its full width at half maximum is returned.
    Falls back to twice the standard deviation of the weight distribution when
    the fit fails.
    """
    om = pb.omega
    w2 = pb.qubit_weight**2
    spacing = np.gradient(om)
    dens = w2 / spacing
    mean = np.sum(w2 * om)
    sd = np.sqrt(max(np.sum(w2 * (om - mean) ** 2), 1e-12))
    try:
        popt, _ = curve_fit(
            _lorentz, om, dens, p0=(om[np.argmax(dens)], sd, 1.0), maxfev=20000
        )
        fwhm = abs(popt[1])
        if not np.isfinite(fwhm) or fwhm <= 0:
            raise RuntimeError("bad fit")
        return float(fwhm)
    except (RuntimeError, ValueError):
        return float(2 * sd)


@dataclass(frozen=True, order=True)
class BasisState:
    """One polariton plus a multiset of low-mode photons.

    ``photons`` is a sorted tuple of 1-based low-mode indices, e.g. (1, 1) for
    two photons in mode 1.
    """

    polariton: int
    photons: Tuple[int, ...] = ()

    @property
    def particle_count(self) -> int:
        return 1 + len(self.photons)

    def occupation(self, i: int) -> int:
        return self.photons.count(i)

    def label(self) -> str:
        parts = [f"p{self.polariton}"]
        for i in sorted(set(self.photons)):
            n = self.occupation(i)
            parts.append(f"b{i}" + (f"^{n}" if n > 1 else ""))
        return "".join(parts)


def state_energy(state: BasisState, pb: PolaritonBasis, low_freqs: np.ndarray) -> float:
    return float(pb.omega[pb.index_of(state.polariton)] + sum(low_freqs[i - 1] for i in state.photons))


def enumerate_basis(
    pb: PolaritonBasis,
    low_freqs: np.ndarray,
    s_max: int,
    window: Tuple[float, float],
) -> List[BasisState]:
    """All one-polariton states with up to ``s_max - 1`` low photons in the energy window.

    Ordered by particle count, then unperturbed energy, then label.
    """
    if s_max not in (1, 2, 3):
        raise ParameterError("s_max must be 1, 2 or 3")
    lo, hi = window
    i0 = pb.i0
    if len(low_freqs) < i0:
        raise ParameterError("need one low-mode frequency per index <= i0")
    rows = []
    for count in range(s_max):
        if count > 0 and i0 == 0:
            break
        for photons in combinations_with_replacement(range(1, i0 + 1), count):
            shift = sum(low_freqs[i - 1] for i in photons)
            energies = pb.omega + shift
            for pos in np.nonzero((energies >= lo) & (energies <= hi))[0]:
                rows.append((count + 1, float(energies[pos]), int(pb.labels[pos]), photons))
    rows.sort()
    if not rows:
        warnings.warn(f"energy window [{lo}, {hi}] GHz contains no basis state", ValidityWarning, stacklevel=2)
    return [BasisState(k, ph) for _, _, k, ph in rows]


def assemble_h_eff(
    pb: PolaritonBasis,
    low_freqs: np.ndarray,
    g: float,
    factors: np.ndarray,
    basis: Sequence[BasisState],
    amplitudes: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Effective Hamiltonian (GHz) on ``basis``.

    Diagonal: Omega_k + sum of low-photon frequencies. States (k, n) and
    (k', n + e_i) are coupled by g c_i A_kk' sqrt(n_i + 1).
    """
    amp = conversion_amplitudes(pb) if amplitudes is None else amplitudes
    dim = len(basis)
    h = np.zeros((dim, dim))
    groups: Dict[Tuple[int, ...], List[Tuple[int, int]]] = defaultdict(list)
    for idx, st in enumerate(basis):
        if not isinstance(st, BasisState):
            raise InvariantError(f"basis entry {idx} is not a one-polariton state")
        if any(not (1 <= i <= pb.i0) for i in st.photons) or tuple(sorted(st.photons)) != st.photons:
            raise InvariantError(f"basis state {st} has photons outside modes 1..{pb.i0}")
        pos = pb.index_of(st.polariton)
        h[idx, idx] = pb.omega[pos] + sum(low_freqs[i - 1] for i in st.photons)
        groups[st.photons].append((idx, pos))
    if g == 0 or pb.i0 == 0:
        return h
    for photons, members in groups.items():
        rows = np.array([m[0] for m in members])
        kpos = np.array([m[1] for m in members])
        for i in set(range(1, pb.i0 + 1)):
            target = tuple(sorted(photons + (i,)))
            other = groups.get(target)
            if not other:
                continue
            cols = np.array([m[0] for m in other])
            kpos2 = np.array([m[1] for m in other])
            bos = np.sqrt(photons.count(i) + 1)
            block = g * factors[i - 1] * bos * amp[np.ix_(kpos, kpos2)]
            h[np.ix_(rows, cols)] = block
            h[np.ix_(cols, rows)] = block.T
    return h


@dataclass
class EffectiveModel:
    """Effective-model inputs, basis, Hamiltonian and its eigensystem."""

    low_mode_freqs: np.ndarray
    polaritons: PolaritonBasis
    A: np.ndarray
    g: float
    factors: np.ndarray
    basis: List[BasisState]
    H_eff: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    gamma: float
    window: Tuple[float, float]
    audit: Dict[str, float] = field(default_factory=dict)

    @property
    def single_polariton_weight(self) -> np.ndarray:
        """Weight of every eigenstate on the one-particle states."""
        mask = np.array([st.particle_count == 1 for st in self.basis], dtype=bool)
        return np.sum(self.eigenvectors[mask] ** 2, axis=0)

    def single_polariton_overlaps(self) -> Tuple[np.ndarray, np.ndarray]:
        """Return (polariton basis positions, |<psi|p_k>|^2 matrix of shape (n_single, n_eig))."""
        idx = [j for j, st in enumerate(self.basis) if st.particle_count == 1]
        pos = np.array([self.polaritons.index_of(self.basis[j].polariton) for j in idx], dtype=int)
        return pos, self.eigenvectors[idx] ** 2

    def max_offdiag(self) -> float:
        off = self.H_eff - np.diag(np.diag(self.H_eff))
        return float(np.max(np.abs(off))) if off.size else 0.0

    def basis_manifest(self) -> str:
        rows = [
            {"index": j, "state": st.label(), "particles": st.particle_count,
             "energy_GHz": float(self.H_eff[j, j])}
            for j, st in enumerate(self.basis)
        ]
        return json.dumps(rows, indent=1)


def build_effective_model(
    qc: QuantizedCircuit,
    flx: FluxoniumSpectrum,
    s_max: int = 2,
    window: Optional[Tuple[float, float]] = None,
    window_gammas: float = 5.0,
    low_mode_factor: str = EXACT_RATIO,
    basis: Optional[Sequence[BasisState]] = None,
) -> EffectiveModel:
    """Polaritons, basis and diagonalized effective Hamiltonian at one flux point.

    ``window`` defaults to f_eg -/+ ``window_gammas`` times the estimated bandwidth.
    A :class:`ValidityWarning` is emitted when that bandwidth exceeds 0.2 f_eg.
    """
    i0 = qc.gauge.i0
    pb = build_polaritons(qc, flx, i0)
    gamma = estimate_gamma(pb)
    if gamma > GAMMA_WARN_RATIO * pb.f_eg:
        warnings.warn(
            f"bandwidth {gamma:.3g} GHz exceeds {GAMMA_WARN_RATIO} f_eg; two-level reduction is doubtful",
            ValidityWarning,
            stacklevel=2,
        )
    if window is None:
        window = (pb.f_eg - window_gammas * gamma, pb.f_eg + window_gammas * gamma)
    low = qc.mode_freqs[:i0]
    if basis is None:
        basis = enumerate_basis(pb, low, s_max, window)
    amp = conversion_amplitudes(pb)
    g = three_wave_strength(qc, flx)
    factors = low_mode_factors(qc, low_mode_factor)
    h = assemble_h_eff(pb, low, g, factors, basis, amp)
    if h.size:
        vals, vecs = eigh(h)
    else:
        vals, vecs = np.zeros(0), np.zeros((0, 0))
    r_eg = abs(np.imag(flx.n_matrix[1, 0]))
    audit = {
        "dropped_low_charge_coupling_GHz": float(np.max(np.abs(qc.g_charge[:i0])) * r_eg) if i0 else 0.0,
        "max_three_wave_GHz": float(abs(g) * (np.max(np.abs(factors)) if factors.size else 0) * np.max(amp)),
        "basis_size": float(len(basis)),
    }
    return EffectiveModel(
        low_mode_freqs=low,
        polaritons=pb,
        A=amp,
        g=g,
        factors=factors,
        basis=list(basis),
        H_eff=h,
        eigenvalues=vals,
        eigenvectors=vecs,
        gamma=gamma,
        window=tuple(window),
        audit=audit,
    )
