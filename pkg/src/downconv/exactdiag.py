"""Brute-force diagonalization of the multi-level fluxonium coupled to all modes.

The Hilbert space is the product of the lowest fluxonium eigenstates with the
lowest-energy multi-mode Fock states of the normal-mode Hamiltonian (a global
energy truncation). Used at small N to certify the effective model and the
gauge invariance of the circuit description.
"""

from __future__ import annotations

import heapq
import json
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, eigh

from . import constants as K
from .errors import DimensionError, NumericError, ParameterError, TruncationWarning
from .fluxonium import FluxoniumParams, solve_fluxonium
from .foster import FosterNetwork
from .quantize import GaugeConfig, QuantizedCircuit, build_matrices, bogoliubov_diagonalize

DIM_BOUND = 20000


def parse_gauge(gauge, n_modes: int) -> int:
    """Map "charge", "flux", "mixed:<i0>" or an integer to i0."""
    if isinstance(gauge, (int, np.integer)):
        i0 = int(gauge)
    elif gauge == "charge":
        i0 = 0
    elif gauge == "flux":
        i0 = n_modes
    elif isinstance(gauge, str) and gauge.startswith("mixed:"):
        try:
            i0 = int(gauge.split(":", 1)[1])
        except ValueError as exc:
            raise ParameterError(f"bad gauge spec {gauge!r}") from exc
    else:
        raise ParameterError(f"gauge must be 'charge', 'flux' or 'mixed:<i0>', got {gauge!r}")
    if not (0 <= i0 <= n_modes):
        raise ParameterError(f"i0={i0} outside [0, {n_modes}]")
    return i0


@dataclass(frozen=True)
class ExactDiagConfig:
    network: FosterNetwork
    fluxonium: FluxoniumParams
    x: float
    gauge: str = "charge"
    n_fluxonium_levels: int = 7
    photonic_truncation_M: int = 40
    dim_bound: int = DIM_BOUND
    inductance_form: str = "exact"

    @property
    def i0(self) -> int:
        return parse_gauge(self.gauge, self.network.size)

    @property
    def dimension(self) -> int:
        return self.n_fluxonium_levels * self.photonic_truncation_M

    def gauge_config(self) -> GaugeConfig:
        return GaugeConfig(
            i0=self.i0,
            x=self.x,
            loop_inductance=K.el_to_inductance(self.fluxonium.el),
            junction_capacitance=K.ec_to_cj(self.fluxonium.ec),
            inductance_form=self.inductance_form,
        )

    def with_(self, **kw) -> "ExactDiagConfig":
        data = dict(self.__dict__)
        data.update(kw)
        return ExactDiagConfig(**data)


def lowest_fock_states(freqs: np.ndarray, count: int) -> List[Tuple[int, ...]]:
    """The ``count`` lowest-energy occupation tuples of independent oscillators.

    Ties are broken by the occupation tuple, so the list for ``count`` is always a
    prefix of the list for a larger count.
    """
    n = len(freqs)
    start = (0,) * n
    heap = [(0.0, start)]
    seen = {start}
    out = []
    while heap and len(out) < count:
        energy, occ = heapq.heappop(heap)
        out.append(occ)
        for nu in range(n):
            nxt = occ[:nu] + (occ[nu] + 1,) + occ[nu + 1:]
            if nxt not in seen:
                seen.add(nxt)
                heapq.heappush(heap, (energy + float(freqs[nu]), nxt))
    return out


@dataclass
class FullSystem:
    hamiltonian: np.ndarray
    qc: QuantizedCircuit
    levels: np.ndarray
    fock: List[Tuple[int, ...]]
    el_used: float


def build_full_hamiltonian(cfg: ExactDiagConfig) -> FullSystem:
    """Assemble the truncated Hamiltonian (GHz) in the chosen gauge.

    H = sum_a E_a |a><a| + sum_nu w_nu n_nu
        + sum_nu [-g_flux_nu phi_J (b_nu + b_nu^dag) + i g_charge_nu n_J (b_nu - b_nu^dag)],
    with the atom inductive energy replaced by its gauge-renormalized value.

    Raises
    ------
    DimensionError
        If the product dimension exceeds ``cfg.dim_bound``.
    """
    dim = cfg.dimension
    if dim > cfg.dim_bound:
        raise DimensionError(f"Hilbert dimension {dim} exceeds bound {cfg.dim_bound}")
    if cfg.n_fluxonium_levels < 2 or cfg.photonic_truncation_M < 1:
        raise ParameterError("need at least 2 fluxonium levels and 1 photonic state")
    mats = build_matrices(cfg.network, cfg.gauge_config())
    qc = bogoliubov_diagonalize(mats)
    basis_size = max(cfg.fluxonium.basis_size, 4 * cfg.n_fluxonium_levels)
    flx_params = FluxoniumParams(cfg.fluxonium.ej, cfg.fluxonium.ec, mats.el_tilde,
                                 cfg.fluxonium.phi_ext, basis_size)
    flx = solve_fluxonium(flx_params, cfg.n_fluxonium_levels)
    fock = lowest_fock_states(qc.mode_freqs, cfg.photonic_truncation_M)
    m = len(fock)
    index = {occ: j for j, occ in enumerate(fock)}
    photon_energy = np.array([np.dot(occ, qc.mode_freqs) for occ in fock])

    na = cfg.n_fluxonium_levels
    h = np.zeros((na * m, na * m))
    diag = (flx.energies[:, None] + photon_energy[None, :]).ravel()
    h[np.diag_indices_from(h)] = diag

    phi = flx.phi_matrix
    nr = np.imag(flx.n_matrix)  # n_J = i * nr
    for nu in range(qc.size):
        lower = np.zeros((m, m))  # <j| b_nu |k>
        for k, occ in enumerate(fock):
            if occ[nu] == 0:
                continue
            tgt = occ[:nu] + (occ[nu] - 1,) + occ[nu + 1:]
            j = index.get(tgt)
            if j is not None:
                lower[j, k] = np.sqrt(occ[nu])
        plus = lower + lower.T
        minus = lower - lower.T
        # i n_J (b - b^dag) = -nr (b - b^dag)
        h += -qc.g_flux[nu] * np.kron(phi, plus) - qc.g_charge[nu] * np.kron(nr, minus)
    h = 0.5 * (h + h.T)
    return FullSystem(h, qc, flx.energies, fock, mats.el_tilde)


@dataclass
class ExactSpectrum:
    excitation_freqs: np.ndarray
    dominant_labels: List[str]
    overlaps: np.ndarray
    gauge: str
    dimension: int
    el_used: float
    mode_freqs: np.ndarray


def _label(level: int, occ: Sequence[int]) -> str:
    return f"q{level}|" + ",".join(str(o) for o in occ)


def exact_spectrum(cfg: ExactDiagConfig, n_report: int = 50) -> ExactSpectrum:
    """Lowest ``n_report`` excitation energies (GHz) with dominant product-state labels."""
    sysm = build_full_hamiltonian(cfg)
    dim = sysm.hamiltonian.shape[0]
    top = min(n_report + 1, dim)
    try:
        vals, vecs = eigh(sysm.hamiltonian, subset_by_index=[0, top - 1])
    except LinAlgError as exc:
        raise NumericError(f"exact eigensolve failed: {exc}") from exc
    m = len(sysm.fock)
    weights = vecs**2
    best = np.argmax(weights, axis=0)
    labels = [_label(b // m, sysm.fock[b % m]) for b in best]
    return ExactSpectrum(
        excitation_freqs=vals[1:] - vals[0],
        dominant_labels=labels[1:],
        overlaps=weights[best, np.arange(top)][1:],
        gauge=cfg.gauge,
        dimension=dim,
        el_used=sysm.el_used,
        mode_freqs=sysm.qc.mode_freqs,
    )


def truncation_audit(cfg: ExactDiagConfig, n_check: int = 20, tol: float = 5e-3) -> Dict[str, float]:
    """Compare the lowest ``n_check`` excitations at M and 2M; warn above ``tol`` relative."""
    a = exact_spectrum(cfg, n_check).excitation_freqs[:n_check]
    big = cfg.with_(photonic_truncation_M=2 * cfg.photonic_truncation_M,
                    dim_bound=max(cfg.dim_bound, 2 * cfg.dimension))
    b = exact_spectrum(big, n_check).excitation_freqs[:n_check]
    k = min(len(a), len(b))
    rel = float(np.max(np.abs(a[:k] - b[:k]) / np.abs(b[:k]))) if k else 0.0
    if rel > tol:
        warnings.warn(
            f"photonic truncation M={cfg.photonic_truncation_M} moves the lowest {k} "
            f"excitations by up to {rel:.3%}", TruncationWarning, stacklevel=2)
    return {"M": cfg.photonic_truncation_M, "M_check": 2 * cfg.photonic_truncation_M,
            "max_rel_change": rel, "scheme": "global lowest-energy Fock states"}


def match_nearest(reference: np.ndarray, values: np.ndarray):
    """For each value, the nearest reference entry and the relative deviation."""
    reference = np.asarray(reference)
    idx = np.argmin(np.abs(values[:, None] - reference[None, :]), axis=1)
    near = reference[idx]
    return near, np.abs(values - near) / np.abs(near)


@dataclass
class BenchmarkReport:
    phi_ext: List[float]
    effective: List[List[float]]
    exact: List[List[float]]
    rel_dev: List[List[float]]
    max_rel_dev: float
    gauge: str
    truncation: Dict[str, float] = field(default_factory=dict)
    flagged: List[str] = field(default_factory=list)

    def to_json(self, config_hash: str = "") -> str:
        return json.dumps({
            "config_hash": config_hash,
            "gauge": self.gauge,
            "phi_ext": self.phi_ext,
            "effective_GHz": self.effective,
            "exact_GHz": self.exact,
            "rel_dev": self.rel_dev,
            "max_rel_dev": self.max_rel_dev,
            "truncation_audit": self.truncation,
            "flagged": self.flagged,
        }, indent=1)


def benchmark_effective(
    cfg: ExactDiagConfig,
    phi_grid: Sequence[float],
    effective_levels,
    audit: bool = False,
) -> BenchmarkReport:
    """Compare effective-model eigenvalues with the exact spectrum on a flux grid.

    ``effective_levels`` is a callable phi -> array of effective eigenvalues (GHz),
    so that any effective-model construction can be benchmarked. Each effective
    level is matched to the nearest exact excitation energy.
    """
    eff_all, ex_all, dev_all, flagged = [], [], [], []
    for phi in phi_grid:
        c = cfg.with_(fluxonium=cfg.fluxonium.at_flux(phi))
        ex = exact_spectrum(c)
        eff = np.asarray(effective_levels(phi), dtype=float)
        near, rel = match_nearest(ex.excitation_freqs, eff)
        for val, r in zip(eff, rel):
            close = np.sort(np.abs(ex.excitation_freqs - val))[:2]
            if len(close) == 2 and close[1] < 2 * close[0] + 1e-12:
                flagged.append(f"phi={phi:.6g}: level {val:.6g} GHz ambiguous match")
        eff_all.append(eff.tolist())
        ex_all.append(near.tolist())
        dev_all.append(rel.tolist())
    trunc = truncation_audit(cfg) if audit else {"M": cfg.photonic_truncation_M,
                                                 "scheme": "global lowest-energy Fock states"}
    max_dev = float(max((max(d) for d in dev_all if d), default=0.0))
    return BenchmarkReport(list(map(float, phi_grid)), eff_all, ex_all, dev_all, max_dev,
                           cfg.gauge, trunc, flagged)
