"""Bare fluxonium spectrum and junction matrix elements versus external flux.

The Hamiltonian 4 E_C n^2 + E_L phi^2 / 2 - E_J cos(phi - phi_ext) is diagonalized
in the eigenbasis of its quadratic part. The cosine is assembled from the closed
form of the displacement operator on Fock states, so no matrix exponential is
needed and the matrix is exact within the truncated basis.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import List, Sequence

import numpy as np
from scipy.linalg import LinAlgError, eigh
from scipy.special import eval_genlaguerre, gammaln

from .errors import NumericError, ParameterError, TruncationRiskError

DEFAULT_BASIS = 120
DEFAULT_KEEP = 7


@dataclass(frozen=True)
class FluxoniumParams:
    """Fluxonium energies (E/h in GHz), external phase and oscillator basis size."""

    ej: float
    ec: float
    el: float
    phi_ext: float = np.pi
    basis_size: int = DEFAULT_BASIS

    def __post_init__(self):
        if not (self.ec > 0 and self.el > 0 and self.ej >= 0):
            raise ParameterError("E_C and E_L must be positive and E_J non-negative")
        if int(self.basis_size) != self.basis_size or self.basis_size < 20:
            raise ParameterError("basis_size must be an integer >= 20")
        if not np.isfinite(self.phi_ext):
            raise ParameterError("phi_ext must be finite")

    @property
    def phi_zpf(self) -> float:
        """Zero-point phase amplitude (2 E_C / E_L)^(1/4)."""
        return (2 * self.ec / self.el) ** 0.25

    @property
    def plasma_ghz(self) -> float:
        return np.sqrt(8 * self.ec * self.el)

    def at_flux(self, phi_ext: float) -> "FluxoniumParams":
        return replace(self, phi_ext=float(phi_ext))

    def with_el(self, el: float) -> "FluxoniumParams":
        return replace(self, el=float(el))


@dataclass(frozen=True)
class FluxoniumSpectrum:
    """Lowest eigenpairs of the fluxonium.

    Attributes
    ----------
    energies : ndarray
        Level energies in GHz relative to the ground state, ascending.
    phi_matrix : ndarray
        Real symmetric ``<a|phi|b>``.
    n_matrix : ndarray
        Purely imaginary antisymmetric ``<a|n|b>`` (complex dtype).
    ground_energy : float
        Absolute ground energy in GHz (useful for debugging only).
    """

    params: FluxoniumParams
    energies: np.ndarray
    phi_matrix: np.ndarray
    n_matrix: np.ndarray
    ground_energy: float

    @property
    def f_eg(self) -> float:
        return float(self.energies[1])

    @property
    def dipole_asymmetry(self) -> float:
        """<e|phi|e> - <g|phi|g>."""
        return float(self.phi_matrix[1, 1] - self.phi_matrix[0, 0])

    @property
    def levels(self) -> int:
        return self.energies.size


def ladder(m: int) -> np.ndarray:
    """Annihilation operator on an m-dimensional Fock space."""
    return np.diag(np.sqrt(np.arange(1, m)), 1)


def displacement_real_part(m: int, phi_zpf: float) -> np.ndarray:
    """Symmetric real matrix R with <j|exp(i phi_zpf (a + a^dag))|k> = i^|j-k| R_jk.

    Uses <j|D(alpha)|k> = sqrt(k!/j!) alpha^(j-k) exp(-|alpha|^2/2) L_k^(j-k)(|alpha|^2)
    for j >= k with alpha = i phi_zpf.
    """
    x = phi_zpf**2
    j, k = np.tril_indices(m)
    diff = j - k
    logpref = 0.5 * (gammaln(k + 1) - gammaln(j + 1)) + diff * np.log(phi_zpf) - x / 2
    vals = np.exp(logpref) * eval_genlaguerre(k, diff, x)
    out = np.zeros((m, m))
    out[j, k] = vals
    out[k, j] = vals
    return out


def cos_matrix(m: int, phi_zpf: float, phi_ext: float) -> np.ndarray:
    """Matrix of cos(phi - phi_ext) in the oscillator basis, phi = phi_zpf (a + a^dag)."""
    r = displacement_real_part(m, phi_zpf)
    idx = np.arange(m)
    order = np.abs(idx[:, None] - idx[None, :])
    return r * np.cos(order * np.pi / 2 - phi_ext)


def hamiltonian(params: FluxoniumParams) -> np.ndarray:
    m = params.basis_size
    h = -params.ej * cos_matrix(m, params.phi_zpf, params.phi_ext)
    h[np.diag_indices(m)] += params.plasma_ghz * (np.arange(m) + 0.5)
    return h


def fix_phase(vecs: np.ndarray) -> np.ndarray:
    """Flip columns so that the largest-magnitude entry of each is positive."""
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1
    return vecs * signs


def solve_fluxonium(params: FluxoniumParams, keep_levels: int = DEFAULT_KEEP) -> FluxoniumSpectrum:
    """Diagonalize the fluxonium and return the lowest ``keep_levels`` eigenpairs.

    Raises
    ------
    TruncationRiskError
        If ``keep_levels`` exceeds a quarter of the basis size.
    NumericError
        If the eigensolver fails.
    """
    m = params.basis_size
    if keep_levels < 2 or keep_levels > m // 4:
        raise TruncationRiskError(
            f"keep_levels={keep_levels} outside [2, M/4={m // 4}]; enlarge basis_size"
        )
    h = hamiltonian(params)
    try:
        vals, vecs = eigh(h, subset_by_index=[0, keep_levels - 1])
    except LinAlgError as exc:
        raise NumericError(f"fluxonium eigensolve failed at phi_ext={params.phi_ext}: {exc}") from exc
    if not np.all(np.isfinite(vals)):
        raise NumericError("non-finite fluxonium eigenvalues")
    vecs = fix_phase(vecs)
    a = ladder(m)
    phi_op = params.phi_zpf * (a + a.T)
    nr_op = (a.T - a) / (2 * params.phi_zpf)  # n = i * nr_op
    phi_mat = vecs.T @ phi_op @ vecs
    n_mat = 1j * (vecs.T @ nr_op @ vecs)
    phi_mat = 0.5 * (phi_mat + phi_mat.T)
    return FluxoniumSpectrum(
        params=params,
        energies=vals - vals[0],
        phi_matrix=phi_mat,
        n_matrix=n_mat,
        ground_energy=float(vals[0]),
    )


def sweep_flux(
    params: FluxoniumParams, phi_grid: Sequence[float], keep_levels: int = DEFAULT_KEEP
) -> List[FluxoniumSpectrum]:
    """Solve at each grid point, in grid order."""
    grid = np.atleast_1d(np.asarray(phi_grid, dtype=float))
    if grid.size == 0:
        raise ParameterError("flux grid is empty")
    out = []
    for idx, phi in enumerate(grid):
        try:
            out.append(solve_fluxonium(params.at_flux(phi), keep_levels))
        except (NumericError, ParameterError) as exc:
            raise type(exc)(f"grid index {idx} (phi_ext={phi}): {exc}") from exc
    return out


def sweep_to_csv(spectra: Sequence[FluxoniumSpectrum], header_lines: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["phi_ext", "f_eg_GHz", "dipole_asymmetry"])
    for s in spectra:
        writer.writerow([f"{s.params.phi_ext:.12g}", f"{s.f_eg:.12g}", f"{s.dipole_asymmetry:.12g}"])
    return buf.getvalue()
