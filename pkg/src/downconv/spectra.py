"""One-port reflection spectra from bare modes or dressed eigenstates."""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.signal import find_peaks

from .effective import EffectiveModel
from .errors import ParameterError, ValidityWarning

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class QualityModel:
    """Internal and external quality factors of the bare modes.

    Scalars apply to every mode; arrays are indexed by bare mode (0-based).
    ``np.inf`` internal Q means lossless.
    """

    q_int: ArrayLike = 10000.0
    q_ext: ArrayLike = 2000.0

    def __post_init__(self):
        for name in ("q_int", "q_ext"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if np.any(~(arr > 0)):
                raise ParameterError(f"{name} must be positive")

    def inverse(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """Return (1/Q_int, 1/Q_ext) broadcast to ``n`` modes."""
        out = []
        for q in (self.q_int, self.q_ext):
            arr = np.asarray(q, dtype=float)
            inv = np.broadcast_to(1.0 / arr, (n,)) if arr.ndim == 0 else 1.0 / arr[:n]
            if inv.shape[0] != n:
                raise ParameterError(f"quality array covers {inv.shape[0]} modes, need {n}")
            out.append(np.array(inv, dtype=float))
        return out[0], out[1]


@dataclass
class ReflectionTrace:
    freq_grid: np.ndarray
    s11: np.ndarray
    eigen_freqs: np.ndarray
    inv_q_ext: np.ndarray
    inv_q_int: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.s11)

    def eigenstate_table(self):
        return [
            (float(w), float(1 / qe) if qe > 0 else np.inf, float(1 / qi) if qi > 0 else np.inf)
            for w, qe, qi in zip(self.eigen_freqs, self.inv_q_ext, self.inv_q_int)
        ]


def resonance_factors(freqs: np.ndarray, w_res: np.ndarray, inv_qe: np.ndarray, inv_qi: np.ndarray) -> np.ndarray:
    """Per-resonance reflection factors, shape (len(freqs), len(w_res)).

    (2i d - 1/Qe + 1/Qi) / (2i d + 1/Qe + 1/Qi) with d = (w - w_k)/w_k. A
    resonance with zero loss and zero external coupling contributes exactly 1.
    """
    d = (freqs[:, None] - w_res[None, :]) / w_res[None, :]
    num = 2j * d - inv_qe + inv_qi
    den = 2j * d + inv_qe + inv_qi
    dark = (inv_qe == 0) & (inv_qi == 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = num / den
    out[:, dark] = 1.0
    return out


def reflection_product(freqs, w_res, inv_qe, inv_qi, band: Optional[Tuple[float, float]] = None) -> np.ndarray:
    """Product of resonance factors; resonances outside ``band`` enter as a constant at band center."""
    freqs = np.asarray(freqs, dtype=float)
    w_res = np.asarray(w_res, dtype=float)
    if band is None:
        band = (freqs.min(), freqs.max())
    inside = (w_res >= band[0]) & (w_res <= band[1])
    s = np.prod(resonance_factors(freqs, w_res[inside], inv_qe[inside], inv_qi[inside]), axis=1)
    if np.any(~inside):
        center = np.array([0.5 * (band[0] + band[1])])
        bg = np.prod(resonance_factors(center, w_res[~inside], inv_qe[~inside], inv_qi[~inside]))
        s = s * bg
    return s


def s11_bare(mode_freqs: np.ndarray, qm: QualityModel, freq_grid: np.ndarray) -> ReflectionTrace:
    """Reflection of the bare modes (GHz) with per-mode quality factors."""
    mode_freqs = np.asarray(mode_freqs, dtype=float)
    inv_qi, inv_qe = qm.inverse(mode_freqs.size)
    grid = np.asarray(freq_grid, dtype=float)
    s = reflection_product(grid, mode_freqs, inv_qe, inv_qi)
    return ReflectionTrace(grid, s, mode_freqs, inv_qe, inv_qi)


def dressed_quality_factors(model: EffectiveModel, qm: QualityModel) -> Tuple[np.ndarray, np.ndarray]:
    """Per-eigenstate (1/Q_int, 1/Q_ext) weighted by single-polariton content.

    Polariton losses come from their photonic components only; two-particle
    components carry no loss of their own.
    """
    pb = model.polaritons
    n_modes = pb.i0 + pb.W.shape[1] - 1
    inv_qi, inv_qe = qm.inverse(n_modes)
    photonic = pb.W[:, 1:] ** 2
    pol_qi = photonic @ inv_qi[pb.i0:]
    pol_qe = photonic @ inv_qe[pb.i0:]
    pos, weights = model.single_polariton_overlaps()
    if pos.size == 0:
        z = np.zeros(model.eigenvalues.size)
        return z, z
    return weights.T @ pol_qi[pos], weights.T @ pol_qe[pos]


def s11_dressed(model: EffectiveModel, qm: QualityModel, freq_grid: np.ndarray) -> ReflectionTrace:
    """Reflection from the effective-model eigenstates inside the probe band."""
    grid = np.asarray(freq_grid, dtype=float)
    inv_qi, inv_qe = dressed_quality_factors(model, qm)
    w = model.eigenvalues
    band = (grid.min(), grid.max())
    if not np.any((w >= band[0]) & (w <= band[1])):
        warnings.warn("no eigenstate inside the probe band", ValidityWarning, stacklevel=2)
        return ReflectionTrace(grid, np.ones_like(grid, dtype=complex), w, inv_qe, inv_qi)
    s = reflection_product(grid, w, inv_qe, inv_qi, band)
    return ReflectionTrace(grid, s, w, inv_qe, inv_qi)


def flux_probe_map(
    model_at: Callable[[float], EffectiveModel],
    phi_grid: Sequence[float],
    freq_grid: np.ndarray,
    qm: QualityModel,
) -> np.ndarray:
    """|S11| with one row per flux point and one column per probe frequency."""
    rows = []
    for idx, phi in enumerate(phi_grid):
        try:
            rows.append(np.abs(s11_dressed(model_at(phi), qm, freq_grid).s11))
        except Exception as exc:  # annotate and keep going
            warnings.warn(f"row {idx} (phi_ext={phi}) failed: {exc}", ValidityWarning, stacklevel=2)
            rows.append(np.full(len(freq_grid), np.nan))
    return np.array(rows)


def find_dips(row: np.ndarray, freq_grid: np.ndarray, min_depth: float, min_separation: float) -> np.ndarray:
    """Frequencies of resolved local minima of |S11| with prominence >= ``min_depth``."""
    step = float(freq_grid[1] - freq_grid[0])
    dist = max(1, int(round(min_separation / step)))
    idx, _ = find_peaks(1.0 - row, prominence=min_depth, distance=dist)
    return freq_grid[idx]


def count_new_filaments(
    map_new: np.ndarray,
    map_ref: np.ndarray,
    freq_grid: np.ndarray,
    linewidth: float,
    min_depth: float = 0.02,
    min_rows: int = 2,
) -> int:
    """Count dip tracks present in ``map_new`` but absent from ``map_ref``.

    Per flux row, dips of ``map_new`` farther than one linewidth from every dip of
    ``map_ref`` are kept. Kept dips in consecutive rows within three linewidths are
    chained into tracks; tracks spanning at least ``min_rows`` rows are counted.
    """
    tracks: List[List[float]] = []
    active: List[int] = []
    for r in range(map_new.shape[0]):
        new = find_dips(map_new[r], freq_grid, min_depth, linewidth)
        ref = find_dips(map_ref[r], freq_grid, min_depth, linewidth)
        extra = [f for f in new if ref.size == 0 or np.min(np.abs(ref - f)) > linewidth]
        nxt_active = []
        used = set()
        for f in extra:
            best, best_d = None, 3 * linewidth
            for t in active:
                d = abs(tracks[t][-1] - f)
                if d <= best_d and t not in used:
                    best, best_d = t, d
            if best is None:
                tracks.append([f])
                best = len(tracks) - 1
            else:
                tracks[best].append(f)
            used.add(best)
            nxt_active.append(best)
        active = nxt_active
    return sum(1 for t in tracks if len(t) >= min_rows)


def map_to_csv(phi_grid, freq_grid, mag: np.ndarray, header_lines: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["phi_ext", "freq_GHz", "abs_s11"])
    for phi, row in zip(phi_grid, mag):
        for f, v in zip(freq_grid, row):
            w.writerow([f"{phi:.12g}", f"{f:.12g}", f"{v:.12g}"])
    return buf.getvalue()


def map_to_json(phi_grid, freq_grid, mag: np.ndarray, config_hash: str = "") -> str:
    return json.dumps({
        "config_hash": config_hash,
        "phi_ext": [float(f"{p:.12g}") for p in phi_grid],
        "freq_GHz": [float(f"{f:.12g}") for f in freq_grid],
        "abs_s11": [[float(f"{v:.12g}") for v in row] for row in mag],
    })
