"""Stage orchestration shared by the CLI and the sweep workers."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .cache import StageCache
from .config import DeviceConfig
from .effective import EXACT_RATIO, SQRT_I, EffectiveModel, build_effective_model
from .exactdiag import ExactDiagConfig, exact_spectrum, match_nearest, truncation_audit
from .fluxonium import FluxoniumSpectrum, solve_fluxonium
from .foster import FosterNetwork, synthesize
from .quantize import QuantizedCircuit, bogoliubov_diagonalize, build_matrices
from .spectra import QualityModel, s11_dressed


class Pipeline:
    """Lazily computed, cached stages for one device configuration."""

    def __init__(self, cfg: DeviceConfig, cache: Optional[StageCache] = None):
        self.cfg = cfg
        self.cache = cache if cache is not None else StageCache(enabled=False)
        self._i0: Optional[int] = None

    # keys: every stage hashes the numerics block so a numerics change is a full miss
    def _payload(self, *sections: str, **extra) -> dict:
        data = self.cfg.canonical(*sections, "numerics")
        data.update(extra)
        return data

    @property
    def i0(self) -> int:
        if self._i0 is None:
            self._i0 = self.cfg.resolve_i0()
        return self._i0

    def network(self) -> FosterNetwork:
        return self.cache.get_or_compute("foster", self._payload("line"), lambda: synthesize(self.cfg.line.to_spec()))

    def quantized(self, i0: Optional[int] = None) -> QuantizedCircuit:
        i0 = self.i0 if i0 is None else i0
        gauge = self.cfg.gauge_config(i0)
        payload = self._payload("line", "x", "gauge", i0=i0, ec=self.cfg.fluxonium.ec, el=self.cfg.fluxonium.el)
        return self.cache.get_or_compute(
            "quantize", payload, lambda: bogoliubov_diagonalize(build_matrices(self.network(), gauge))
        )

    def fluxonium_at(self, phi: float, el: Optional[float] = None) -> FluxoniumSpectrum:
        el = self.quantized().matrices.el_tilde if el is None else el
        payload = self._payload("fluxonium", phi=float(phi), el_used=float(el))
        params = self.cfg.fluxonium.params(float(phi), el)
        return self.cache.get_or_compute(
            "fluxonium", payload, lambda: solve_fluxonium(params, self.cfg.fluxonium.keep_levels)
        )

    def effective_at(self, phi: float, s_max: Optional[int] = None) -> EffectiveModel:
        s_max = self.cfg.sweep.s_max if s_max is None else s_max
        num = self.cfg.numerics
        payload = self._payload("line", "x", "gauge", "fluxonium", i0=self.i0, phi=float(phi), s_max=s_max)

        def compute():
            window = tuple(num.window) if num.window is not None else None
            return build_effective_model(
                self.quantized(),
                self.fluxonium_at(phi),
                s_max=s_max,
                window=window,
                window_gammas=num.window_gammas,
                low_mode_factor=SQRT_I if num.sqrt_i_low_modes else EXACT_RATIO,
            )

        return self.cache.get_or_compute("effective", payload, compute)

    def exact_config(self, gauge: str, phi: float) -> ExactDiagConfig:
        ex = self.cfg.numerics.exact
        return ExactDiagConfig(
            network=self.network(),
            fluxonium=self.cfg.fluxonium.params(float(phi)),
            x=self.cfg.x,
            gauge=gauge,
            n_fluxonium_levels=ex.n_fluxonium_levels,
            photonic_truncation_M=ex.photonic_truncation_M,
            dim_bound=ex.dim_bound,
            inductance_form=self.cfg.gauge.inductance_form,
        )

    def quality(self) -> QualityModel:
        q = self.cfg.quality
        return QualityModel(np.asarray(q.q_int, dtype=float), np.asarray(q.q_ext, dtype=float))

    def probe_grid(self, phi_grid: Sequence[float]) -> np.ndarray:
        """Configured frequency grid, or +-10 linewidths around the probed polariton at 0.1 MHz."""
        if self.cfg.sweep.freq is not None:
            return self.cfg.sweep.freq.values()
        label = self.cfg.sweep.probe_label
        centers = []
        for phi in phi_grid:
            model = self.effective_at(phi, 1)
            pb = model.polaritons
            k = pb.index_of(label) if label is not None else int(np.argmax(pb.qubit_weight**2))
            centers.append(pb.omega[k])
        qi, qe = self.quality().inverse(self.network().size)
        width = max(centers) * float(np.max(qi + qe))
        return np.arange(min(centers) - 10 * width, max(centers) + 10 * width, 1e-4)


def _point_worker(args):
    cfg_json, cache_root, enabled, kind, phi, extra = args
    cfg = DeviceConfig.model_validate_json(cfg_json)
    pipe = Pipeline(cfg, StageCache(Path(cache_root), enabled))
    return _point_worker_local(pipe, kind, phi, extra)


def map_points(pipe: Pipeline, kind: str, phi_grid: Sequence[float], extra=None, threads: int = 1) -> List:
    """Evaluate one stage over flux points, in grid order; parallel when ``threads > 1``."""
    if threads <= 1 or len(phi_grid) <= 1:
        return [_point_worker_local(pipe, kind, phi, extra) for phi in phi_grid]
    # warm the shared stages once so workers hit the cache
    pipe.quantized()
    args = [(pipe.cfg.model_dump_json(), str(pipe.cache.root), pipe.cache.enabled, kind, float(phi), extra)
            for phi in phi_grid]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_point_worker, args))


def _point_worker_local(pipe: Pipeline, kind: str, phi: float, extra):
    if kind == "fluxonium":
        return pipe.fluxonium_at(phi)
    if kind == "effective":
        return pipe.effective_at(phi, extra)
    if kind == "s11":
        s_max, grid = extra
        return np.abs(s11_dressed(pipe.effective_at(phi, s_max), pipe.quality(), grid).s11)
    if kind == "exact":
        return exact_spectrum(pipe.exact_config(extra, phi))
    raise ValueError(kind)


def gauge_benchmark(pipe: Pipeline, phi_grid: Sequence[float], n_levels: int = 30, threads: int = 1) -> Dict:
    """Exact spectra in charge and flux gauges plus the effective model against the charge gauge."""
    charge = map_points(pipe, "exact", phi_grid, "charge", threads)
    flux = map_points(pipe, "exact", phi_grid, "flux", threads)
    rows = []
    for phi, c, f in zip(phi_grid, charge, flux):
        k = min(n_levels, len(c.excitation_freqs), len(f.excitation_freqs))
        gauge_dev = np.abs(c.excitation_freqs[:k] - f.excitation_freqs[:k]) / c.excitation_freqs[:k]
        eff = pipe.effective_at(phi, pipe.cfg.sweep.s_max).eigenvalues
        near, rel = match_nearest(c.excitation_freqs, eff)
        flagged = [lbl for lbl, ov in zip(c.dominant_labels, c.overlaps) if ov < 0.5]
        rows.append({
            "phi_ext": float(phi),
            "charge_GHz": c.excitation_freqs[:k].tolist(),
            "flux_GHz": f.excitation_freqs[:k].tolist(),
            "charge_vs_flux_rel_dev": gauge_dev.tolist(),
            "effective_GHz": eff.tolist(),
            "effective_vs_charge_rel_dev": rel.tolist(),
            "ambiguous_labels": flagged,
        })
    max_gauge = max((max(r["charge_vs_flux_rel_dev"]) for r in rows), default=0.0)
    max_eff = max((max(r["effective_vs_charge_rel_dev"], default=0.0) for r in rows), default=0.0)
    audit = truncation_audit(pipe.exact_config("charge", phi_grid[0])) if pipe.cfg.numerics.exact.audit else {
        "M": pipe.cfg.numerics.exact.photonic_truncation_M, "scheme": "global lowest-energy Fock states"}
    return {"points": rows, "max_charge_vs_flux_rel_dev": max_gauge,
            "max_effective_vs_charge_rel_dev": max_eff, "truncation_audit": audit}


def default_threads() -> int:
    return os.cpu_count() or 1
