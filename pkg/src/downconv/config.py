"""YAML device configuration with schema validation."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import constants as K
from .exactdiag import parse_gauge
from .fluxonium import FluxoniumParams
from .foster import LineSpec
from .quantize import GaugeConfig, default_i0


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PhaseTableModel(_Strict):
    omega: List[float]
    tau: List[float]

    @model_validator(mode="after")
    def _same_length(self):
        if len(self.omega) != len(self.tau) or len(self.omega) < 2:
            raise ValueError("omega and tau need equal length >= 2")
        return self


class LineModel(_Strict):
    kind: Literal["open", "dispersive", "josephson"] = "open"
    wave_impedance: float = Field(gt=0)
    mode_count: int = Field(ge=1)
    length: Optional[float] = Field(default=None, gt=0)
    light_speed: Optional[float] = Field(default=None, gt=0)
    fsr: Optional[float] = Field(default=None, gt=0)
    plasma_freq: Optional[float] = Field(default=None, gt=0)
    termination_phase: Optional[PhaseTableModel] = None

    def to_spec(self) -> LineSpec:
        table = None
        if self.termination_phase is not None:
            table = (np.array(self.termination_phase.omega), np.array(self.termination_phase.tau))
        return LineSpec(
            kind=self.kind,
            wave_impedance=self.wave_impedance,
            mode_count=self.mode_count,
            length=self.length,
            light_speed=self.light_speed,
            fsr=self.fsr,
            plasma_freq=self.plasma_freq,
            termination_phase=table,
        )


class FluxoniumModel(_Strict):
    ej: float = Field(ge=0, description="E_J/h in GHz")
    ec: float = Field(gt=0, description="E_C/h in GHz")
    el: float = Field(gt=0, description="E_L/h in GHz")
    basis_size: int = Field(default=120, ge=20)
    keep_levels: int = Field(default=7, ge=2)

    def params(self, phi_ext: float = np.pi, el: Optional[float] = None) -> FluxoniumParams:
        return FluxoniumParams(self.ej, self.ec, self.el if el is None else el, phi_ext, self.basis_size)


class GaugeModel(_Strict):
    i0: Union[int, str] = "auto"
    inductance_form: Literal["exact", "printed"] = "exact"

    @field_validator("i0")
    @classmethod
    def _i0(cls, v):
        if isinstance(v, int):
            if v < 0:
                raise ValueError("i0 must be >= 0")
            return v
        if v in ("auto", "charge", "flux") or (isinstance(v, str) and v.startswith("mixed:")):
            return v
        raise ValueError("i0 must be an integer, 'auto', 'charge', 'flux' or 'mixed:<i0>'")


class QualityConfig(_Strict):
    q_int: Union[float, List[float]] = 10000.0
    q_ext: Union[float, List[float]] = 2000.0

    @field_validator("q_int", "q_ext")
    @classmethod
    def _positive(cls, v):
        vals = v if isinstance(v, list) else [v]
        if any(not (q > 0) for q in vals):
            raise ValueError("quality factors must be positive")
        return v


class GridModel(_Strict):
    start: float
    stop: float
    num: Optional[int] = Field(default=None, ge=1)
    step: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _one_of(self):
        if (self.num is None) == (self.step is None):
            raise ValueError("give exactly one of num or step")
        return self

    def values(self) -> np.ndarray:
        if self.num is not None:
            return np.linspace(self.start, self.stop, self.num)
        n = int(np.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(n)


class SweepModel(_Strict):
    phi_ext: Union[GridModel, List[float]] = Field(default_factory=lambda: [float(np.pi)])
    freq: Optional[GridModel] = None
    s_max: int = Field(default=2, ge=1, le=3)
    probe_label: Optional[int] = None

    def phi_grid(self) -> np.ndarray:
        if isinstance(self.phi_ext, GridModel):
            return self.phi_ext.values()
        return np.asarray(self.phi_ext, dtype=float)


class ExactModel(_Strict):
    n_fluxonium_levels: int = Field(default=7, ge=2)
    photonic_truncation_M: int = Field(default=40, ge=1)
    dim_bound: int = Field(default=20000, ge=1)
    audit: bool = False


class ElCurveModel(_Strict):
    x_values: List[float] = Field(default_factory=lambda: [0.1, 0.5, 0.9])
    n_values: List[int] = Field(default_factory=lambda: [10, 50, 100, 250])


class NumericsModel(_Strict):
    sqrt_i_low_modes: bool = False
    window_gammas: float = Field(default=5.0, gt=0)
    window: Optional[List[float]] = None
    coupling_fit_window: Optional[List[int]] = None
    exact: ExactModel = Field(default_factory=ExactModel)
    el_curve: Optional[ElCurveModel] = None

    @field_validator("window")
    @classmethod
    def _window(cls, v):
        if v is not None and (len(v) != 2 or v[0] >= v[1]):
            raise ValueError("window must be [low, high] in GHz with low < high")
        return v


class DeviceConfig(_Strict):
    line: LineModel
    fluxonium: FluxoniumModel
    x: float = Field(gt=0, le=1)
    gauge: GaugeModel = Field(default_factory=GaugeModel)
    quality: QualityConfig = Field(default_factory=QualityConfig)
    sweep: SweepModel = Field(default_factory=SweepModel)
    numerics: NumericsModel = Field(default_factory=NumericsModel)

    @property
    def loop_inductance(self) -> float:
        return K.el_to_inductance(self.fluxonium.el)

    @property
    def junction_capacitance(self) -> float:
        return K.ec_to_cj(self.fluxonium.ec)

    def resolve_i0(self, f_eg_half_flux: Optional[float] = None) -> int:
        n = self.line.mode_count
        if self.gauge.i0 == "auto":
            if f_eg_half_flux is None:
                from .fluxonium import solve_fluxonium

                f_eg_half_flux = solve_fluxonium(self.fluxonium.params(np.pi), self.fluxonium.keep_levels).f_eg
            return min(n, default_i0(f_eg_half_flux, self.line.to_spec().delta))
        return parse_gauge(self.gauge.i0, n)

    def gauge_config(self, i0: Optional[int] = None) -> GaugeConfig:
        return GaugeConfig(
            i0=self.resolve_i0() if i0 is None else i0,
            x=self.x,
            loop_inductance=self.loop_inductance,
            junction_capacitance=self.junction_capacitance,
            inductance_form=self.gauge.inductance_form,
        )

    def canonical(self, *sections: str) -> dict:
        data = self.model_dump(mode="json")
        return {k: data[k] for k in sections} if sections else data

    def digest(self, *sections: str) -> str:
        text = json.dumps(self.canonical(*sections), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_overrides(self, s_max: Optional[int] = None, gauge: Optional[str] = None) -> "DeviceConfig":
        data = self.model_dump()
        if s_max is not None:
            data["sweep"]["s_max"] = s_max
        if gauge is not None:
            data["gauge"]["i0"] = gauge
        return DeviceConfig.model_validate(data)


def resolve_path(path: Union[str, Path]) -> Path:
    """Accept ``configs/table1`` as shorthand for ``configs/table1.yaml``."""
    p = Path(path)
    if p.exists():
        return p
    for suffix in (".yaml", ".yml"):
        cand = p.with_suffix(suffix) if p.suffix == "" else Path(str(p) + suffix)
        if cand.exists():
            return cand
    raise FileNotFoundError(f"config file not found: {path}")


def load_config(path: Union[str, Path]) -> DeviceConfig:
    with open(resolve_path(path)) as fh:
        raw = yaml.safe_load(fh)
    return DeviceConfig.model_validate(raw or {})
