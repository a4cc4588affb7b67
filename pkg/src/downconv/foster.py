"""Foster (series-LC in parallel) synthesis of transmission-line sections.

Three line models are supported: the dispersionless open line, a line with
arbitrary dispersion and reactive termination (poles found numerically), and
the Josephson-junction-array line with a plasma-frequency cutoff (closed form).
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .errors import ParameterError, PoleProximityError, TruncationWarning

OPEN = "open"
DISPERSIVE = "dispersive"
JOSEPHSON = "josephson"
LINE_KINDS = (OPEN, DISPERSIVE, JOSEPHSON)

PhaseTable = tuple  # (omega array, tau array)


@dataclass(frozen=True)
class LineSpec:
    """Geometry and electrical parameters of one line section.

    Parameters
    ----------
    kind : {"open", "dispersive", "josephson"}
    wave_impedance : float
        Wave impedance in ohm (the DC value for dispersive lines).
    length : float, optional
        Physical length in meter.
    light_speed : float, optional
        Phase velocity in m/s. Either ``light_speed`` (with ``length``) or
        ``fsr`` must be given.
    fsr : float, optional
        Free spectral range Delta in Hz (low-frequency value for dispersive lines).
    plasma_freq : float, optional
        Plasma frequency omega_p / 2pi in Hz; required for ``kind="josephson"``.
    termination_phase : tuple of arrays, optional
        Tabulated ``(omega, tau)`` pairs, linearly interpolated. Zero when omitted.
    mode_count : int
        Number N of Foster branches to retain.
    """

    kind: str
    wave_impedance: float
    mode_count: int
    length: Optional[float] = None
    light_speed: Optional[float] = None
    fsr: Optional[float] = None
    plasma_freq: Optional[float] = None
    termination_phase: Optional[PhaseTable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in LINE_KINDS:
            raise ParameterError(f"unknown line kind {self.kind!r}; expected one of {LINE_KINDS}")
        if not self.wave_impedance > 0:
            raise ParameterError("wave_impedance must be positive")
        if int(self.mode_count) != self.mode_count or self.mode_count < 1:
            raise ParameterError("mode_count must be a positive integer")
        if self.fsr is None and (self.light_speed is None or self.length is None):
            raise ParameterError("either fsr or both light_speed and length are required")
        if self.length is not None and not self.length > 0:
            raise ParameterError("length must be positive")
        if self.light_speed is not None and not self.light_speed > 0:
            raise ParameterError("light_speed must be positive")
        if self.fsr is not None and not self.fsr > 0:
            raise ParameterError("fsr must be positive")
        if self.fsr is not None and self.light_speed is not None and self.length is not None:
            derived = self.light_speed / (2 * self.length)
            if abs(derived - self.fsr) > 1e-9 * self.fsr:
                raise ParameterError(
                    f"fsr={self.fsr} Hz inconsistent with v/2l={derived} Hz"
                )
        if self.kind == JOSEPHSON:
            if self.plasma_freq is None or not self.plasma_freq > 0:
                raise ParameterError("josephson line requires a positive plasma_freq")

    @property
    def delta(self) -> float:
        """Free spectral range in Hz."""
        if self.fsr is not None:
            return float(self.fsr)
        return self.light_speed / (2 * self.length)

    @property
    def omega_p(self) -> float:
        return 2 * np.pi * self.plasma_freq if self.plasma_freq is not None else np.inf

    def with_modes(self, n: int) -> "LineSpec":
        return LineSpec(
            kind=self.kind,
            wave_impedance=self.wave_impedance,
            mode_count=n,
            length=self.length,
            light_speed=self.light_speed,
            fsr=self.fsr,
            plasma_freq=self.plasma_freq,
            termination_phase=self.termination_phase,
        )

    def tau(self, omega):
        """Termination phase shift at angular frequency ``omega`` (rad)."""
        if self.termination_phase is None:
            return np.zeros_like(np.asarray(omega, dtype=float))
        w_tab, t_tab = (np.asarray(a, dtype=float) for a in self.termination_phase)
        return np.interp(omega, w_tab, t_tab)


@dataclass(frozen=True)
class FosterNetwork:
    """Parallel bank of series L_i C_i branches with poles omega_i = 1/sqrt(L_i C_i)."""

    poles_omega: np.ndarray
    inductances: np.ndarray
    capacitances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.poles_omega, dtype=float)
        ell = np.asarray(self.inductances, dtype=float)
        c = np.asarray(self.capacitances, dtype=float)
        object.__setattr__(self, "poles_omega", w)
        object.__setattr__(self, "inductances", ell)
        object.__setattr__(self, "capacitances", c)
        if not (w.shape == ell.shape == c.shape) or w.ndim != 1 or w.size == 0:
            raise ParameterError("poles, inductances and capacitances must be equal-length 1-D arrays")
        if not (np.all(np.isfinite(ell)) and np.all(np.isfinite(c))):
            raise ParameterError("non-finite element values")
        if np.any(ell <= 0) or np.any(c <= 0):
            raise ParameterError("element values must be positive")
        if np.any(np.diff(w) <= 0):
            raise ParameterError("poles must be strictly increasing")
        mismatch = np.abs(w - 1 / np.sqrt(ell * c)) / w
        if np.any(mismatch > 1e-12):
            raise ParameterError(f"pole/element mismatch up to {mismatch.max():.3g}")

    @property
    def size(self) -> int:
        return self.poles_omega.size

    @property
    def freqs_ghz(self) -> np.ndarray:
        return self.poles_omega / (2 * np.pi * 1e9)

    def truncated(self, n: int) -> "FosterNetwork":
        return FosterNetwork(self.poles_omega[:n], self.inductances[:n], self.capacitances[:n])

    def to_csv(self, header_lines: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "omega_over_2pi_GHz", "L_henry", "C_farad"])
        for i, (w, ell, c) in enumerate(zip(self.freqs_ghz, self.inductances, self.capacitances), 1):
            writer.writerow([i, f"{w:.12g}", f"{ell:.12g}", f"{c:.12g}"])
        return buf.getvalue()


def _elements_from_dispersion(poles, z_of_w, dkl_dw):
    """L_i = Z/2 * l dk/dw and C_i = 2 / (w^2 Z l dk/dw), both at the pole."""
    z = np.asarray(z_of_w(poles), dtype=float)
    slope = np.asarray(dkl_dw(poles), dtype=float)
    inductances = 0.5 * z * slope
    capacitances = 1.0 / (poles**2 * inductances)
    return inductances, capacitances


def foster_open_line(spec: LineSpec) -> FosterNetwork:
    """Closed-form Foster network of an open, dispersionless line.

    Poles sit at 2 pi Delta (i - 1/2); every branch has L = Z / 4 Delta and
    C_i = 1 / (Z pi^2 Delta (i - 1/2)^2).
    """
    if spec.kind != OPEN:
        raise ParameterError(f"foster_open_line needs an open line, got {spec.kind!r}")
    delta, z = spec.delta, spec.wave_impedance
    half = np.arange(1, spec.mode_count + 1) - 0.5
    poles = 2 * np.pi * delta * half
    inductances = np.full(spec.mode_count, z / (4 * delta))
    capacitances = 1.0 / (z * np.pi**2 * delta * half**2)
    return FosterNetwork(poles, inductances, capacitances)


def josephson_dispersion(delta: float, omega_p: float):
    """Return ``(k l, d(k l)/d omega, Z/Z0)`` callables of a Josephson chain.

    k(w) l = (w / 2 Delta) / sqrt(1 - (w/w_p)^2); the impedance scales with the
    same square root. ``omega_p = inf`` gives the dispersionless line.
    """

    def kl(w):
        u = (np.asarray(w) / omega_p) ** 2
        return np.asarray(w) / (2 * delta) / np.sqrt(1 - u)

    def dkl(w):
        u = (np.asarray(w) / omega_p) ** 2
        return 1.0 / (2 * delta) * (1 - u) ** -1.5

    def zratio(w):
        u = (np.asarray(w) / omega_p) ** 2
        return 1.0 / np.sqrt(1 - u)

    return kl, dkl, zratio


def _numeric_derivative(f: Callable, w, rel_step=1e-4):
    w = np.asarray(w, dtype=float)
    s = rel_step * w
    return (-f(w + 2 * s) + 8 * f(w + s) - 8 * f(w - s) + f(w - 2 * s)) / (12 * s)


def foster_dispersive(
    spec: LineSpec,
    kl: Optional[Callable] = None,
    z_of_w: Optional[Callable] = None,
    dkl: Optional[Callable] = None,
    truncate: bool = False,
) -> FosterNetwork:
    """Foster network of a dispersive line with a reactive termination.

    Poles solve ``k(w) l = pi (i - 1/2) + tau(w)``. Each root is bracketed
    between the previous pole and an expanding upper bound seeded at the
    dispersionless guess, then refined with Brent's method.

    Parameters
    ----------
    spec : LineSpec
    kl, z_of_w, dkl : callable, optional
        Phase ``k(w) l``, impedance ``Z(w)`` and slope ``d(k l)/dw``. Default to
        the Josephson-chain dispersion when ``spec.plasma_freq`` is set, and to
        the linear dispersion otherwise. ``dkl`` falls back to a 5-point finite
        difference of ``kl``.
    truncate : bool
        When a pole cannot be bracketed (e.g. it would lie beyond the propagation
        cutoff), return the poles found so far with a warning instead of raising.
    """
    delta = spec.delta
    omega_p = spec.omega_p
    if kl is None:
        kl, dkl_default, zr = josephson_dispersion(delta, omega_p)
        dkl = dkl or dkl_default
        if z_of_w is None:
            z0 = spec.wave_impedance
            z_of_w = lambda w: z0 * zr(w)  # noqa: E731
    if z_of_w is None:
        z0 = spec.wave_impedance
        z_of_w = lambda w: np.full_like(np.asarray(w, dtype=float), z0)  # noqa: E731
    if dkl is None:
        dkl = lambda w: _numeric_derivative(kl, w)  # noqa: E731

    w_max = omega_p * (1 - 1e-14) if np.isfinite(omega_p) else np.inf
    poles = []
    lower = 0.0
    for i in range(1, spec.mode_count + 1):
        target = np.pi * (i - 0.5)

        def resid(w, target=target):
            return float(kl(w)) - target - float(spec.tau(w))

        guess = 2 * np.pi * delta * (i - 0.5)
        a = lower * (1 + 1e-12) if lower > 0 else guess * 1e-6
        b = min(max(guess, a * (1 + 1e-9)), w_max)
        found = False
        for _ in range(200):
            if resid(a) < 0 < resid(b):
                found = True
                break
            if b >= w_max:
                break
            b = min(b * 1.5, w_max)
        if not found:
            msg = (
                f"pole {i} could not be bracketed below {w_max / 2 / np.pi:.6g} Hz; "
                f"max attainable mode count is {i - 1}"
            )
            if truncate and i > 1:
                warnings.warn(msg, TruncationWarning, stacklevel=2)
                break
            raise ParameterError(msg)
        root = brentq(resid, a, b, xtol=1e-15 * b, rtol=4 * np.finfo(float).eps, maxiter=500)
        poles.append(root)
        lower = root

    poles = np.array(poles)
    inductances, capacitances = _elements_from_dispersion(poles, z_of_w, dkl)
    return FosterNetwork(poles, inductances, capacitances)


def foster_josephson(spec: LineSpec) -> FosterNetwork:
    """Closed-form Foster network of a Josephson-junction-array line.

    The phase-matching condition inverts analytically:
    w_i = a_i / sqrt(1 + (a_i/w_p)^2) with a_i = 2 pi Delta (i - 1/2), and
    L_i = Z0 / (4 Delta (1 - (w_i/w_p)^2)^2), C_i = 4 Delta (1 - (w_i/w_p)^2)^2 / (w_i^2 Z0).
    """
    if spec.kind != JOSEPHSON:
        raise ParameterError(f"foster_josephson needs a josephson line, got {spec.kind!r}")
    if spec.termination_phase is not None:
        raise ParameterError("use foster_dispersive for a josephson line with a termination phase")
    delta, z0, omega_p = spec.delta, spec.wave_impedance, spec.omega_p
    a = 2 * np.pi * delta * (np.arange(1, spec.mode_count + 1) - 0.5)
    poles = a / np.sqrt(1 + (a / omega_p) ** 2)
    squeeze = (1 - (poles / omega_p) ** 2) ** 2
    if np.any(squeeze <= 0) or np.any(poles >= omega_p):
        feasible = int(np.sum(poles < omega_p))
        raise ParameterError(f"poles reach the plasma frequency; largest feasible N is {feasible}")
    inductances = z0 / (4 * delta * squeeze)
    capacitances = 4 * delta * squeeze / (poles**2 * z0)
    return FosterNetwork(poles, inductances, capacitances)


def synthesize(spec: LineSpec) -> FosterNetwork:
    """Dispatch on ``spec.kind``."""
    if spec.kind == OPEN and spec.termination_phase is None:
        return foster_open_line(spec)
    if spec.kind == JOSEPHSON and spec.termination_phase is None:
        return foster_josephson(spec)
    return foster_dispersive(spec)


def network_admittance(net: FosterNetwork, omega: Union[float, np.ndarray]):
    """Admittance sum_i i w C_i / (1 - w^2 L_i C_i) of the truncated network."""
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    rel = np.abs(w[:, None] - net.poles_omega[None, :]) / net.poles_omega[None, :]
    if np.any(rel < 1e-9):
        bad = w[np.any(rel < 1e-9, axis=1)][0]
        raise PoleProximityError(f"omega={bad:.12g} rad/s lies on a pole of the network")
    terms = 1j * w[:, None] * net.capacitances / (
        1 - w[:, None] ** 2 * net.inductances * net.capacitances
    )
    y = terms.sum(axis=1)
    return y[0] if np.ndim(omega) == 0 else y


def line_admittance(spec: LineSpec, omega):
    """Exact admittance of the continuous line.

    (1/Z) (e^{-i tau} - e^{-2 i k l}) / (e^{-i tau} + e^{-2 i k l}); for the open
    dispersionless line this is i tan(w l / v) / Z.
    """
    w = np.asarray(omega, dtype=float)
    kl, _, zr = josephson_dispersion(spec.delta, spec.omega_p)
    z = spec.wave_impedance * zr(w)
    et = np.exp(-1j * spec.tau(w))
    ek = np.exp(-2j * kl(w))
    return (et - ek) / (et + ek) / z
