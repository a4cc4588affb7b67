"""Physical constants and energy/element conversions used across the package.

Internal circuit quantities are SI (henry, farad, rad/s). Energies handed to the
fluxonium and effective-model code are frequencies in GHz (E/h).
"""

import numpy as np
from scipy import constants as _c

h = _c.h
hbar = _c.hbar
e = _c.e

#: superconducting resistance quantum h / 4e^2, in ohm
R_Q = h / (4 * e**2)
#: reduced flux quantum hbar / 2e, in weber
PHI0_RED = hbar / (2 * e)

GHZ = 1e9


def ec_to_cj(ec_ghz):
    """Junction capacitance (F) from E_C/h in GHz, with E_C = e^2 / 2 C_J."""
    return e**2 / (2 * h * ec_ghz * GHZ)


def cj_to_ec(cj):
    return e**2 / (2 * cj) / h / GHZ


def el_to_inductance(el_ghz):
    """Loop inductance (H) from E_L/h in GHz, with E_L = (hbar/2e)^2 / L."""
    return PHI0_RED**2 / (h * el_ghz * GHZ)


def inductance_to_el(inductance):
    return PHI0_RED**2 / inductance / h / GHZ


def omega_to_ghz(omega):
    return np.asarray(omega) / (2 * np.pi * GHZ)


def ghz_to_omega(f_ghz):
    return 2 * np.pi * GHZ * np.asarray(f_ghz)
