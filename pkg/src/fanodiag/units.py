"""Internal unit system and conversions.

Everything inside the package runs in natural units with
hbar = c = eps0 = mu0 = 1.  Frequencies are multiples of a user-declared
reference angular frequency ``omega_ref`` and lengths are multiples of
``c / omega_ref``.  The named constants below keep formulas readable; they
are all 1.0 and must stay that way.
"""

import math

HBAR = 1.0
EPS0 = 1.0
MU0 = 1.0
C_LIGHT = 1.0

# SI values used only for converting config inputs
SI_C = 299_792_458.0
SI_HBAR = 1.054_571_817e-34
SI_EV = 1.602_176_634e-19

# angular frequency in rad/s per unit
_FREQ_SI = {
    "rad/s": 1.0,
    "Hz": 2.0 * math.pi,
    "THz": 2.0 * math.pi * 1e12,
    "eV": SI_EV / SI_HBAR,
}
_LENGTH_SI = {"m": 1.0, "um": 1e-6, "nm": 1e-9}
_TIME_SI = {"s": 1.0, "ps": 1e-12, "fs": 1e-15}

FREQUENCY_UNITS = ("w_ref",) + tuple(_FREQ_SI)
LENGTH_UNITS = ("L_ref",) + tuple(_LENGTH_SI)
TIME_UNITS = ("t_ref",) + tuple(_TIME_SI)
INTERNAL_UNITS = ("internal",)


def reference_frequency_si(value, unit):
    """Convert a declared reference frequency to rad/s."""
    if unit not in _FREQ_SI:
        raise ValueError(f"omega_ref needs an absolute frequency unit, got {unit!r}")
    out = value * _FREQ_SI[unit]
    if out <= 0:
        raise ValueError("omega_ref must be positive")
    return out


def to_internal(value, unit, omega_ref_si):
    """Convert ``value`` in ``unit`` to internal units.

    Parameters
    ----------
    value : float
    unit : str
        A frequency, length, time or ``internal`` unit.
    omega_ref_si : float
        Reference angular frequency in rad/s.
    """
    if unit in ("w_ref", "L_ref", "t_ref", "internal"):
        return float(value)
    if unit in _FREQ_SI:
        return value * _FREQ_SI[unit] / omega_ref_si
    if unit in _LENGTH_SI:
        return value * _LENGTH_SI[unit] * omega_ref_si / SI_C
    if unit in _TIME_SI:
        return value * _TIME_SI[unit] * omega_ref_si
    raise ValueError(f"unknown unit {unit!r}")


def unit_kind(unit):
    if unit in FREQUENCY_UNITS:
        return "frequency"
    if unit in LENGTH_UNITS:
        return "length"
    if unit in TIME_UNITS:
        return "time"
    if unit in INTERNAL_UNITS:
        return "internal"
    return None
