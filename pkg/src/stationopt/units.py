"""Unit conversions between file-facing and internal quantities.

Instance documents use the field-facing units bar, 1000 m^3/h (volumetric
flow under normal conditions) and minutes (transition times).  Everything
internal is SI: Pa, kg/s, seconds.  All conversions live here so no other
module hard-codes a factor.
"""

from __future__ import annotations

PA_PER_BAR = 1.0e5
SECONDS_PER_HOUR = 3600.0
SECONDS_PER_MINUTE = 60.0


def bar_to_pa(p_bar: float) -> float:
    return p_bar * PA_PER_BAR


def pa_to_bar(p_pa: float) -> float:
    return p_pa / PA_PER_BAR


def massflow_to_normvol(q_kg_s: float, normal_density: float) -> float:
    """kg/s -> 1000 m^3/h given the normal density rho_0 in kg/m^3.

    The map is [1000 m^3/h] = 3600 / (1000 rho_0) [kg/s].
    """
    if normal_density <= 0.0:
        raise ValueError(f"normal density must be positive, got {normal_density}")
    return q_kg_s * SECONDS_PER_HOUR / (1000.0 * normal_density)


def normvol_to_massflow(q_tnm3_h: float, normal_density: float) -> float:
    """Inverse of :func:`massflow_to_normvol`."""
    if normal_density <= 0.0:
        raise ValueError(f"normal density must be positive, got {normal_density}")
    return q_tnm3_h * 1000.0 * normal_density / SECONDS_PER_HOUR


def minutes_to_seconds(m: float) -> float:
    return m * SECONDS_PER_MINUTE
