"""System-strength indices seen by the HVDC terminal: SCC, FRC and SCR."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

__all__ = ["ZeroImpedance", "ZeroDcPower", "StrengthSnapshot", "scc", "frc", "scr"]


class ZeroImpedance(ValueError):
    pass


class ZeroDcPower(ValueError):
    pass


@dataclass(frozen=True)
class StrengthSnapshot:
    t: float
    scc: float
    frc: float
    scr: float | None = None


def scc(z_dd: complex, u: float = 1.0, s_base: float = 100.0) -> float:
    """Short-circuit capacity in MVA, ``u**2 / |z_dd| * s_base``."""
    if u == 0:
        return 0.0
    mag = abs(z_dd)
    if mag == 0:
        raise ZeroImpedance("Thevenin impedance is zero")
    return u * u / mag * s_base


def frc(connected_generators: Iterable) -> float:
    """Frequency regulation capability in MW/Hz of the grid-connected units."""
    return sum(g.rated_power / g.freq_coeff for g in connected_generators)


def scr(s_sc: float, p_d: float) -> float:
    if p_d <= 0:
        raise ZeroDcPower("short-circuit ratio undefined without DC power")
    return s_sc / p_d
