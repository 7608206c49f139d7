"""LCC-HVDC inverter restoration characteristic.

Per-unit conventions for the DC side: power is per-unit of ``P_DN``, direct
current and DC voltage are per-unit of their rated values, so that
``p = U_D * I_D``.  The inverter characteristic

    p = N_r * (1.35 * E_LL * cos(gamma) * I_D - 3/pi * X_r * I_D**2)

fixes the current for a dispatched power (smaller root), and the reactive
absorption follows from ``Q_D = P_D * sqrt((U_D0 / U_D)**2 - 1)``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass

__all__ = [
    "InfeasibleDispatch",
    "NoRealRoot",
    "STARTUP_VOLTAGE",
    "STARTUP_CURRENT",
    "DcDispatch",
    "HvdcState",
    "DcPowerProfile",
    "startup_gate",
    "startup_mode_quantities",
    "converter_reactive",
    "solve_current",
    "dc_ceiling",
    "dispatch",
    "filter_output",
    "build_profile",
]

STARTUP_VOLTAGE = 0.7
STARTUP_CURRENT = 0.1


class InfeasibleDispatch(ValueError):
    pass


class NoRealRoot(ValueError):
    pass


@dataclass(frozen=True)
class DcDispatch:
    p_d: float
    q_d: float
    i_d: float
    u_d: float


@dataclass(frozen=True)
class HvdcState:
    status: str = "offline"  # offline -> charging -> started
    start_time: float | None = None
    p_d: float = 0.0
    q_d: float = 0.0
    i_d: float = 0.0
    u_d: float = 0.0
    q_filter: float = 0.0


@dataclass(frozen=True)
class DcPowerProfile:
    steps: tuple[tuple[float, float], ...]

    def ceiling_at(self, t: float) -> float:
        value = 0.0
        for time, ceiling in self.steps:
            if time <= t:
                value = ceiling
        return value


def startup_gate(snapshot, floors: tuple[float, float], node_energized: bool) -> bool:
    """True when the energized HVDC node sees enough SCC and FRC to start."""
    s_min, m_min = floors
    return bool(node_energized and snapshot.scc >= s_min and snapshot.frc >= m_min)


def converter_reactive(p_d: float, u_d: float, u_d0: float) -> float:
    """Inverter reactive absorption in MVar for ``p_d`` MW at DC voltage ``u_d``."""
    if p_d == 0:
        return 0.0
    radicand = (u_d0 / u_d) ** 2 - 1.0
    return p_d * math.sqrt(max(radicand, 0.0))


def startup_mode_quantities(term) -> DcDispatch:
    """Minimum single-pole start-up: 70 % DC voltage, 10 % direct current."""
    u, i = STARTUP_VOLTAGE, STARTUP_CURRENT
    p = u * (i * term.rated_power)
    return DcDispatch(p_d=p, q_d=converter_reactive(p, u, term.ideal_no_load_voltage), i_d=i, u_d=u)


def solve_current(term, p_d: float, ac_voltage: float = 1.0) -> float:
    """Direct current (p.u.) delivering ``p_d`` MW; the smaller positive root."""
    p = p_d / term.rated_power / term.bridges
    a = 3.0 / math.pi * term.transformer_reactance
    b = 1.35 * term.transformer_emf * ac_voltage * math.cos(math.radians(term.extinction_angle))
    if p == 0:
        return 0.0
    if a == 0:
        if b <= 0:
            raise NoRealRoot("converter delivers no power")
        return p / b
    disc = b * b - 4.0 * a * p
    if disc < 0 or b <= 0:
        raise NoRealRoot(f"no converter operating point delivers {p_d:.2f} MW")
    # stable form of (b - sqrt(disc)) / 2a
    return 2.0 * p / (b + math.sqrt(disc))


def dc_ceiling(s_sc: float, scr_floor: float = 3.0) -> float:
    """Largest DC power (MW) keeping the short-circuit ratio at ``scr_floor``."""
    if scr_floor < 3:
        raise ValueError("scr_floor must be at least 3")
    return s_sc / scr_floor


def dispatch(term, s_sc: float, started: bool, balance_cap: float = math.inf, ac_voltage: float = 1.0) -> DcDispatch:
    """Operating point of a running inverter.

    ``P_D = min(P_DN, S_sc / scr_floor, balance_cap)`` clamped from below at
    the minimum power; ``I_D``, ``U_D`` and ``Q_D`` follow from the converter
    equations at AC voltage ``ac_voltage`` (p.u.).
    """
    if not started:
        return DcDispatch(0.0, 0.0, 0.0, 0.0)
    ceiling = dc_ceiling(s_sc, term.scr_floor)
    if ceiling < term.min_power - 1e-9:
        raise InfeasibleDispatch(
            f"DC ceiling {ceiling:.2f} MW is below the minimum power {term.min_power:.2f} MW"
        )
    p = max(min(term.rated_power, ceiling, balance_cap), term.min_power)
    return operating_point(term, p, ac_voltage)


def operating_point(term, p_d: float, ac_voltage: float = 1.0) -> DcDispatch:
    """Converter quantities for a fixed DC power at the given AC voltage."""
    i = solve_current(term, p_d, ac_voltage)
    u = p_d / term.rated_power / i
    q = converter_reactive(p_d, u, term.ideal_no_load_voltage * ac_voltage)
    return DcDispatch(p_d=p_d, q_d=q, i_d=i, u_d=u)


def filter_output(term, p_d: float, q_d: float) -> float:
    """Switched filter capacity (MVar) for the current operating point.

    With an explicit ``filter_schedule`` the minimum filter is kept and each
    ``(p_d_threshold, q_mvar)`` stage is added once ``p_d`` reaches its
    threshold.  Otherwise banks of ``filter_min`` are switched in until they
    cover the converter absorption.
    """
    if p_d <= 0:
        return 0.0
    if term.filter_schedule:
        return term.filter_min + sum(q for threshold, q in term.filter_schedule if p_d >= threshold)
    banks = max(1, math.ceil(q_d / term.filter_min - 1e-12))
    return banks * term.filter_min


def build_profile(events: Iterable[tuple[float, float]]) -> DcPowerProfile:
    """Compress ``(time, ceiling)`` samples into the step function of DC ceilings.

    Samples before start-up carry a ceiling of zero.
    """
    steps: list[tuple[float, float]] = []
    for t, ceiling in sorted(events):
        if not steps:
            steps.append((t, ceiling))
        elif abs(ceiling - steps[-1][1]) > 1e-9:
            steps.append((t, ceiling))
    if not steps:
        steps.append((0.0, 0.0))
    return DcPowerProfile(tuple(steps))
