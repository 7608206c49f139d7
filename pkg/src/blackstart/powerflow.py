"""AC-DC power flow of the energized subnetwork and operating-limit checks.

The AC network is solved by a dense Newton-Raphson iteration in polar
coordinates (flat start).  The HVDC inverter enters as a P/Q injection at its
node; its reactive absorption depends on the AC voltage, so the AC solve and
the converter update alternate until the absorption settles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import CONVERGED, newton_kernel
from .hvdc import NoRealRoot, operating_point

__all__ = [
    "Diverged",
    "HvdcInjection",
    "OperatingPoint",
    "PowerFlowSolution",
    "RestorationState",
    "Violation",
    "LimitReport",
    "build_ybus",
    "newton_pf",
    "solve_acdc",
    "check_limits",
]

LIMIT_TOL = 1e-6


class Diverged(RuntimeError):
    pass


@dataclass(frozen=True)
class HvdcInjection:
    node: int
    p_d: float
    q_filter: float
    q_d: float


@dataclass(frozen=True)
class OperatingPoint:
    """Energized subnetwork with its scheduled injections.

    ``gen_p`` holds the scheduled active power (MW) of every grid-connected
    generator except those at the slack node, which balance the network.
    Loads (MW, MVar) include auxiliary cranking demand and converter-station
    losses.
    """

    buses: tuple[int, ...]
    branches: tuple[int, ...]
    slack: int
    slack_gens: tuple[int, ...]
    gen_p: dict[int, float] = field(default_factory=dict)
    load_p: dict[int, float] = field(default_factory=dict)
    load_q: dict[int, float] = field(default_factory=dict)
    hvdc: HvdcInjection | None = None


@dataclass(frozen=True)
class PowerFlowSolution:
    voltage: dict[int, float]
    angle: dict[int, float]
    branch_flow: dict[int, float]
    branch_flow_to: dict[int, float]
    gen_p: dict[int, float]
    gen_q: dict[int, float]
    slack_p: float
    slack_q: float
    converged: bool
    iterations: int
    inner_iterations: int
    max_mismatch: float
    losses: float
    balance_residual: float
    hvdc_q_d: float = 0.0
    hvdc_q_filter: float = 0.0


def build_ybus(model, buses, branches) -> np.ndarray:
    """Dense nodal admittance matrix (p.u.) over ``buses`` with pi-model branches."""
    index = {b: k for k, b in enumerate(buses)}
    n = len(buses)
    y = np.zeros((n, n), dtype=complex)
    base = model.params.s_base
    for bid in branches:
        br = model.branch(bid)
        i, j = index[br.endpoints[0]], index[br.endpoints[1]]
        ys = 1.0 / br.impedance
        ysh = 0.5j * br.charging_reactive / base
        y[i, i] += ys + ysh
        y[j, j] += ys + ysh
        y[i, j] -= ys
        y[j, i] -= ys
    return y


def newton_pf(y, s, v0, ref, pv, pq, tol=1e-9, max_it=20):
    """Newton-Raphson AC power flow.

    Parameters
    ----------
    y : ndarray
        Dense admittance matrix.
    s : ndarray
        Specified complex injections (p.u.); entries of the slack bus and the
        reactive part of PV buses are ignored.
    v0 : ndarray
        Initial complex voltages; magnitudes of slack and PV buses are kept.
    ref, pv, pq : array_like of int
        Bus indices by type.

    Returns
    -------
    v : ndarray
        Complex voltages.
    converged : bool
    iterations : int
        Number of Newton corrections applied.
    max_mismatch : float
    """
    pv = np.asarray(pv, dtype=np.int64)
    pq = np.asarray(pq, dtype=np.int64)
    pvpq = np.concatenate([pv, pq])
    v = np.array(v0, dtype=np.complex128)
    status, it, norm = newton_kernel(
        np.ascontiguousarray(y, dtype=np.complex128), np.asarray(s, dtype=np.complex128), v, pvpq, pq, float(tol), int(max_it)
    )
    return v, status == CONVERGED, int(it), float(norm)


def solve_acdc(
    model, point: OperatingPoint, *, tol=1e-9, max_inner=20, max_outer=50, q_tol=0.1, initial: PowerFlowSolution | None = None
) -> PowerFlowSolution:
    """Solve the AC-DC power flow of an energized subnetwork by alternating iteration.

    Each outer pass solves the AC network with the inverter injection
    ``P_D + j(Q_filter - Q_D)`` held fixed, then recomputes ``Q_D`` from the
    converter equations at the solved AC voltage of the HVDC node.  Stops when
    ``Q_D`` moves less than ``q_tol`` MVar.  The AC iteration starts flat
    unless ``initial`` supplies a previous solution of the same network, whose
    voltages and converter absorption are then reused.

    Raises
    ------
    Diverged
        The AC iteration fails to converge or the outer loop reaches
        ``max_outer`` passes.
    """
    base = model.params.s_base
    buses = point.buses
    index = {b: k for k, b in enumerate(buses)}
    n = len(buses)
    y = build_ybus(model, buses, point.branches)

    s = np.zeros(n, dtype=complex)
    for node, p in point.load_p.items():
        s[index[node]] -= p / base
    for node, q in point.load_q.items():
        s[index[node]] -= 1j * q / base
    pv_nodes: set[int] = set()
    for gid, p in point.gen_p.items():
        g = model.generator(gid)
        s[index[g.node]] += p / base
        if g.node != point.slack:
            pv_nodes.add(g.node)
    ref = [index[point.slack]]
    pv = sorted(index[b] for b in pv_nodes)
    pq = [k for k in range(n) if k != ref[0] and k not in pv]

    hv = point.hvdc
    q_d = hv.q_d if hv is not None else 0.0
    if initial is not None and hv is not None and initial.hvdc_q_d > 0:
        q_d = initial.hvdc_q_d
    d = index[hv.node] if hv is not None else None
    term = model.hvdc

    # flat start at the units' terminal voltage setpoints
    v = np.ones(n, dtype=complex)
    if initial is not None:
        for b, k in index.items():
            if b in initial.voltage:
                v[k] = initial.voltage[b] * np.exp(1j * initial.angle[b])
    for gid in list(point.gen_p) + list(point.slack_gens):
        g = model.generator(gid)
        k = index[g.node]
        v[k] = g.voltage_setpoint * v[k] / abs(v[k])
    inner_total = 0
    outer = 0
    while True:
        outer += 1
        s_iter = s.copy()
        if hv is not None:
            s_iter[d] += (hv.p_d + 1j * (hv.q_filter - q_d)) / base
        v, ok, it, norm = newton_pf(y, s_iter, v, ref, pv, pq, tol=tol, max_it=max_inner)
        inner_total += it
        if not ok:
            raise Diverged(f"AC power flow did not converge (mismatch {norm:.3g} p.u.)")
        if hv is None or hv.p_d <= 0:
            break
        try:
            q_new = operating_point(term, hv.p_d, abs(v[d])).q_d
        except NoRealRoot:
            raise Diverged(f"converter cannot deliver {hv.p_d:.2f} MW at {abs(v[d]):.3f} p.u. AC voltage") from None
        if abs(q_new - q_d) < q_tol:
            break
        if outer >= max_outer:
            raise Diverged("alternating AC-DC iteration did not settle")
        q_d = q_new
    s_spec = s_iter

    s_calc = v * np.conj(y @ v)
    mismatch_vec = s_calc - s_spec
    pvpq = np.array(pv + pq, dtype=int)
    mism = np.concatenate([mismatch_vec[pvpq].real, mismatch_vec[np.array(pq, dtype=int)].imag])
    max_mis = float(np.max(np.abs(mism))) if mism.size else 0.0

    bids = point.branches
    brs = [model.branch(b) for b in bids]
    fi = np.array([index[br.endpoints[0]] for br in brs], dtype=int)
    ti = np.array([index[br.endpoints[1]] for br in brs], dtype=int)
    ys = 1.0 / np.array([br.impedance for br in brs], dtype=complex)
    ysh = 0.5j * np.array([br.charging_reactive for br in brs]) / base
    vf, vt = v[fi], v[ti]
    p_ij = (vf * np.conj((vf - vt) * ys + vf * ysh)).real
    p_ji = (vt * np.conj((vt - vf) * ys + vt * ysh)).real
    flows = dict(zip(bids, (p_ij * base).tolist()))
    flows_to = dict(zip(bids, (p_ji * base).tolist()))
    losses = float(np.sum(p_ij + p_ji))

    # generator outputs: slack balances its bus, PV buses supply their reactive need
    net = s_calc  # injection at every bus
    gen_p = dict(point.gen_p)
    gen_q: dict[int, float] = {}
    k_ref = ref[0]
    slack_p = (net[k_ref].real - s_spec[k_ref].real) * base
    slack_q = (net[k_ref].imag - s_spec[k_ref].imag) * base
    at_node: dict[int, list[int]] = {}
    for gid in list(point.gen_p) + list(point.slack_gens):
        at_node.setdefault(model.generator(gid).node, []).append(gid)
    for node, gids in at_node.items():
        k = index[node]
        q_need = (net[k].imag - s_spec[k].imag) * base
        caps = [model.generator(g).rated_capacity for g in gids]
        total = sum(caps)
        for g, c in zip(gids, caps):
            gen_q[g] = q_need * c / total
        if node == point.slack:
            extra = slack_p
            slack_caps = [model.generator(g).rated_capacity for g in point.slack_gens]
            st = sum(slack_caps) or 1.0
            for g, c in zip(point.slack_gens, slack_caps):
                gen_p[g] = extra * c / st

    # specified injections everywhere (loads only at the slack bus) plus slack generation
    residual = float(np.sum(s_spec.real)) + slack_p / base - losses

    return PowerFlowSolution(
        voltage=dict(zip(buses, np.abs(v).tolist())),
        angle=dict(zip(buses, (np.angle(v) - np.angle(v[k_ref])).tolist())),
        branch_flow=flows,
        branch_flow_to=flows_to,
        gen_p=gen_p,
        gen_q=gen_q,
        slack_p=float(slack_p),
        slack_q=float(slack_q),
        converged=True,
        iterations=outer,
        inner_iterations=inner_total,
        max_mismatch=max_mis,
        losses=float(losses * base),
        balance_residual=float(residual),
        hvdc_q_d=q_d if hv is not None else 0.0,
        hvdc_q_filter=hv.q_filter if hv is not None else 0.0,
    )


# --------------------------------------------------------------------------
# operating limits


@dataclass(frozen=True)
class RestorationState:
    """Restoration quantities at one instant, as needed by the limit checks.

    ``gen_output`` is the ramp capability ``P_G(t)`` of each grid-connected
    unit, ``started`` maps every started unit to its start-up time.
    """

    time: float
    energized: frozenset[int]
    restored: tuple[int, ...]
    started: dict[int, float]
    connected: frozenset[int]
    gen_output: dict[int, float]
    restored_load_p: dict[int, float]
    restored_load_q: dict[int, float]
    p_d: float = 0.0
    q_d: float = 0.0
    q_filter: float = 0.0
    hvdc_started: bool = False


@dataclass(frozen=True)
class Violation:
    constraint: str
    entity: str
    value: float
    bound: float

    def __str__(self) -> str:
        return f"{self.constraint} {self.entity}: {self.value:.4g} vs bound {self.bound:.4g}"


@dataclass(frozen=True)
class LimitReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def constraints(self) -> set[str]:
        return {v.constraint for v in self.violations}

    def __bool__(self) -> bool:
        return bool(self.violations)

    def __str__(self) -> str:
        return "; ".join(str(v) for v in self.violations) or "feasible"


def supply_margin(model, state: RestorationState) -> float:
    """Active-power surplus of the restored sources over the restored load (MW)."""
    station = model.hvdc.station_loss if (state.hvdc_started and model.hvdc is not None) else 0.0
    supply = state.p_d - station
    supply += sum(state.gen_output.get(g, 0.0) for g in state.connected)
    supply -= sum(model.generator(g).cranking_power for g in state.started)
    return supply - sum(state.restored_load_p.values())


def reactive_balance(model, state: RestorationState, q_d: float | None = None) -> tuple[float, float]:
    """Left and right sides of the restored-grid reactive-power limit (MVar)."""
    q_d = state.q_d if q_d is None else q_d
    lhs = sum(model.branch(b).charging_reactive for b in state.restored)
    lhs -= sum(state.restored_load_q.values())
    lhs += state.q_filter - q_d
    gens = [model.generator(g) for g in state.connected]
    rhs = min(sum(g.max_absorb for g in gens), sum(g.scr_coeff * g.rated_capacity for g in gens))
    return lhs, rhs


def check_limits(solution: PowerFlowSolution | None, model, state: RestorationState) -> LimitReport:
    """Evaluate the operating constraints at one restoration instant.

    State-only constraints (start-up windows, active supply, reactive limit)
    are always checked; generator, branch-flow and voltage limits need a
    power-flow ``solution``.  Violations are returned, never raised.
    """
    out: list[Violation] = []
    tol = LIMIT_TOL

    if solution is not None:
        for gid in sorted(state.connected):
            g = model.generator(gid)
            p = solution.gen_p.get(gid, 0.0)
            lo, hi = g.active_limits
            if p < lo - 1e-3:
                out.append(Violation("gen_active", f"generator {gid}", p, lo))
            elif p > hi + 1e-3:
                out.append(Violation("gen_active", f"generator {gid}", p, hi))
            q = solution.gen_q.get(gid, 0.0)
            lo, hi = g.reactive_limits
            if q < lo - 1e-3:
                out.append(Violation("gen_reactive", f"generator {gid}", q, lo))
            elif q > hi + 1e-3:
                out.append(Violation("gen_reactive", f"generator {gid}", q, hi))

    for gid, ts in sorted(state.started.items()):
        g = model.generator(gid)
        if g.is_black_start:
            continue
        hot, cold = g.hot_start_deadline, g.cold_start_earliest
        if hot is not None and cold is not None:
            if hot < ts < cold:
                out.append(Violation("startup_window", f"generator {gid}", ts, hot))
        elif hot is not None and ts > hot:
            out.append(Violation("startup_window", f"generator {gid}", ts, hot))
        elif cold is not None and ts < cold:
            out.append(Violation("startup_window", f"generator {gid}", ts, cold))

    margin = supply_margin(model, state)
    if margin < -tol:
        out.append(Violation("active_supply", "restored grid", margin, 0.0))

    lhs, rhs = reactive_balance(model, state, solution.hvdc_q_d if solution is not None and state.hvdc_started else None)
    if lhs > rhs + tol:
        out.append(Violation("reactive_absorb", "restored grid", lhs, rhs))

    if solution is not None:
        for bid in state.restored:
            lo, hi = model.branch(bid).flow_limits
            p = solution.branch_flow[bid]
            if p < lo - tol:
                out.append(Violation("branch_flow", f"branch {bid}", p, lo))
            elif p > hi + tol:
                out.append(Violation("branch_flow", f"branch {bid}", p, hi))
        for node in sorted(state.energized):
            lo, hi = model.node(node).voltage_limits
            u = solution.voltage[node]
            if u < lo - tol:
                out.append(Violation("voltage", f"node {node}", u, lo))
            elif u > hi + tol:
                out.append(Violation("voltage", f"node {node}", u, hi))

    return LimitReport(tuple(out))
