"""Time-stepped decoding of a restoration scheme.

A single restoration crew works through the scheme's branch order.  Each
branch takes its ``restore_duration``; when a branch energizes a source node
the crew holds while the unit starts and synchronizes (generators) or while
the converter station charges (HVDC).  Once charged, the HVDC connects at the
first instant its start-up gate passes and from then on delivers
``min(P_DN, S_sc / scr_floor)``.

Load pick-up follows supply: the restored load is the active-power surplus
of the connected sources (ramp capability, DC power, minus cranking and
station demand), capped by the peak load of the energized nodes and spread
over them in proportion to their peak.  When energized load is the binding
cap, AC units are scaled back in the power flow; the objective keeps their
ramp capability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .hvdc import (
    DcDispatch,
    HvdcState,
    InfeasibleDispatch,
    NoRealRoot,
    build_profile,
    dispatch,
    filter_output,
    startup_gate,
    startup_mode_quantities,
)
from .grid_model import GridModel, derive_floors
from .impedance import ImpedanceMatrix, add_link_grounded, add_link_ungrounded, add_tree_branch, init_with_source, thevenin
from .powerflow import (
    Diverged,
    HvdcInjection,
    LimitReport,
    OperatingPoint,
    PowerFlowSolution,
    RestorationState,
    Violation,
    check_limits,
    solve_acdc,
)
from .strength import StrengthSnapshot, scc

__all__ = [
    "SchemeError",
    "InfeasibleScheme",
    "Unreachable",
    "RestorationScheme",
    "Step",
    "Timeline",
    "ramp_power",
    "simulate",
    "trajectory",
    "verify_power_flow",
    "StepCache",
    "operating_point_of",
    "startup_deviation",
    "validate_scheme",
    "stage_table",
]


class SchemeError(ValueError):
    """Structurally invalid scheme (unknown or repeated branch, disconnected order)."""


class InfeasibleScheme(Exception):
    def __init__(self, message: str, report: LimitReport | None = None, timeline: Timeline | None = None):
        super().__init__(message)
        self.report = report
        self.timeline = timeline


class Unreachable(InfeasibleScheme):
    """Some source node is never energized by the scheme."""


@dataclass(frozen=True)
class RestorationScheme:
    """Branch restoration order plus the loop-closing branches it includes."""

    order: tuple[int, ...]
    include_link: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(b) for b in self.order))
        object.__setattr__(self, "include_link", frozenset(int(b) for b in self.include_link))

    @property
    def key(self) -> tuple:
        return (self.order, tuple(sorted(self.include_link)))

    def to_dict(self) -> dict:
        return {"order": list(self.order), "include_link": sorted(self.include_link)}

    @classmethod
    def from_dict(cls, doc: dict) -> RestorationScheme:
        try:
            order = doc["order"]
        except (KeyError, TypeError):
            raise SchemeError("scheme document needs an 'order' list") from None
        return cls(tuple(order), frozenset(doc.get("include_link", ())))


@dataclass(frozen=True)
class Step:
    t: float
    state: RestorationState
    hvdc: HvdcState
    strength: StrengthSnapshot
    restored_load: float
    limits: LimitReport
    power_flow: PowerFlowSolution | None = None

    @property
    def energized(self) -> frozenset[int]:
        return self.state.energized

    @property
    def restored(self) -> tuple[int, ...]:
        return self.state.restored

    @property
    def gen_output(self) -> dict[int, float]:
        return self.state.gen_output

    @property
    def sum_p(self) -> float:
        return sum(self.state.gen_output.values()) + self.hvdc.p_d


@dataclass(frozen=True)
class Timeline:
    scheme: RestorationScheme
    steps: tuple[Step, ...]
    total_time: float
    objective: float
    gen_start: dict[int, float]
    gen_connect: dict[int, float]
    gen_rated: dict[int, float]
    branch_time: dict[int, float]
    loop_branches: tuple[int, ...]
    hvdc_energized: float | None = None
    hvdc_start: float | None = None
    startup_dev: tuple[float, float] | None = None
    power_flow_checked: bool = False
    complete: bool = True
    floors: tuple[float, float] = (0.0, 0.0)
    scr_floor: float = 3.0

    @property
    def feasible(self) -> bool:
        return self.complete and all(s.limits.ok for s in self.steps)

    @property
    def report(self) -> LimitReport:
        """Violations of the first infeasible step (empty when feasible)."""
        for s in self.steps:
            if not s.limits.ok:
                return s.limits
        return LimitReport()

    @property
    def first_violation_time(self) -> float | None:
        for s in self.steps:
            if not s.limits.ok:
                return s.t
        return None

    @property
    def final_p_d(self) -> float:
        return self.steps[-1].hvdc.p_d if self.steps else 0.0

    def profile(self):
        """Step function of DC power ceilings."""
        return build_profile(
            (s.t, s.strength.scc / self.scr_floor if s.hvdc.status == "started" else 0.0) for s in self.steps
        )


def ramp_power(gen, t: float, t_connect: float | None) -> float:
    """Active output (MW) of a unit grid-connected at ``t_connect``.

    Zero before connection, then linear at the ramp rate until rated power.
    """
    if t_connect is None or t < t_connect:
        return 0.0
    return min(gen.rated_power, gen.ramp_rate / 60.0 * (t - t_connect))


def startup_deviation(model: GridModel, z_dd: complex, m_f: float, u: float = 1.0) -> tuple[float, float]:
    """Voltage (p.u.) and frequency (Hz) deviation caused by the HVDC start-up.

    The voltage step is the net reactive step of the committed minimum filter
    against the converter's start-up absorption through the Thevenin
    impedance; the frequency step is the start-up power over twice the FRC.
    """
    term = model.hvdc
    start = startup_mode_quantities(term)
    dq = abs(term.filter_min - start.q_d) / model.params.s_base
    du = dq * abs(z_dd) / u
    df = math.inf if m_f <= 0 else start.p_d / (2.0 * m_f)
    return du, df


def validate_scheme(model: GridModel, scheme: RestorationScheme) -> None:
    seen = set()
    for b in scheme.order:
        if b in seen:
            raise SchemeError(f"branch {b} appears twice in the order")
        seen.add(b)
        try:
            model.branch(b)
        except KeyError:
            raise SchemeError(f"unknown branch {b}") from None


@dataclass
class _Plan:
    events: list  # (time, kind, payload)
    gen_start: dict
    gen_connect: dict
    branch_time: dict
    loop_branches: list
    hvdc_energized: float | None
    hvdc_charged: float | None
    energize_order: list


def _plan(model: GridModel, scheme: RestorationScheme) -> _Plan:
    """Crew schedule: completion time of every branch and source event."""
    validate_scheme(model, scheme)
    energized: set[int] = set()
    order_nodes: list[int] = []
    gen_start: dict[int, float] = {}
    gen_connect: dict[int, float] = {}
    events: list = []
    hv = model.hvdc
    hv_times = [None, None]

    def energize(node: int, t: float) -> float:
        energized.add(node)
        order_nodes.append((t, node))
        free = t
        for g in model.generators_at(node):
            if g.id not in gen_start:
                gen_start[g.id] = t
                gen_connect[g.id] = t + g.connect_duration
                events.append((t + g.connect_duration, 1, g.id))
                free = max(free, t + g.connect_duration)
        if hv is not None and node == hv.node:
            hv_times[0] = t
            hv_times[1] = t + hv.connect_duration
            free = max(free, t + hv.connect_duration)
        return free

    bs = model.black_start
    free = energize(bs.node, 0.0)
    branch_time: dict[int, float] = {}
    loops: list[int] = []
    for b in scheme.order:
        br = model.branch(b)
        i, j = br.endpoints
        ei, ej = i in energized, j in energized
        if not (ei or ej):
            raise SchemeError(f"branch {b} ({i}-{j}) is restored before either end is energized")
        done = free + br.restore_duration
        branch_time[b] = done
        free = done
        if ei and ej:
            loops.append(b)
            events.append((done, 0, (b, None)))
        else:
            new = j if ei else i
            events.append((done, 0, (b, new)))
            free = energize(new, done)
    missing = [n for n in model.source_nodes if n not in energized]
    if missing:
        raise Unreachable(f"scheme never energizes source node(s) {missing}")
    # stable sort keeps crew order for simultaneous events
    events.sort(key=lambda e: e[0])
    return _Plan(events, gen_start, gen_connect, branch_time, loops, hv_times[0], hv_times[1], order_nodes)


def _integrate(times, values) -> float:
    total = 0.0
    for k in range(len(times) - 1):
        total += 0.5 * (values[k] + values[k + 1]) * (times[k + 1] - times[k])
    return total


def _objective(model, plan, p_d_samples, total_time) -> float:
    """Negative mean supplied power over ``[0, T]``, by trapezoidal integration.

    Ramps are sampled at every kink (connection and rated-power instants) and
    the DC power is a right-continuous step function, so the trapezoid rule
    is exact.
    """
    if total_time <= 0:
        return 0.0
    energy = 0.0
    for gid, tc in plan.gen_connect.items():
        g = model.generator(gid)
        kinks = {0.0, total_time}
        for t in (tc, tc + g.ramp_minutes):
            if 0.0 < t < total_time:
                kinks.add(t)
        times = sorted(kinks)
        energy += _integrate(times, [ramp_power(g, t, tc) for t in times])
    # duplicate breakpoints at jumps of the DC step function
    times, values = [], []
    for k, (t, p) in enumerate(p_d_samples):
        if t >= total_time:
            break
        if times:
            times.append(t)
            values.append(values[-1])
        times.append(t)
        values.append(p)
    if times:
        times.append(total_time)
        values.append(values[-1])
        energy += _integrate(times, values)
    return -energy / total_time


_NO_DC = DcDispatch(0.0, 0.0, 0.0, 0.0)
_OK = LimitReport()


def trajectory(model: GridModel, scheme: RestorationScheme, *, stop_on_violation: bool = False) -> Timeline:
    """Decode ``scheme`` into a timeline without solving the power flow.

    Only state-based limits (start-up windows, active supply, reactive
    limit at nominal voltage, DC dispatch) are checked here.
    """
    plan = _plan(model, scheme)
    params = model.params
    dt = params.time_step
    floors = derive_floors(model)
    term = model.hvdc
    d = term.node if term is not None else None
    bs = model.black_start

    last = max([e[0] for e in plan.events] + [plan.hvdc_charged or 0.0, 0.0])
    n_grid = int(math.ceil(last / dt - 1e-9))
    times = {round(k * dt, 9) for k in range(n_grid + 1)}
    times.update(round(e[0], 9) for e in plan.events)
    if plan.hvdc_charged is not None:
        times.add(round(plan.hvdc_charged, 9))
    times = sorted(times)

    z = init_with_source(bs.node, complex(0.0, bs.transient_reactance))
    connected: set[int] = set()
    restored: list[int] = []
    energized: list[int] = []
    energize_iter = iter(plan.energize_order)
    pending_energize = next(energize_iter, None)
    start_iter = iter(sorted(plan.gen_start.items(), key=lambda kv: (kv[1], kv[0])))
    pending_start = next(start_iter, None)
    ev = 0
    n_ev = len(plan.events)

    # running totals, updated as events occur
    started: dict[int, float] = {}
    cranking = 0.0
    window_bad = False
    m_f = 0.0
    absorb = 0.0
    kcb = 0.0
    charging = 0.0
    peak = 0.0
    peak_q = 0.0
    energized_set = frozenset()
    node_loads: list[tuple[int, float, float]] = []
    restored_tuple: tuple[int, ...] = ()
    connected_set = frozenset()
    gens_on: list = []
    tol = 1e-6

    hv_started_at: float | None = None
    dev: tuple[float, float] | None = None
    steps: list[Step] = []
    p_d_samples: list[tuple[float, float]] = []
    complete = True

    for t in times:
        changed = False
        while ev < n_ev and plan.events[ev][0] <= t + 1e-9:
            _, kind, payload = plan.events[ev]
            ev += 1
            changed = True
            if kind == 0:
                b, new = payload
                br = model.branch(b)
                i, j = br.endpoints
                restored.append(b)
                charging += br.charging_reactive
                # strength indices use the branch reactance only: with a
                # common (zero) R/X ratio every loop closure lowers |z_dd|
                x = complex(0.0, br.impedance.imag)
                if new is None:
                    z = add_link_ungrounded(z, i, j, x)
                else:
                    z = add_tree_branch(z, br.other(new), new, x)
            else:
                g = model.generator(payload)
                connected.add(payload)
                m_f += g.rated_power / g.freq_coeff
                absorb += g.max_absorb
                kcb += g.scr_coeff * g.rated_capacity
                if payload != bs.id:
                    z = add_link_grounded(z, g.node, complex(0.0, g.transient_reactance))
        while pending_energize is not None and pending_energize[0] <= t + 1e-9:
            node = model.node(pending_energize[1])
            energized.append(node.id)
            node_loads.append((node.id, node.load[0], node.load[1]))
            peak += node.load[0]
            peak_q += node.load[1]
            pending_energize = next(energize_iter, None)
            changed = True
        while pending_start is not None and pending_start[1] <= t + 1e-9:
            gid, ts = pending_start
            g = model.generator(gid)
            started[gid] = ts
            cranking += g.cranking_power
            if not g.is_black_start:
                hot, cold = g.hot_start_deadline, g.cold_start_earliest
                if hot is not None and cold is not None:
                    window_bad |= hot < ts < cold
                elif hot is not None:
                    window_bad |= ts > hot
                elif cold is not None:
                    window_bad |= ts < cold
            pending_start = next(start_iter, None)
        if changed or not steps:
            energized_set = frozenset(energized)
            restored_tuple = tuple(restored)
            connected_set = frozenset(connected)
            gens_on = [model.generator(g) for g in sorted(connected)]
            z_dd = thevenin(z, d) if d is not None and d in z else None
            s_sc = scc(z_dd, 1.0, params.s_base) if z_dd is not None else 0.0

        if (
            term is not None
            and hv_started_at is None
            and plan.hvdc_energized is not None
            and t >= plan.hvdc_charged - 1e-9
            and startup_gate(StrengthSnapshot(t, s_sc, m_f), floors, z_dd is not None)
        ):
            hv_started_at = t
            dev = startup_deviation(model, z_dd, m_f)

        gen_output = {g.id: ramp_power(g, t, plan.gen_connect[g.id]) for g in gens_on}

        violations: list[Violation] = []
        dc = _NO_DC
        q_filter = 0.0
        station = 0.0
        if hv_started_at is not None:
            station = term.station_loss
            try:
                dc = dispatch(term, s_sc, True, balance_cap=peak + cranking + station)
            except (InfeasibleDispatch, NoRealRoot):
                violations.append(Violation("dc_power", "hvdc", s_sc / term.scr_floor, term.min_power))
            q_filter = filter_output(term, dc.p_d, dc.q_d)
            status = "started"
        elif plan.hvdc_energized is not None and t >= plan.hvdc_energized - 1e-9:
            status = "charging"
        else:
            status = "offline"

        supply = dc.p_d - station + sum(gen_output.values()) - cranking
        load = min(max(supply, 0.0), peak)
        frac = load / peak if peak > 0 else 0.0
        load_p = {n: p * frac for n, p, _ in node_loads}
        load_q = {n: q * frac for n, _, q in node_loads}

        state = RestorationState(
            time=t,
            energized=energized_set,
            restored=restored_tuple,
            started=dict(started),
            connected=connected_set,
            gen_output=gen_output,
            restored_load_p=load_p,
            restored_load_q=load_q,
            p_d=dc.p_d,
            q_d=dc.q_d,
            q_filter=q_filter,
            hvdc_started=hv_started_at is not None,
        )
        # inline screening of the state-based limits; the full report only when needed
        q_lhs = charging - peak_q * frac + q_filter - dc.q_d
        if violations or window_bad or supply - load < -tol or q_lhs > min(absorb, kcb) + tol:
            report = check_limits(None, model, state)
            if violations:
                report = LimitReport(tuple(violations) + report.violations)
        else:
            report = _OK
        hv_state = HvdcState(
            status=status,
            start_time=hv_started_at,
            p_d=dc.p_d,
            q_d=dc.q_d,
            i_d=dc.i_d,
            u_d=dc.u_d,
            q_filter=q_filter,
        )
        snap = StrengthSnapshot(t, s_sc, m_f, s_sc / dc.p_d if dc.p_d > 0 else None)
        steps.append(Step(t, state, hv_state, snap, load, report))
        p_d_samples.append((t, dc.p_d))
        if stop_on_violation and not report.ok:
            complete = False
            break

    connects = list(plan.gen_connect.values())
    if hv_started_at is not None:
        connects.append(hv_started_at)
    total_time = max(connects) if connects else 0.0
    objective = _objective(model, plan, p_d_samples, total_time)
    gen_rated = {gid: tc + model.generator(gid).ramp_minutes for gid, tc in plan.gen_connect.items()}
    return Timeline(
        scheme=scheme,
        steps=tuple(steps),
        total_time=total_time,
        objective=objective,
        gen_start=dict(plan.gen_start),
        gen_connect=dict(plan.gen_connect),
        gen_rated=gen_rated,
        branch_time=dict(plan.branch_time),
        loop_branches=tuple(plan.loop_branches),
        hvdc_energized=plan.hvdc_energized,
        hvdc_start=hv_started_at,
        startup_dev=dev,
        complete=complete,
        floors=floors,
        scr_floor=term.scr_floor if term is not None else 3.0,
    )


def operating_point_of(model: GridModel, state: RestorationState) -> OperatingPoint:
    """Power-flow injections for a restoration state.

    AC units share the load not covered by DC power in proportion to their
    ramp capability; units at the black-start node take the slack.
    """
    bs = model.black_start
    term = model.hvdc
    station = term.station_loss if (state.hvdc_started and term is not None) else 0.0
    cranking = {}
    for gid in state.started:
        g = model.generator(gid)
        if g.cranking_power:
            cranking[g.node] = cranking.get(g.node, 0.0) + g.cranking_power
    load_p = dict(state.restored_load_p)
    load_q = dict(state.restored_load_q)
    for node, p in cranking.items():
        load_p[node] = load_p.get(node, 0.0) + p
    if station:
        load_p[term.node] = load_p.get(term.node, 0.0) + station

    target = sum(load_p.values()) - state.p_d
    capability = sum(state.gen_output.values())
    scale = target / capability if capability > 0 else 0.0
    scale = min(max(scale, 0.0), 1.0)
    gen_p = {}
    slack_gens = []
    for gid in sorted(state.connected):
        g = model.generator(gid)
        if g.node == bs.node:
            slack_gens.append(gid)
        else:
            gen_p[gid] = state.gen_output.get(gid, 0.0) * scale
    hv = None
    if state.hvdc_started and state.p_d > 0:
        hv = HvdcInjection(term.node, state.p_d, state.q_filter, state.q_d)
    buses = tuple(sorted(state.energized))
    return OperatingPoint(
        buses=buses,
        branches=tuple(state.restored),
        slack=bs.node,
        slack_gens=tuple(slack_gens),
        gen_p=gen_p,
        load_p=load_p,
        load_q=load_q,
        hvdc=hv,
    )


def _with_load(model: GridModel, state: RestorationState, load: float) -> RestorationState:
    peak = sum(model.node(n).load[0] for n in state.energized)
    frac = load / peak if peak > 0 else 0.0
    return replace(
        state,
        restored_load_p={n: model.node(n).load[0] * frac for n in state.energized},
        restored_load_q={n: model.node(n).load[1] * frac for n in state.energized},
    )


def _min_load(model: GridModel, state: RestorationState) -> float:
    """Smallest load that still absorbs the DC infeed with AC units idle."""
    if not state.hvdc_started:
        return 0.0
    cranking = sum(model.generator(g).cranking_power for g in state.started)
    return max(0.0, state.p_d - model.hvdc.station_loss - cranking)


def _evaluate(model, state, initial=None):
    point = operating_point_of(model, state)
    try:
        sol = solve_acdc(model, point, initial=initial)
    except Diverged:
        return None, LimitReport((Violation("power_flow", f"power flow at t={state.time:g}", math.nan, 0.0),))
    return sol, check_limits(sol, model, state)


def _load_direction(report: LimitReport) -> int:
    """+1 when the violations call for less load, -1 for more, 0 when mixed or unfixable."""
    less = more = False
    for v in report.violations:
        if v.constraint in ("dc_power", "startup_window"):
            return 0
        if v.constraint in ("active_supply", "power_flow", "branch_flow") or (v.constraint == "voltage" and v.value < v.bound):
            less = True
        elif v.constraint in ("gen_active", "gen_reactive"):
            if v.value > v.bound:
                less = True
            else:
                more = True
        else:  # overvoltage, reactive surplus
            more = True
    if less and not more:
        return 1
    if more and not less:
        return -1
    return 0


def _pickup(model: GridModel, step: Step, bisections: int = 4):
    """Largest restored load the network carries at this step.

    The supply-limited load of the trajectory is tried first.  When the
    power flow says it is too much, the pickup is bisected down towards the
    least load that still absorbs the DC infeed.  Violations that more load
    would cure (line-charging overvoltage) fail the step directly, since the
    load cannot exceed the supply.
    """
    hi = step.restored_load
    sol, report = _evaluate(model, step.state)
    if report.ok:
        return sol, report, step.state, hi
    lo = min(_min_load(model, step.state), hi)
    if hi - lo < 1e-6 or _load_direction(report) != 1:
        return sol, report, step.state, hi
    best = None
    top = hi
    for k in range(bisections + 1):
        load = lo if k == 0 else 0.5 * (lo + top)
        state = _with_load(model, step.state, load)
        cand_sol, cand_report = _evaluate(model, state, best[0] if best else None)
        if cand_report.ok:
            best = (cand_sol, cand_report, state, load)
            lo = load
        elif k == 0:
            # even the least load fails; only an overvoltage window could remain above it
            if _load_direction(cand_report) != -1:
                return sol, report, step.state, hi
        elif _load_direction(cand_report) == -1:
            lo = load
        else:
            top = load
    if best is None:
        return sol, report, step.state, hi
    return best


class StepCache:
    """Bounded memo of power-flow results keyed on the restoration state.

    Schemes sharing a prefix reach identical states; their steps are solved
    once.
    """

    def __init__(self, max_entries: int = 20000):
        self.max_entries = max_entries
        self._data: dict = {}
        self.hits = 0

    @staticmethod
    def key(step: Step) -> tuple:
        st = step.state
        return (
            step.t,
            frozenset(st.restored),
            tuple(sorted(st.gen_output.items())),
            tuple(sorted(st.started.items())),
            st.p_d,
            st.q_filter,
            st.hvdc_started,
            step.restored_load,
        )

    def get(self, key):
        hit = self._data.get(key)
        if hit is not None:
            self.hits += 1
        return hit

    def put(self, key, value) -> None:
        if len(self._data) >= self.max_entries:
            self._data.pop(next(iter(self._data)))
        self._data[key] = value


def verify_power_flow(
    model: GridModel, timeline: Timeline, *, stop_on_violation: bool = False, cache: StepCache | None = None
) -> Timeline:
    """Solve the AC-DC power flow at every step and merge the limit reports.

    Where the supply-limited load cannot be carried, the step's restored
    load is reduced to what the network supports.
    """
    steps = []
    complete = timeline.complete
    for step in timeline.steps:
        extra = tuple(v for v in step.limits.violations if v.constraint in ("dc_power", "startup_window"))
        if cache is not None:
            key = cache.key(step)
            found = cache.get(key)
            if found is None:
                found = _pickup(model, step)
                cache.put(key, found)
            sol, report, state, load = found
        else:
            sol, report, state, load = _pickup(model, step)
        if extra:
            seen = {(v.constraint, v.entity) for v in report.violations}
            report = LimitReport(tuple(v for v in extra if (v.constraint, v.entity) not in seen) + report.violations)
        steps.append(replace(step, state=state, restored_load=load, limits=report, power_flow=sol))
        if stop_on_violation and not report.ok:
            complete = False
            break
    return replace(timeline, steps=tuple(steps), power_flow_checked=True, complete=complete)


def simulate(
    model: GridModel,
    scheme: RestorationScheme,
    *,
    power_flow: bool = True,
    raise_on_infeasible: bool = True,
) -> Timeline:
    """Simulate a restoration scheme and score it.

    Raises
    ------
    SchemeError
        Unknown or repeated branch, or a branch ordered before either end is energized.
    Unreachable
        A generator or the HVDC node is never energized.
    InfeasibleScheme
        Some step violates an operating limit or the power flow diverges
        (only when ``raise_on_infeasible``).
    """
    tl = trajectory(model, scheme)
    if power_flow:
        tl = verify_power_flow(model, tl)
    if raise_on_infeasible and not tl.feasible:
        t = tl.first_violation_time
        raise InfeasibleScheme(f"infeasible at t={t:g} min: {tl.report}", tl.report, tl)
    return tl


def stage_table(model: GridModel, timeline: Timeline) -> list[dict]:
    """Restoration stages: one row per source connection or loop closure.

    Each row lists the branches restored since the previous stage.
    """
    rows = []
    path: list[int] = []

    def p_d_at(t):
        if t is None:
            return 0.0
        best = 0.0
        for s in timeline.steps:
            if s.t <= t + 1e-9:
                best = s.hvdc.p_d
        return best

    bs = model.black_start
    rows.append(
        {"stage": 1, "source": bs.node, "start_time": 0.0, "connect_time": timeline.gen_connect.get(bs.id, 0.0), "path": [], "p_d": p_d_at(0.0)}
    )
    loops = set(timeline.loop_branches)
    energized = {bs.node}
    for b in timeline.scheme.order:
        path.append(b)
        br = model.branch(b)
        if b in loops:
            t = timeline.branch_time[b]
            rows.append({"stage": len(rows) + 1, "source": None, "start_time": None, "connect_time": t, "path": path, "p_d": p_d_at(t)})
            path = []
            continue
        new = br.endpoints[1] if br.endpoints[0] in energized else br.endpoints[0]
        energized.add(new)
        gens = model.generators_at(new)
        if gens:
            g = gens[0]
            tc = timeline.gen_connect[g.id]
            rows.append(
                {"stage": len(rows) + 1, "source": new, "start_time": timeline.gen_start[g.id], "connect_time": tc, "path": path, "p_d": p_d_at(tc)}
            )
            path = []
        elif model.hvdc is not None and new == model.hvdc.node:
            tc = timeline.hvdc_start
            rows.append(
                {"stage": len(rows) + 1, "source": new, "start_time": timeline.hvdc_energized, "connect_time": tc, "path": path, "p_d": p_d_at(tc)}
            )
            path = []
    if path:
        rows.append({"stage": len(rows) + 1, "source": None, "start_time": None, "connect_time": None, "path": path, "p_d": timeline.final_p_d})
    return rows
