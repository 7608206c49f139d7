"""Grid data schema, per-unit conventions and scenario ingestion.

A grid file is a JSON object with the top-level keys ``params``, ``nodes``,
``branches``, ``generators`` and ``hvdc``.  Powers are in MW / MVar, voltages
of nodes in kV, impedances in per-unit on the scenario base ``s_base``,
durations in minutes and angles in degrees.

Generator transient reactances may be given on any MVA base through the
optional ``reactance_base`` key (defaults to the machine rating
``rated_capacity``); they are converted to the system base at ingestion.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

__all__ = [
    "GridError",
    "ParseError",
    "SchemaError",
    "ValidationError",
    "Node",
    "Branch",
    "Generator",
    "HvdcTerminal",
    "ScenarioParams",
    "GridModel",
    "load_grid",
    "grid_from_dict",
    "grid_to_dict",
    "save_grid",
    "validate_grid",
    "derive_floors",
]


class GridError(ValueError):
    """Base class for grid ingestion errors."""


class ParseError(GridError):
    """The document is not well-formed JSON."""


class SchemaError(GridError):
    """A required field is missing or has the wrong type."""


class ValidationError(GridError):
    """A field is well-typed but violates a model invariant."""


@dataclass(frozen=True)
class Node:
    id: int
    rated_voltage: float
    voltage_limits: tuple[float, float] = (0.9, 1.1)
    load: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class Branch:
    id: int
    endpoints: tuple[int, int]
    impedance: complex
    charging_reactive: float = 0.0
    flow_limits: tuple[float, float] = (-math.inf, math.inf)
    kind: str = "line"
    restore_duration: float = 5.0

    def other(self, node: int) -> int:
        i, j = self.endpoints
        return j if node == i else i


@dataclass(frozen=True)
class Generator:
    id: int
    node: int
    rated_power: float
    rated_capacity: float
    transient_reactance: float
    freq_coeff: float
    ramp_rate: float
    cranking_power: float = 0.0
    active_limits: tuple[float, float] = (0.0, math.inf)
    reactive_limits: tuple[float, float] = (-math.inf, math.inf)
    max_absorb: float = 0.0
    scr_coeff: float = 0.0
    hot_start_deadline: float | None = None
    cold_start_earliest: float | None = None
    connect_duration: float = 0.0
    is_black_start: bool = False
    voltage_setpoint: float = 1.0

    @property
    def ramp_minutes(self) -> float:
        """Minutes needed to ramp from zero to rated power."""
        return self.rated_power / (self.ramp_rate / 60.0)


@dataclass(frozen=True)
class HvdcTerminal:
    node: int
    rated_power: float
    filter_min: float
    min_power: float | None = None
    station_loss: float | None = None
    filter_schedule: tuple[tuple[float, float], ...] = ()
    bridges: int = 1
    transformer_reactance: float = 0.15
    transformer_emf: float = 0.8889
    ideal_no_load_voltage: float = 1.2
    extinction_angle: float = 17.0
    connect_duration: float = 10.0
    scr_floor: float = 3.0

    def __post_init__(self):
        # defaults are fractions of the rating
        if self.min_power is None:
            object.__setattr__(self, "min_power", 0.035 * self.rated_power)
        if self.station_loss is None:
            object.__setattr__(self, "station_loss", 0.01 * self.rated_power)


@dataclass(frozen=True)
class ScenarioParams:
    max_voltage_dev: float = 0.1
    max_freq_dev: float = 0.5
    time_step: float = 5.0
    s_base: float = 100.0
    scc_floor_override: float | None = None
    frc_floor_override: float | None = None
    scc_formula: str = "single"


@dataclass(frozen=True)
class GridModel:
    """Immutable network description.

    Node, branch and generator lookups by id go through the dictionaries built
    in ``__post_init__``; the tuples keep file order.
    """

    nodes: tuple[Node, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    hvdc: HvdcTerminal | None = None
    params: ScenarioParams = field(default_factory=ScenarioParams)

    def __post_init__(self):
        object.__setattr__(self, "_node_by_id", {n.id: n for n in self.nodes})
        object.__setattr__(self, "_branch_by_id", {b.id: b for b in self.branches})
        object.__setattr__(self, "_gen_by_id", {g.id: g for g in self.generators})
        gens_at: dict[int, list[Generator]] = {}
        for g in self.generators:
            gens_at.setdefault(g.node, []).append(g)
        object.__setattr__(self, "_gens_at", {k: tuple(v) for k, v in gens_at.items()})
        incident: dict[int, list[Branch]] = {n.id: [] for n in self.nodes}
        for b in self.branches:
            for end in b.endpoints:
                incident.setdefault(end, []).append(b)
        object.__setattr__(self, "_incident", {k: tuple(v) for k, v in incident.items()})
        object.__setattr__(
            self, "_node_index", {n.id: k for k, n in enumerate(sorted(self.nodes, key=lambda n: n.id))}
        )

    def node(self, node_id: int) -> Node:
        return self._node_by_id[node_id]

    def branch(self, branch_id: int) -> Branch:
        return self._branch_by_id[branch_id]

    def generator(self, gen_id: int) -> Generator:
        return self._gen_by_id[gen_id]

    def generators_at(self, node_id: int) -> tuple[Generator, ...]:
        return self._gens_at.get(node_id, ())

    def incident(self, node_id: int) -> tuple[Branch, ...]:
        return self._incident.get(node_id, ())

    def node_index(self, node_id: int) -> int:
        """Dense 0-based index of a node (nodes sorted by id)."""
        return self._node_index[node_id]

    @property
    def black_start(self) -> Generator:
        return next(g for g in self.generators if g.is_black_start)

    @property
    def source_nodes(self) -> tuple[int, ...]:
        """Generator nodes plus the HVDC node, each once, in file order."""
        out: list[int] = []
        for g in self.generators:
            if g.node not in out:
                out.append(g.node)
        if self.hvdc is not None and self.hvdc.node not in out:
            out.append(self.hvdc.node)
        return tuple(out)

    @property
    def branch_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.branches)


# --------------------------------------------------------------------------
# ingestion


def _get(obj: dict, key: str, where: str, *, default: Any = ..., kind=None):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    if key not in obj or obj[key] is None:
        if default is ...:
            raise SchemaError(f"{where}.{key}: missing required field")
        return default
    value = obj[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"{where}.{key}: expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(f"{where}.{key}: expected an integer, got {value!r}")
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise SchemaError(f"{where}.{key}: expected a boolean, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise SchemaError(f"{where}.{key}: expected a string, got {value!r}")
        return value
    if kind == "pair":
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise SchemaError(f"{where}.{key}: expected a pair [a, b], got {value!r}")
        a, b = value
        for v in (a, b):
            if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float))):
                raise SchemaError(f"{where}.{key}: expected numbers, got {value!r}")
        return value
    return value


def _bounds(pair, lo_default=-math.inf, hi_default=math.inf) -> tuple[float, float]:
    lo, hi = pair
    return (lo_default if lo is None else float(lo), hi_default if hi is None else float(hi))


def _list(doc: dict, key: str) -> list:
    value = _get(doc, key, "$")
    if not isinstance(value, list):
        raise SchemaError(f"$.{key}: expected a list")
    return value


def grid_from_dict(doc: dict) -> GridModel:
    """Build and validate a :class:`GridModel` from a parsed document."""
    if not isinstance(doc, dict):
        raise SchemaError("$: expected an object at top level")
    p = _get(doc, "params", "$", default={})
    where = "$.params"
    params = ScenarioParams(
        max_voltage_dev=_get(p, "max_voltage_dev", where, default=0.1, kind=float),
        max_freq_dev=_get(p, "max_freq_dev", where, default=0.5, kind=float),
        time_step=_get(p, "time_step", where, default=5.0, kind=float),
        s_base=_get(p, "s_base", where, default=100.0, kind=float),
        scc_floor_override=_get(p, "scc_floor_override", where, default=None, kind=float),
        frc_floor_override=_get(p, "frc_floor_override", where, default=None, kind=float),
        scc_formula=_get(p, "scc_formula", where, default="single", kind=str),
    )

    nodes = []
    for k, n in enumerate(_list(doc, "nodes")):
        where = f"$.nodes[{k}]"
        nodes.append(
            Node(
                id=_get(n, "id", where, kind=int),
                rated_voltage=_get(n, "rated_voltage", where, kind=float),
                voltage_limits=_bounds(_get(n, "voltage_limits", where, default=[0.9, 1.1], kind="pair")),
                load=tuple(float(v) for v in _get(n, "load", where, default=[0.0, 0.0], kind="pair")),
            )
        )

    branches = []
    for k, b in enumerate(_list(doc, "branches")):
        where = f"$.branches[{k}]"
        r, x = _get(b, "impedance", where, kind="pair")
        ends = _get(b, "endpoints", where, kind="pair")
        if not all(isinstance(e, int) and not isinstance(e, bool) for e in ends):
            raise SchemaError(f"{where}.endpoints: expected integer node ids")
        branches.append(
            Branch(
                id=_get(b, "id", where, kind=int),
                endpoints=(ends[0], ends[1]),
                impedance=complex(float(r), float(x)),
                charging_reactive=_get(b, "charging_reactive", where, default=0.0, kind=float),
                flow_limits=_bounds(_get(b, "flow_limits", where, default=[None, None], kind="pair")),
                kind=_get(b, "kind", where, default="line", kind=str),
                restore_duration=_get(b, "restore_duration", where, default=5.0, kind=float),
            )
        )

    generators = []
    for k, g in enumerate(_list(doc, "generators")):
        where = f"$.generators[{k}]"
        rated_capacity = _get(g, "rated_capacity", where, kind=float)
        x_base = _get(g, "reactance_base", where, default=rated_capacity, kind=float)
        if x_base <= 0:
            raise ValidationError(f"{where}.reactance_base: must be positive")
        x_file = _get(g, "transient_reactance", where, kind=float)
        generators.append(
            Generator(
                id=_get(g, "id", where, kind=int),
                node=_get(g, "node", where, kind=int),
                rated_power=_get(g, "rated_power", where, kind=float),
                rated_capacity=rated_capacity,
                transient_reactance=x_file * params.s_base / x_base,
                freq_coeff=_get(g, "freq_coeff", where, kind=float),
                ramp_rate=_get(g, "ramp_rate", where, kind=float),
                cranking_power=_get(g, "cranking_power", where, default=0.0, kind=float),
                active_limits=_bounds(_get(g, "active_limits", where, default=[0.0, None], kind="pair"), 0.0),
                reactive_limits=_bounds(_get(g, "reactive_limits", where, default=[None, None], kind="pair")),
                max_absorb=_get(g, "max_absorb", where, default=0.0, kind=float),
                scr_coeff=_get(g, "scr_coeff", where, default=0.0, kind=float),
                hot_start_deadline=_get(g, "hot_start_deadline", where, default=None, kind=float),
                cold_start_earliest=_get(g, "cold_start_earliest", where, default=None, kind=float),
                connect_duration=_get(g, "connect_duration", where, default=0.0, kind=float),
                is_black_start=_get(g, "is_black_start", where, default=False, kind=bool),
                voltage_setpoint=_get(g, "voltage_setpoint", where, default=1.0, kind=float),
            )
        )

    hvdc = None
    h = doc.get("hvdc")
    if h is not None:
        where = "$.hvdc"
        schedule = _get(h, "filter_schedule", where, default=[])
        if not isinstance(schedule, list) or not all(
            isinstance(s, (list, tuple)) and len(s) == 2 for s in schedule
        ):
            raise SchemaError(f"{where}.filter_schedule: expected a list of [p_d_mw, q_mvar] pairs")
        hvdc = HvdcTerminal(
            node=_get(h, "node", where, kind=int),
            rated_power=_get(h, "rated_power", where, kind=float),
            filter_min=_get(h, "filter_min", where, kind=float),
            min_power=_get(h, "min_power", where, default=None, kind=float),
            station_loss=_get(h, "station_loss", where, default=None, kind=float),
            filter_schedule=tuple((float(a), float(b)) for a, b in schedule),
            bridges=_get(h, "bridges", where, default=1, kind=int),
            transformer_reactance=_get(h, "transformer_reactance", where, default=0.15, kind=float),
            transformer_emf=_get(h, "transformer_emf", where, default=0.8889, kind=float),
            ideal_no_load_voltage=_get(h, "ideal_no_load_voltage", where, default=1.2, kind=float),
            extinction_angle=_get(h, "extinction_angle", where, default=17.0, kind=float),
            connect_duration=_get(h, "connect_duration", where, default=10.0, kind=float),
            scr_floor=_get(h, "scr_floor", where, default=3.0, kind=float),
        )

    model = GridModel(tuple(nodes), tuple(branches), tuple(generators), hvdc, params)
    validate_grid(model)
    return model


def validate_grid(model: GridModel) -> None:
    """Check every model invariant, raising :class:`ValidationError` on the first breach."""
    p = model.params
    if p.time_step <= 0:
        raise ValidationError("params.time_step must be positive")
    if p.max_voltage_dev <= 0 or p.max_freq_dev <= 0:
        raise ValidationError("params: max_voltage_dev and max_freq_dev must be positive")
    if p.s_base <= 0:
        raise ValidationError("params.s_base must be positive")
    if p.scc_formula not in ("single", "double"):
        raise ValidationError(f"params.scc_formula must be 'single' or 'double', got {p.scc_formula!r}")

    ids = [n.id for n in model.nodes]
    if len(set(ids)) != len(ids):
        raise ValidationError("nodes: duplicate node id")
    if not ids:
        raise ValidationError("nodes: empty grid")
    for n in model.nodes:
        lo, hi = n.voltage_limits
        if not lo < hi:
            raise ValidationError(f"node {n.id}: voltage_limits must satisfy min < max")
        if n.load[0] < 0:
            raise ValidationError(f"node {n.id}: negative active load")

    bids = [b.id for b in model.branches]
    if len(set(bids)) != len(bids):
        raise ValidationError("branches: duplicate branch id")
    node_ids = set(ids)
    for b in model.branches:
        i, j = b.endpoints
        if i not in node_ids or j not in node_ids:
            raise ValidationError(f"branch {b.id}: endpoint references undeclared node")
        if i == j:
            raise ValidationError(f"branch {b.id}: endpoints must differ")
        if b.kind not in ("line", "transformer"):
            raise ValidationError(f"branch {b.id}: kind must be 'line' or 'transformer'")
        if b.kind == "transformer" and b.impedance.imag <= 0:
            raise ValidationError(f"branch {b.id}: transformer reactance must be positive")
        if b.impedance == 0:
            raise ValidationError(f"branch {b.id}: zero impedance")
        if b.restore_duration <= 0:
            raise ValidationError(f"branch {b.id}: restore_duration must be positive")
        if b.flow_limits[0] > b.flow_limits[1]:
            raise ValidationError(f"branch {b.id}: flow_limits must satisfy min <= max")

    gids = [g.id for g in model.generators]
    if len(set(gids)) != len(gids):
        raise ValidationError("generators: duplicate generator id")
    black = [g for g in model.generators if g.is_black_start]
    if len(black) != 1:
        raise ValidationError(f"generators: exactly one black-start unit required, found {len(black)}")
    for g in model.generators:
        if g.node not in node_ids:
            raise ValidationError(f"generator {g.id}: node {g.node} is not declared")
        if g.rated_power <= 0:
            raise ValidationError(f"generator {g.id}: rated_power must be positive")
        if g.ramp_rate <= 0:
            raise ValidationError(f"generator {g.id}: ramp_rate must be positive")
        if g.transient_reactance <= 0:
            raise ValidationError(f"generator {g.id}: transient_reactance must be positive")
        if g.freq_coeff <= 0:
            raise ValidationError(f"generator {g.id}: freq_coeff must be positive")
        if not 0.5 < g.voltage_setpoint < 1.5:
            raise ValidationError(f"generator {g.id}: voltage_setpoint must be a plausible per-unit value")
        if g.connect_duration < 0 or g.cranking_power < 0:
            raise ValidationError(f"generator {g.id}: negative duration or cranking power")
        if g.active_limits[0] > g.active_limits[1] or g.reactive_limits[0] > g.reactive_limits[1]:
            raise ValidationError(f"generator {g.id}: limits must satisfy min <= max")
        if (
            g.hot_start_deadline is not None
            and g.cold_start_earliest is not None
            and not g.hot_start_deadline < g.cold_start_earliest
        ):
            raise ValidationError(f"generator {g.id}: hot_start_deadline must precede cold_start_earliest")

    h = model.hvdc
    if h is not None:
        if h.node not in node_ids:
            raise ValidationError(f"hvdc: node {h.node} is not declared")
        if not h.min_power < h.rated_power:
            raise ValidationError("hvdc: min_power must be below rated_power")
        if h.filter_min <= 0:
            raise ValidationError("hvdc: filter_min must be positive")
        if h.scr_floor < 3:
            raise ValidationError("hvdc: scr_floor must be at least 3")
        if h.bridges < 1:
            raise ValidationError("hvdc: bridges must be at least 1")
        if h.connect_duration < 0:
            raise ValidationError("hvdc: connect_duration must be non-negative")


def load_grid(path: str | Path) -> GridModel:
    """Read a grid file and return the validated model."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return grid_from_dict(doc)


def _num(x: float):
    if x is None or math.isinf(x):
        return None
    return x


def grid_to_dict(model: GridModel) -> dict:
    """Serialize a model to a JSON-compatible document (reactances on the system base)."""
    p = model.params
    doc = {
        "params": {
            "max_voltage_dev": p.max_voltage_dev,
            "max_freq_dev": p.max_freq_dev,
            "time_step": p.time_step,
            "s_base": p.s_base,
            "scc_floor_override": p.scc_floor_override,
            "frc_floor_override": p.frc_floor_override,
            "scc_formula": p.scc_formula,
        },
        "nodes": [
            {"id": n.id, "rated_voltage": n.rated_voltage, "voltage_limits": list(n.voltage_limits), "load": list(n.load)}
            for n in model.nodes
        ],
        "branches": [
            {
                "id": b.id,
                "endpoints": list(b.endpoints),
                "impedance": [b.impedance.real, b.impedance.imag],
                "charging_reactive": b.charging_reactive,
                "flow_limits": [_num(v) for v in b.flow_limits],
                "kind": b.kind,
                "restore_duration": b.restore_duration,
            }
            for b in model.branches
        ],
        "generators": [
            {
                "id": g.id,
                "node": g.node,
                "rated_power": g.rated_power,
                "rated_capacity": g.rated_capacity,
                "transient_reactance": g.transient_reactance,
                "reactance_base": p.s_base,
                "freq_coeff": g.freq_coeff,
                "ramp_rate": g.ramp_rate,
                "cranking_power": g.cranking_power,
                "active_limits": [_num(v) for v in g.active_limits],
                "reactive_limits": [_num(v) for v in g.reactive_limits],
                "max_absorb": g.max_absorb,
                "scr_coeff": g.scr_coeff,
                "hot_start_deadline": g.hot_start_deadline,
                "cold_start_earliest": g.cold_start_earliest,
                "connect_duration": g.connect_duration,
                "is_black_start": g.is_black_start,
                "voltage_setpoint": g.voltage_setpoint,
            }
            for g in model.generators
        ],
        "hvdc": None,
    }
    h = model.hvdc
    if h is not None:
        doc["hvdc"] = {
            "node": h.node,
            "rated_power": h.rated_power,
            "min_power": h.min_power,
            "station_loss": h.station_loss,
            "filter_min": h.filter_min,
            "filter_schedule": [list(s) for s in h.filter_schedule],
            "bridges": h.bridges,
            "transformer_reactance": h.transformer_reactance,
            "transformer_emf": h.transformer_emf,
            "ideal_no_load_voltage": h.ideal_no_load_voltage,
            "extinction_angle": h.extinction_angle,
            "connect_duration": h.connect_duration,
            "scr_floor": h.scr_floor,
        }
    return doc


def save_grid(model: GridModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(grid_to_dict(model), indent=1))


def derive_floors(model: GridModel) -> tuple[float, float]:
    """Lower limits ``(S_sc_min [MVA], M_f_min [MW/Hz])`` required to start the HVDC.

    The frequency floor covers the start-up active-power step
    ``0.7 * 0.1 * P_DN`` with half of the admissible frequency deviation.
    The SCC floor is the reactive surplus of the minimum filter over the
    converter's start-up absorption divided by the admissible voltage
    deviation (AC voltage at nominal 1 p.u.); with ``scc_formula='double'``
    twice the filter capacity is used.  Overrides in ``params`` win.
    """
    from .hvdc import startup_mode_quantities

    p = model.params
    h = model.hvdc
    if h is None or h.rated_power <= 0:
        s_min, m_min = 0.0, 0.0
    else:
        # 0.7 * 0.1 * P_DN, grouped so round figures stay exact
        m_min = 0.7 * (0.1 * h.rated_power) / (2.0 * p.max_freq_dev)
        q_d = startup_mode_quantities(h).q_d
        q_f = 2.0 * h.filter_min if p.scc_formula == "double" else h.filter_min
        s_min = max(0.0, 1.0 * (q_f - q_d) / p.max_voltage_dev)
    if p.scc_floor_override is not None:
        s_min = p.scc_floor_override
    if p.frc_floor_override is not None:
        m_min = p.frc_floor_override
    return s_min, m_min
