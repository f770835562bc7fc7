"""Domain model of a network station and its scenario data.

Typed nodes, element arcs, operation modes, flow directions and scenario
values, plus the validation and lookup services everything downstream
relies on.  All values here are internal SI (Pa, kg/s, seconds); the
loaders in :mod:`stationopt.io` convert from file-facing units.

Instances are immutable after construction and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .gas import GasConstants, cross_section_area

VALVE_TOKENS = ("op", "cl")
STATION_MODE_TOKENS = ("by", "cl")
REGULATOR_TOKENS = ("by", "cl", "ac")


def per_time(value, n: int, name: str = "bound") -> np.ndarray:
    """Broadcast a scalar over the time grid or pass a full-length list."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name} must be a scalar or a list of {n} values, got shape {arr.shape}")
    return arr.copy()


@dataclass(frozen=True)
class Node:
    id: str
    kind: str  # "boundary" | "inner"
    pressure_lb: np.ndarray  # Pa, per time step in T_0
    pressure_ub: np.ndarray
    exit_pressure_ub: Optional[float] = None  # Pa, boundary nodes only

    @property
    def is_boundary(self) -> bool:
        return self.kind == "boundary"


@dataclass(frozen=True)
class PipeArc:
    id: str
    from_node: str
    to_node: str
    length: float  # m
    diameter: float  # m
    roughness: float  # m
    slope: float  # dimensionless, in [-1, 1]
    flow_lb: np.ndarray  # kg/s bounds shared by both end flows
    flow_ub: np.ndarray
    z_factor: float = 1.0
    velo_const_from: float = 0.0  # m/s, fixed from the initial state
    velo_const_to: float = 0.0

    @property
    def area(self) -> float:
        return cross_section_area(self.diameter)


@dataclass(frozen=True)
class ResistorArc:
    id: str
    from_node: str
    to_node: str
    drag: float
    diameter: float
    flow_lb: np.ndarray
    flow_ub: np.ndarray
    z_factor: float = 1.0
    velo_const: float = 0.0

    @property
    def area(self) -> float:
        return cross_section_area(self.diameter)


@dataclass(frozen=True)
class ValveArc:
    id: str
    from_node: str
    to_node: str
    flow_lb: np.ndarray
    flow_ub: np.ndarray


@dataclass(frozen=True)
class RegulatorArc:
    id: str
    from_node: str
    to_node: str
    flow_lb: np.ndarray  # zero everywhere: regulators carry a flap trap
    flow_ub: np.ndarray


@dataclass(frozen=True)
class CompressorUnit:
    id: str
    operating_range_2d: tuple[tuple[float, float, float], ...]  # a0 + a1 Q + a2 (pr/pl) <= 0
    max_delta_p: float  # Pa
    max_power: float  # W
    adiabatic_efficiency: float
    inlet_z_factor: float = 1.0


@dataclass(frozen=True)
class Configuration:
    id: str
    stages: tuple[frozenset[str], ...]  # serial sequence of parallel unit-id sets
    facets: Optional[tuple[tuple[float, float, float, float], ...]] = None  # built F_c

    @property
    def units(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for stage in self.stages:
            out = out | stage
        return out

    def with_facets(self, facets) -> "Configuration":
        return Configuration(self.id, self.stages, tuple(tuple(f) for f in facets))


@dataclass(frozen=True)
class CompressorStationArc:
    id: str
    from_node: str
    to_node: str
    units: tuple[CompressorUnit, ...]
    configurations: tuple[Configuration, ...]
    flow_lb: np.ndarray
    flow_ub: np.ndarray

    def unit(self, unit_id: str) -> CompressorUnit:
        for u in self.units:
            if u.id == unit_id:
                return u
        raise KeyError(f"unknown compressor unit {unit_id!r} on station {self.id!r}")

    def configuration(self, config_id: str) -> Configuration:
        for c in self.configurations:
            if c.id == config_id:
                return c
        raise KeyError(f"unknown configuration {config_id!r} on station {self.id!r}")

    def token_units(self, token: str) -> frozenset[str]:
        """Units used by a mode token; bypass and closed use none."""
        if token in STATION_MODE_TOKENS:
            return frozenset()
        return self.configuration(token).units


@dataclass(frozen=True)
class OperationMode:
    id: str
    assignment: dict  # arc id -> token ("op"/"cl" for valves; "by"/"cl"/config id for stations)


@dataclass(frozen=True)
class FlowDirection:
    id: str
    inflow_nodes: frozenset[str]
    outflow_nodes: frozenset[str]


@dataclass(frozen=True)
class FlowCondition:
    """Flow over ``smaller`` must stay below flow over ``larger`` when
    ``direction`` is active."""

    direction: str
    smaller: tuple[str, ...]
    larger: tuple[str, ...]


@dataclass(frozen=True)
class StationSpec:
    name: str
    constants: GasConstants
    nodes: dict
    pipes: dict
    resistors: dict
    valves: dict
    regulators: dict
    stations: dict
    operation_modes: dict
    flow_directions: dict
    valid_pairs: frozenset
    fence_groups: dict  # group id -> tuple of boundary node ids
    flow_conditions: tuple
    transition_times: dict  # (mode, mode) -> seconds
    unavailability: dict  # unit id -> tuple of (start, end) second intervals
    valve_rewrites: dict = field(default_factory=dict)  # fixed-valve preprocessing record

    def arcs(self) -> dict:
        out: dict = {}
        for group in (self.pipes, self.resistors, self.valves, self.regulators, self.stations):
            out.update(group)
        return out

    def non_pipe_arcs(self) -> dict:
        out: dict = {}
        for group in (self.resistors, self.valves, self.regulators, self.stations):
            out.update(group)
        return out

    def boundary_nodes(self) -> list[str]:
        return [v for v, node in self.nodes.items() if node.is_boundary]

    def transition_time(self, from_mode: str, to_mode: str) -> float:
        if from_mode == to_mode:
            return 0.0
        try:
            return self.transition_times[(from_mode, to_mode)]
        except KeyError:
            raise KeyError(f"no transition time for {from_mode!r} -> {to_mode!r}") from None

    def mode_units(self, mode_id: str) -> frozenset[str]:
        """All compressor units the mode runs (union over its stations)."""
        mode = self.operation_modes[mode_id]
        used: frozenset[str] = frozenset()
        for arc_id, token in mode.assignment.items():
            if arc_id in self.stations:
                used = used | self.stations[arc_id].token_units(token)
        return used


@dataclass(frozen=True)
class InitialState:
    """Complete t=0 snapshot; a plain starting point, not a model solution."""

    operation_mode: str
    regulator_modes: dict  # regulator arc id -> "by" | "cl" | "ac"
    pressures: dict  # node id -> Pa
    arc_flows: dict  # non-pipe arc id -> kg/s
    pipe_flows: dict  # pipe arc id -> (q_in, q_out) kg/s


@dataclass(frozen=True)
class Scenario:
    time_grid: np.ndarray  # seconds, strictly increasing, grid[0] == 0
    pressure_demand: dict  # boundary node -> array of k future values, Pa
    flow_demand: dict  # fence group -> array of k future values, kg/s
    inflow_lb: dict  # boundary node -> array over T_0, kg/s
    inflow_ub: dict
    initial_state: InitialState

    @property
    def n_future(self) -> int:
        return len(self.time_grid) - 1

    def step_length(self, t: int) -> float:
        return float(self.time_grid[t] - self.time_grid[t - 1])


@dataclass(frozen=True)
class Violation:
    entity: str
    rule: str

    def __str__(self) -> str:
        return f"{self.entity}: {self.rule}"


def mode_of(spec: StationSpec, mode_id: str, arc_id: str) -> str:
    """The mode token M(o, a) a valve or compressor station has in mode o."""
    mode = spec.operation_modes[mode_id]
    if arc_id not in spec.valves and arc_id not in spec.stations:
        raise ValueError(f"arc {arc_id!r} is not a valve or compressor station")
    return mode.assignment[arc_id]


def mode_available(spec: StationSpec, time_grid: np.ndarray, mode_id: str, t: int) -> bool:
    """Whether operation mode ``mode_id`` can be active for time step ``t``.

    A mode occupies the half-open interval up to the next grid point, so a
    unit outage anywhere in [delta_t, delta_{t+1}) blocks it; the last time
    step only checks the instant delta_t itself.
    """
    used = spec.mode_units(mode_id)
    if not used:
        return True
    last = len(time_grid) - 1
    start = float(time_grid[t])
    end = float(time_grid[t + 1]) if t < last else None
    for unit_id in used:
        for window_start, window_end in spec.unavailability.get(unit_id, ()):
            if end is None:
                if window_start <= start < window_end:
                    return False
            elif window_start < end and window_end > start:
                return False
    return True


def validate(spec: StationSpec, scen: Scenario) -> list[Violation]:
    """All invariant violations of the pair; empty means well formed."""
    out: list[Violation] = []
    add = out.append
    n_times = len(scen.time_grid)

    boundary = set(spec.boundary_nodes())
    for vid, node in spec.nodes.items():
        if node.kind not in ("boundary", "inner"):
            add(Violation(f"node {vid}", f"unknown kind {node.kind!r}"))
        if len(node.pressure_lb) != n_times or len(node.pressure_ub) != n_times:
            add(Violation(f"node {vid}", "pressure bounds must cover every time step"))
            continue
        if np.any(node.pressure_lb <= 0.0):
            add(Violation(f"node {vid}", "pressure lower bound must be positive"))
        if np.any(node.pressure_lb > node.pressure_ub):
            add(Violation(f"node {vid}", "pressure lower bound exceeds upper bound"))
        if node.exit_pressure_ub is not None:
            if not node.is_boundary:
                add(Violation(f"node {vid}", "exit pressure bound on a non-boundary node"))
            elif node.exit_pressure_ub > float(node.pressure_ub.min()):
                add(Violation(f"node {vid}", "exit pressure bound exceeds pressure upper bound"))

    def check_endpoints(arc_id: str, arc) -> None:
        for end in (arc.from_node, arc.to_node):
            if end not in spec.nodes:
                add(Violation(f"arc {arc_id}", f"unknown end node {end!r}"))

    def check_flow_bounds(arc_id: str, arc) -> None:
        if len(arc.flow_lb) != n_times or len(arc.flow_ub) != n_times:
            add(Violation(f"arc {arc_id}", "flow bounds must cover every time step"))
        elif np.any(arc.flow_lb > arc.flow_ub):
            add(Violation(f"arc {arc_id}", "flow lower bound exceeds upper bound"))

    for aid, pipe in spec.pipes.items():
        check_endpoints(aid, pipe)
        check_flow_bounds(aid, pipe)
        if pipe.length <= 0.0:
            add(Violation(f"pipe {aid}", "length must be positive"))
        if pipe.diameter <= 0.0:
            add(Violation(f"pipe {aid}", "diameter must be positive"))
        if pipe.roughness <= 0.0:
            add(Violation(f"pipe {aid}", "roughness must be positive"))
        if not -1.0 <= pipe.slope <= 1.0:
            add(Violation(f"pipe {aid}", "slope must lie in [-1, 1]"))

    for aid, resistor in spec.resistors.items():
        check_endpoints(aid, resistor)
        check_flow_bounds(aid, resistor)
        if resistor.drag < 0.0:
            add(Violation(f"resistor {aid}", "drag factor must be nonnegative"))
        if resistor.diameter <= 0.0:
            add(Violation(f"resistor {aid}", "diameter must be positive"))

    for aid, valve in spec.valves.items():
        check_endpoints(aid, valve)
        check_flow_bounds(aid, valve)

    for aid, regulator in spec.regulators.items():
        check_endpoints(aid, regulator)
        check_flow_bounds(aid, regulator)
        if np.any(regulator.flow_lb != 0.0):
            add(Violation(f"regulator {aid}", "flow lower bound must be zero (flap trap)"))

    for aid, station in spec.stations.items():
        check_endpoints(aid, station)
        check_flow_bounds(aid, station)
        unit_ids = {u.id for u in station.units}
        for unit in station.units:
            if unit.max_power <= 0.0:
                add(Violation(f"unit {unit.id}", "maximum power must be positive"))
            if not 0.0 < unit.adiabatic_efficiency <= 1.0:
                add(Violation(f"unit {unit.id}", "adiabatic efficiency must lie in (0, 1]"))
            if not unit.operating_range_2d:
                add(Violation(f"unit {unit.id}", "operating range has no facets"))
        for config in station.configurations:
            if not config.stages or any(len(stage) == 0 for stage in config.stages):
                add(Violation(f"configuration {config.id}", "stages must be nonempty"))
            foreign = config.units - unit_ids
            if foreign:
                add(
                    Violation(
                        f"configuration {config.id}",
                        f"references units not on station {aid}: {sorted(foreign)}",
                    )
                )

    valve_and_station_ids = set(spec.valves) | set(spec.stations)
    for oid, mode in spec.operation_modes.items():
        assigned = set(mode.assignment)
        for missing in sorted(valve_and_station_ids - assigned):
            add(Violation(f"operation mode {oid}", f"missing assignment for arc {missing!r}"))
        for extra in sorted(assigned - valve_and_station_ids):
            add(Violation(f"operation mode {oid}", f"assignment for unknown arc {extra!r}"))
        for arc_id in assigned & valve_and_station_ids:
            token = mode.assignment[arc_id]
            if arc_id in spec.valves:
                if token not in VALVE_TOKENS:
                    add(Violation(f"operation mode {oid}", f"invalid valve token {token!r} for {arc_id!r}"))
            else:
                station = spec.stations[arc_id]
                config_ids = {c.id for c in station.configurations}
                if token not in STATION_MODE_TOKENS and token not in config_ids:
                    add(Violation(f"operation mode {oid}", f"invalid station token {token!r} for {arc_id!r}"))

    for fid, direction in spec.flow_directions.items():
        overlap = direction.inflow_nodes & direction.outflow_nodes
        if overlap:
            add(Violation(f"flow direction {fid}", f"inflow and outflow sets overlap: {sorted(overlap)}"))
        for vid in sorted((direction.inflow_nodes | direction.outflow_nodes) - boundary):
            add(Violation(f"flow direction {fid}", f"{vid!r} is not a boundary node"))

    for pair in spec.valid_pairs:
        oid, fid = pair
        if oid not in spec.operation_modes:
            add(Violation("valid pairs", f"unknown operation mode {oid!r}"))
        if fid not in spec.flow_directions:
            add(Violation("valid pairs", f"unknown flow direction {fid!r}"))

    seen_group_nodes: set[str] = set()
    for gid, members in spec.fence_groups.items():
        for vid in members:
            if vid not in boundary:
                add(Violation(f"fence group {gid}", f"{vid!r} is not a boundary node"))
            if vid in seen_group_nodes:
                add(Violation(f"fence group {gid}", f"{vid!r} already belongs to another fence group"))
            seen_group_nodes.add(vid)

    for cond in spec.flow_conditions:
        label = f"flow condition on {cond.direction}"
        direction = spec.flow_directions.get(cond.direction)
        if direction is None:
            add(Violation(label, f"unknown flow direction {cond.direction!r}"))
            continue
        for name, nodes in (("first", cond.smaller), ("second", cond.larger)):
            node_set = set(nodes)
            if not (node_set <= direction.inflow_nodes or node_set <= direction.outflow_nodes):
                add(
                    Violation(
                        label,
                        f"{name} node set must lie entirely in the inflow or the outflow side",
                    )
                )
            for vid in sorted(node_set - boundary):
                add(Violation(label, f"{vid!r} is not a boundary node"))

    mode_ids = list(spec.operation_modes)
    for m1 in mode_ids:
        for m2 in mode_ids:
            if m1 != m2 and (m1, m2) not in spec.transition_times:
                add(Violation("transition times", f"missing entry for {m1!r} -> {m2!r}"))
    for key, value in spec.transition_times.items():
        if value < 0.0:
            add(Violation("transition times", f"negative transition time for {key}"))

    all_units = {u.id for st in spec.stations.values() for u in st.units}
    for unit_id, windows in spec.unavailability.items():
        if unit_id not in all_units:
            add(Violation("unavailability", f"unknown compressor unit {unit_id!r}"))
        for start, end in windows:
            if not start < end:
                add(Violation("unavailability", f"empty window [{start}, {end}) for {unit_id!r}"))

    grid = scen.time_grid
    if grid[0] != 0.0:
        add(Violation("scenario", "time grid must start at 0"))
    if np.any(np.diff(grid) <= 0.0):
        add(Violation("scenario", "time grid must be strictly increasing"))
    k = scen.n_future

    for vid in sorted(boundary):
        if vid not in scen.pressure_demand:
            add(Violation("scenario", f"missing pressure demand for boundary node {vid!r}"))
        elif len(scen.pressure_demand[vid]) != k:
            add(Violation("scenario", f"pressure demand for {vid!r} must have {k} values"))
        for bounds, label in ((scen.inflow_lb, "lower"), (scen.inflow_ub, "upper")):
            if vid not in bounds:
                add(Violation("scenario", f"missing inflow {label} bound for {vid!r}"))
            elif len(bounds[vid]) != k + 1:
                add(Violation("scenario", f"inflow {label} bound for {vid!r} must have {k + 1} values"))
    for gid in spec.fence_groups:
        if gid not in scen.flow_demand:
            add(Violation("scenario", f"missing flow demand for fence group {gid!r}"))
        elif len(scen.flow_demand[gid]) != k:
            add(Violation("scenario", f"flow demand for {gid!r} must have {k} values"))

    state = scen.initial_state
    if state.operation_mode not in spec.operation_modes:
        add(Violation("initial state", f"unknown operation mode {state.operation_mode!r}"))
    for vid in spec.nodes:
        if vid not in state.pressures:
            add(Violation("initial state", f"missing pressure for node {vid!r}"))
    for aid in spec.non_pipe_arcs():
        if aid not in state.arc_flows:
            add(Violation("initial state", f"missing flow for arc {aid!r}"))
    for aid in spec.pipes:
        if aid not in state.pipe_flows:
            add(Violation("initial state", f"missing end flows for pipe {aid!r}"))
    for aid in spec.regulators:
        token = state.regulator_modes.get(aid)
        if token is None:
            add(Violation("initial state", f"missing mode for regulator {aid!r}"))
        elif token not in REGULATOR_TOKENS:
            add(Violation("initial state", f"invalid regulator mode {token!r} for {aid!r}"))

    return out
