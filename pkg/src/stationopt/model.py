"""Assembly of the station MIP variants.

Builds the full transient model and its three working variants -- the
per-step stationary model, the stationary model with a fixed operation
mode, and the transient model with fixed operation modes and flow
directions -- as plain linear models over a typed variable catalog.
Everything is solver independent; :mod:`stationopt.solve` handles solving.

Internally the models use Pa, kg/s and seconds.  File-facing objective
weights (bar, 1000 m^3/h, hours) are converted once per build.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gas import nikuradse_friction
from .linmodel import BuildInfeasibleError, LinearModel, VarRef
from .network import Scenario, StationSpec
from .units import PA_PER_BAR, SECONDS_PER_HOUR

STATION_TOKENS = ("by", "cl")
REGULATOR_TOKENS = ("by", "cl", "ac")


@dataclass(frozen=True)
class ObjectiveWeights:
    """Objective weights in their file-facing units.

    Slack weights are per bar*h and per 1000 m^3; operating-point change
    weights per bar and per 1000 m^3/h; the discrete change weights are
    unitless counts.
    """

    slack_pressure: float = 1000.0
    slack_flow: float = 100.0
    operation_mode_change: float = 1000.0
    unit_start: float = 1200.0
    regulator_mode_change: float = 50.0
    regulator_inlet_pressure: float = 10.0
    regulator_outlet_pressure: float = 10.0
    regulator_flow: float = 1.0
    station_inlet_pressure: float = 10.0
    station_outlet_pressure: float = 10.0
    station_flow: float = 1.0

    def __post_init__(self) -> None:
        for name, value in self.__dict__.items():
            if value <= 0.0:
                raise ValueError(f"objective weight {name} must be positive")

    def scaled(self, factor: float) -> "ObjectiveWeights":
        """Same weights with the two slack weights multiplied by ``factor``."""
        return ObjectiveWeights(
            slack_pressure=self.slack_pressure * factor,
            slack_flow=self.slack_flow * factor,
            operation_mode_change=self.operation_mode_change,
            unit_start=self.unit_start,
            regulator_mode_change=self.regulator_mode_change,
            regulator_inlet_pressure=self.regulator_inlet_pressure,
            regulator_outlet_pressure=self.regulator_outlet_pressure,
            regulator_flow=self.regulator_flow,
            station_inlet_pressure=self.station_inlet_pressure,
            station_outlet_pressure=self.station_outlet_pressure,
            station_flow=self.station_flow,
        )


@dataclass(frozen=True)
class InternalWeights:
    """Weights converted to the internal Pa / kg/s / s system."""

    slack_pressure: float  # per Pa*s
    slack_flow: float  # per kg
    operation_mode_change: float
    unit_start: float
    regulator_mode_change: float
    regulator_inlet_pressure: float  # per Pa
    regulator_outlet_pressure: float
    regulator_flow: float  # per kg/s
    station_inlet_pressure: float
    station_outlet_pressure: float
    station_flow: float

    @classmethod
    def from_weights(cls, w: ObjectiveWeights, normal_density: float) -> "InternalWeights":
        per_pa = 1.0 / PA_PER_BAR
        per_kg_s = SECONDS_PER_HOUR / (1000.0 * normal_density)
        return cls(
            slack_pressure=w.slack_pressure / (PA_PER_BAR * SECONDS_PER_HOUR),
            slack_flow=w.slack_flow / (1000.0 * normal_density),
            operation_mode_change=w.operation_mode_change,
            unit_start=w.unit_start,
            regulator_mode_change=w.regulator_mode_change,
            regulator_inlet_pressure=w.regulator_inlet_pressure * per_pa,
            regulator_outlet_pressure=w.regulator_outlet_pressure * per_pa,
            regulator_flow=w.regulator_flow * per_kg_s,
            station_inlet_pressure=w.station_inlet_pressure * per_pa,
            station_outlet_pressure=w.station_outlet_pressure * per_pa,
            station_flow=w.station_flow * per_kg_s,
        )


@dataclass(frozen=True)
class StateSnapshot:
    """Complete network state at one grid index, used to seed a window."""

    time_index: int
    operation_mode: str
    regulator_modes: dict
    pressures: dict  # node -> Pa
    arc_flows: dict  # non-pipe arc -> kg/s
    pipe_flows: dict  # pipe arc -> (q_in, q_out)


def initial_snapshot(scen: Scenario) -> StateSnapshot:
    s = scen.initial_state
    return StateSnapshot(
        time_index=0,
        operation_mode=s.operation_mode,
        regulator_modes=dict(s.regulator_modes),
        pressures=dict(s.pressures),
        arc_flows=dict(s.arc_flows),
        pipe_flows={a: tuple(v) for a, v in s.pipe_flows.items()},
    )


# ---------------------------------------------------------------------------
# variant descriptors


@dataclass(frozen=True)
class FullVariant:
    """The complete transient model with free mode/direction binaries."""


@dataclass(frozen=True)
class StationaryVariant:
    """One independent stationary time step over a set of candidate modes."""

    t: int
    prev_mode: str
    valid_modes: tuple = ()  # empty means every available mode


@dataclass(frozen=True)
class StationaryFixedVariant:
    """One stationary time step with the operation mode already fixed."""

    mode: str
    t: int
    prev_mode: str


@dataclass(frozen=True)
class FixedTransientVariant:
    """Transient window with fixed modes/directions, seeded by a snapshot."""

    modes: tuple
    directions: tuple
    snapshot: StateSnapshot


class ModelInstance:
    """A fully assembled variant: linear model plus its variable catalog."""

    def __init__(self, kind: str, model: LinearModel, spec: StationSpec, scen: Scenario, times):
        self.kind = kind
        self.model = model
        self.spec = spec
        self.scen = scen
        self.times = list(times)
        self.handles: dict = {}

    def handle(self, *key):
        return self.handles[key]

    def value(self, assignment: np.ndarray, *key) -> float:
        h = self.handles[key]
        return float(assignment[h.index]) if isinstance(h, VarRef) else float(h)

    def mode_at(self, assignment: np.ndarray, t: int) -> str:
        candidates = [o for o in self.spec.operation_modes if ("om", o, t) in self.handles]
        best = max(candidates, key=lambda o: self.value(assignment, "om", o, t))
        return best

    def direction_at(self, assignment: np.ndarray, t: int) -> str:
        candidates = [f for f in self.spec.flow_directions if ("fd", f, t) in self.handles]
        return max(candidates, key=lambda f: self.value(assignment, "fd", f, t))

    def regulator_mode_at(self, assignment: np.ndarray, arc_id: str, t: int) -> str:
        return max(
            REGULATOR_TOKENS, key=lambda tok: self.value(assignment, "rg", tok, arc_id, t)
        )

    def snapshot_at(self, assignment: np.ndarray, t: int) -> StateSnapshot:
        spec = self.spec
        pressures = {v: self.value(assignment, "p", v, t) for v in spec.nodes}
        arc_flows = {a: self.value(assignment, "q", a, t) for a in spec.non_pipe_arcs()}
        pipe_flows = {
            a: (self.value(assignment, "ql", a, t), self.value(assignment, "qr", a, t))
            for a in spec.pipes
        }
        return StateSnapshot(
            time_index=t,
            operation_mode=self.mode_at(assignment, t),
            regulator_modes={
                a: self.regulator_mode_at(assignment, a, t) for a in spec.regulators
            },
            pressures=pressures,
            arc_flows=arc_flows,
            pipe_flows=pipe_flows,
        )


def build_variant(
    spec: StationSpec, scen: Scenario, weights: ObjectiveWeights, descriptor
) -> ModelInstance:
    """Dispatch a variant descriptor to the matching builder."""
    if isinstance(descriptor, FullVariant):
        return build_full(spec, scen, weights)
    if isinstance(descriptor, StationaryVariant):
        return build_stationary(
            spec, scen, weights, descriptor.t, descriptor.prev_mode, descriptor.valid_modes or None
        )
    if isinstance(descriptor, StationaryFixedVariant):
        return build_stationary_fixed(
            spec, scen, weights, descriptor.mode, descriptor.t, descriptor.prev_mode
        )
    if isinstance(descriptor, FixedTransientVariant):
        return build_fixed_transient(
            spec, scen, weights, descriptor.modes, descriptor.directions, descriptor.snapshot
        )
    raise TypeError(f"unknown variant descriptor {descriptor!r}")


def build_full(spec: StationSpec, scen: Scenario, weights: ObjectiveWeights) -> ModelInstance:
    times = list(range(1, scen.n_future + 1))
    b = _Builder(spec, scen, weights, "P", times, snapshot=initial_snapshot(scen))
    return b.build()


def build_stationary(
    spec: StationSpec,
    scen: Scenario,
    weights: ObjectiveWeights,
    t: int,
    prev_mode: str,
    valid_modes=None,
) -> ModelInstance:
    b = _Builder(
        spec, scen, weights, "Ps", [t], prev_mode=prev_mode, valid_modes=valid_modes
    )
    return b.build()


def build_stationary_fixed(
    spec: StationSpec, scen: Scenario, weights: ObjectiveWeights, mode: str, t: int, prev_mode: str
) -> ModelInstance:
    if mode not in spec.operation_modes:
        raise KeyError(f"unknown operation mode {mode!r}")
    b = _Builder(spec, scen, weights, "Psf", [t], prev_mode=prev_mode, fixed_modes={t: mode})
    return b.build()


def build_fixed_transient(
    spec: StationSpec,
    scen: Scenario,
    weights: ObjectiveWeights,
    modes,
    directions,
    snapshot: StateSnapshot,
) -> ModelInstance:
    from .network import mode_available

    modes = tuple(modes)
    directions = tuple(directions)
    if len(modes) != len(directions):
        raise ValueError("mode and direction sequences differ in length")
    t_start = snapshot.time_index + 1
    times = list(range(t_start, t_start + len(modes)))
    if times[-1] > scen.n_future:
        raise ValueError("sequence extends past the time grid")
    for t, (o, f) in zip(times, zip(modes, directions)):
        if (o, f) not in spec.valid_pairs:
            raise ValueError(f"({o!r}, {f!r}) is not a valid mode/direction pair")
        if not mode_available(spec, scen.time_grid, o, t):
            raise ValueError(f"fixed mode {o!r} is unavailable at time step {t}")
    fixed_modes = dict(zip(times, modes))
    fixed_dirs = dict(zip(times, directions))
    b = _Builder(
        spec,
        scen,
        weights,
        "Pf",
        times,
        snapshot=snapshot,
        fixed_modes=fixed_modes,
        fixed_dirs=fixed_dirs,
    )
    return b.build()


# ---------------------------------------------------------------------------


class _Builder:
    def __init__(
        self,
        spec: StationSpec,
        scen: Scenario,
        weights: ObjectiveWeights,
        kind: str,
        times,
        snapshot: StateSnapshot | None = None,
        prev_mode: str | None = None,
        fixed_modes: dict | None = None,
        fixed_dirs: dict | None = None,
        valid_modes=None,
    ):
        self.spec = spec
        self.scen = scen
        self.kind = kind
        self.transient = kind in ("P", "Pf")
        self.times = list(times)
        self.snapshot = snapshot
        self.prev_mode = prev_mode if snapshot is None else snapshot.operation_mode
        self.fixed_modes = fixed_modes or {}
        self.fixed_dirs = fixed_dirs or {}
        self.iw = InternalWeights.from_weights(weights, spec.constants.normal_density)
        self.instance = ModelInstance(kind, LinearModel(f"{kind}_{spec.name}"), spec, scen, times)
        self.h = self.instance.handles
        from .network import mode_available

        self._available = mode_available
        if valid_modes is None:
            self.valid_modes = {
                t: [
                    o
                    for o in spec.operation_modes
                    if mode_available(spec, scen.time_grid, o, t)
                ]
                for t in self.times
            }
        else:
            self.valid_modes = {
                t: [
                    o
                    for o in valid_modes
                    if mode_available(spec, scen.time_grid, o, t)
                ]
                for t in self.times
            }
        for t in self.times:
            if t in self.fixed_modes:
                continue
            if not self.valid_modes[t]:
                raise BuildInfeasibleError(f"no operation mode is available at time step {t}")

    # -- handle helpers ----------------------------------------------------

    def _prev(self, t: int) -> int:
        return t - 1

    def _p(self, v: str, t: int):
        if t in self.times:
            return self.h[("p", v, t)]
        return self.snapshot.pressures[v]

    def _q(self, a: str, t: int):
        if t in self.times:
            return self.h[("q", a, t)]
        return self.snapshot.arc_flows[a]

    def _om(self, o: str, t: int):
        if t in self.times:
            return self.h.get(("om", o, t), 0.0)
        prev = self.prev_mode
        return 1.0 if o == prev else 0.0

    def _rg(self, token: str, a: str, t: int):
        if t in self.times:
            return self.h[("rg", token, a, t)]
        # only transient builders look back in time for regulator modes
        return 1.0 if token == self.snapshot.regulator_modes[a] else 0.0

    def _station_token(self, a: str, t: int) -> str | None:
        """The fixed station token at t, or None when binaries are free."""
        if t in self.fixed_modes:
            return self.spec.operation_modes[self.fixed_modes[t]].assignment[a]
        if t not in self.times:
            mode = self.prev_mode
            return self.spec.operation_modes[mode].assignment[a]
        return None

    def _cfg(self, c: str, a: str, t: int):
        token = self._station_token(a, t)
        if token is None:
            return self.h[("cfg", c, a, t)]
        return 1.0 if token == c else 0.0

    def _cs_mode(self, which: str, a: str, t: int):
        token = self._station_token(a, t)
        if token is None:
            return self.h[(f"cs_{which}", a, t)]
        return 1.0 if token == which else 0.0

    # -- build -------------------------------------------------------------

    def build(self) -> ModelInstance:
        for t in self.times:
            self._make_variables(t)
        for t in self.times:
            self._emit_time_step(t)
        self._emit_objective()
        return self.instance

    def _make_variables(self, t: int) -> None:
        spec = self.spec
        m = self.instance.model
        add = m.add_var
        for v in sorted(spec.nodes):
            node = spec.nodes[v]
            self.h[("p", v, t)] = add(f"p({v},{t})", node.pressure_lb[t], node.pressure_ub[t])
        for a in sorted(spec.pipes):
            pipe = spec.pipes[a]
            if self.transient:
                self.h[("ql", a, t)] = add(f"ql({a},{t})", pipe.flow_lb[t], pipe.flow_ub[t])
                self.h[("qr", a, t)] = add(f"qr({a},{t})", pipe.flow_lb[t], pipe.flow_ub[t])
            else:
                q = add(f"q({a},{t})", pipe.flow_lb[t], pipe.flow_ub[t])
                self.h[("ql", a, t)] = q
                self.h[("qr", a, t)] = q
                self.h[("q", a, t)] = q
        for a in sorted(spec.non_pipe_arcs()):
            arc = spec.non_pipe_arcs()[a]
            self.h[("q", a, t)] = add(f"q({a},{t})", arc.flow_lb[t], arc.flow_ub[t])
        for v in sorted(spec.boundary_nodes()):
            self.h[("d", v, t)] = add(
                f"d({v},{t})", self.scen.inflow_lb[v][t], self.scen.inflow_ub[v][t]
            )

        om_fixed = t in self.fixed_modes
        if om_fixed:
            fixed = self.fixed_modes[t]
            for o in spec.operation_modes:
                self.h[("om", o, t)] = 1.0 if o == fixed else 0.0
        else:
            for o in sorted(spec.operation_modes):
                if o in self.valid_modes[t]:
                    self.h[("om", o, t)] = add(f"om({o},{t})", 0.0, 1.0, integer=True)
        if t in self.fixed_dirs:
            for f in spec.flow_directions:
                self.h[("fd", f, t)] = 1.0 if f == self.fixed_dirs[t] else 0.0
        else:
            for f in sorted(spec.flow_directions):
                self.h[("fd", f, t)] = add(f"fd({f},{t})", 0.0, 1.0, integer=True)

        for a in sorted(spec.valves):
            if om_fixed:
                token = spec.operation_modes[self.fixed_modes[t]].assignment[a]
                self.h[("op", a, t)] = 1.0 if token == "op" else 0.0
            else:
                self.h[("op", a, t)] = add(f"op({a},{t})", 0.0, 1.0, integer=True)

        for a in sorted(spec.stations):
            st = spec.stations[a]
            if om_fixed:
                continue  # no binaries, no copies; facets go on the originals
            nl = spec.nodes[st.from_node]
            nr = spec.nodes[st.to_node]
            plub, prub = nl.pressure_ub[t], nr.pressure_ub[t]
            qlb, qub = st.flow_lb[t], st.flow_ub[t]
            self.h[("cs_by", a, t)] = add(f"cs_by({a},{t})", 0.0, 1.0, integer=True)
            self.h[("cs_cl", a, t)] = add(f"cs_cl({a},{t})", 0.0, 1.0, integer=True)
            self.h[("p_by", a, t)] = add(f"p_by({a},{t})", 0.0, min(plub, prub))
            self.h[("q_by", a, t)] = add(f"q_by({a},{t})", min(0.0, qlb), max(0.0, qub))
            self.h[("p_cl_l", a, t)] = add(f"p_cl_l({a},{t})", 0.0, plub)
            self.h[("p_cl_r", a, t)] = add(f"p_cl_r({a},{t})", 0.0, prub)
            for c in st.configurations:
                self.h[("cfg", c.id, a, t)] = add(f"cfg({c.id},{a},{t})", 0.0, 1.0, integer=True)
                self.h[("p_cfg_l", c.id, a, t)] = add(f"p_cfg_l({c.id},{a},{t})", 0.0, plub)
                self.h[("p_cfg_r", c.id, a, t)] = add(f"p_cfg_r({c.id},{a},{t})", 0.0, prub)
                self.h[("q_cfg", c.id, a, t)] = add(
                    f"q_cfg({c.id},{a},{t})", 0.0, max(0.0, qub)
                )

        for a in sorted(spec.regulators):
            for token in REGULATOR_TOKENS:
                self.h[("rg", token, a, t)] = add(f"rg_{token}({a},{t})", 0.0, 1.0, integer=True)

        for v in sorted(spec.boundary_nodes()):
            node = spec.nodes[v]
            p_demand = self.scen.pressure_demand[v][t - 1]
            cap = float(node.pressure_ub[t] + abs(p_demand))
            self.h[("sp+", v, t)] = add(f"sp_pos({v},{t})", 0.0, cap)
            self.h[("sp-", v, t)] = add(f"sp_neg({v},{t})", 0.0, cap)
        grouped = {v for g in spec.fence_groups.values() for v in g}
        for v in sorted(grouped):
            cap = float(
                abs(self.scen.inflow_lb[v][t])
                + abs(self.scen.inflow_ub[v][t])
                + max(abs(d) for g, d in self._group_demands(t) if v in spec.fence_groups[g])
            )
            self.h[("sd+", v, t)] = add(f"sd_pos({v},{t})", 0.0, cap + 1.0)
            self.h[("sd-", v, t)] = add(f"sd_neg({v},{t})", 0.0, cap + 1.0)

        # change variables
        if om_fixed and self._om_const(t) is not None:
            self.h[("d_om", t)] = self._om_const(t)
        else:
            self.h[("d_om", t)] = add(f"d_om({t})", 0.0, 1.0, integer=True)
        if self.transient:
            # stationary variants drop regulator change tracking entirely
            for a in sorted(spec.regulators):
                self.h[("d_rg", a, t)] = add(f"d_rg({a},{t})", 0.0, 1.0, integer=True)
        for a in sorted(spec.stations):
            st = spec.stations[a]
            for u in st.units:
                if om_fixed:
                    used_now = u.id in st.token_units(self._station_token(a, t))
                    prev_token = self._prev_station_token(a, t)
                    if prev_token is not None:
                        used_prev = u.id in st.token_units(prev_token)
                        self.h[("d_us", u.id, a, t)] = float(used_now and not used_prev)
                        continue
                self.h[("d_us", u.id, a, t)] = add(
                    f"d_us({u.id},{a},{t})", 0.0, 1.0, integer=True
                )

        if self.transient:
            for a in sorted(spec.regulators):
                self._make_tracker_vars("rg", a, t)
            for a in sorted(spec.stations):
                self._make_tracker_vars("cs", a, t)

    def _om_const(self, t: int):
        """Constant operation-mode change at t, when both sides are fixed."""
        if t not in self.fixed_modes:
            return None
        prev = self.fixed_modes.get(t - 1) if (t - 1) in self.times else self.prev_mode
        if prev is None:
            return None
        return 1.0 if self.fixed_modes[t] != prev else 0.0

    def _prev_station_token(self, a: str, t: int) -> str | None:
        tp = t - 1
        if tp in self.times:
            return self._station_token(a, tp)
        mode = self.prev_mode
        return self.spec.operation_modes[mode].assignment[a]

    def _make_tracker_vars(self, kind: str, a: str, t: int) -> None:
        spec = self.spec
        arc = spec.regulators[a] if kind == "rg" else spec.stations[a]
        nl, nr = spec.nodes[arc.from_node], spec.nodes[arc.to_node]
        add = self.instance.model.add_var
        tp = t - 1

        def span(lb, ub):
            return max(ub[t] - lb[tp], ub[tp] - lb[t], 0.0)

        self.h[(f"{kind}_pl", a, t)] = add(
            f"trk_{kind}_pl({a},{t})", 0.0, span(nl.pressure_lb, nl.pressure_ub)
        )
        self.h[(f"{kind}_pr", a, t)] = add(
            f"trk_{kind}_pr({a},{t})", 0.0, span(nr.pressure_lb, nr.pressure_ub)
        )
        self.h[(f"{kind}_q", a, t)] = add(
            f"trk_{kind}_q({a},{t})", 0.0, span(arc.flow_lb, arc.flow_ub)
        )

    def _group_demands(self, t: int):
        for g in self.spec.fence_groups:
            yield g, self.scen.flow_demand[g][t - 1]

    # -- rows ---------------------------------------------------------------

    def _emit_time_step(self, t: int) -> None:
        spec = self.spec
        for a in sorted(spec.pipes):
            self._emit_pipe(a, t)
        for a in sorted(spec.resistors):
            self._emit_resistor(a, t)
        for a in sorted(spec.valves):
            self._emit_valve(a, t)
        for a in sorted(spec.regulators):
            self._emit_regulator(a, t)
        for a in sorted(spec.stations):
            self._emit_station(a, t)
        for v in sorted(spec.nodes):
            self._emit_node_balance(v, t)
        self._emit_station_logic(t)
        self._emit_slacks(t)
        self._emit_changes(t)
        if self.transient:
            self._emit_trackers(t)

    def _emit_pipe(self, a: str, t: int) -> None:
        spec = self.spec
        pipe = spec.pipes[a]
        c = spec.constants
        m = self.instance.model
        rstz = c.specific_gas_constant * c.temperature * pipe.z_factor
        fric_coef = (
            _friction(pipe) * pipe.length / (4.0 * pipe.diameter * pipe.area)
        )
        grav = c.gravity * pipe.slope * pipe.length / (2.0 * rstz)
        pl, pr = self._p(pipe.from_node, t), self._p(pipe.to_node, t)
        ql, qr = self.h[("ql", a, t)], self.h[("qr", a, t)]
        if self.transient:
            t0 = t - 1
            dt = self.scen.time_grid[t] - self.scen.time_grid[t0]
            cont = 2.0 * rstz * dt / (pipe.length * pipe.area)
            pl0 = self._p(pipe.from_node, t0)
            pr0 = self._p(pipe.to_node, t0)
            m.add_row(
                f"pipe_cont({a},{t})",
                [(1.0, pl), (1.0, pr), (-1.0, pl0), (-1.0, pr0), (cont, qr), (-cont, ql)],
                "==",
                0.0,
            )
            m.add_row(
                f"pipe_mom({a},{t})",
                [
                    (1.0 + grav, pr),
                    (-1.0 + grav, pl),
                    (fric_coef * pipe.velo_const_from, ql),
                    (fric_coef * pipe.velo_const_to, qr),
                ],
                "==",
                0.0,
            )
        else:
            m.add_row(
                f"pipe_mom({a},{t})",
                [
                    (1.0 + grav, pr),
                    (-1.0 + grav, pl),
                    (fric_coef * (pipe.velo_const_from + pipe.velo_const_to), ql),
                ],
                "==",
                0.0,
            )

    def _emit_resistor(self, a: str, t: int) -> None:
        res = self.spec.resistors[a]
        coef = res.drag * res.velo_const / (2.0 * res.area)
        self.instance.model.add_row(
            f"resistor({a},{t})",
            [
                (1.0, self._p(res.from_node, t)),
                (-1.0, self._p(res.to_node, t)),
                (-coef, self.h[("q", a, t)]),
            ],
            "==",
            0.0,
        )

    def _emit_valve(self, a: str, t: int) -> None:
        spec = self.spec
        valve = spec.valves[a]
        m = self.instance.model
        nl, nr = spec.nodes[valve.from_node], spec.nodes[valve.to_node]
        pl, pr = self._p(valve.from_node, t), self._p(valve.to_node, t)
        q = self.h[("q", a, t)]
        op = self.h[("op", a, t)]
        hi = nl.pressure_ub[t] - nr.pressure_lb[t]
        lo = nl.pressure_lb[t] - nr.pressure_ub[t]
        m.add_row(f"valve_p_hi({a},{t})", [(1.0, pl), (-1.0, pr), (hi, op)], "<=", hi)
        m.add_row(f"valve_p_lo({a},{t})", [(1.0, pl), (-1.0, pr), (lo, op)], ">=", lo)
        m.add_row(f"valve_q_hi({a},{t})", [(1.0, q), (-valve.flow_ub[t], op)], "<=", 0.0)
        m.add_row(f"valve_q_lo({a},{t})", [(1.0, q), (-valve.flow_lb[t], op)], ">=", 0.0)

    def _emit_regulator(self, a: str, t: int) -> None:
        spec = self.spec
        rg = spec.regulators[a]
        m = self.instance.model
        nl, nr = spec.nodes[rg.from_node], spec.nodes[rg.to_node]
        pl, pr = self._p(rg.from_node, t), self._p(rg.to_node, t)
        q = self.h[("q", a, t)]
        by = self._rg("by", a, t)
        cl = self._rg("cl", a, t)
        ac = self._rg("ac", a, t)
        m.add_row(f"rg_mode({a},{t})", [(1.0, cl), (1.0, by), (1.0, ac)], "==", 1.0)
        hi = nl.pressure_ub[t] - nr.pressure_lb[t]
        lo = nl.pressure_lb[t] - nr.pressure_ub[t]
        m.add_row(f"rg_p_hi({a},{t})", [(1.0, pl), (-1.0, pr), (hi, by)], "<=", hi)
        m.add_row(f"rg_p_lo({a},{t})", [(1.0, pl), (-1.0, pr), (lo, by), (lo, ac)], ">=", lo)
        m.add_row(f"rg_q_hi({a},{t})", [(1.0, q), (rg.flow_ub[t], cl)], "<=", rg.flow_ub[t])
        m.add_row(f"rg_q_lo({a},{t})", [(1.0, q)], ">=", 0.0)

    def _emit_station(self, a: str, t: int) -> None:
        spec = self.spec
        st = spec.stations[a]
        m = self.instance.model
        pl, pr = self._p(st.from_node, t), self._p(st.to_node, t)
        q = self.h[("q", a, t)]
        token = self._station_token(a, t)
        if token is not None:
            # mode fixed: apply the active branch directly on the originals
            if token == "by":
                m.add_row(f"cs_bypass({a},{t})", [(1.0, pl), (-1.0, pr)], "==", 0.0)
            elif token == "cl":
                m.add_row(f"cs_closed({a},{t})", [(1.0, q)], "==", 0.0)
            else:
                config = st.configuration(token)
                self._require_facets(config, a)
                m.add_row(f"cs_q_lo({a},{t})", [(1.0, q)], ">=", 0.0)
                for i, (w, x, y, z) in enumerate(config.facets):
                    m.add_row(
                        f"cs_facet({config.id},{a},{t},{i})",
                        [(w, pl), (x, pr), (y, q)],
                        "<=",
                        -z,
                    )
            return

        by = self.h[("cs_by", a, t)]
        cl = self.h[("cs_cl", a, t)]
        p_by, q_by = self.h[("p_by", a, t)], self.h[("q_by", a, t)]
        p_cl_l, p_cl_r = self.h[("p_cl_l", a, t)], self.h[("p_cl_r", a, t)]
        cfgs = [self.h[("cfg", c.id, a, t)] for c in st.configurations]
        sel = [(1.0, by), (1.0, cl)] + [(1.0, g) for g in cfgs]
        m.add_row(f"cs_select({a},{t})", sel, "==", 1.0)
        link_l = [(1.0, p_by), (1.0, p_cl_l)] + [
            (1.0, self.h[("p_cfg_l", c.id, a, t)]) for c in st.configurations
        ]
        link_r = [(1.0, p_by), (1.0, p_cl_r)] + [
            (1.0, self.h[("p_cfg_r", c.id, a, t)]) for c in st.configurations
        ]
        link_q = [(1.0, q_by)] + [(1.0, self.h[("q_cfg", c.id, a, t)]) for c in st.configurations]
        m.add_row(f"cs_link_pl({a},{t})", [(-1.0, pl)] + link_l, "==", 0.0)
        m.add_row(f"cs_link_pr({a},{t})", [(-1.0, pr)] + link_r, "==", 0.0)
        m.add_row(f"cs_link_q({a},{t})", [(-1.0, q)] + link_q, "==", 0.0)

        nl, nr = spec.nodes[st.from_node], spec.nodes[st.to_node]
        plub, prub = nl.pressure_ub[t], nr.pressure_ub[t]
        qlb, qub = st.flow_lb[t], st.flow_ub[t]

        def bound_pair(label, var, lo, hi, indicator):
            m.add_row(f"cs_bnd_lo({label},{a},{t})", [(1.0, var), (-lo, indicator)], ">=", 0.0)
            m.add_row(f"cs_bnd_hi({label},{a},{t})", [(1.0, var), (-hi, indicator)], "<=", 0.0)

        for c in st.configurations:
            g = self.h[("cfg", c.id, a, t)]
            bound_pair(f"pl,{c.id}", self.h[("p_cfg_l", c.id, a, t)], 0.0, plub, g)
            bound_pair(f"pr,{c.id}", self.h[("p_cfg_r", c.id, a, t)], 0.0, prub, g)
            bound_pair(f"q,{c.id}", self.h[("q_cfg", c.id, a, t)], 0.0, max(0.0, qub), g)
        bound_pair("p,by", p_by, 0.0, min(plub, prub), by)
        bound_pair("q,by", q_by, min(0.0, qlb), max(0.0, qub), by)
        bound_pair("pl,cl", p_cl_l, 0.0, plub, cl)
        bound_pair("pr,cl", p_cl_r, 0.0, prub, cl)

        for c in st.configurations:
            self._require_facets(c, a)
            g = self.h[("cfg", c.id, a, t)]
            for i, (w, x, y, z) in enumerate(c.facets):
                m.add_row(
                    f"cs_facet({c.id},{a},{t},{i})",
                    [
                        (w, self.h[("p_cfg_l", c.id, a, t)]),
                        (x, self.h[("p_cfg_r", c.id, a, t)]),
                        (y, self.h[("q_cfg", c.id, a, t)]),
                        (z, g),
                    ],
                    "<=",
                    0.0,
                )

    def _require_facets(self, config, arc_id: str) -> None:
        if config.facets is None:
            raise ValueError(
                f"configuration {config.id!r} on station {arc_id!r} has no built operating range"
            )

    def _emit_node_balance(self, v: str, t: int) -> None:
        spec = self.spec
        pairs = []
        for a, pipe in spec.pipes.items():
            if pipe.to_node == v:
                pairs.append((1.0, self.h[("qr", a, t)]))
            if pipe.from_node == v:
                pairs.append((-1.0, self.h[("ql", a, t)]))
        for a, arc in spec.non_pipe_arcs().items():
            if arc.to_node == v:
                pairs.append((1.0, self.h[("q", a, t)]))
            if arc.from_node == v:
                pairs.append((-1.0, self.h[("q", a, t)]))
        if spec.nodes[v].is_boundary:
            pairs.append((1.0, self.h[("d", v, t)]))
        if pairs:
            self.instance.model.add_row(f"balance({v},{t})", pairs, "==", 0.0)

    def _emit_station_logic(self, t: int) -> None:
        spec = self.spec
        m = self.instance.model
        om_fixed = t in self.fixed_modes

        if not om_fixed:
            m.add_row(
                f"om_choice({t})",
                [(1.0, self._om(o, t)) for o in spec.operation_modes],
                "==",
                1.0,
            )
            for a in sorted(spec.valves):
                pairs = [(1.0, self.h[("op", a, t)])]
                pairs += [
                    (-1.0, self._om(o, t))
                    for o in spec.operation_modes
                    if spec.operation_modes[o].assignment[a] == "op"
                ]
                m.add_row(f"valve_coupling({a},{t})", pairs, "==", 0.0)
            for a in sorted(spec.stations):
                st = spec.stations[a]
                pairs = [(1.0, self.h[("cs_by", a, t)])]
                pairs += [
                    (-1.0, self._om(o, t))
                    for o in spec.operation_modes
                    if spec.operation_modes[o].assignment[a] == "by"
                ]
                m.add_row(f"cs_by_coupling({a},{t})", pairs, "==", 0.0)
                # the closed-mode coupling row is implied by the remaining
                # couplings together with mode selection; omitted
                for c in st.configurations:
                    pairs = [(1.0, self.h[("cfg", c.id, a, t)])]
                    pairs += [
                        (-1.0, self._om(o, t))
                        for o in spec.operation_modes
                        if spec.operation_modes[o].assignment[a] == c.id
                    ]
                    m.add_row(f"cs_cfg_coupling({c.id},{a},{t})", pairs, "==", 0.0)

        fd_fixed = t in self.fixed_dirs
        if not fd_fixed:
            m.add_row(
                f"fd_choice({t})",
                [(1.0, self.h[("fd", f, t)]) for f in sorted(spec.flow_directions)],
                "==",
                1.0,
            )
        for o in sorted(spec.operation_modes):
            om = self._om(o, t)
            if isinstance(om, float) and om == 0.0:
                continue
            partners = sorted(f for (oo, f) in spec.valid_pairs if oo == o)
            pairs = [(1.0, om)] + [(-1.0, self.h[("fd", f, t)]) for f in partners]
            m.add_row(f"om_fd_coupling({o},{t})", pairs, "<=", 0.0)

        for v in sorted(spec.boundary_nodes()):
            d = self.h[("d", v, t)]
            dlb = self.scen.inflow_lb[v][t]
            dub = self.scen.inflow_ub[v][t]
            not_out = [
                f
                for f, fd in spec.flow_directions.items()
                if v not in fd.outflow_nodes
            ]
            not_in = [
                f
                for f, fd in spec.flow_directions.items()
                if v not in fd.inflow_nodes
            ]
            m.add_row(
                f"fd_inflow_lo({v},{t})",
                [(1.0, d)] + [(dlb, self.h[("fd", f, t)]) for f in not_out],
                ">=",
                dlb,
            )
            m.add_row(
                f"fd_inflow_hi({v},{t})",
                [(1.0, d)] + [(dub, self.h[("fd", f, t)]) for f in not_in],
                "<=",
                dub,
            )
            node = spec.nodes[v]
            if node.exit_pressure_ub is not None:
                outs = [f for f, fd in spec.flow_directions.items() if v in fd.outflow_nodes]
                gap = node.pressure_ub[t] - node.exit_pressure_ub
                m.add_row(
                    f"exit_pressure({v},{t})",
                    [(1.0, self._p(v, t))] + [(gap, self.h[("fd", f, t)]) for f in outs],
                    "<=",
                    node.pressure_ub[t],
                )

        for idx, cond in enumerate(spec.flow_conditions):
            f = cond.direction
            fd_handle = self.h[("fd", f, t)]
            if isinstance(fd_handle, float) and fd_handle == 0.0:
                continue  # resolved away: condition direction not selected
            direction = spec.flow_directions[f]

            def sgn(v):
                return 1.0 if v in direction.inflow_nodes else -1.0

            c1 = self._condition_big_m(cond, t)
            pairs = [(sgn(v), self.h[("d", v, t)]) for v in cond.smaller]
            pairs += [(-sgn(v), self.h[("d", v, t)]) for v in cond.larger]
            pairs.append((c1, fd_handle))
            m.add_row(f"flow_condition({idx},{t})", pairs, "<=", c1)

    def _condition_big_m(self, cond, t: int) -> float:
        direction = self.spec.flow_directions[cond.direction]
        dlb = {v: self.scen.inflow_lb[v][t] for v in set(cond.smaller) | set(cond.larger)}
        dub = {v: self.scen.inflow_ub[v][t] for v in set(cond.smaller) | set(cond.larger)}
        c1 = 0.0
        for v in cond.smaller:
            if v in direction.inflow_nodes:
                c1 += max(0.0, dub[v])
            else:
                c1 -= min(0.0, dlb[v])
        for v in cond.larger:
            if v in direction.inflow_nodes:
                c1 -= max(0.0, dlb[v])
            else:
                c1 += min(0.0, dub[v])
        return c1

    def _emit_slacks(self, t: int) -> None:
        spec = self.spec
        m = self.instance.model
        for v in sorted(spec.boundary_nodes()):
            m.add_row(
                f"slack_pressure({v},{t})",
                [
                    (1.0, self._p(v, t)),
                    (-1.0, self.h[("sp+", v, t)]),
                    (1.0, self.h[("sp-", v, t)]),
                ],
                "==",
                self.scen.pressure_demand[v][t - 1],
            )
        for g, members in sorted(spec.fence_groups.items()):
            pairs = []
            for v in members:
                pairs += [
                    (1.0, self.h[("d", v, t)]),
                    (-1.0, self.h[("sd+", v, t)]),
                    (1.0, self.h[("sd-", v, t)]),
                ]
            m.add_row(f"slack_flow({g},{t})", pairs, "==", self.scen.flow_demand[g][t - 1])

    def _emit_changes(self, t: int) -> None:
        spec = self.spec
        m = self.instance.model
        d_om = self.h[("d_om", t)]
        if isinstance(d_om, VarRef):
            for o in sorted(spec.operation_modes):
                m.add_row(
                    f"om_change_lo({o},{t})",
                    [(1.0, d_om), (-1.0, self._om(o, t)), (1.0, self._om(o, t - 1))],
                    ">=",
                    0.0,
                )
                m.add_row(
                    f"om_change_hi({o},{t})",
                    [(1.0, d_om), (1.0, self._om(o, t)), (1.0, self._om(o, t - 1))],
                    "<=",
                    2.0,
                )
        if self.transient:
            for a in sorted(spec.regulators):
                d_rg = self.h[("d_rg", a, t)]
                for token in REGULATOR_TOKENS:
                    now, before = self._rg(token, a, t), self._rg(token, a, t - 1)
                    m.add_row(
                        f"rg_change_lo({token},{a},{t})",
                        [(1.0, d_rg), (-1.0, now), (1.0, before)],
                        ">=",
                        0.0,
                    )
                    m.add_row(
                        f"rg_change_hi({token},{a},{t})",
                        [(1.0, d_rg), (1.0, now), (1.0, before)],
                        "<=",
                        2.0,
                    )
        for a in sorted(spec.stations):
            st = spec.stations[a]
            for u in st.units:
                d_us = self.h[("d_us", u.id, a, t)]
                if not isinstance(d_us, VarRef):
                    continue
                using = [c.id for c in st.configurations if u.id in c.units]
                pairs = [(1.0, d_us)]
                pairs += [(-1.0, self._cfg(c, a, t)) for c in using]
                pairs += [(1.0, self._cfg(c, a, t - 1)) for c in using]
                m.add_row(f"unit_start({u.id},{a},{t})", pairs, ">=", 0.0)

    def _emit_trackers(self, t: int) -> None:
        spec = self.spec
        for a in sorted(spec.regulators):
            relax = [
                (1.0, self._rg("by", a, t)),
                (1.0, self._rg("cl", a, t)),
                (1.0, self.h[("d_rg", a, t)]),
            ]
            self._tracker_rows("rg", spec.regulators[a], a, t, relax)
        for a in sorted(spec.stations):
            relax = [
                (1.0, self._cs_mode("by", a, t)),
                (1.0, self._cs_mode("cl", a, t)),
                (1.0, self.h[("d_om", t)]),
            ]
            self._tracker_rows("cs", spec.stations[a], a, t, relax)

    def _tracker_rows(self, kind: str, arc, a: str, t: int, relax) -> None:
        spec = self.spec
        m = self.instance.model
        tp = t - 1
        nl, nr = spec.nodes[arc.from_node], spec.nodes[arc.to_node]

        def emit(label, tracker, now, before, up_m, down_m):
            m.add_row(
                f"trk_{kind}_{label}_up({a},{t})",
                [(1.0, now), (-1.0, before), (-1.0, tracker)] + [(-up_m, h) for _, h in relax],
                "<=",
                0.0,
            )
            m.add_row(
                f"trk_{kind}_{label}_dn({a},{t})",
                [(1.0, before), (-1.0, now), (-1.0, tracker)] + [(-down_m, h) for _, h in relax],
                "<=",
                0.0,
            )

        emit(
            "pl",
            self.h[(f"{kind}_pl", a, t)],
            self._p(arc.from_node, t),
            self._p(arc.from_node, tp) if tp in self.times else self.snapshot.pressures[arc.from_node],
            nl.pressure_ub[t] - nl.pressure_lb[tp],
            nl.pressure_ub[tp] - nl.pressure_lb[t],
        )
        emit(
            "pr",
            self.h[(f"{kind}_pr", a, t)],
            self._p(arc.to_node, t),
            self._p(arc.to_node, tp) if tp in self.times else self.snapshot.pressures[arc.to_node],
            nr.pressure_ub[t] - nr.pressure_lb[tp],
            nr.pressure_ub[tp] - nr.pressure_lb[t],
        )
        emit(
            "q",
            self.h[(f"{kind}_q", a, t)],
            self._q(a, t),
            self._q(a, tp) if tp in self.times else self.snapshot.arc_flows[a],
            arc.flow_ub[t] - arc.flow_lb[tp],
            arc.flow_ub[tp] - arc.flow_lb[t],
        )

    def _emit_objective(self) -> None:
        spec = self.spec
        m = self.instance.model
        iw = self.iw
        for t in self.times:
            dt = self.scen.step_length(t)
            for v in sorted(spec.boundary_nodes()):
                m.add_objective("slack_pressure", self.h[("sp+", v, t)], dt * iw.slack_pressure)
                m.add_objective("slack_pressure", self.h[("sp-", v, t)], dt * iw.slack_pressure)
                if ("sd+", v, t) in self.h:
                    m.add_objective("slack_flow", self.h[("sd+", v, t)], dt * iw.slack_flow)
                    m.add_objective("slack_flow", self.h[("sd-", v, t)], dt * iw.slack_flow)
            m.add_objective("om_change", self.h[("d_om", t)], iw.operation_mode_change)
            for a in sorted(spec.stations):
                for u in spec.stations[a].units:
                    m.add_objective("unit_start", self.h[("d_us", u.id, a, t)], iw.unit_start)
            if self.transient:
                for a in sorted(spec.regulators):
                    m.add_objective(
                        "rg_change", self.h[("d_rg", a, t)], iw.regulator_mode_change
                    )
                    m.add_objective(
                        "rg_inlet_pressure", self.h[("rg_pl", a, t)], iw.regulator_inlet_pressure
                    )
                    m.add_objective(
                        "rg_outlet_pressure", self.h[("rg_pr", a, t)], iw.regulator_outlet_pressure
                    )
                    m.add_objective("rg_flow", self.h[("rg_q", a, t)], iw.regulator_flow)
                for a in sorted(spec.stations):
                    m.add_objective(
                        "cs_inlet_pressure", self.h[("cs_pl", a, t)], iw.station_inlet_pressure
                    )
                    m.add_objective(
                        "cs_outlet_pressure", self.h[("cs_pr", a, t)], iw.station_outlet_pressure
                    )
                    m.add_objective("cs_flow", self.h[("cs_q", a, t)], iw.station_flow)


def _friction(pipe) -> float:
    return nikuradse_friction(pipe.diameter, pipe.roughness)
