"""The specialized three-stage solution procedure.

Stage one builds an initial mode sequence greedily (keep the previous
mode while it is cheap, otherwise pick the best stationary mode).  Stage
two sweeps the sequence backward and forward, replacing whole stable
phases by convex-combination neighbor modes when that strictly improves
the summed stationary objective.  Stage three solves the transient model
with everything fixed in a rolling-horizon fashion and stitches the
windows into one feasible control plan.

Transition-time bookkeeping lives here too: a mode switch occupies a
time interval centered on the switch instant and two such intervals must
never overlap.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .linmodel import BuildInfeasibleError, VarRef
from .model import (
    ObjectiveWeights,
    StateSnapshot,
    build_fixed_transient,
    build_full,
    build_stationary,
    build_stationary_fixed,
    initial_snapshot,
)
from .network import Scenario, StationSpec, mode_available
from .solve import BackendError, SolveSettings, check_assignment, default_settings_for, solve


class InitialSolutionAbort(RuntimeError):
    """The greedy construction found no usable mode for some time step.

    Not a proof of infeasibility; a feasible sequence may still exist.
    """


class SmoothingError(RuntimeError):
    def __init__(self, window_start: int, message: str):
        super().__init__(f"smoothing window starting at time step {window_start}: {message}")
        self.window_start = window_start


@dataclass(frozen=True)
class ModeSequence:
    """Operation mode and flow direction per time step; position 0 is the
    initial state (its direction is undefined)."""

    modes: tuple
    directions: tuple

    def __post_init__(self) -> None:
        if len(self.modes) != len(self.directions):
            raise ValueError("modes and directions must have equal length")

    @property
    def n_future(self) -> int:
        return len(self.modes) - 1

    def change_times(self) -> list[int]:
        return [t for t in range(1, len(self.modes)) if self.modes[t] != self.modes[t - 1]]

    def replaced(self, positions, new_mode: str) -> "ModeSequence":
        modes = list(self.modes)
        for t in positions:
            modes[t] = new_mode
        return ModeSequence(tuple(modes), self.directions)

    def with_directions(self, directions) -> "ModeSequence":
        return ModeSequence(self.modes, tuple(directions))


def sequence_valid(spec: StationSpec, seq: ModeSequence) -> bool:
    for t, (o, f) in enumerate(zip(seq.modes, seq.directions)):
        if o not in spec.operation_modes:
            return False
        if t >= 1 and f is not None and (o, f) not in spec.valid_pairs:
            return False
    return True


def transitions_work(spec: StationSpec, modes, time_grid) -> bool:
    """Whether the mode switches of a sequence fit their transition times.

    Every phase must be active at least half the incoming plus half the
    outgoing transition time; the first phase only covers the outgoing
    half (the transition into it predates the horizon) and the last phase
    is exempt (it is assumed to stay active long enough).
    """
    changes = [t for t in range(1, len(modes)) if modes[t] != modes[t - 1]]
    for j, t in enumerate(changes):
        theta_out = spec.transition_time(modes[t - 1], modes[t])
        if j == 0:
            # first phase: no known transition into it, only the outgoing half
            phase_start = time_grid[0]
            theta_in = 0.0
        else:
            c_prev = changes[j - 1]
            phase_start = time_grid[c_prev]
            theta_in = spec.transition_time(modes[c_prev - 1], modes[c_prev])
        if time_grid[t] - phase_start < (theta_in + theta_out) / 2.0 - 1e-9:
            return False
    return True


def all_modes_available(spec: StationSpec, time_grid, modes) -> bool:
    return all(mode_available(spec, time_grid, modes[t], t) for t in range(1, len(modes)))


def not_soon_infeasible(
    spec: StationSpec, time_grid, t: int, new_mode: str, old_mode: str
) -> bool:
    """Guard against stepping into a mode that later traps the station.

    If the candidate mode becomes unavailable at some future step, there
    must be an escape: another available mode reachable before that step,
    with both half transitions (into the candidate, out of it) fitting in
    the elapsed time.
    """
    k = len(time_grid) - 1
    blocked = [tp for tp in range(t + 1, k + 1) if not mode_available(spec, time_grid, new_mode, tp)]
    if not blocked:
        return True
    t_star = blocked[0]
    half_in = spec.transition_time(old_mode, new_mode) / 2.0
    for t_out in range(t + 1, t_star + 1):
        for m in spec.operation_modes:
            if m == new_mode:
                continue
            if not mode_available(spec, time_grid, m, t_out):
                continue
            if time_grid[t_out] - time_grid[t] >= half_in + spec.transition_time(new_mode, m) / 2.0:
                return True
    return False


def convex_combination_cs(station, x: str, y: str) -> set:
    """Mode tokens "between" two station tokens: the originals plus every
    configuration whose unit set contains the intersection and stays
    inside the union of the two unit sets."""
    out = {x, y}
    ux, uy = station.token_units(x), station.token_units(y)
    for config in station.configurations:
        uc = config.units
        if (ux & uy) <= uc <= (ux | uy):
            out.add(config.id)
    return out


def convex_combination(spec: StationSpec, o1: str, o2: str) -> list:
    """Operation modes combining two given ones.

    Valve assignments must equal one of the originals exactly (a blended
    valve pattern opens unrelated paths); station tokens may come from the
    per-station convex combination.  Always contains the originals.
    """
    m1 = spec.operation_modes[o1]
    m2 = spec.operation_modes[o2]
    out = []
    for o, mode in spec.operation_modes.items():
        valves_like_1 = all(mode.assignment[a] == m1.assignment[a] for a in spec.valves)
        valves_like_2 = all(mode.assignment[a] == m2.assignment[a] for a in spec.valves)
        if not (valves_like_1 or valves_like_2):
            continue
        if all(
            mode.assignment[a]
            in convex_combination_cs(spec.stations[a], m1.assignment[a], m2.assignment[a])
            for a in spec.stations
        ):
            out.append(o)
    return sorted(out)


def compute_gap(plan_objective: float, lower_bound: float) -> float:
    """Relative distance (obj - lb) / obj, clamped to zero when both the
    objective and the bound are below 0.1."""
    if plan_objective < 0.0:
        raise ValueError("plan objective must be nonnegative")
    if plan_objective < 0.1 and lower_bound < 0.1:
        return 0.0
    if plan_objective == 0.0:
        raise ValueError("zero objective with a positive lower bound")
    return (plan_objective - lower_bound) / plan_objective


@dataclass
class ControlPlan:
    sequence: ModeSequence
    regulator_modes: list  # per position 0..k: {arc id: token}
    steps: dict  # t >= 1 -> {"pressures", "arc_flows", "pipe_flows", "inflows"}
    objective: float
    breakdown: dict
    phase_seconds: dict
    diagnostics: dict = field(default_factory=dict)

    @property
    def phase_shares(self) -> dict:
        total = sum(self.phase_seconds.values())
        if total <= 0.0:
            return {k: 0.0 for k in self.phase_seconds}
        return {k: v / total for k, v in self.phase_seconds.items()}


class StationSolver:
    """Shared state for one run: settings, the solver backend and the
    memoized stationary-fixed evaluations that all three stages share."""

    def __init__(
        self,
        spec: StationSpec,
        scen: Scenario,
        weights: ObjectiveWeights | None = None,
        backend=None,
        psf_settings: SolveSettings | None = None,
        ps_settings: SolveSettings | None = None,
        pf_settings: SolveSettings | None = None,
    ):
        self.spec = spec
        self.scen = scen
        self.weights = weights or ObjectiveWeights()
        self.backend = backend
        self.psf_settings = psf_settings or default_settings_for("Psf")
        self.ps_settings = ps_settings or default_settings_for("Ps")
        self.pf_settings = pf_settings or default_settings_for("Pf")
        self._psf_cache: dict = {}
        self.counters = {"Psf": 0, "Ps": 0, "Pf": 0}

    # -- stationary evaluations ------------------------------------------

    def psf_value(self, mode: str, t: int, prev_mode: str):
        """(feasible, objective, direction) of the fixed stationary model."""
        key = (mode, t, prev_mode)
        if key not in self._psf_cache:
            try:
                inst = build_stationary_fixed(self.spec, self.scen, self.weights, mode, t, prev_mode)
            except BuildInfeasibleError:
                # contradictory constant rows (e.g. a mode without a valid
                # flow direction) are plain infeasibility to the algorithm
                self._psf_cache[key] = (False, math.inf, None)
                return self._psf_cache[key]
            res = solve(inst, self.psf_settings, backend=self.backend)
            self.counters["Psf"] += 1
            if res.status == "error":
                raise BackendError(res.message or "stationary solve failed")
            if res.ok:
                self._psf_cache[key] = (True, res.objective, inst.direction_at(res.assignment, t))
            else:
                self._psf_cache[key] = (False, math.inf, None)
        return self._psf_cache[key]

    def ps_best(self, t: int, valid_modes, prev_mode: str):
        """(feasible, objective, mode, direction) over a candidate mode set."""
        try:
            inst = build_stationary(self.spec, self.scen, self.weights, t, prev_mode, valid_modes)
        except BuildInfeasibleError:
            return False, math.inf, None, None
        res = solve(inst, self.ps_settings, backend=self.backend)
        self.counters["Ps"] += 1
        if res.status == "error":
            raise BackendError(res.message or "stationary solve failed")
        if not res.ok:
            return False, math.inf, None, None
        mode = inst.mode_at(res.assignment, t)
        return True, res.objective, mode, inst.direction_at(res.assignment, t)

    def sequence_objective(self, modes) -> float:
        """Sum of the per-step fixed stationary optima; +inf when any step
        is infeasible or uses an unavailable mode (whose selection variable
        would be fixed to zero, contradicting the mode choice)."""
        total = 0.0
        for t in range(1, len(modes)):
            if not mode_available(self.spec, self.scen.time_grid, modes[t], t):
                return math.inf
            feasible, value, _ = self.psf_value(modes[t], t, modes[t - 1])
            if not feasible:
                return math.inf
            total += value
        return total

    # -- stage 1: initial sequence ----------------------------------------

    def initial_solution(self) -> ModeSequence:
        spec, scen = self.spec, self.scen
        grid = scen.time_grid
        modes = [scen.initial_state.operation_mode]
        directions: list = [None]
        for t in range(1, scen.n_future + 1):
            old = modes[-1]
            feasible, cost, direction = self.psf_value(old, t, old)
            if (
                feasible
                and mode_available(spec, grid, old, t)
                and cost < self.weights.operation_mode_change
            ):
                modes.append(old)
                directions.append(direction)
                continue
            valid = [
                o
                for o in sorted(spec.operation_modes)
                if mode_available(spec, grid, o, t)
                and transitions_work(spec, modes + [o], grid)
                and not_soon_infeasible(spec, grid, t, o, old)
            ]
            ok, _, best, best_dir = (False, math.inf, None, None)
            if valid:
                ok, _, best, best_dir = self.ps_best(t, valid, old)
            if not ok:
                raise InitialSolutionAbort(f"no usable operation mode for time step {t}")
            modes.append(best)
            directions.append(best_dir)
        return ModeSequence(tuple(modes), tuple(directions))

    # -- stage 2: improvement heuristic -----------------------------------

    def improvement_heuristic(self, seq: ModeSequence) -> ModeSequence:
        spec, grid = self.spec, self.scen.time_grid
        modes = list(seq.modes)
        directions = list(seq.directions)
        backwards = True
        sweeps_without_improvement = 0
        while sweeps_without_improvement < 2:
            improved = False
            change_times = [t for t in range(1, len(modes)) if modes[t] != modes[t - 1]]
            if backwards:
                change_times.reverse()
            for t in change_times:
                if modes[t - 1] == modes[t]:
                    continue  # this change disappeared in an earlier replacement
                positions = self._phase_positions(modes, t, backwards)
                if not positions:
                    continue
                current = self.sequence_objective(modes)
                best_modes, best_improvement = None, 0.0
                for candidate in convex_combination(spec, modes[t - 1], modes[t]):
                    trial = list(modes)
                    for pos in positions:
                        trial[pos] = candidate
                    if not all_modes_available(spec, grid, trial):
                        continue
                    if not transitions_work(spec, trial, grid):
                        continue
                    improvement = current - self.sequence_objective(trial)
                    if improvement > best_improvement:
                        best_modes, best_improvement = trial, improvement
                if best_improvement > 0.0:
                    modes = best_modes
                    # the evaluating stationary solves now decide the flow
                    # directions of every replaced position
                    for pos in positions:
                        _, _, direction = self.psf_value(modes[pos], pos, modes[pos - 1])
                        directions[pos] = direction
                    improved = True
            backwards = not backwards
            sweeps_without_improvement = 0 if improved else sweeps_without_improvement + 1
        return ModeSequence(tuple(modes), tuple(directions))

    @staticmethod
    def _phase_positions(modes, t: int, backwards: bool) -> list[int]:
        """Positions of the phase ending at t-1 (backwards) or starting at
        t (forwards); position 0 is the fixed initial state and is never
        replaced."""
        if backwards:
            start = t - 1
            while start > 0 and modes[start - 1] == modes[t - 1]:
                start -= 1
            return list(range(max(start, 1), t))
        end = t
        while end + 1 < len(modes) and modes[end + 1] == modes[t]:
            end += 1
        return list(range(t, end + 1))

    # -- stage 3: rolling-horizon smoothing --------------------------------

    def transient_smoothing(self, seq: ModeSequence, h: int) -> ControlPlan:
        if h < 2:
            raise ValueError("the rolling horizon must span at least 2 steps")
        spec, scen = self.spec, self.scen
        k = scen.n_future
        snapshots: dict = {0: initial_snapshot(scen)}
        steps: dict = {}
        regulator_modes: list = [dict(scen.initial_state.regulator_modes)]
        diagnostics: dict = {"smoothing_solves": 0, "retried_windows": [], "window_wall_times": []}

        window_starts = [1] if h >= k else list(range(1, k - h + 2))
        for s in window_starts:
            last = s + h - 1 if h < k else k
            window_times = list(range(s, last + 1))
            inst, res = self._solve_window(seq, snapshots[s - 1], window_times, diagnostics)
            keep = window_times if s == window_starts[-1] else [s]
            for t in keep:
                snapshots[t] = inst.snapshot_at(res.assignment, t)
                steps[t] = {
                    "pressures": snapshots[t].pressures,
                    "arc_flows": snapshots[t].arc_flows,
                    "pipe_flows": snapshots[t].pipe_flows,
                    "inflows": {
                        v: inst.value(res.assignment, "d", v, t) for v in spec.boundary_nodes()
                    },
                }
                regulator_modes.append(dict(snapshots[t].regulator_modes))
        return ControlPlan(
            sequence=seq,
            regulator_modes=regulator_modes,
            steps=steps,
            objective=math.nan,  # filled by the replay in solve_station
            breakdown={},
            phase_seconds={},
            diagnostics=diagnostics,
        )

    def _solve_window(self, seq: ModeSequence, snapshot: StateSnapshot, times, diagnostics):
        modes = [seq.modes[t] for t in times]
        dirs = [seq.directions[t] for t in times]
        try:
            inst = build_fixed_transient(self.spec, self.scen, self.weights, modes, dirs, snapshot)
        except BuildInfeasibleError as exc:
            raise SmoothingError(times[0], str(exc)) from exc
        res = solve(inst, self.pf_settings, backend=self.backend)
        self.counters["Pf"] += 1
        diagnostics["smoothing_solves"] += 1
        diagnostics["window_wall_times"].append(res.wall_time)
        if not res.ok:
            # one retry with the demand slacks made dominant, in case the
            # window is only numerically borderline
            scaled = self.weights.scaled(10.0)
            inst = build_fixed_transient(self.spec, self.scen, scaled, modes, dirs, snapshot)
            res = solve(inst, self.pf_settings, backend=self.backend)
            diagnostics["retried_windows"].append(times[0])
            if not res.ok:
                raise SmoothingError(times[0], res.message or res.status)
        return inst, res

    # -- the full procedure -------------------------------------------------

    def solve_station(self, h: int = 4) -> ControlPlan:
        started = time.perf_counter()
        seq = self.initial_solution()
        t_initial = time.perf_counter()
        seq = self.improvement_heuristic(seq)
        t_improve = time.perf_counter()
        plan = self.transient_smoothing(seq, h)
        t_smooth = time.perf_counter()
        plan.phase_seconds = {
            "initial": t_initial - started,
            "improvement": t_improve - t_initial,
            "smoothing": t_smooth - t_improve,
        }
        inst, x = complete_plan_assignment(self.spec, self.scen, self.weights, plan)
        violations = check_assignment(inst.model, x)
        plan.objective = inst.model.objective_value(x)
        plan.breakdown = inst.model.objective_breakdown(x)
        plan.diagnostics["replay_violations"] = [str(v) for v in violations]
        plan.diagnostics["max_replay_violation"] = max((v.amount for v in violations), default=0.0)
        plan.diagnostics["solve_counts"] = dict(self.counters)
        return plan


def solve_station(
    spec: StationSpec,
    scen: Scenario,
    weights: ObjectiveWeights | None = None,
    h: int = 4,
    backend=None,
) -> ControlPlan:
    return StationSolver(spec, scen, weights, backend=backend).solve_station(h)


# ---------------------------------------------------------------------------
# plan replay against the full model


def complete_plan_assignment(
    spec: StationSpec, scen: Scenario, weights: ObjectiveWeights, plan: ControlPlan
):
    """Extend a plan to a full assignment of the transient model P.

    Binaries come from the plan's tokens, disjunctive copies from the
    active branch, slacks and change trackers take their minimal feasible
    values.  The result can be replayed through the row checker and the
    objective evaluator.
    """
    inst = build_full(spec, scen, weights)
    model = inst.model
    x = np.zeros(model.n_vars)
    seq = plan.sequence
    prev_snapshot = initial_snapshot(scen)

    def put(value, *key):
        h = inst.handles.get(key)
        if isinstance(h, VarRef):
            x[h.index] = value

    for t in range(1, scen.n_future + 1):
        data = plan.steps[t]
        mode = seq.modes[t]
        direction = seq.directions[t]
        assignment = spec.operation_modes[mode].assignment
        prev_mode = seq.modes[t - 1]
        prev_assignment = spec.operation_modes[prev_mode].assignment

        for v, p in data["pressures"].items():
            put(p, "p", v, t)
        for a, q in data["arc_flows"].items():
            put(q, "q", a, t)
        for a, (q_in, q_out) in data["pipe_flows"].items():
            put(q_in, "ql", a, t)
            put(q_out, "qr", a, t)
        for v, d in data["inflows"].items():
            put(d, "d", v, t)

        for o in spec.operation_modes:
            put(1.0 if o == mode else 0.0, "om", o, t)
        for f in spec.flow_directions:
            put(1.0 if f == direction else 0.0, "fd", f, t)
        for a in spec.valves:
            put(1.0 if assignment[a] == "op" else 0.0, "op", a, t)

        for a, st in spec.stations.items():
            token = assignment[a]
            pl = data["pressures"][st.from_node]
            pr = data["pressures"][st.to_node]
            q = data["arc_flows"][a]
            put(1.0 if token == "by" else 0.0, "cs_by", a, t)
            put(1.0 if token == "cl" else 0.0, "cs_cl", a, t)
            if token == "by":
                put(0.5 * (pl + pr), "p_by", a, t)
                put(q, "q_by", a, t)
            elif token == "cl":
                put(pl, "p_cl_l", a, t)
                put(pr, "p_cl_r", a, t)
            for c in st.configurations:
                active = token == c.id
                put(1.0 if active else 0.0, "cfg", c.id, a, t)
                if active:
                    put(pl, "p_cfg_l", c.id, a, t)
                    put(pr, "p_cfg_r", c.id, a, t)
                    put(q, "q_cfg", c.id, a, t)

        for a in spec.regulators:
            token = plan.regulator_modes[t][a]
            for tok in ("by", "cl", "ac"):
                put(1.0 if tok == token else 0.0, "rg", tok, a, t)

        om_change = 1.0 if mode != prev_mode else 0.0
        put(om_change, "d_om", t)
        for a in spec.regulators:
            changed = plan.regulator_modes[t][a] != plan.regulator_modes[t - 1][a]
            put(1.0 if changed else 0.0, "d_rg", a, t)
        for a, st in spec.stations.items():
            used_now = st.token_units(assignment[a])
            used_prev = st.token_units(prev_assignment[a])
            for u in st.units:
                put(1.0 if (u.id in used_now and u.id not in used_prev) else 0.0, "d_us", u.id, a, t)

        prev_data = (
            {
                "pressures": prev_snapshot.pressures,
                "arc_flows": prev_snapshot.arc_flows,
            }
            if t == 1
            else plan.steps[t - 1]
        )
        for kind, arcs in (("rg", spec.regulators), ("cs", spec.stations)):
            for a, arc in arcs.items():
                if kind == "rg":
                    relax = (
                        (1.0 if plan.regulator_modes[t][a] in ("by", "cl") else 0.0)
                        + (1.0 if plan.regulator_modes[t][a] != plan.regulator_modes[t - 1][a] else 0.0)
                    )
                else:
                    token = assignment[a]
                    relax = (1.0 if token in ("by", "cl") else 0.0) + om_change
                for label, now, before in (
                    ("pl", data["pressures"][arc.from_node], prev_data["pressures"][arc.from_node]),
                    ("pr", data["pressures"][arc.to_node], prev_data["pressures"][arc.to_node]),
                    ("q", data["arc_flows"][a], prev_data["arc_flows"][a]),
                ):
                    put(0.0 if relax >= 1.0 else abs(now - before), f"{kind}_{label}", a, t)

        for v in spec.boundary_nodes():
            p = data["pressures"][v]
            demand = scen.pressure_demand[v][t - 1]
            put(max(0.0, p - demand), "sp+", v, t)
            put(max(0.0, demand - p), "sp-", v, t)
        for g, members in spec.fence_groups.items():
            delta = sum(data["inflows"][v] for v in members) - scen.flow_demand[g][t - 1]
            key = "sd+" if delta >= 0.0 else "sd-"
            remaining = abs(delta)
            for v in sorted(members):
                put(0.0, "sd+", v, t)
                put(0.0, "sd-", v, t)
            # spread the group's imbalance greedily within the slack caps
            for v in sorted(members):
                h = inst.handles.get((key, v, t))
                if not isinstance(h, VarRef):
                    continue
                take = min(remaining, model.ub[h.index])
                x[h.index] = take
                remaining -= take
                if remaining <= 0.0:
                    break
    return inst, x
