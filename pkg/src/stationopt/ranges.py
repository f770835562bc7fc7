"""Feasible operating ranges of compressor-station configurations.

The pipeline mirrors the data preparation used by the optimization model:
lift each unit's 2-D operating range into (p_in, p_out, q), cut it with a
fitted linear power bound, compose parallel units into stages and stages
into serial configurations, and emit the final facet sets F_c.

All quantities are SI (Pa, kg/s, W).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import replace

import numpy as np

from .gas import GasConstants, compression_power
from .network import CompressorStationArc, CompressorUnit, StationSpec
from .polytope import (
    EmptyRegionError,
    HalfSpace,
    HPolytope,
    enumerate_vertices,
    least_squares_hyperplane,
    project_out,
    remove_redundant,
    sample_uniform,
)

DEFAULT_SAMPLE_COUNT = 50_000


def seed_for_unit(unit_id: str, base_seed: int = 0) -> int:
    """Stable per-unit sampling seed (independent of hash randomization)."""
    digest = hashlib.sha256(f"{base_seed}:{unit_id}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def lift_unit_range(
    unit: CompressorUnit, pl_lb: float, pr_ub: float, constants: GasConstants
) -> HPolytope:
    """Lift the 2-D operating range of a unit into (p_in, p_out, q).

    Each facet a0 + a1 Q + a2 (pr/pl) <= 0 becomes
    a0 pl + a2 pr + (a1 R_s T z_l) q <= 0 after multiplying through by the
    (positive) inlet pressure and substituting Q = q R_s T z_l / pl.  The
    absolute pressure-increase cap and the two end-pressure caps bound the
    lifted cone; an unbounded result raises.
    """
    if not unit.operating_range_2d:
        raise ValueError(f"unit {unit.id!r} has no 2-D operating range facets")
    if pl_lb <= 0.0 or pr_ub <= 0.0 or unit.max_delta_p <= 0.0:
        raise ValueError("lifting caps must be positive")
    rstz = constants.specific_gas_constant * constants.temperature * unit.inlet_z_factor
    rows = []
    offsets = []
    for a0, a1, a2 in unit.operating_range_2d:
        rows.append((a0, a2, a1 * rstz))
        offsets.append(0.0)
    rows.append((-1.0, 1.0, 0.0))
    offsets.append(-unit.max_delta_p)
    rows.append((-1.0, 0.0, 0.0))
    offsets.append(pl_lb)
    rows.append((0.0, 1.0, 0.0))
    offsets.append(-pr_ub)
    lifted = HPolytope(np.array(rows, dtype=float), np.array(offsets, dtype=float))
    lifted.bounding_box()  # raises UnboundedRegionError / EmptyRegionError
    return lifted


def linearize_power_bound(
    lifted: HPolytope,
    unit: CompressorUnit,
    constants: GasConstants,
    count: int = DEFAULT_SAMPLE_COUNT,
    seed: int | None = None,
) -> HalfSpace:
    """Fitted half space a0 + a1 pl + a2 pr + a3 q - P_max <= 0.

    Samples the lifted range uniformly, evaluates the drive power at every
    point and fits the coefficients by ordinary least squares.  The fit is
    an approximation of the true bound, not a relaxation; no conservative
    shift is applied.
    """
    if seed is None:
        seed = seed_for_unit(unit.id)
    points = sample_uniform(enumerate_vertices(lifted), count, seed)
    powers = np.array(
        [
            compression_power(
                q, pl, max(pr, pl), unit.inlet_z_factor, unit.adiabatic_efficiency, constants
            )
            for pl, pr, q in points
        ]
    )
    a0, a1, a2, a3 = least_squares_hyperplane(points, powers)
    return HalfSpace((a1, a2, a3), a0 - unit.max_power)


def unit_polytope(
    unit: CompressorUnit,
    pl_lb: float,
    pr_ub: float,
    constants: GasConstants,
    count: int = DEFAULT_SAMPLE_COUNT,
    seed: int | None = None,
) -> HPolytope:
    """Lifted range with the power facet appended (composition input)."""
    lifted = lift_unit_range(unit, pl_lb, pr_ub, constants)
    power = linearize_power_bound(lifted, unit, constants, count, seed)
    A = np.vstack([lifted.A, np.array(power.coefficients)])
    b = np.concatenate([lifted.b, [power.offset]])
    return HPolytope(A, b)


def stage_polytope(unit_polytopes: list[HPolytope]) -> HPolytope:
    """Parallel composition: shared pressures, flows add up.

    Builds the product over (pl, pr, q, q_1 .. q_{n-1}) with the last unit
    flow substituted by q - sum(q_i), then projects the per-unit flows out.
    Raises :class:`EmptyRegionError` when the shared-pressure region is
    empty (for example disjoint inlet-pressure ranges).
    """
    if not unit_polytopes:
        raise ValueError("a stage needs at least one unit polytope")
    if len(unit_polytopes) == 1:
        return unit_polytopes[0]
    n = len(unit_polytopes)
    dim = 3 + (n - 1)
    rows: list[np.ndarray] = []
    offsets: list[float] = []
    for i, poly in enumerate(unit_polytopes):
        for row, off in zip(poly.A, poly.b):
            full = np.zeros(dim)
            full[0] = row[0]
            full[1] = row[1]
            if i < n - 1:
                full[3 + i] = row[2]
            else:
                full[2] = row[2]
                full[3:] = -row[2]
            rows.append(full)
            offsets.append(off)
    product = HPolytope(np.array(rows), np.array(offsets))
    for _ in range(n - 1):
        product = project_out(product, 3)
    return product


def configuration_polytope(stage_polytopes: list[HPolytope]) -> HPolytope:
    """Serial composition: equal flow, chained pressures.

    The outgoing pressure of each stage is the incoming pressure of the
    next; the intermediate pressures are projected out and the result is
    reduced to its facets.  Stage order matters.
    """
    if not stage_polytopes:
        raise ValueError("a configuration needs at least one stage")
    n = len(stage_polytopes)
    if n == 1:
        return remove_redundant(stage_polytopes[0]).normalized()
    dim = 3 + (n - 1)
    rows: list[np.ndarray] = []
    offsets: list[float] = []
    for i, poly in enumerate(stage_polytopes):
        col_in = 0 if i == 0 else 3 + (i - 1)
        col_out = 1 if i == n - 1 else 3 + i
        for row, off in zip(poly.A, poly.b):
            full = np.zeros(dim)
            full[col_in] += row[0]
            full[col_out] += row[1]
            full[2] += row[2]
            rows.append(full)
            offsets.append(off)
    chained = HPolytope(np.array(rows), np.array(offsets))
    for _ in range(n - 1):
        chained = project_out(chained, 3)
    return remove_redundant(chained).normalized()


def build_station_ranges(
    spec: StationSpec,
    station: CompressorStationArc,
    count: int = DEFAULT_SAMPLE_COUNT,
    base_seed: int = 0,
) -> dict:
    """F_c facet lists for every configuration of one compressor station.

    The lifting caps come from the station's end-node pressure bounds
    (tightest lower inlet bound, loosest upper outlet bound over time).
    An empty configuration region raises :class:`EmptyRegionError` naming
    the configuration, surfaced by the loaders as a validation failure.
    """
    pl_lb = float(spec.nodes[station.from_node].pressure_lb.min())
    pr_ub = float(spec.nodes[station.to_node].pressure_ub.max())
    unit_polys = {
        u.id: unit_polytope(u, pl_lb, pr_ub, spec.constants, count, seed_for_unit(u.id, base_seed))
        for u in station.units
    }
    out = {}
    for config in station.configurations:
        try:
            stages = [
                stage_polytope([unit_polys[u] for u in sorted(stage)]) for stage in config.stages
            ]
            poly = configuration_polytope(stages)
        except EmptyRegionError as exc:
            raise EmptyRegionError(
                f"configuration {config.id!r} on station {station.id!r} has an empty operating range"
            ) from exc
        out[config.id] = tuple(
            (float(row[0]), float(row[1]), float(row[2]), float(off))
            for row, off in zip(poly.A, poly.b)
        )
    return out


def ranges_cache_key(spec: StationSpec, count: int, base_seed: int) -> str:
    """Content hash over everything the built facets depend on."""
    payload = {
        "count": count,
        "seed": base_seed,
        "constants": [
            spec.constants.specific_gas_constant,
            spec.constants.temperature,
            spec.constants.isentropic_exponent,
        ],
        "stations": {
            sid: {
                "pl_lb": float(spec.nodes[st.from_node].pressure_lb.min()),
                "pr_ub": float(spec.nodes[st.to_node].pressure_ub.max()),
                "units": [
                    [
                        u.id,
                        [list(f) for f in u.operating_range_2d],
                        u.max_delta_p,
                        u.max_power,
                        u.adiabatic_efficiency,
                        u.inlet_z_factor,
                    ]
                    for u in st.units
                ],
                "configurations": [[c.id, [sorted(s) for s in c.stages]] for c in st.configurations],
            }
            for sid, st in sorted(spec.stations.items())
        },
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def build_spec_ranges(
    spec: StationSpec, count: int = DEFAULT_SAMPLE_COUNT, base_seed: int = 0
) -> StationSpec:
    """A copy of the spec with F_c facets attached to every configuration."""
    new_stations = {}
    for sid, station in spec.stations.items():
        facets = build_station_ranges(spec, station, count, base_seed)
        new_configs = tuple(c.with_facets(facets[c.id]) for c in station.configurations)
        new_stations[sid] = replace(station, configurations=new_configs)
    return replace(spec, stations=new_stations)


def save_ranges_cache(path, spec: StationSpec, count: int, base_seed: int) -> None:
    """Sidecar document with the built facets, keyed by the input hash."""
    doc = {
        "key": ranges_cache_key(spec, count, base_seed),
        "stations": {
            sid: {c.id: [list(f) for f in c.facets] for c in st.configurations}
            for sid, st in sorted(spec.stations.items())
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_ranges_cache(path, spec: StationSpec, count: int, base_seed: int):
    """Spec with cached facets, or None when the key does not match."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("key") != ranges_cache_key(spec, count, base_seed):
        return None
    new_stations = {}
    for sid, station in spec.stations.items():
        per_config = doc["stations"].get(sid, {})
        if set(per_config) != {c.id for c in station.configurations}:
            return None
        new_configs = tuple(
            c.with_facets([tuple(f) for f in per_config[c.id]]) for c in station.configurations
        )
        new_stations[sid] = replace(station, configurations=new_configs)
    return replace(spec, stations=new_stations)
