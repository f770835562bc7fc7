"""Synthetic station instances.

Real stations and their scenarios are proprietary, so tests, demos and
benchmarks run on these hand-sized instances instead.  All builders
return plain instance documents (the JSON schema of
:func:`stationopt.io.load_instance`) in file-facing units.

``mini_station`` is the canonical audit fixture: two boundary nodes
joined by a valve and a single-unit compressor station, no pipes and no
regulators, demands constant over four three-hour steps.  That shape
makes the per-step decomposition of the objective exact, which the
acceptance suite relies on.
"""

from __future__ import annotations

import numpy as np

# 2-D operating range of the standard test unit:
#   ratio >= 1, ratio <= 1.9 - 0.05 Q, Q in [2, 9] m^3/s
UNIT_RANGE_2D = (
    (1.0, 0.0, -1.0),
    (-1.9, 0.05, 1.0),
    (2.0, -1.0, 0.0),
    (-9.0, 1.0, 0.0),
)

GAS = {
    "specificGasConstant": 500.0,
    "temperature": 283.15,
    "pseudoCriticalPressure": 46.0,
    "pseudoCriticalTemperature": 190.0,
    "normalDensity": 0.785,
}


def _unit(uid: str, max_power: float = 12e6) -> dict:
    return {
        "id": uid,
        "operatingRange2D": [list(f) for f in UNIT_RANGE_2D],
        "maxDeltaP": 25.0,
        "maxPower": max_power,
        "adiabaticEfficiency": 0.85,
    }


def mini_station(
    steps: int = 4,
    flow: float = 500.0,
    lift: float = 12.0,
    mismatch: float = 20.0,
    unavailability: dict | None = None,
) -> dict:
    """Two-node audit station: valve route vs. single-unit compression.

    ``flow`` is the boundary inflow demand in 1000 m^3/h, ``lift`` the
    demanded outlet-minus-inlet pressure difference in bar (0 favors the
    bypass mode), ``mismatch`` a deliberate inconsistency between the
    entry and exit flow demands so the optimum carries nonzero slack.
    """
    step_seconds = 3.0 * 3600.0
    grid = [round(i * step_seconds, 3) for i in range(steps + 1)]
    p_in, p_out = 50.0, 50.0 + lift
    return {
        "name": "mini",
        "gas": dict(GAS),
        "nodes": [
            {"id": "B1", "kind": "boundary", "pressureLB": 30.0, "pressureUB": 70.0},
            {
                "id": "B2",
                "kind": "boundary",
                "pressureLB": 30.0,
                "pressureUB": 70.0,
                "exitPressureUB": 68.0,
            },
        ],
        "arcs": [
            {
                "id": "CS1",
                "kind": "compressorStation",
                "from": "B1",
                "to": "B2",
                "flowLB": 0.0,
                "flowUB": 1800.0,
                "units": ["U1"],
                "configurations": [{"id": "c1", "stages": [["U1"]]}],
            },
            {"id": "V1", "kind": "valve", "from": "B1", "to": "B2", "flowLB": -2000.0, "flowUB": 2000.0},
        ],
        "units": [_unit("U1")],
        "operationModes": [
            {"id": "o_by", "assignment": {"V1": "op", "CS1": "cl"}},
            {"id": "o_cp", "assignment": {"V1": "cl", "CS1": "c1"}},
        ],
        "flowDirections": [{"id": "f_fwd", "inflowNodes": ["B1"], "outflowNodes": ["B2"]}],
        "validPairs": [["o_by", "f_fwd"], ["o_cp", "f_fwd"]],
        "fenceGroups": [{"id": "g_in", "nodes": ["B1"]}, {"id": "g_out", "nodes": ["B2"]}],
        "flowConditions": [],
        "transitionTimes": {"o_by": {"o_cp": 30.0}, "o_cp": {"o_by": 30.0}},
        "unavailability": unavailability or {},
        "scenario": {
            "timeGrid": grid,
            "pressureDemand": {"B1": [p_in] * steps, "B2": [p_out] * steps},
            "flowDemand": {"g_in": [flow] * steps, "g_out": [-(flow - mismatch)] * steps},
            "inflowLB": {"B1": -2000.0, "B2": -2000.0},
            "inflowUB": {"B1": 2000.0, "B2": 2000.0},
            "initialState": {
                "operationMode": "o_cp" if lift > 0 else "o_by",
                "regulatorModes": {},
                "pressures": {"B1": p_in, "B2": p_out},
                "arcFlows": {"CS1": flow if lift > 0 else 0.0, "V1": 0.0 if lift > 0 else flow},
                "pipeFlows": {},
            },
        },
    }


def mini_station_pipes() -> dict:
    """Transient fixture: pipe feed, compressor/valve pair, exit regulator.

    The scenario lives on a coarse six-step two-hour source grid with a
    demand swell in the middle; re-grid it with
    :func:`stationopt.io.interpolate_scenario` for the finer partitions.
    """
    steps = 6
    grid = [i * 7200.0 for i in range(steps + 1)]
    flow = [500.0, 620.0, 760.0, 760.0, 620.0, 500.0]
    p_out = [61.0, 62.0, 63.0, 63.0, 62.0, 61.0]
    return {
        "name": "mini-pipes",
        "gas": dict(GAS),
        "nodes": [
            {"id": "B1", "kind": "boundary", "pressureLB": 30.0, "pressureUB": 70.0},
            {"id": "N1", "kind": "inner", "pressureLB": 30.0, "pressureUB": 70.0},
            {"id": "N2", "kind": "inner", "pressureLB": 30.0, "pressureUB": 70.0},
            {
                "id": "B2",
                "kind": "boundary",
                "pressureLB": 30.0,
                "pressureUB": 70.0,
                "exitPressureUB": 68.0,
            },
        ],
        "arcs": [
            {
                "id": "P1",
                "kind": "pipe",
                "from": "B1",
                "to": "N1",
                "length": 400.0,
                "diameter": 0.5,
                "roughness": 1e-05,
                "slope": 0.0,
                "flowLB": -2000.0,
                "flowUB": 2000.0,
            },
            {
                "id": "CS1",
                "kind": "compressorStation",
                "from": "N1",
                "to": "N2",
                "flowLB": 0.0,
                "flowUB": 1800.0,
                "units": ["U1"],
                "configurations": [{"id": "c1", "stages": [["U1"]]}],
            },
            {"id": "V1", "kind": "valve", "from": "N1", "to": "N2", "flowLB": -2000.0, "flowUB": 2000.0},
            {"id": "RG1", "kind": "regulator", "from": "N2", "to": "B2", "flowUB": 2000.0},
        ],
        "units": [_unit("U1")],
        "operationModes": [
            {"id": "o_by", "assignment": {"V1": "op", "CS1": "cl"}},
            {"id": "o_cp", "assignment": {"V1": "cl", "CS1": "c1"}},
        ],
        "flowDirections": [{"id": "f_fwd", "inflowNodes": ["B1"], "outflowNodes": ["B2"]}],
        "validPairs": [["o_by", "f_fwd"], ["o_cp", "f_fwd"]],
        "fenceGroups": [{"id": "g_in", "nodes": ["B1"]}, {"id": "g_out", "nodes": ["B2"]}],
        "flowConditions": [],
        "transitionTimes": {"o_by": {"o_cp": 30.0}, "o_cp": {"o_by": 30.0}},
        "unavailability": {},
        "scenario": {
            "timeGrid": grid,
            "pressureDemand": {"B1": [50.0] * steps, "B2": p_out},
            "flowDemand": {"g_in": flow, "g_out": [-(f - 15.0) for f in flow]},
            "inflowLB": {"B1": -2000.0, "B2": -2000.0},
            "inflowUB": {"B1": 2000.0, "B2": 2000.0},
            "initialState": {
                "operationMode": "o_cp",
                "regulatorModes": {"RG1": "ac"},
                "pressures": {"B1": 50.0, "N1": 49.9, "N2": 63.0, "B2": 61.0},
                "arcFlows": {"CS1": 500.0, "V1": 0.0, "RG1": 500.0},
                "pipeFlows": {"P1": [500.0, 500.0]},
            },
        },
    }


def two_unit_station(steps: int = 4) -> dict:
    """Four-mode variant with two units: bypass, each unit alone, both.

    Exercises unit starts and the convex-combination neighborhood
    (combining the two single-unit modes legitimately suggests the
    two-unit configuration).
    """
    doc = mini_station(steps=steps, flow=700.0, lift=10.0)
    doc["name"] = "mini-2u"
    doc["units"] = [_unit("U1"), _unit("U2", max_power=10e6)]
    doc["arcs"][0]["units"] = ["U1", "U2"]
    doc["arcs"][0]["configurations"] = [
        {"id": "c1", "stages": [["U1"]]},
        {"id": "c2", "stages": [["U2"]]},
        {"id": "c12", "stages": [["U1", "U2"]]},
    ]
    doc["operationModes"] = [
        {"id": "o_by", "assignment": {"V1": "op", "CS1": "cl"}},
        {"id": "o_c1", "assignment": {"V1": "cl", "CS1": "c1"}},
        {"id": "o_c2", "assignment": {"V1": "cl", "CS1": "c2"}},
        {"id": "o_c12", "assignment": {"V1": "cl", "CS1": "c12"}},
    ]
    doc["validPairs"] = [[o["id"], "f_fwd"] for o in doc["operationModes"]]
    theta = {}
    for o1 in ("o_by", "o_c1", "o_c2", "o_c12"):
        theta[o1] = {o2: 30.0 for o2 in ("o_by", "o_c1", "o_c2", "o_c12") if o2 != o1}
    doc["transitionTimes"] = theta
    doc["scenario"]["initialState"]["operationMode"] = "o_c1"
    doc["scenario"]["initialState"]["arcFlows"]["CS1"] = 700.0
    return doc


def medium_station() -> dict:
    """Seven-node station with a branched exit and richer configurations.

    West inflow feeds a two-unit compressor station (single units, the
    parallel pair, and a serial two-stage arrangement) with a bypass
    valve; the east exit runs through one regulator, the south exit
    through a second one.  Two flow directions (east only / east+south)
    and a flow condition tying the south offtake below the east one.
    """
    steps = 6
    grid = [i * 7200.0 for i in range(steps + 1)]
    west = [700.0, 780.0, 860.0, 860.0, 780.0, 700.0]
    south = [-(f - 600.0 - 10.0) for f in west]
    p_east = [63.0, 63.5, 64.0, 64.0, 63.5, 63.0]
    modes = ["o_by", "o_c1", "o_c2", "o_c12", "o_s12"]
    theta = {o1: {o2: 25.0 for o2 in modes if o2 != o1} for o1 in modes}
    return {
        "name": "medium",
        "gas": dict(GAS),
        "nodes": [
            {"id": "B1", "kind": "boundary", "pressureLB": 30.0, "pressureUB": 75.0},
            {"id": "N1", "kind": "inner", "pressureLB": 30.0, "pressureUB": 75.0},
            {"id": "N2", "kind": "inner", "pressureLB": 30.0, "pressureUB": 75.0},
            {"id": "N3", "kind": "inner", "pressureLB": 30.0, "pressureUB": 75.0},
            {"id": "N4", "kind": "inner", "pressureLB": 30.0, "pressureUB": 75.0},
            {
                "id": "B2",
                "kind": "boundary",
                "pressureLB": 30.0,
                "pressureUB": 75.0,
                "exitPressureUB": 70.0,
            },
            {
                "id": "B3",
                "kind": "boundary",
                "pressureLB": 30.0,
                "pressureUB": 75.0,
                "exitPressureUB": 60.0,
            },
        ],
        "arcs": [
            {
                "id": "P1",
                "kind": "pipe",
                "from": "B1",
                "to": "N1",
                "length": 600.0,
                "diameter": 0.6,
                "roughness": 1e-05,
                "flowLB": -2500.0,
                "flowUB": 2500.0,
            },
            {
                "id": "CS1",
                "kind": "compressorStation",
                "from": "N1",
                "to": "N2",
                "flowLB": 0.0,
                "flowUB": 2200.0,
                "units": ["U1", "U2"],
                "configurations": [
                    {"id": "c1", "stages": [["U1"]]},
                    {"id": "c2", "stages": [["U2"]]},
                    {"id": "c12", "stages": [["U1", "U2"]]},
                    {"id": "s12", "stages": [["U1"], ["U2"]]},
                ],
            },
            {"id": "V1", "kind": "valve", "from": "N1", "to": "N2", "flowLB": -2500.0, "flowUB": 2500.0},
            {
                "id": "P2",
                "kind": "pipe",
                "from": "N2",
                "to": "N3",
                "length": 400.0,
                "diameter": 0.6,
                "roughness": 1e-05,
                "flowLB": -2500.0,
                "flowUB": 2500.0,
            },
            {"id": "RG1", "kind": "regulator", "from": "N3", "to": "B2", "flowUB": 2500.0},
            {"id": "RG2", "kind": "regulator", "from": "N3", "to": "N4", "flowUB": 1200.0},
            {
                "id": "P3",
                "kind": "pipe",
                "from": "N4",
                "to": "B3",
                "length": 300.0,
                "diameter": 0.4,
                "roughness": 1e-05,
                "flowLB": -1200.0,
                "flowUB": 1200.0,
            },
        ],
        "units": [_unit("U1", max_power=14e6), _unit("U2", max_power=11e6)],
        "operationModes": [
            {"id": "o_by", "assignment": {"V1": "op", "CS1": "cl"}},
            {"id": "o_c1", "assignment": {"V1": "cl", "CS1": "c1"}},
            {"id": "o_c2", "assignment": {"V1": "cl", "CS1": "c2"}},
            {"id": "o_c12", "assignment": {"V1": "cl", "CS1": "c12"}},
            {"id": "o_s12", "assignment": {"V1": "cl", "CS1": "s12"}},
        ],
        "flowDirections": [
            {"id": "f_we", "inflowNodes": ["B1"], "outflowNodes": ["B2"]},
            {"id": "f_wes", "inflowNodes": ["B1"], "outflowNodes": ["B2", "B3"]},
        ],
        "validPairs": [[o, f] for o in modes for f in ("f_we", "f_wes")],
        "fenceGroups": [
            {"id": "g_w", "nodes": ["B1"]},
            {"id": "g_e", "nodes": ["B2"]},
            {"id": "g_s", "nodes": ["B3"]},
        ],
        "flowConditions": [{"direction": "f_wes", "smaller": ["B3"], "larger": ["B2"]}],
        "transitionTimes": theta,
        "unavailability": {},
        "scenario": {
            "timeGrid": grid,
            "pressureDemand": {"B1": [52.0] * steps, "B2": p_east, "B3": [55.0] * steps},
            "flowDemand": {"g_w": west, "g_e": [-600.0] * steps, "g_s": south},
            "inflowLB": {"B1": -2500.0, "B2": -2500.0, "B3": -1200.0},
            "inflowUB": {"B1": 2500.0, "B2": 2500.0, "B3": 1200.0},
            "initialState": {
                "operationMode": "o_c1",
                "regulatorModes": {"RG1": "ac", "RG2": "cl"},
                "pressures": {
                    "B1": 52.0,
                    "N1": 51.9,
                    "N2": 64.5,
                    "N3": 64.3,
                    "N4": 55.0,
                    "B2": 63.0,
                    "B3": 55.0,
                },
                "arcFlows": {"CS1": 700.0, "V1": 0.0, "RG1": 700.0, "RG2": 0.0},
                "pipeFlows": {"P1": [700.0, 700.0], "P2": [700.0, 700.0], "P3": [0.0, 0.0]},
            },
        },
    }


def seeded_instance(seed: int) -> dict:
    """One of the benchmark family: seeded demand shapes and outages.

    Alternates between the no-pipe and the piped topology; varies flow
    level, demanded pressure lift (including reversals that favor the
    bypass mode mid-horizon) and sometimes takes the compressor unit out
    of service for one interior step.
    """
    rng = np.random.default_rng(seed)
    steps = 4
    flow = float(rng.uniform(380.0, 680.0))
    lift = float(rng.uniform(8.0, 14.0))
    shape = rng.integers(0, 3)

    if seed % 2 == 0:
        doc = mini_station(steps=steps, flow=flow, lift=lift, mismatch=float(rng.uniform(10.0, 30.0)))
    else:
        doc = mini_station_pipes()
        doc["scenario"]["timeGrid"] = [i * 10800.0 for i in range(steps + 1)]
        for key in ("pressureDemand",):
            for v, series in doc["scenario"][key].items():
                doc["scenario"][key][v] = series[:steps]
        for g, series in doc["scenario"]["flowDemand"].items():
            doc["scenario"]["flowDemand"][g] = series[:steps]
        doc["scenario"]["flowDemand"]["g_in"] = [flow] * steps
        doc["scenario"]["flowDemand"]["g_out"] = [-(flow - 15.0)] * steps
        doc["scenario"]["pressureDemand"]["B2"] = [50.0 + lift] * steps
        doc["scenario"]["initialState"]["arcFlows"]["CS1"] = flow
        doc["scenario"]["initialState"]["arcFlows"]["RG1"] = flow
        doc["scenario"]["initialState"]["pipeFlows"]["P1"] = [flow, flow]
        doc["scenario"]["initialState"]["pressures"]["N2"] = 50.0 + lift + 1.0
        doc["scenario"]["initialState"]["pressures"]["B2"] = 50.0 + lift

    doc["name"] = f"seeded-{seed}"
    pd = doc["scenario"]["pressureDemand"]
    if shape == 1:
        # demand reversal: equal pressures in the second half favor bypass
        half = steps // 2
        pd["B2"] = pd["B2"][:half] + [pd["B1"][0]] * (steps - half)
    elif shape == 2:
        # single-step pulse in flow demand
        fd = doc["scenario"]["flowDemand"]
        pulse = [1.0] * steps
        pulse[steps // 2] = 1.35
        fd["g_in"] = [f * m for f, m in zip(fd["g_in"], pulse)]
        fd["g_out"] = [f * m for f, m in zip(fd["g_out"], pulse)]
    if rng.random() < 0.4:
        # take the unit down strictly inside step 1
        t1, t2 = doc["scenario"]["timeGrid"][1], doc["scenario"]["timeGrid"][2]
        doc["unavailability"] = {"U1": [[t1 + 300.0, t2 - 300.0]]}
    return doc
