import sys

import numpy as np
import pytest

from stationopt.fixtures import mini_station
from stationopt.io import load_instance
from stationopt.linmodel import BuildInfeasibleError, LinearModel
from stationopt.model import ObjectiveWeights, build_stationary, build_stationary_fixed
from stationopt.ranges import build_spec_ranges
from stationopt.solve import (
    FileExchangeBackend,
    SolveSettings,
    check_assignment,
    default_settings_for,
    read_solution_text,
    solve,
    write_solution_text,
)

WEIGHTS = ObjectiveWeights()


def one_var_model() -> LinearModel:
    m = LinearModel("tiny")
    x = m.add_var("x", 0.0, 10.0)
    m.add_row("floor", [(1.0, x)], ">=", 3.0)
    m.add_objective("cost", x, 1.0)
    return m


class TestBasics:
    def test_minimize_single_variable(self):
        res = solve(one_var_model(), default_settings_for("Psf"))
        assert res.status == "optimal"
        assert res.objective == pytest.approx(3.0)
        assert res.bound == pytest.approx(3.0)
        assert res.by_name()["x"] == pytest.approx(3.0)

    def test_infeasible_pair(self):
        m = LinearModel("bad")
        x = m.add_var("x", -5.0, 5.0)
        m.add_row("low", [(1.0, x)], "<=", 0.0)
        m.add_row("high", [(1.0, x)], ">=", 1.0)
        res = solve(m, default_settings_for("Psf"))
        assert res.status == "infeasible"
        assert res.assignment is None

    def test_integer_variable(self):
        m = LinearModel("int")
        x = m.add_var("x", 0.0, 5.0, integer=True)
        m.add_row("floor", [(1.0, x)], ">=", 1.5)
        m.add_objective("cost", x, 1.0)
        res = solve(m, default_settings_for("Psf"))
        assert res.objective == pytest.approx(2.0)

    def test_objective_constant_included(self):
        m = one_var_model()
        m.add_objective("fixed", 1.0, 42.0)
        res = solve(m, default_settings_for("Psf"))
        assert res.objective == pytest.approx(45.0)
        assert res.bound == pytest.approx(45.0)

    def test_deterministic_repeat(self):
        spec, scen = load_instance(mini_station())
        spec = build_spec_ranges(spec, count=2000)
        inst = build_stationary(spec, scen, WEIGHTS, 1, "o_cp")
        r1 = solve(inst, default_settings_for("Ps"))
        r2 = solve(inst, default_settings_for("Ps"))
        assert r1.status == r2.status
        assert r1.objective == r2.objective
        assert np.array_equal(r1.assignment, r2.assignment)

    def test_gap_contract_on_optimal(self):
        settings = default_settings_for("Ps")
        res = solve(one_var_model(), settings)
        assert res.objective - res.bound <= max(
            settings.absolute_gap, settings.relative_gap * abs(res.objective)
        ) + 1e-9


class TestStationaryOracle:
    def test_best_mode_matches_pair_enumeration(self):
        doc = mini_station()
        doc["flowDirections"].append(
            {"id": "f_rev", "inflowNodes": ["B2"], "outflowNodes": ["B1"]}
        )
        doc["validPairs"] = [["o_by", "f_fwd"], ["o_by", "f_rev"], ["o_cp", "f_fwd"]]
        spec, scen = load_instance(doc)
        spec = build_spec_ranges(spec, count=2000)

        inst = build_stationary(spec, scen, WEIGHTS, 1, "o_cp")
        res = solve(inst, default_settings_for("Ps"))
        assert res.ok

        best = None
        for mode, direction in sorted(spec.valid_pairs):
            fixed = build_stationary_fixed(spec, scen, WEIGHTS, mode, 1, "o_cp")
            fd = fixed.handle("fd", direction, 1)
            fixed.model.add_row("pin_direction", [(1.0, fd)], "==", 1.0)
            r = solve(fixed, default_settings_for("Psf"))
            if r.ok and (best is None or r.objective < best[0]):
                best = (r.objective, mode, direction)
        assert best is not None
        assert res.objective == pytest.approx(best[0], rel=1e-6)
        assert inst.mode_at(res.assignment, 1) == best[1]
        assert inst.direction_at(res.assignment, 1) == best[2]


class TestDefaultSettings:
    def test_stationary_rows(self):
        for variant in ("Ps", "Psf"):
            s = default_settings_for(variant)
            assert (s.relative_gap, s.absolute_gap, s.time_limit) == (1e-4, 1e-2, 36000.0)

    def test_fixed_transient_row(self):
        s = default_settings_for("Pf")
        assert (s.relative_gap, s.absolute_gap, s.time_limit) == (5e-3, 1e-2, 60.0)

    def test_full_model_row(self):
        s = default_settings_for("P")
        assert (s.relative_gap, s.absolute_gap, s.time_limit) == (1e-4, 1e-2, 36000.0)
        s600 = default_settings_for("P", 600.0)
        assert s600.time_limit == 600.0

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            default_settings_for("Px")

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            SolveSettings(-1.0, 0.0, 10.0)
        with pytest.raises(ValueError):
            SolveSettings(0.0, 0.0, 0.0)


class TestChecker:
    def test_clean_solution_passes(self):
        m = one_var_model()
        res = solve(m, default_settings_for("Psf"))
        assert check_assignment(m, res.assignment) == []

    def test_violated_row_reported(self):
        m = one_var_model()
        bad = np.array([1.0])
        violations = check_assignment(m, bad)
        assert len(violations) == 1
        assert violations[0].name == "floor"
        assert violations[0].amount == pytest.approx(2.0)

    def test_bound_and_integrality_violations(self):
        m = LinearModel("int")
        m.add_var("x", 0.0, 5.0, integer=True)
        assert any("bounds" in v.name for v in check_assignment(m, np.array([7.0])))
        assert any("integrality" in v.name for v in check_assignment(m, np.array([2.5])))

    def test_lying_backend_downgraded_to_error(self):
        class LyingBackend:
            def solve_raw(self, model, settings):
                return "optimal", np.array([0.0]), 0.0, ""

        res = solve(one_var_model(), default_settings_for("Psf"), backend=LyingBackend())
        assert res.status == "error"
        assert "floor" in res.message

    def test_initial_assignment_rescues_failed_backend(self):
        class FailingBackend:
            def solve_raw(self, model, settings):
                return "timeLimit", None, None, "gave up"

        res = solve(
            one_var_model(),
            default_settings_for("Psf"),
            initial=np.array([4.0]),
            backend=FailingBackend(),
        )
        assert res.status == "feasible"
        assert res.objective == pytest.approx(4.0)

    def test_infeasible_initial_not_used(self):
        class FailingBackend:
            def solve_raw(self, model, settings):
                return "timeLimit", None, None, ""

        res = solve(
            one_var_model(),
            default_settings_for("Psf"),
            initial=np.array([1.0]),  # violates the floor row
            backend=FailingBackend(),
        )
        assert res.status == "timeLimit"
        assert res.assignment is None


class TestLpExport:
    def test_structure(self):
        text = one_var_model().lp_text()
        assert text.startswith("\\ model tiny")
        assert "Minimize" in text and "Subject To" in text and "Bounds" in text
        assert "c0_floor: 1.0 x >= 3.0" in text
        assert text.endswith("End\n")

    def test_integer_section(self):
        m = LinearModel("int")
        m.add_var("b", 0.0, 1.0, integer=True)
        assert "Generals\n b" in m.lp_text()

    def test_byte_identical_across_rebuilds(self):
        spec, scen = load_instance(mini_station())
        spec = build_spec_ranges(spec, count=2000, base_seed=7)
        first = build_stationary(spec, scen, WEIGHTS, 1, "o_cp").model.lp_text()
        spec2, scen2 = load_instance(mini_station())
        spec2 = build_spec_ranges(spec2, count=2000, base_seed=7)
        second = build_stationary(spec2, scen2, WEIGHTS, 1, "o_cp").model.lp_text()
        assert first.encode() == second.encode()

    def test_lp_names_sanitized(self):
        m = LinearModel("names")
        m.add_var("weird name[1]", 0.0, 1.0)
        text = m.lp_text()
        assert "weird name[1]" not in text
        assert "weird_name_1_" in text


class TestSolutionFiles:
    def test_round_trip(self, tmp_path):
        m = one_var_model()
        res = solve(m, default_settings_for("Psf"))
        path = tmp_path / "sol.txt"
        write_solution_text(path, res)
        status, values, bound = read_solution_text(path)
        assert status == "optimal"
        assert values["x"] == pytest.approx(3.0)
        assert bound == pytest.approx(3.0)

    def test_file_backend_reads_existing_solution(self, tmp_path):
        m = one_var_model()
        res = solve(m, default_settings_for("Psf"))
        sol = tmp_path / "answer.sol"
        write_solution_text(sol, res)
        backend = FileExchangeBackend(tmp_path / "model.lp", sol, command=None)
        res2 = solve(m, default_settings_for("Psf"), backend=backend)
        assert res2.status == "optimal"
        assert res2.objective == pytest.approx(3.0)
        assert (tmp_path / "model.lp").exists()

    def test_file_backend_runs_command(self, tmp_path):
        sol = tmp_path / "out.sol"
        script = (
            "import sys\n"
            "open(sys.argv[2], 'w').write('#status: optimal\\n#bound: 3.0\\nx 3.0\\n')\n"
        )
        backend = FileExchangeBackend(
            tmp_path / "model.lp",
            sol,
            command=[sys.executable, "-c", script, "{lp}", "{sol}"],
        )
        res = solve(one_var_model(), default_settings_for("Psf"), backend=backend)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(3.0)

    def test_file_backend_missing_solution_is_error(self, tmp_path):
        backend = FileExchangeBackend(tmp_path / "m.lp", tmp_path / "missing.sol", None)
        res = solve(one_var_model(), default_settings_for("Psf"), backend=backend)
        assert res.status == "error"
        assert "no solution file" in res.message


class TestModelContainer:
    def test_constant_row_tautology_dropped(self):
        m = LinearModel("t")
        m.add_row("fine", [(1.0, 0.5)], "<=", 1.0)
        assert m.rows == []

    def test_constant_row_violation_raises(self):
        m = LinearModel("t")
        with pytest.raises(BuildInfeasibleError):
            m.add_row("broken", [(1.0, 2.0)], "<=", 1.0)

    def test_empty_variable_domain_raises(self):
        m = LinearModel("t")
        with pytest.raises(BuildInfeasibleError):
            m.add_var("x", 2.0, 1.0)

    def test_non_finite_bounds_rejected(self):
        m = LinearModel("t")
        with pytest.raises(ValueError):
            m.add_var("x", 0.0, np.inf)
