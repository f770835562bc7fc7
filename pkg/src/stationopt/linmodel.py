"""Solver-independent linear model container and LP-format export.

A :class:`LinearModel` is a plain catalog of variables (finite bounds,
optional integrality), rows (sparse coefficients, sense, right-hand side)
and a linear objective split into named categories.  The export writes
deterministic CPLEX-style LP text, byte-identical for identical models.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

SENSES = ("<=", ">=", "==")


class BuildInfeasibleError(ValueError):
    """A constant-only constraint is violated already at build time."""


@dataclass(frozen=True)
class VarRef:
    """Handle of one model variable."""

    index: int


@dataclass
class Row:
    name: str
    coeffs: dict  # var index -> coefficient
    sense: str
    rhs: float


class LinearModel:
    def __init__(self, name: str):
        self.name = name
        self.var_names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.integer: list[bool] = []
        self.rows: list[Row] = []
        self.objective: dict = {}
        self.objective_constant = 0.0
        # (category, var index or None, coefficient or constant value)
        self.objective_terms: list[tuple[str, int | None, float]] = []

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    def add_var(self, name: str, lb: float, ub: float, integer: bool = False) -> VarRef:
        if not np.isfinite(lb) or not np.isfinite(ub):
            raise ValueError(f"variable {name!r} needs finite bounds, got [{lb}, {ub}]")
        if lb > ub:
            raise BuildInfeasibleError(f"variable {name!r} has empty domain [{lb}, {ub}]")
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.integer.append(bool(integer))
        return VarRef(len(self.var_names) - 1)

    def add_row(self, name: str, pairs, sense: str, rhs: float, tol: float = 1e-9) -> None:
        """One linear row from (coefficient, handle) pairs.

        Handles are :class:`VarRef` or plain numbers; constants fold into
        the right-hand side.  A row left without any variable must hold as
        a tautology, otherwise the model is infeasible by construction.
        """
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        coeffs: dict = {}
        const = 0.0
        for coef, handle in pairs:
            if isinstance(handle, VarRef):
                coeffs[handle.index] = coeffs.get(handle.index, 0.0) + float(coef)
            else:
                const += float(coef) * float(handle)
        rhs_eff = float(rhs) - const
        coeffs = {i: c for i, c in coeffs.items() if c != 0.0}
        if not coeffs:
            scale = max(1.0, abs(rhs_eff))
            ok = {
                "<=": 0.0 <= rhs_eff + tol * scale,
                ">=": 0.0 >= rhs_eff - tol * scale,
                "==": abs(rhs_eff) <= tol * scale,
            }[sense]
            if not ok:
                raise BuildInfeasibleError(f"constant row {name!r} is violated: 0 {sense} {rhs_eff}")
            return
        self.rows.append(Row(name, coeffs, sense, rhs_eff))

    def add_objective(self, category: str, handle, coef: float) -> None:
        """Linear objective contribution; constants keep their category."""
        if isinstance(handle, VarRef):
            self.objective[handle.index] = self.objective.get(handle.index, 0.0) + float(coef)
            self.objective_terms.append((category, handle.index, float(coef)))
        else:
            value = float(coef) * float(handle)
            if value != 0.0:
                self.objective_constant += value
                self.objective_terms.append((category, None, value))

    def objective_value(self, assignment: np.ndarray) -> float:
        total = self.objective_constant
        for idx, coef in self.objective.items():
            total += coef * assignment[idx]
        return float(total)

    def objective_breakdown(self, assignment: np.ndarray) -> dict:
        out: dict = {}
        for category, idx, coef in self.objective_terms:
            value = coef if idx is None else coef * assignment[idx]
            out[category] = out.get(category, 0.0) + float(value)
        return out

    def row_activity(self, row: Row, assignment: np.ndarray) -> float:
        return float(sum(coef * assignment[idx] for idx, coef in row.coeffs.items()))

    def lp_text(self) -> str:
        """Deterministic LP-format text of the model.

        The objective constant is not representable in LP format and is
        carried separately (see ``objective_constant``); a comment records
        it for external diffing.
        """
        out = [f"\\ model {self.name}"]
        if self.objective_constant:
            out.append(f"\\ objective constant {_num(self.objective_constant)}")
        out.append("Minimize")
        terms = [
            f"{_sign(coef)} {_num(abs(coef))} {self._vn(idx)}"
            for idx, coef in sorted(self.objective.items())
            if coef != 0.0
        ]
        out.append(" obj: " + (" ".join(terms).lstrip("+ ") if terms else "0 " + self._vn(0)))
        out.append("Subject To")
        for i, row in enumerate(self.rows):
            lhs = " ".join(
                f"{_sign(coef)} {_num(abs(coef))} {self._vn(idx)}"
                for idx, coef in sorted(row.coeffs.items())
            ).lstrip("+ ")
            op = {"<=": "<=", ">=": ">=", "==": "="}[row.sense]
            out.append(f" c{i}_{_lp_name(row.name)}: {lhs} {op} {_num(row.rhs)}")
        out.append("Bounds")
        for idx in range(self.n_vars):
            out.append(f" {_num(self.lb[idx])} <= {self._vn(idx)} <= {_num(self.ub[idx])}")
        integers = [self._vn(idx) for idx in range(self.n_vars) if self.integer[idx]]
        if integers:
            out.append("Generals")
            out.append(" " + " ".join(integers))
        out.append("End")
        return "\n".join(out) + "\n"

    def _vn(self, idx: int) -> str:
        return _lp_name(self.var_names[idx])


def _lp_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.()]", "_", name)


def _sign(x: float) -> str:
    return "-" if x < 0 else "+"


def _num(x: float) -> str:
    return repr(float(x))
