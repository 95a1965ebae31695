"""Mathematical-program container shared by the LP/MILP solvers and the MPS writer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

LE = "<="
EQ = "=="
GE = ">="
SENSES = (LE, EQ, GE)

CONTINUOUS = "continuous"
BINARY = "binary"

# Fixed solver tolerances, shared by every verifier in the package.
FEAS_TOL = 1e-8
INT_TOL = 1e-6


class ProgramError(ValueError):
    """Raised when a program is malformed (bad bounds, unknown variable...)."""


@dataclass
class Constraint:
    coefs: dict[int, float]
    sense: str
    rhs: float
    name: str


@dataclass
class MathProgram:
    """Variables, linear rows and a linear objective (always minimised).

    Variables and constraints are addressed by the integer handle returned
    when they are added; handles follow insertion order.
    """

    name: str = "model"
    var_names: list[str] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    kinds: list[str] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)

    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def binaries(self) -> list[int]:
        return [j for j, k in enumerate(self.kinds) if k == BINARY]

    def add_var(self, name: str, lb: float, ub: float, kind: str = CONTINUOUS) -> int:
        if kind not in (CONTINUOUS, BINARY):
            raise ProgramError(f"unknown variable kind {kind!r}")
        if kind == BINARY:
            lb, ub = 0.0, 1.0
        lb, ub = float(lb), float(ub)
        if not (math.isfinite(lb) and math.isfinite(ub)):
            raise ProgramError(f"variable {name} needs finite bounds, got [{lb}, {ub}]")
        if lb > ub:
            raise ProgramError(f"variable {name} has lb {lb} > ub {ub}")
        self.var_names.append(name)
        self.lb.append(lb)
        self.ub.append(ub)
        self.kinds.append(kind)
        return len(self.var_names) - 1

    def add_binary(self, name: str) -> int:
        return self.add_var(name, 0.0, 1.0, BINARY)

    def add_constraint(
        self,
        coefs: Mapping[int, float] | Iterable[tuple[int, float]],
        sense: str,
        rhs: float,
        name: str | None = None,
    ) -> int:
        """Add ``sum(coef * x) <sense> rhs``; repeated handles are summed."""
        if sense not in SENSES:
            raise ProgramError(f"unknown sense {sense!r}")
        items = coefs.items() if isinstance(coefs, Mapping) else coefs
        row: dict[int, float] = {}
        for j, a in items:
            if not 0 <= j < self.num_vars:
                raise ProgramError(f"constraint references unknown variable {j}")
            row[j] = row.get(j, 0.0) + float(a)
        row = {j: a for j, a in row.items() if a != 0.0}
        if not math.isfinite(rhs) or not all(math.isfinite(a) for a in row.values()):
            raise ProgramError(f"non-finite data in constraint {name}")
        cid = len(self.constraints)
        self.constraints.append(Constraint(row, sense, float(rhs), name or f"c{cid}"))
        return cid

    def set_objective(self, coefs: Mapping[int, float]) -> None:
        obj: dict[int, float] = {}
        for j, a in coefs.items():
            if not 0 <= j < self.num_vars:
                raise ProgramError(f"objective references unknown variable {j}")
            obj[j] = obj.get(j, 0.0) + float(a)
        self.objective = {j: a for j, a in obj.items() if a != 0.0}

    def fix(self, j: int, value: float) -> None:
        self.lb[j] = self.ub[j] = float(value)

    def copy(self) -> "MathProgram":
        return MathProgram(
            self.name,
            list(self.var_names),
            list(self.lb),
            list(self.ub),
            list(self.kinds),
            [Constraint(dict(c.coefs), c.sense, c.rhs, c.name) for c in self.constraints],
            dict(self.objective),
        )

    def matrix(self) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for i, con in enumerate(self.constraints):
            for j, a in con.coefs.items():
                rows.append(i)
                cols.append(j)
                vals.append(a)
        return sp.csr_matrix(
            (vals, (rows, cols)), shape=(self.num_constraints, self.num_vars)
        )

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for j, a in self.objective.items():
            c[j] = a
        return c

    def evaluate(self, x) -> float:
        return float(sum(a * x[j] for j, a in self.objective.items()))

    def violations(self, x, tol: float = FEAS_TOL) -> list[str]:
        """Names of rows/bounds violated by ``x`` beyond ``tol``."""
        out = []
        for j in range(self.num_vars):
            if x[j] < self.lb[j] - tol or x[j] > self.ub[j] + tol:
                out.append(f"bound:{self.var_names[j]}")
        for con in self.constraints:
            act = sum(a * x[j] for j, a in con.coefs.items())
            if (
                (con.sense == LE and act > con.rhs + tol)
                or (con.sense == GE and act < con.rhs - tol)
                or (con.sense == EQ and abs(act - con.rhs) > tol)
            ):
                out.append(con.name)
        return out

    def validate(self) -> list[str]:
        problems = []
        if len(set(self.var_names)) != self.num_vars:
            problems.append("duplicate variable names")
        for j, k in enumerate(self.kinds):
            if k == BINARY and (self.lb[j] < 0.0 or self.ub[j] > 1.0):
                problems.append(f"binary {self.var_names[j]} bounds outside [0, 1]")
        return problems


@dataclass
class SolveResult:
    status: str
    x: np.ndarray | None = None
    objective: float = math.nan
    nodes: int = 0
    iterations: int = 0
    wall_time: float = 0.0
    message: str = ""

    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"

    @property
    def optimal(self) -> bool:
        return self.status == self.OPTIMAL
