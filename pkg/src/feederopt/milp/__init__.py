"""Program container, LP/MILP solvers, polygon cuts and MPS export."""

from .program import (
    BINARY,
    CONTINUOUS,
    EQ,
    FEAS_TOL,
    GE,
    INT_TOL,
    LE,
    MathProgram,
    ProgramError,
    SolveResult,
)
from .simplex import solve_lp
from .branch_bound import solve_milp
from .polygon import DEFAULT_SEGMENTS, add_circle_constraint, overshoot
from .mps import export_mps, parse_mps, write_mps
