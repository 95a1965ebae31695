"""Root presolve for branch and bound: binary probing and big-M tightening.

Both reductions keep the set of integer-feasible points unchanged; they only
shrink the LP relaxation.  Per row with a binary ``z``:

* if a value of ``z`` makes the row infeasible against the bounds of the
  remaining columns, ``z`` is fixed to the other value;
* in a ``<=`` row that ``z = 1`` switches off, a coefficient larger than
  needed to make the row redundant is cut down to exactly that size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .program import BINARY, EQ, GE, MathProgram

TOL = 1e-9


@dataclass
class PresolveReport:
    fixed: int = 0
    tightened: int = 0
    infeasible: bool = False


def _as_le(con):
    """Row as (coefs, rhs) in ``<=`` form; ``None`` for equalities."""
    if con.sense == EQ:
        return None
    if con.sense == GE:
        return {j: -a for j, a in con.coefs.items()}, -con.rhs, -1.0
    return dict(con.coefs), con.rhs, 1.0


def presolve(prog: MathProgram, max_rounds: int = 5) -> tuple[MathProgram, PresolveReport]:
    out = prog.copy()
    rep = PresolveReport()
    lb = np.asarray(out.lb, dtype=float)
    ub = np.asarray(out.ub, dtype=float)
    is_bin = np.array([k == BINARY for k in out.kinds], dtype=bool)

    for _ in range(max_rounds):
        changed = False
        for i, con in enumerate(out.constraints):
            le = _as_le(con)
            if le is None:
                continue
            coefs, b, flip = le
            if not any(is_bin[j] for j in coefs):
                continue
            lo = {j: min(a * lb[j], a * ub[j]) for j, a in coefs.items()}
            hi = {j: max(a * lb[j], a * ub[j]) for j, a in coefs.items()}
            min_all = sum(lo.values())
            max_all = sum(hi.values())
            if min_all > b + TOL:
                rep.infeasible = True
                return out, rep
            new_coefs = None
            for j, a in coefs.items():
                if not is_bin[j] or lb[j] == ub[j]:
                    continue
                min_rest = min_all - lo[j]
                max_rest = max_all - hi[j]
                if min_rest > b + TOL:  # z = 0 impossible
                    lb[j] = ub[j] = 1.0
                    rep.fixed += 1
                    changed = True
                    continue
                if min_rest + a > b + TOL:  # z = 1 impossible
                    lb[j] = ub[j] = 0.0
                    rep.fixed += 1
                    changed = True
                    continue
                if a < 0 and max_rest > b and max_rest < b - a - TOL:
                    new_coefs = new_coefs or dict(coefs)
                    new_coefs[j] = b - max_rest
                    rep.tightened += 1
            if new_coefs is not None:
                con.coefs = {j: flip * a for j, a in new_coefs.items()}
                changed = True
        if not changed:
            break
    out.lb = [float(v) for v in lb]
    out.ub = [float(v) for v in ub]
    return out, rep
