"""Small hand-built feeders and programs shared by the tests."""

from __future__ import annotations

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp as scipy_milp

from feederopt.milp import BINARY, EQ, GE, LE
from feederopt.network import (
    Bus,
    Capacitor,
    DerUnit,
    DroopSettings,
    FeederModel,
    Line,
    Load,
    PvUnit,
    Substation,
    Transformer,
)


def bus(bid, phases="a", kv=2.4):
    return Bus(bid, tuple(phases), kv)


def line(lid, frm, to, z, phases="a", y=None, amp=5.0):
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    k = len(phases)
    y = np.zeros((k, k), dtype=complex) if y is None else np.atleast_2d(np.asarray(y, dtype=complex))
    return Line(lid, frm, to, tuple(phases), z, y, {p: amp for p in phases})


def load(lid, b, p, q=None):
    return Load(lid, b, dict(p), dict(q or {}))


def substation(b, phases="a", v=1.0, price=50.0):
    return Substation("SUB", b, {p: v for p in phases}, price=price)


def droop_pv(pid, b, phases="a", s=0.1, p=0.08, q_max=0.044, price=10.0, **points):
    settings = DroopSettings(q_max=q_max, **points)
    return PvUnit(pid, b, tuple(phases), {x: s for x in phases}, {x: p for x in phases},
                  price=price, droop={x: settings for x in phases})


def plain_pv(pid, b, phases="a", s=0.1, p=0.05, price=10.0):
    return PvUnit(pid, b, tuple(phases), {x: s for x in phases}, {x: p for x in phases}, price=price)


def der(gid, b, phases="a", p_max=0.05, q_max=0.0, price=70.0):
    return DerUnit(gid, b, tuple(phases), {x: p_max for x in phases}, {x: q_max for x in phases}, price)


def capacitor(cid, b, q_max, phases="a"):
    return Capacitor(cid, b, {p: q_max for p in phases})


def transformer(tid, b, loss, phases="a"):
    return Transformer(tid, b, {p: loss for p in phases})


def feeder(buses, lines, name="test", **devices) -> FeederModel:
    return FeederModel(name, 1e6, tuple(buses), tuple(lines),
                       **{k: tuple(v) for k, v in devices.items()})


def two_bus(z=0.01 + 0.02j, s_load=0.1 + 0.05j, slack=1.0, **devices):
    return feeder(
        [bus("1"), bus("2")],
        [line("L12", "1", "2", z)],
        loads=[load("D2", "2", {"a": s_load.real}, {"a": s_load.imag})],
        substations=[substation("1", v=slack)],
        **devices,
    )


def chain(n=3, z=0.004 + 0.008j, s_load=0.05 + 0.02j, slack=1.0, **devices):
    """Single-phase chain 1-2-...-n with the same load at every non-slack bus."""
    ids = [str(k) for k in range(1, n + 1)]
    return feeder(
        [bus(b) for b in ids],
        [line(f"L{a}{b}", a, b, z) for a, b in zip(ids, ids[1:])],
        loads=[load(f"D{b}", b, {"a": s_load.real}, {"a": s_load.imag}) for b in ids[1:]],
        substations=[substation("1", v=slack)],
        **devices,
    )


# -- an independent MILP oracle (HiGHS through scipy), tests only -------
def scipy_solve(prog, fixed=None):
    """Optimum of ``prog`` with optional fixings; ``None`` when infeasible."""
    n = prog.num_vars
    c = prog.cost_vector()
    lb = np.array(prog.lb, dtype=float)
    ub = np.array(prog.ub, dtype=float)
    for j, v in (fixed or {}).items():
        lb[j] = ub[j] = v
    cons = []
    if prog.num_constraints:
        A = prog.matrix().toarray()
        lo = np.full(prog.num_constraints, -np.inf)
        hi = np.full(prog.num_constraints, np.inf)
        for i, con in enumerate(prog.constraints):
            if con.sense in (GE, EQ):
                lo[i] = con.rhs
            if con.sense in (LE, EQ):
                hi[i] = con.rhs
        cons.append(LinearConstraint(A, lo, hi))
    integrality = np.array([1 if k == BINARY else 0 for k in prog.kinds]) if n else None
    res = scipy_milp(c, constraints=cons, bounds=Bounds(lb, ub), integrality=integrality,
                     options={"mip_rel_gap": 0.0})
    if res.status == 2:
        return None
    assert res.status == 0, res.message
    return float(res.fun)
