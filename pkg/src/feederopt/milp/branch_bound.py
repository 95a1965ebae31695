"""Best-first branch and bound over the binaries of a :class:`MathProgram`."""

from __future__ import annotations

import heapq
import itertools
import logging
import time

import numpy as np

from .presolve import presolve
from .program import INT_TOL, MathProgram, SolveResult
from .simplex import Basis, LPEngine

log = logging.getLogger(__name__)

DEFAULT_NODE_LIMIT = 10**6


def _gap(incumbent: float) -> float:
    return max(1e-9, 1e-8 * abs(incumbent))


def _most_fractional(x: np.ndarray, binaries: np.ndarray) -> int | None:
    vals = x[binaries]
    frac = np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)
    k = int(np.argmax(frac))  # first maximum -> lowest variable index
    if frac[k] <= INT_TOL:
        return None
    return int(binaries[k])


def solve_milp(prog: MathProgram, node_limit: int = DEFAULT_NODE_LIMIT) -> SolveResult:
    """Minimise ``prog`` exactly over its binaries.

    Nodes are explored best bound first (ties by creation order); each node
    branches on its most fractional binary (ties by lowest index) and is
    warm-started from its parent's optimal basis.
    """
    t0 = time.perf_counter()
    binaries = np.array(prog.binaries, dtype=int)
    if binaries.size:
        prog, rep = presolve(prog)
        log.debug("presolve fixed %d binaries, tightened %d coefficients", rep.fixed, rep.tightened)
        if rep.infeasible:
            return SolveResult(SolveResult.INFEASIBLE, None, np.nan, 0, 0, time.perf_counter() - t0)
    engine = LPEngine(prog)
    lb0 = np.asarray(prog.lb, dtype=float)
    ub0 = np.asarray(prog.ub, dtype=float)

    counter = itertools.count()
    heap: list[tuple[float, int, dict[int, float], Basis | None]] = [
        (-np.inf, next(counter), {}, None)
    ]
    best_x: np.ndarray | None = None
    best_obj = np.inf
    best_basis: Basis | None = None
    nodes = 0
    iterations = 0
    limited = False

    while heap:
        bound, _, fixings, basis = heapq.heappop(heap)
        if bound >= best_obj - _gap(best_obj):
            continue
        if nodes >= node_limit:
            limited = True
            break
        nodes += 1
        lb, ub = lb0.copy(), ub0.copy()
        for j, v in fixings.items():
            lb[j] = ub[j] = v
        out = engine.solve(lb, ub, basis)
        iterations += out.iterations
        if out.status != SolveResult.OPTIMAL:
            if out.status == SolveResult.ITERATION_LIMIT:
                log.warning("node LP hit its iteration limit; node dropped")
            continue
        if out.objective >= best_obj - _gap(best_obj):
            continue
        j = _most_fractional(out.x, binaries) if binaries.size else None
        if j is None:
            best_obj, best_x, best_basis = out.objective, out.x, out.basis
            continue
        for v in (0.0, 1.0):
            child = dict(fixings)
            child[j] = v
            heapq.heappush(heap, (out.objective, next(counter), child, out.basis))

    if best_x is None:
        status = SolveResult.ITERATION_LIMIT if limited else SolveResult.INFEASIBLE
        return SolveResult(status, None, np.nan, nodes, iterations,
                           time.perf_counter() - t0)

    # Snap binaries and re-solve so continuous values match the exact zone.
    if binaries.size:
        lb, ub = lb0.copy(), ub0.copy()
        snapped = np.round(best_x[binaries])
        lb[binaries] = ub[binaries] = snapped
        out = engine.solve(lb, ub, best_basis)
        iterations += out.iterations
        if out.status == SolveResult.OPTIMAL:
            best_x, best_obj = out.x, out.objective
        else:
            best_x = best_x.copy()
            best_x[binaries] = snapped
    status = SolveResult.ITERATION_LIMIT if limited else SolveResult.OPTIMAL
    return SolveResult(status, best_x, best_obj, nodes, iterations, time.perf_counter() - t0)
