"""Dense-tableau bounded dual simplex.

Every column has finite bounds, so any basis becomes dual feasible once each
nonbasic column sits at the bound matching the sign of its reduced cost.  The
engine therefore never needs a phase one: it starts from the slack/artificial
basis (or a warm basis handed over by branch and bound) and runs the dual
simplex until the basic values are within their bounds.
"""

from __future__ import annotations

import logging
import time
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg.blas import dger

from .program import EQ, FEAS_TOL, GE, LE, MathProgram, SolveResult

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-7
RANK_TOL = 1e-9
PRIMAL_TOL = 1e-10
DUAL_TOL = 1e-10
HARRIS_TOL = 1e-9
REFACTOR_EVERY = 150
CACHE_SIZE = 12  # recent final tableaux kept for warm-started children


class NumericalTrouble(RuntimeError):
    pass


@dataclass
class Basis:
    """Warm-start information: basic column per row plus nonbasic positions."""

    head: np.ndarray
    at_upper: np.ndarray


@dataclass
class LPOutcome:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int
    basis: Basis | None


class LPEngine:
    """Column layout and scaled data for one constraint matrix.

    The matrix, right-hand side and objective are frozen at construction;
    :meth:`solve` accepts per-call bounds for the structural columns so the
    same engine serves every branch-and-bound node.
    """

    def __init__(self, prog: MathProgram):
        self.prog = prog
        n = prog.num_vars
        lb = np.asarray(prog.lb, dtype=float)
        ub = np.asarray(prog.ub, dtype=float)
        A = prog.matrix().tocsc()
        rhs = np.array([c.rhs for c in prog.constraints], dtype=float)
        senses = [c.sense for c in prog.constraints]

        # Columns fixed in the program itself are folded into the rhs.
        fixed = lb == ub
        self.free_cols = np.flatnonzero(~fixed)
        self.fixed_cols = np.flatnonzero(fixed)
        self.n = n
        rhs = rhs - A[:, self.fixed_cols] @ lb[self.fixed_cols]
        A = A[:, self.free_cols].tocsr()
        self.c_struct = prog.cost_vector()[self.free_cols]
        self.obj_const = float(prog.cost_vector()[self.fixed_cols] @ lb[self.fixed_cols])

        # Rows emptied by the fold are checked once and dropped.
        nnz = np.diff(A.indptr)
        self.static_infeasible = False
        keep = []
        for i, s in enumerate(senses):
            if nnz[i] == 0:
                r = rhs[i]
                if (s == LE and r < -FEAS_TOL) or (s == GE and r > FEAS_TOL) or (
                    s == EQ and abs(r) > FEAS_TOL
                ):
                    self.static_infeasible = True
            else:
                keep.append(i)
        A = A[keep]
        rhs = rhs[keep]
        senses = [senses[i] for i in keep]

        # Row equilibration: each row scaled to unit max-norm.
        if A.shape[0] and A.shape[1]:
            scale = abs(A).max(axis=1).toarray().ravel()
        else:
            scale = np.ones(A.shape[0])
        scale[scale == 0.0] = 1.0
        A = sp.diags(1.0 / scale) @ A
        rhs = rhs / scale

        m, n1 = A.shape
        self.m = m
        self.n1 = n1
        lb1, ub1 = lb[self.free_cols], ub[self.free_cols]
        pos, neg = A.maximum(0), A.minimum(0)
        act_min = pos @ lb1 + neg @ ub1
        act_max = pos @ ub1 + neg @ lb1

        # One logical column per row: slack for inequalities, a [0, 0]
        # artificial for equalities.  Sign chosen so the logical basis is I.
        logical_sign = np.ones(m)
        log_lb = np.zeros(m)
        log_ub = np.zeros(m)
        for i, s in enumerate(senses):
            if s == LE:
                log_ub[i] = max(0.0, rhs[i] - act_min[i]) + 1.0
            elif s == GE:
                # a.x - s = rhs  ->  row negated so the slack enters with +1
                logical_sign[i] = -1.0
                log_ub[i] = max(0.0, act_max[i] - rhs[i]) + 1.0
        A = sp.diags(logical_sign) @ A
        rhs = rhs * logical_sign
        self.M_sparse = sp.hstack([A, sp.identity(m)], format="csc")
        self.M_dense = np.asfortranarray(self.M_sparse.toarray())
        self.b = rhs
        self.N = n1 + m
        self.log_lb = log_lb
        self.log_ub = log_ub
        self.c = np.concatenate([self.c_struct, np.zeros(m)])
        self._cache: OrderedDict[bytes, np.ndarray] = OrderedDict()

    # ------------------------------------------------------------------
    def _bounds(self, lb, ub):
        L = np.concatenate([np.asarray(lb, float)[self.free_cols], self.log_lb])
        U = np.concatenate([np.asarray(ub, float)[self.free_cols], self.log_ub])
        return L, U

    def _lu(self, head):
        try:
            return spla.splu(self.M_sparse[:, head].tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise NumericalTrouble(str(exc)) from exc

    def _repair(self, head):
        """Swap dependent basic columns for logicals; returns the new head."""
        B = self.M_dense[:, head]
        _, R, perm = sla.qr(B, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        # at least one column goes: the sparse factorisation already failed
        rank = min(int(np.sum(diag > RANK_TOL * max(diag[0], 1.0))), self.m - 1)
        keep = np.sort(perm[:rank])
        Q, _ = sla.qr(B[:, keep])
        # rows whose unit vectors best span what the kept columns miss
        _, _, rows = sla.qr(Q[:, rank:].T, mode="economic", pivoting=True)
        new = head.copy()
        drop = np.setdiff1d(np.arange(self.m), keep)
        new[drop] = self.n1 + np.sort(rows[: self.m - rank])
        log.debug("basis repair: %d dependent columns replaced", self.m - rank)
        return new

    def _factor(self, head, use_cache=False):
        if np.array_equal(head, np.arange(self.n1, self.N)):
            return self.M_dense.copy(order="F"), None
        lu = self._lu(head)
        cached = self._cache.get(head.tobytes()) if use_cache else None
        if cached is not None:
            return cached.copy(order="F"), lu
        nonbasic = np.ones(self.N, dtype=bool)
        nonbasic[head] = False
        cols = np.flatnonzero(nonbasic)
        T = np.zeros((self.m, self.N), order="F")
        T[:, cols] = lu.solve(self.M_dense[:, cols])
        T[np.arange(self.m), head] = 1.0
        if not np.all(np.isfinite(T)):
            raise NumericalTrouble("non-finite tableau after factorisation")
        return T, lu

    def _remember(self, head, T):
        key = head.tobytes()
        self._cache[key] = T
        self._cache.move_to_end(key)
        while len(self._cache) > CACHE_SIZE:
            self._cache.popitem(last=False)

    def _place_nonbasic(self, d, L, U, is_basic, prev_upper):
        at_upper = np.zeros(self.N, dtype=bool)
        at_upper[d < -DUAL_TOL] = True
        ties = np.abs(d) <= DUAL_TOL
        if prev_upper is not None:
            at_upper[ties] = prev_upper[ties]
        at_upper[is_basic | (L == U)] = False
        return at_upper

    def _beta(self, lu, head, xv, is_basic):
        rhs = self.b - self.M_dense @ np.where(is_basic, 0.0, xv)
        if lu is None:
            return rhs.copy()
        return lu.solve(rhs)

    # ------------------------------------------------------------------
    def solve(self, lb=None, ub=None, basis: Basis | None = None, max_iter=None) -> LPOutcome:
        lb = self.prog.lb if lb is None else lb
        ub = self.prog.ub if ub is None else ub
        if self.static_infeasible:
            return LPOutcome(SolveResult.INFEASIBLE, None, np.nan, 0, None)
        L, U = self._bounds(lb, ub)
        if np.any(L > U):
            return LPOutcome(SolveResult.INFEASIBLE, None, np.nan, 0, None)
        if self.m == 0:
            x1 = np.where(self.c_struct < 0, U[: self.n1], L[: self.n1])
            return LPOutcome(SolveResult.OPTIMAL, self._expand(x1), self._objective(x1), 0,
                             Basis(np.arange(0), np.zeros(self.N, bool)))
        if basis is not None:
            try:
                return self._run(L, U, basis.head.copy(), basis.at_upper, max_iter)
            except NumericalTrouble as exc:
                log.debug("warm start rejected (%s); cold start", exc)
        return self._run(L, U, np.arange(self.n1, self.N), None, max_iter)

    def _expand(self, x1):
        x = np.empty(self.n)
        x[self.free_cols] = x1
        x[self.fixed_cols] = np.asarray(self.prog.lb, float)[self.fixed_cols]
        return x

    def _objective(self, x1):
        return float(self.c_struct @ x1) + self.obj_const

    def _run(self, L, U, head, prev_upper, max_iter) -> LPOutcome:
        m, N = self.m, self.N
        max_iter = max_iter or 50 * (m + N)
        bland_after = 10 * (m + N)
        T, lu = self._factor(head, use_cache=prev_upper is not None)
        c = self.c
        is_basic = np.zeros(N, dtype=bool)
        is_basic[head] = True
        d = c - c[head] @ T
        at_upper = self._place_nonbasic(d, L, U, is_basic, prev_upper)
        xv = np.where(at_upper, U, L)
        beta = self._beta(lu, head, xv, is_basic)
        movable = L < U
        it = 0
        since_refactor = 0
        while True:
            viol = np.maximum(L[head] - beta, beta - U[head])
            r = int(np.argmax(viol))
            if viol[r] <= PRIMAL_TOL:
                # Confirm the basic values on a fresh factorisation first.
                if since_refactor == 0:
                    break
                try:
                    lu = self._lu(head)
                except NumericalTrouble:
                    lu = None
                if lu is not None:
                    fresh = self._beta(lu, head, xv, is_basic)
                    if np.max(np.maximum(L[head] - fresh, fresh - U[head])) <= PRIMAL_TOL:
                        beta = fresh
                        break
                T, lu, d, at_upper, xv, beta, is_basic = self._refresh(L, U, head, at_upper)
                since_refactor = 0
                continue
            if it >= max_iter:
                return LPOutcome(SolveResult.ITERATION_LIMIT, None, np.nan, it, None)
            bland = it >= bland_after
            if bland:
                cand = np.flatnonzero(viol > PRIMAL_TOL)
                r = int(cand[np.argmin(head[cand])])
            below = beta[r] < L[head[r]]
            bound = L[head[r]] if below else U[head[r]]
            delta = beta[r] - bound
            alpha = T[r, :]
            sgn = np.sign(delta)
            elig = movable & ~is_basic & (np.abs(alpha) > PIVOT_TOL)
            elig &= np.where(at_upper, -sgn * alpha > 0, sgn * alpha > 0)
            cols = np.flatnonzero(elig)
            if cols.size == 0:
                if since_refactor:
                    T, lu, d, at_upper, xv, beta, is_basic = self._refresh(L, U, head, at_upper)
                    since_refactor = 0
                    continue
                if viol[r] <= 0.1 * FEAS_TOL:
                    break
                return LPOutcome(SolveResult.INFEASIBLE, None, np.nan, it, None)
            a = np.abs(alpha[cols])
            ratio = np.abs(d[cols]) / a
            if bland:
                rmin = ratio.min()
                ties = cols[ratio <= rmin + 1e-12 * (1.0 + rmin)]
            else:
                # Harris pass: allow reduced costs to overshoot by HARRIS_TOL
                # in exchange for the largest available pivot
                bound_r = ((np.abs(d[cols]) + HARRIS_TOL) / a).min()
                ties = cols[ratio <= bound_r]
            if bland:
                j = int(ties[0])
            else:
                j = int(ties[np.argmax(np.abs(alpha[ties]))])
            piv = alpha[j]
            step = delta / piv
            leaving = head[r]
            col = T[:, j].copy()
            beta -= step * col
            beta[r] = xv[j] + step
            xv[leaving] = bound
            at_upper[leaving] = not below
            theta = d[j] / piv
            d -= theta * alpha
            d[j] = 0.0
            rowv = alpha / piv
            col[r] = 0.0
            T[r, :] = rowv
            T = dger(-1.0, col, rowv, a=T, overwrite_a=1)
            head[r] = j
            is_basic[leaving] = False
            is_basic[j] = True
            at_upper[j] = False
            it += 1
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                T, lu, d, at_upper, xv, beta, is_basic = self._refresh(L, U, head, at_upper)
                since_refactor = 0
        xv[head] = beta
        x1 = np.clip(xv[: self.n1], L[: self.n1], U[: self.n1])
        basis = Basis(head.copy(), at_upper.copy())
        self._remember(basis.head, T)
        return LPOutcome(SolveResult.OPTIMAL, self._expand(x1), self._objective(x1), it, basis)

    def _refresh(self, L, U, head, at_upper):
        try:
            T, lu = self._factor(head)
        except NumericalTrouble:
            head[:] = self._repair(head)
            T, lu = self._factor(head)
        is_basic = np.zeros(self.N, dtype=bool)
        is_basic[head] = True
        d = self.c - self.c[head] @ T
        at_upper = self._place_nonbasic(d, L, U, is_basic, at_upper)
        xv = np.where(at_upper, U, L)
        beta = self._beta(lu, head, xv, is_basic)
        return T, lu, d, at_upper, xv, beta, is_basic


def solve_lp(prog: MathProgram, max_iter: int | None = None) -> SolveResult:
    """Solve a program without binaries (binaries, if any, are relaxed)."""
    t0 = time.perf_counter()
    engine = LPEngine(prog)
    out = engine.solve(max_iter=max_iter)
    return SolveResult(
        status=out.status,
        x=out.x,
        objective=out.objective,
        nodes=0,
        iterations=out.iterations,
        wall_time=time.perf_counter() - t0,
    )
