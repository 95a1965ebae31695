"""Nonlinear checks of a dispatch: radial sweep power flow and droop fixed point.

Lines use the same pi model as the OPF: full series impedance matrix and half
of the shunt admittance at each terminal.  Loads are constant power.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .droop import droop_q
from .feeder_io import check_radial
from .network import FeederModel

log = logging.getLogger(__name__)

SWEEP_TOL = 1e-9
SWEEP_MAX = 200


class OracleError(RuntimeError):
    pass


class MeshedFeederError(OracleError):
    pass


class SweepDiverged(OracleError):
    def __init__(self, trace):
        self.trace = trace
        super().__init__(f"sweep did not converge in {len(trace)} sweeps; last mismatch {trace[-1]:.3e}")


class EquilibriumError(OracleError):
    def __init__(self, trace):
        self.trace = trace
        super().__init__(f"droop fixed point did not settle in {len(trace)} iterations")


@dataclass
class SweepState:
    v: dict  # (bus, phase) -> complex
    i_line: dict  # (line, phase) -> current leaving from_bus into the line
    i_line_to: dict  # (line, phase) -> current leaving to_bus into the line
    iterations: int
    mismatch: float
    trace: list = field(default_factory=list)

    def injection(self, feeder: FeederModel, bus: str, phase: str) -> complex:
        """Current leaving ``bus`` into the network on ``phase``."""
        total = 0j
        for ln in feeder.lines:
            if phase in ln.phases:
                if ln.from_bus == bus:
                    total += self.i_line[(ln.id, phase)]
                elif ln.to_bus == bus:
                    total += self.i_line_to[(ln.id, phase)]
        return total

    def power(self, feeder: FeederModel, bus: str, phase: str) -> complex:
        return self.v[(bus, phase)] * np.conj(self.injection(feeder, bus, phase))


def sweep_power_flow(feeder: FeederModel, injections: dict, tol: float = SWEEP_TOL,
                     max_sweeps: int = SWEEP_MAX) -> SweepState:
    """Backward/forward sweep for net complex power ``injections`` (gen - load, pu).

    The substation bus is the slack; entries for it are ignored.
    """
    radial, ordering = check_radial(feeder)
    if not radial:
        raise MeshedFeederError(f"{feeder.name}: sweep needs a radial feeder")
    sub = feeder.substation
    order = ordering.order
    children: dict[str, list] = {b: [] for b in order}
    for b in order[1:]:
        parent, ln, _ = ordering.parent_line[b]
        bus_ph = feeder.bus(b).phases
        if not set(bus_ph) <= set(ln.phases):
            raise OracleError(f"bus {b} has phases not fed by line {ln.id}")
        children[parent].append(b)

    v = {}
    for b in order:
        for ph in feeder.bus(b).phases:
            v[(b, ph)] = sub.voltage(ph) if ph in sub.phases else 0j
    s_inj = {k: complex(injections.get(k, 0j)) for k in v}

    def vec(bus, phases):
        return np.array([v[(bus, p)] for p in phases])

    trace = []
    i_ser: dict[str, np.ndarray] = {}
    for sweep in range(1, max_sweeps + 1):
        # backward: current each bus draws from its feeding line
        into: dict[str, dict] = {}
        for b in reversed(order[1:]):
            parent, ln, _ = ordering.parent_line[b]
            need = {}
            for ph in ln.phases:
                s = s_inj.get((b, ph), 0j)
                vb = v.get((b, ph), 0j)
                need[ph] = -np.conj(s / vb) if (b, ph) in v else 0j
            for c in children[b]:
                for ph, cur in into[c]["at_parent"].items():
                    need[ph] = need.get(ph, 0j) + cur
            j = np.array([need.get(ph, 0j) for ph in ln.phases])
            ser = j + 0.5 * ln.y @ vec(b, ln.phases)
            i_ser[b] = ser
            at_parent = ser + 0.5 * ln.y @ vec(parent, ln.phases)
            into[b] = {"at_parent": dict(zip(ln.phases, at_parent))}
        # forward: voltage drop along each feeding line
        worst = 0.0
        for b in order[1:]:
            parent, ln, _ = ordering.parent_line[b]
            new = vec(parent, ln.phases) - ln.z @ i_ser[b]
            for ph, val in zip(ln.phases, new):
                if (b, ph) in v:
                    worst = max(worst, abs(val - v[(b, ph)]))
                    v[(b, ph)] = complex(val)
        trace.append(worst)
        if worst < tol:
            break
        if not np.isfinite(worst) or worst > 1e3:
            raise SweepDiverged(trace)
    else:
        raise SweepDiverged(trace)

    i_from, i_to = {}, {}
    for b in order[1:]:
        parent, ln, _ = ordering.parent_line[b]
        ser = i_ser[b]
        vp = vec(parent, ln.phases)
        vc = vec(b, ln.phases)
        leave_parent = ser + 0.5 * ln.y @ vp
        leave_child = -ser + 0.5 * ln.y @ vc
        if ln.from_bus == parent:
            a, c = leave_parent, leave_child
        else:
            a, c = leave_child, leave_parent
        for k, ph in enumerate(ln.phases):
            i_from[(ln.id, ph)] = complex(a[k])
            i_to[(ln.id, ph)] = complex(c[k])
    return SweepState(v, i_from, i_to, len(trace), trace[-1], trace)


def line_residuals(feeder: FeederModel, state: SweepState) -> float:
    """Worst residual of the split line equations at a sweep state."""
    worst = 0.0
    for ln in feeder.lines:
        vi = np.array([state.v[(ln.from_bus, p)] for p in ln.phases])
        vj = np.array([state.v[(ln.to_bus, p)] for p in ln.phases])
        il = np.array([state.i_line[(ln.id, p)] for p in ln.phases])
        for x in range(len(ln.phases)):
            rhs = vi[x] - vj[x]
            rhs -= sum(ln.z[x, m] * il[m] for m in range(len(ln.phases)) if m != x)
            rhs += 0.5 * (ln.z @ ln.y @ vi)[x]
            res = il[x] - rhs / ln.z[x, x]
            worst = max(worst, abs(res.real), abs(res.imag))
    return worst


def line_losses(feeder: FeederModel, state: SweepState) -> complex:
    total = 0j
    for ln in feeder.lines:
        for ph in ln.phases:
            total += state.v[(ln.from_bus, ph)] * np.conj(state.i_line[(ln.id, ph)])
            total += state.v[(ln.to_bus, ph)] * np.conj(state.i_line_to[(ln.id, ph)])
    return total


# ----------------------------------------------------------------------
def demand(feeder: FeederModel) -> dict:
    """Fixed loads and transformer core losses as negative injections."""
    out: dict = {}
    for ld in feeder.loads:
        for ph in ld.phases:
            k = (ld.bus, ph)
            out[k] = out.get(k, 0j) - complex(ld.p.get(ph, 0.0), ld.q.get(ph, 0.0))
    for tr in feeder.transformers:
        for ph in tr.phases:
            k = (tr.bus, ph)
            out[k] = out.get(k, 0j) - tr.no_load_loss[ph]
    return out


def _add(out, key, val):
    out[key] = out.get(key, 0j) + val


def dispatch_injections(feeder: FeederModel, solution, droop_q_included: bool = True,
                        include_substation: bool = False) -> dict:
    """Net bus injections implied by a scheduled dispatch."""
    out = demand(feeder)
    for g in feeder.ders:
        for ph in g.phases:
            _add(out, (g.bus, ph), complex(solution.der_p[(g.id, ph)], solution.der_q[(g.id, ph)]))
    for pv in feeder.pvs:
        for ph in pv.phases:
            q = solution.pv_q[(pv.id, ph)] if (droop_q_included or not pv.has_droop) else 0.0
            _add(out, (pv.bus, ph), complex(solution.pv_p[(pv.id, ph)], q))
    for c in feeder.capacitors:
        for ph in c.phases:
            _add(out, (c.bus, ph), 1j * solution.cap_q[(c.id, ph)])
    if include_substation:
        for s in feeder.substations:
            for ph in s.phases:
                _add(out, (s.bus, ph), complex(solution.sub_p[(s.id, ph)], solution.sub_q[(s.id, ph)]))
    return out


def passive_injections(feeder: FeederModel) -> dict:
    """Zero-Q baseline: every PV at available power and unity power factor,
    DERs idle, capacitor banks off."""
    out = demand(feeder)
    for pv in feeder.pvs:
        for ph in pv.phases:
            _add(out, (pv.bus, ph), complex(pv.p_available.get(ph, 0.0), 0.0))
    return out


@dataclass
class DispatchCheck:
    max_voltage_gap: float  # max | |V_sweep| - V_hat |
    max_complex_gap: float  # max | V_sweep - V_opf |
    max_nodal_residual: float
    residual_by_bus: dict
    flagged_buses: list
    substation_mismatch: float
    v_min: float
    v_max: float
    out_of_window: list
    sweep: SweepState

    def passed(self, residual_tol=1e-3, gap_tol=5e-3) -> bool:
        return (self.max_nodal_residual <= residual_tol and self.max_voltage_gap <= gap_tol
                and not self.out_of_window)


def verify_dispatch(feeder: FeederModel, solution, residual_tol: float = 1e-3,
                    window_slack: float = 5e-3, v_min=0.95, v_max=1.05) -> DispatchCheck:
    """Re-solve the network with the scheduled set points and compare."""
    state = sweep_power_flow(feeder, dispatch_injections(feeder, solution))
    gap = max(abs(abs(state.v[k]) - solution.v_hat[k]) for k in state.v)
    cgap = max(abs(state.v[k] - solution.v[k]) for k in state.v)

    # exact nodal balance at the OPF's own voltages and injection currents
    sched = dispatch_injections(feeder, solution, include_substation=True)
    residual = {}
    for k in solution.v:
        s_net = solution.v[k] * np.conj(solution.i_inj[k])
        residual[k] = abs(sched.get(k, 0j) - s_net)
    flagged = sorted({k[0] for k, r in residual.items() if r > residual_tol})

    sub = feeder.substation
    # slack bus power from the sweep against the scheduled net injection there
    mismatch = max(abs(state.power(feeder, sub.bus, ph) - sched.get((sub.bus, ph), 0j))
                   for ph in sub.phases)
    mags = {k: abs(val) for k, val in state.v.items()}
    lo, hi = v_min - window_slack, v_max + window_slack
    out = sorted(k for k, m in mags.items() if m < lo or m > hi)
    return DispatchCheck(gap, cgap, max(residual.values()), residual, flagged, mismatch,
                         min(mags.values()), max(mags.values()), out, state)


# ----------------------------------------------------------------------
@dataclass
class Equilibrium:
    v: dict  # (pv, phase) -> local magnitude
    q: dict  # (pv, phase) -> reactive output
    iterations: int
    trace: list
    sweep: SweepState | None


def droop_equilibrium(
    feeder: FeederModel,
    p_dispatch: dict,
    damping: float = 0.5,
    other: dict | None = None,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> Equilibrium:
    """Let every droop inverter follow its curve until nothing moves.

    ``p_dispatch`` maps (pv, phase) to active output; ``other`` holds the
    net injections of all remaining devices (defaults to loads only).
    The iteration is ``Q <- (1 - damping) Q + damping droop_q(V(Q))`` and stops
    once ``max |droop_q(V) - Q| < tol``.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    keys = [(pv, ph) for pv in feeder.droop_pvs for ph in pv.phases]
    if not keys:
        return Equilibrium({}, {}, 0, [], None)
    base = dict(other) if other is not None else demand(feeder)
    q = {(pv.id, ph): 0.0 for pv, ph in keys}
    trace = []
    for it in range(1, max_iter + 1):
        inj = dict(base)
        for pv, ph in keys:
            _add(inj, (pv.bus, ph), complex(p_dispatch[(pv.id, ph)], q[(pv.id, ph)]))
        state = sweep_power_flow(feeder, inj)
        volts = {(pv.id, ph): abs(state.v[(pv.bus, ph)]) for pv, ph in keys}
        target = {(pv.id, ph): droop_q(volts[(pv.id, ph)], pv.droop[ph]) for pv, ph in keys}
        resid = max(abs(target[k] - q[k]) for k in q)
        trace.append(resid)
        if resid < tol:
            return Equilibrium(volts, dict(q), it, trace, state)
        q = {k: (1.0 - damping) * q[k] + damping * target[k] for k in q}
    raise EquilibriumError(trace)


def equilibrium_from_solution(feeder: FeederModel, solution, damping: float = 0.5, **kw) -> Equilibrium:
    """Fixed point with every non-droop device held at its scheduled value."""
    p = {(pv.id, ph): solution.pv_p[(pv.id, ph)] for pv in feeder.droop_pvs for ph in pv.phases}
    other = demand(feeder)
    for g in feeder.ders:
        for ph in g.phases:
            _add(other, (g.bus, ph), complex(solution.der_p[(g.id, ph)], solution.der_q[(g.id, ph)]))
    for pv in feeder.pvs:
        if not pv.has_droop:
            for ph in pv.phases:
                _add(other, (pv.bus, ph), solution.pv_p[(pv.id, ph)])
    for c in feeder.capacitors:
        for ph in c.phases:
            _add(other, (c.bus, ph), 1j * solution.cap_q[(c.id, ph)])
    return droop_equilibrium(feeder, p, damping, other=other, **kw)
