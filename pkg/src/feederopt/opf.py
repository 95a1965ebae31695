"""Iteratively linearised current-voltage OPF for unbalanced feeders.

Each outer iteration lowers the feeder into a MILP around an operating point:
exact linear line equations in rectangular form, injection sums, Taylor-
linearised nodal power balance and voltage magnitude, polygonal thermal and
inverter rating limits, and (in droop mode) the Big-M Q-V curve.  The solved
voltages and injections become the next operating point.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .droop import V_MAX, V_MIN, BigMPolicy, encode_droop_milp
from .milp import EQ, MathProgram, SolveResult, add_circle_constraint, solve_milp
from .network import FeederModel, attached_lines, slack_phasor

log = logging.getLogger(__name__)

DROOP = "droop"
NODROOP = "nodroop"
MODES = (DROOP, NODROOP)
MIN_SEGMENTS = 8
V_RECT_BOUND = 1.5


class SchedulingError(RuntimeError):
    pass


class SchedulingInfeasible(SchedulingError):
    def __init__(self, iteration: int, hint: list[str]):
        self.iteration = iteration
        self.hint = hint
        text = "; ".join(hint[:12]) if hint else "no hint available"
        super().__init__(f"MILP infeasible at outer iteration {iteration}: {text}")


class SchedulingNotConverged(SchedulingError):
    def __init__(self, log_rows: list[dict]):
        self.log_rows = log_rows
        trace = ", ".join(f"{r['max_change']:.3e}" for r in log_rows)
        super().__init__(f"outer loop did not converge; voltage changes: {trace}")


# ----------------------------------------------------------------------
@dataclass
class OperatingPoint:
    """Taylor expansion point: bus voltages and injection currents (pu)."""

    v: dict  # (bus, phase) -> complex
    i: dict  # (bus, phase) -> complex

    @classmethod
    def flat(cls, feeder: FeederModel) -> "OperatingPoint":
        keys = feeder.bus_phases()
        return cls({k: slack_phasor(1.0, k[1]) for k in keys}, {k: 0j for k in keys})

    def check(self) -> None:
        for k, v in self.v.items():
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError(f"non-finite reference voltage at {k}")
            if abs(v) == 0.0:
                raise ValueError(f"zero reference voltage magnitude at {k}")
            if not 0.5 < abs(v) < 1.5:
                raise ValueError(f"reference voltage magnitude {abs(v):.4f} at {k} outside (0.5, 1.5)")


@dataclass
class VariableMap:
    v_r: dict = field(default_factory=dict)
    v_im: dict = field(default_factory=dict)
    v_mag: dict = field(default_factory=dict)
    i_r: dict = field(default_factory=dict)
    i_im: dict = field(default_factory=dict)
    il_r: dict = field(default_factory=dict)
    il_im: dict = field(default_factory=dict)
    p_b: dict = field(default_factory=dict)
    q_b: dict = field(default_factory=dict)
    p_g: dict = field(default_factory=dict)
    q_g: dict = field(default_factory=dict)
    p_pvv: dict = field(default_factory=dict)
    q_pvv: dict = field(default_factory=dict)
    p_pv: dict = field(default_factory=dict)
    q_c: dict = field(default_factory=dict)
    zones: dict = field(default_factory=dict)  # (pv, phase) -> (z1..z5)

    def v(self, key):
        return (self.v_r[key], self.v_im[key])

    def inj(self, key):
        return (self.i_r[key], self.i_im[key])

    def line(self, key):
        return (self.il_r[key], self.il_im[key])


def create_variables(feeder: FeederModel, prog: MathProgram, v_min=V_MIN, v_max=V_MAX) -> VariableMap:
    vm = VariableMap()
    sub = feeder.substation
    amp_sum = {k: 0.0 for k in feeder.bus_phases()}
    for ln in feeder.lines:
        for ph in ln.phases:
            cap = ln.ampacity[ph] * 2.0 + float(np.abs(ln.y).sum())
            amp_sum[(ln.from_bus, ph)] += cap
            amp_sum[(ln.to_bus, ph)] += cap
    for bus, ph in feeder.bus_phases():
        key = (bus, ph)
        tag = f"{bus}.{ph}"
        if bus == sub.bus:
            v0 = sub.voltage(ph)
            vm.v_r[key] = prog.add_var(f"vr[{tag}]", v0.real, v0.real)
            vm.v_im[key] = prog.add_var(f"vi[{tag}]", v0.imag, v0.imag)
        else:
            vm.v_r[key] = prog.add_var(f"vr[{tag}]", -V_RECT_BOUND, V_RECT_BOUND)
            vm.v_im[key] = prog.add_var(f"vi[{tag}]", -V_RECT_BOUND, V_RECT_BOUND)
        cap = amp_sum[key] + 1.0
        vm.i_r[key] = prog.add_var(f"ir[{tag}]", -cap, cap)
        vm.i_im[key] = prog.add_var(f"ii[{tag}]", -cap, cap)
        vm.v_mag[key] = prog.add_var(f"vm[{tag}]", v_min, v_max)
    for ln in feeder.lines:
        for ph in ln.phases:
            tag = f"{ln.id}.{ph}"
            cap = ln.ampacity[ph]
            vm.il_r[(ln.id, ph)] = prog.add_var(f"lr[{tag}]", -cap, cap)
            vm.il_im[(ln.id, ph)] = prog.add_var(f"li[{tag}]", -cap, cap)
    for s in feeder.substations:
        for ph in s.phases:
            pmin, pmax, qmin, qmax = s.box(ph)
            vm.p_b[(s.id, ph)] = prog.add_var(f"pb[{s.id}.{ph}]", pmin, pmax)
            vm.q_b[(s.id, ph)] = prog.add_var(f"qb[{s.id}.{ph}]", qmin, qmax)
    for g in feeder.ders:
        for ph in g.phases:
            vm.p_g[(g.id, ph)] = prog.add_var(f"pg[{g.id}.{ph}]", 0.0, g.p_max.get(ph, 0.0))
            qm = g.q_max.get(ph, 0.0)
            vm.q_g[(g.id, ph)] = prog.add_var(f"qg[{g.id}.{ph}]", -qm, qm)
    for pv in feeder.pvs:
        for ph in pv.phases:
            key = (pv.id, ph)
            pav = pv.p_available.get(ph, 0.0)
            s = pv.s_rating.get(ph, 0.0)
            if pv.has_droop:
                vm.p_pvv[key] = prog.add_var(f"pv[{pv.id}.{ph}]", 0.0, pav)
                vm.q_pvv[key] = prog.add_var(f"qv[{pv.id}.{ph}]", -s, s)
            else:
                vm.p_pv[key] = prog.add_var(f"pp[{pv.id}.{ph}]", pav, pav)
    for c in feeder.capacitors:
        for ph in c.phases:
            vm.q_c[(c.id, ph)] = prog.add_var(f"qc[{c.id}.{ph}]", 0.0, c.q_max[ph])
    return vm


# ----------------------------------------------------------------------
def add_complex_equality(prog: MathProgram, terms, constant: complex, name: str):
    """Split ``sum(c_k * w_k) + constant = 0`` into real and imaginary rows.

    ``terms`` holds ``(c_k, (re_handle, im_handle))`` with complex ``c_k``.
    """
    re_row: dict[int, float] = {}
    im_row: dict[int, float] = {}
    for c, (u, v) in terms:
        c = complex(c)
        re_row[u] = re_row.get(u, 0.0) + c.real
        re_row[v] = re_row.get(v, 0.0) - c.imag
        im_row[u] = im_row.get(u, 0.0) + c.imag
        im_row[v] = im_row.get(v, 0.0) + c.real
    constant = complex(constant)
    r1 = prog.add_constraint(re_row, EQ, -constant.real, f"{name}.re")
    r2 = prog.add_constraint(im_row, EQ, -constant.imag, f"{name}.im")
    return r1, r2


def line_equation_terms(ln, vm: VariableMap):
    """Per phase, the complex terms of ``I^x - (Z^xx)^-1 [ ... ] = 0``."""
    k = len(ln.phases)
    zy_half = 0.5 * (ln.z @ ln.y)
    out = {}
    for x, ph in enumerate(ln.phases):
        zxx = ln.z[x, x]
        if zxx == 0:
            raise SchedulingError(f"line {ln.id}: zero self impedance on phase {ph}")
        g = 1.0 / zxx
        terms = [(1.0, vm.line((ln.id, ph)))]
        for m, pm in enumerate(ln.phases):
            if m != x and ln.z[x, m] != 0:
                terms.append((g * ln.z[x, m], vm.line((ln.id, pm))))
        for n, pn in enumerate(ln.phases):
            coef = -g * ((1.0 if n == x else 0.0) + zy_half[x, n])
            terms.append((coef, vm.v((ln.from_bus, pn))))
        terms.append((g, vm.v((ln.to_bus, ph))))
        out[ph] = terms
    assert len(out) == k
    return out


def build_line_and_injection_constraints(feeder: FeederModel, vm: VariableMap, prog: MathProgram):
    for ln in feeder.lines:
        for ph, terms in line_equation_terms(ln, vm).items():
            add_complex_equality(prog, terms, 0j, f"line[{ln.id}.{ph}]")
    for bus, ph in feeder.bus_phases():
        # injection = current leaving the bus into every incident line
        terms = [(1.0, vm.inj((bus, ph)))]
        for ln, sign in attached_lines(feeder, bus):
            if ph not in ln.phases:
                continue
            terms.append((-float(sign), vm.line((ln.id, ph))))
            if sign < 0 and np.any(ln.y):
                # receiving end of the pi model: half shunt at both terminals
                x = ln.index(ph)
                for n, pn in enumerate(ln.phases):
                    yxn = 0.5 * ln.y[x, n]
                    if yxn != 0:
                        terms.append((-yxn, vm.v((ln.from_bus, pn))))
                        terms.append((-yxn, vm.v((ln.to_bus, pn))))
        add_complex_equality(prog, terms, 0j, f"inj[{bus}.{ph}]")


def _device_sums(feeder: FeederModel, vm: VariableMap, bus: str, ph: str):
    dev = feeder.devices_at(bus)
    p_row: dict[int, float] = {}
    q_row: dict[int, float] = {}
    p_const = 0.0  # demand-side constants moved to the rhs
    q_const = 0.0
    for s in dev.substations:
        if ph in s.phases:
            p_row[vm.p_b[(s.id, ph)]] = 1.0
            q_row[vm.q_b[(s.id, ph)]] = 1.0
    for g in dev.ders:
        if ph in g.phases:
            p_row[vm.p_g[(g.id, ph)]] = 1.0
            q_row[vm.q_g[(g.id, ph)]] = 1.0
    for pv in dev.droop_pvs:
        if ph in pv.phases:
            p_row[vm.p_pvv[(pv.id, ph)]] = 1.0
            q_row[vm.q_pvv[(pv.id, ph)]] = 1.0
    for pv in dev.plain_pvs:
        if ph in pv.phases:
            p_row[vm.p_pv[(pv.id, ph)]] = 1.0
    for c in dev.capacitors:
        if ph in c.phases:
            q_row[vm.q_c[(c.id, ph)]] = 1.0
    for ld in dev.loads:
        p_const += ld.p.get(ph, 0.0)
        q_const += ld.q.get(ph, 0.0)
    for tr in dev.transformers:
        p_const += tr.no_load_loss.get(ph, 0.0)
    return p_row, q_row, p_const, q_const


def power_linearization(v0: complex, i0: complex):
    """Coefficients of the first-order expansions of P and Q.

    Returns ``(p_coef, p_const, q_coef, q_const)`` where each ``*_coef`` maps
    ``"vr", "vi", "ir", "ii"`` to a float and the expansion is
    ``sum(coef * var) + const``.
    """
    vr, vi, ir, ii = v0.real, v0.imag, i0.real, i0.imag
    p_coef = {"ir": vr, "ii": vi, "vr": ir, "vi": ii}
    p_const = -vr * ir - vi * ii
    q_coef = {"ir": vi, "ii": -vr, "vi": ir, "vr": -ii}
    q_const = -vi * ir + vr * ii
    return p_coef, p_const, q_coef, q_const


def build_power_balance(feeder: FeederModel, op: OperatingPoint, vm: VariableMap, prog: MathProgram):
    for bus, ph in feeder.bus_phases():
        key = (bus, ph)
        p_row, q_row, p_dem, q_dem = _device_sums(feeder, vm, bus, ph)
        p_coef, p_const, q_coef, q_const = power_linearization(op.v[key], op.i[key])
        handles = {"vr": vm.v_r[key], "vi": vm.v_im[key], "ir": vm.i_r[key], "ii": vm.i_im[key]}
        # devices - demand = linearised P  ->  devices - lin_terms = demand + lin_const
        row = dict(p_row)
        for name, c in p_coef.items():
            row[handles[name]] = row.get(handles[name], 0.0) - c
        prog.add_constraint(row, EQ, p_dem + p_const, f"pbal[{bus}.{ph}]")
        row = dict(q_row)
        for name, c in q_coef.items():
            row[handles[name]] = row.get(handles[name], 0.0) - c
        prog.add_constraint(row, EQ, q_dem + q_const, f"qbal[{bus}.{ph}]")


def magnitude_coefficients(v0: complex) -> tuple[float, float]:
    mag = abs(v0)
    if mag == 0.0:
        raise SchedulingError("zero reference voltage magnitude")
    return v0.real / mag, v0.imag / mag


def build_voltage_constraints(feeder: FeederModel, op: OperatingPoint, vm: VariableMap, prog: MathProgram):
    """Linearised magnitude row per bus phase; the window is the variable's bounds."""
    for bus, ph in feeder.bus_phases():
        key = (bus, ph)
        a, b = magnitude_coefficients(op.v[key])
        prog.add_constraint(
            {vm.v_mag[key]: 1.0, vm.v_r[key]: -a, vm.v_im[key]: -b}, EQ, 0.0, f"vmag[{bus}.{ph}]"
        )


def build_device_constraints(feeder: FeederModel, vm: VariableMap, prog: MathProgram, segments: int = 12):
    if segments < MIN_SEGMENTS:
        raise SchedulingError(f"need at least {MIN_SEGMENTS} polygon segments, got {segments}")
    for ln in feeder.lines:
        for ph in ln.phases:
            r, i = vm.line((ln.id, ph))
            add_circle_constraint(prog, r, i, ln.ampacity[ph], segments, f"therm[{ln.id}.{ph}]")
    for pv in feeder.droop_pvs:
        for ph in pv.phases:
            key = (pv.id, ph)
            s = pv.s_rating.get(ph, 0.0)
            if s > 0:
                add_circle_constraint(prog, vm.p_pvv[key], vm.q_pvv[key], s, segments, f"srate[{pv.id}.{ph}]")
    # capacitor range, plain-PV output, inverter boxes and DER/substation
    # limits are carried by the variable bounds set in create_variables.


def build_objective(feeder: FeederModel, vm: VariableMap, prog: MathProgram):
    obj: dict[int, float] = {}
    for s in feeder.substations:
        for ph in s.phases:
            obj[vm.p_b[(s.id, ph)]] = s.price
    for g in feeder.ders:
        for ph in g.phases:
            obj[vm.p_g[(g.id, ph)]] = g.price
    for pv in feeder.droop_pvs:
        for ph in pv.phases:
            obj[vm.p_pvv[(pv.id, ph)]] = pv.price
    prog.set_objective(obj)


def plain_pv_cost(feeder: FeederModel) -> float:
    return sum(pv.price * pv.p_available.get(ph, 0.0) for pv in feeder.pvs if not pv.has_droop
               for ph in pv.phases)


def build_program(
    feeder: FeederModel,
    op: OperatingPoint,
    mode: str = DROOP,
    segments: int = 12,
    policy: BigMPolicy | None = None,
) -> tuple[MathProgram, VariableMap]:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    op.check()
    prog = MathProgram(name=feeder.name)
    vm = create_variables(feeder, prog)
    build_line_and_injection_constraints(feeder, vm, prog)
    build_power_balance(feeder, op, vm, prog)
    build_voltage_constraints(feeder, op, vm, prog)
    build_device_constraints(feeder, vm, prog, segments)
    if mode == DROOP:
        for pv in feeder.droop_pvs:
            flags = encode_droop_milp(pv, vm, prog, policy)
            for ph, z in flags.flags.items():
                vm.zones[(pv.id, ph)] = z
    build_objective(feeder, vm, prog)
    return prog, vm


# ----------------------------------------------------------------------
@dataclass
class ScheduleConfig:
    segments: int = 12
    max_iters: int = 10
    tol: float = 1e-6
    node_limit: int = 10**6


@dataclass
class DispatchSolution:
    """Scheduled dispatch and network state of one converged outer loop."""

    feeder: str
    mode: str
    objective: float
    plain_pv_cost: float
    converged: bool
    iterations: list[dict]
    v: dict  # (bus, phase) -> complex
    v_hat: dict  # (bus, phase) -> linearised magnitude
    i_inj: dict  # (bus, phase) -> complex
    i_line: dict  # (line, phase) -> complex
    sub_p: dict
    sub_q: dict
    der_p: dict
    der_q: dict
    pv_p: dict  # every PV, (pv, phase) -> P
    pv_q: dict  # every PV; zero for plain PVs
    cap_q: dict
    zones: dict  # (pv, phase) -> active zone 1..5, droop mode only
    binaries: dict = field(default_factory=dict)

    @property
    def total_cost(self) -> float:
        return self.objective + self.plain_pv_cost

    def voltage(self, bus: str, phase: str) -> complex:
        return self.v[(bus, phase)]

    # -- serialisation -------------------------------------------------
    def to_dict(self) -> dict:
        def flat(d, value=lambda x: x):
            return [[*k, value(v)] for k, v in d.items()]

        cplx = lambda z: [z.real, z.imag]  # noqa: E731
        return {
            "feeder": self.feeder,
            "mode": self.mode,
            "objective": self.objective,
            "plain_pv_cost": self.plain_pv_cost,
            "converged": self.converged,
            "iterations": self.iterations,
            "voltages": flat(self.v, cplx),
            "v_hat": flat(self.v_hat),
            "bus_currents": flat(self.i_inj, cplx),
            "line_currents": flat(self.i_line, cplx),
            "substation_p": flat(self.sub_p),
            "substation_q": flat(self.sub_q),
            "der_p": flat(self.der_p),
            "der_q": flat(self.der_q),
            "pv_p": flat(self.pv_p),
            "pv_q": flat(self.pv_q),
            "capacitor_q": flat(self.cap_q),
            "zones": flat(self.zones),
            "binaries": [[k[0], k[1], list(v)] for k, v in self.binaries.items()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DispatchSolution":
        def unflat(rows, value=lambda x: x):
            return {(r[0], r[1]): value(r[2]) for r in rows}

        cplx = lambda z: complex(z[0], z[1])  # noqa: E731
        return cls(
            feeder=d["feeder"],
            mode=d["mode"],
            objective=d["objective"],
            plain_pv_cost=d["plain_pv_cost"],
            converged=d["converged"],
            iterations=d["iterations"],
            v=unflat(d["voltages"], cplx),
            v_hat=unflat(d["v_hat"]),
            i_inj=unflat(d["bus_currents"], cplx),
            i_line=unflat(d["line_currents"], cplx),
            sub_p=unflat(d["substation_p"]),
            sub_q=unflat(d["substation_q"]),
            der_p=unflat(d["der_p"]),
            der_q=unflat(d["der_q"]),
            pv_p=unflat(d["pv_p"]),
            pv_q=unflat(d["pv_q"]),
            cap_q=unflat(d["capacitor_q"]),
            zones=unflat(d["zones"]),
            binaries=unflat(d.get("binaries", []), tuple),
        )


def extract_solution(feeder, vm: VariableMap, x, mode, objective, iterations, converged) -> DispatchSolution:
    x = np.asarray(x, dtype=float)
    val = lambda h: float(x[h])  # noqa: E731

    def cplx(pair):
        return complex(val(pair[0]), val(pair[1]))

    pv_p = {}
    pv_q = {}
    for pv in feeder.pvs:
        for ph in pv.phases:
            key = (pv.id, ph)
            if pv.has_droop:
                pv_p[key], pv_q[key] = val(vm.p_pvv[key]), val(vm.q_pvv[key])
            else:
                pv_p[key], pv_q[key] = val(vm.p_pv[key]), 0.0
    zones = {}
    binaries = {}
    for key, z in vm.zones.items():
        zv = tuple(int(round(val(h))) for h in z)
        binaries[key] = zv
        zones[key] = zv.index(0) + 1 if 0 in zv else None
    return DispatchSolution(
        feeder=feeder.name,
        mode=mode,
        objective=objective,
        plain_pv_cost=plain_pv_cost(feeder),
        converged=converged,
        iterations=iterations,
        v={k: cplx(vm.v(k)) for k in vm.v_r},
        v_hat={k: val(h) for k, h in vm.v_mag.items()},
        i_inj={k: cplx(vm.inj(k)) for k in vm.i_r},
        i_line={k: cplx(vm.line(k)) for k in vm.il_r},
        sub_p={k: val(h) for k, h in vm.p_b.items()},
        sub_q={k: val(h) for k, h in vm.q_b.items()},
        der_p={k: val(h) for k, h in vm.p_g.items()},
        der_q={k: val(h) for k, h in vm.q_g.items()},
        pv_p=pv_p,
        pv_q=pv_q,
        cap_q={k: val(h) for k, h in vm.q_c.items()},
        zones=zones,
        binaries=binaries,
    )


def _infeasibility_hint(feeder, op, segments) -> list[str]:
    """Voltage windows and device limits that bind once the window is widened."""
    prog = MathProgram(name=feeder.name)
    vm = create_variables(feeder, prog, v_min=0.5, v_max=1.5)
    build_line_and_injection_constraints(feeder, vm, prog)
    build_power_balance(feeder, op, vm, prog)
    build_voltage_constraints(feeder, op, vm, prog)
    build_device_constraints(feeder, vm, prog, segments)
    build_objective(feeder, vm, prog)
    res = solve_milp(prog)
    if not res.optimal:
        return ["network infeasible even with a widened voltage window"]
    hint = []
    for key, h in vm.v_mag.items():
        v = res.x[h]
        if v < V_MIN or v > V_MAX:
            hint.append(f"voltage {key[0]}.{key[1]} = {v:.4f} outside [{V_MIN}, {V_MAX}]")
    for j in range(prog.num_vars):
        if prog.lb[j] < prog.ub[j] and prog.var_names[j][:2] in ("pb", "qb", "pg", "qg", "pv", "qv", "qc"):
            if abs(res.x[j] - prog.lb[j]) < 1e-7 or abs(res.x[j] - prog.ub[j]) < 1e-7:
                hint.append(f"{prog.var_names[j]} at limit {res.x[j]:.4g}")
    return hint


def solve_scheduling(
    feeder: FeederModel,
    mode: str = DROOP,
    config: ScheduleConfig | None = None,
    policy: BigMPolicy | None = None,
    op: OperatingPoint | None = None,
) -> DispatchSolution:
    """Outer loop: build, solve, move the expansion point, repeat until still."""
    config = config or ScheduleConfig()
    op = op or OperatingPoint.flat(feeder)
    rows: list[dict] = []
    for it in range(1, config.max_iters + 1):
        t0 = time.perf_counter()
        prog, vm = build_program(feeder, op, mode, config.segments, policy)
        res = solve_milp(prog, node_limit=config.node_limit)
        if res.status != SolveResult.OPTIMAL:
            if res.status == SolveResult.INFEASIBLE:
                raise SchedulingInfeasible(it, _infeasibility_hint(feeder, op, config.segments))
            raise SchedulingError(f"MILP stopped with status {res.status} at iteration {it}")
        x = res.x
        v_new = {k: complex(x[vm.v_r[k]], x[vm.v_im[k]]) for k in vm.v_r}
        i_new = {k: complex(x[vm.i_r[k]], x[vm.i_im[k]]) for k in vm.i_r}
        errors = [abs(x[vm.v_mag[k]] - abs(v_new[k])) for k in vm.v_mag]
        change = max(abs(v_new[k].real - op.v[k].real) + abs(v_new[k].imag - op.v[k].imag) for k in v_new)
        rows.append(
            {
                "iteration": it,
                "max_magnitude_error": float(max(errors)),
                "mean_magnitude_error": float(np.mean(errors)),
                "max_change": float(change),
                "objective": float(res.objective),
                "nodes": int(res.nodes),
                "lp_iterations": int(res.iterations),
                "seconds": time.perf_counter() - t0,
            }
        )
        log.info("iteration %d: objective %.6f, max |V^-|V|| %.3e, change %.3e, %d nodes",
                 it, res.objective, rows[-1]["max_magnitude_error"], change, res.nodes)
        if change < config.tol:
            return extract_solution(feeder, vm, x, mode, res.objective, rows, True)
        op = OperatingPoint(v_new, i_new)
    raise SchedulingNotConverged(rows)


__all__ = [
    "DROOP",
    "NODROOP",
    "DispatchSolution",
    "OperatingPoint",
    "ScheduleConfig",
    "VariableMap",
    "build_program",
    "solve_scheduling",
]
