from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from feederopt.droop import (
    V_MAX,
    V_MIN,
    BigMError,
    BigMPolicy,
    droop_q,
    encode_droop_milp,
    verify_on_curve,
    zone_of,
)
from feederopt.milp import MathProgram, SolveResult, solve_milp
from feederopt.network import DroopSettings

from builders import droop_pv

UNIT = DroopSettings(q_max=1.0)


def test_curve_examples():
    assert droop_q(1.00, UNIT) == 0.0
    assert droop_q(0.90, UNIT) == 1.0
    assert droop_q(1.04, UNIT) == pytest.approx(-0.5)
    assert droop_q(0.96, UNIT) == pytest.approx(0.5)
    assert droop_q(1.10, UNIT) == -1.0


@pytest.mark.parametrize("v, zone", [(0.93, 1), (0.94, 2), (0.979, 2), (0.98, 3), (1.02, 4), (1.06, 5)])
def test_zone_of(v, zone):
    assert zone_of(v, UNIT) == zone


settings_strategy = st.builds(
    lambda v1, g1, g2, g3, q: DroopSettings(v1, v1 + g1, v1 + g1 + g2, v1 + g1 + g2 + g3, q),
    st.floats(0.85, 1.0), st.floats(0.005, 0.08), st.floats(0.005, 0.08), st.floats(0.005, 0.08),
    st.floats(0.001, 1.0),
)


@given(settings_strategy, st.integers(0, 3), st.sampled_from([1e-7, 1e-9, 1e-11]))
def test_curve_continuous_at_breakpoints(s, k, eps):
    v = (s.v1, s.v2, s.v3, s.v4)[k]
    slope = s.q_max / min(s.v2 - s.v1, s.v4 - s.v3)
    assert abs(droop_q(v + eps, s) - droop_q(v - eps, s)) <= 2 * eps * slope * (1 + 1e-6) + 1e-15


@given(settings_strategy, st.floats(0.8, 1.2), st.floats(0.8, 1.2))
def test_curve_non_increasing(s, a, b):
    lo, hi = sorted((a, b))
    assert droop_q(lo, s) >= droop_q(hi, s)
    assert -s.q_max <= droop_q(lo, s) <= s.q_max


def test_default_big_m_above_minimum():
    m_v, m_q = BigMPolicy.minimums(UNIT)
    # window [0.95, 1.05] against breakpoints 0.94 .. 1.06
    assert m_v == pytest.approx(0.11)
    assert m_q == pytest.approx(1.0 * (1 + 0.10 / 0.04))
    BigMPolicy.default(UNIT).check(UNIT)
    with pytest.raises(BigMError):
        BigMPolicy(0.05, 10.0).check(UNIT)


# -- one inverter phase with free V and Q ------------------------------
def single_pv_program(s: DroopSettings, policy=None):
    pv = droop_pv("PV", "n", s=2 * s.q_max + 1, q_max=s.q_max, v1=s.v1, v2=s.v2, v3=s.v3, v4=s.v4)
    prog = MathProgram(name="one")
    V = prog.add_var("V", V_MIN, V_MAX)
    Q = prog.add_var("Q", -2 * s.q_max - 1, 2 * s.q_max + 1)
    vm = SimpleNamespace(v_mag={("n", "a"): V}, q_pvv={("PV", "a"): Q})
    flags = encode_droop_milp(pv, vm, prog, policy)
    return prog, V, Q, flags.flags["a"]


def solve_at(s, v, sense=1.0, fix=None):
    prog, V, Q, z = single_pv_program(s)
    prog.fix(V, v)
    for k, val in (fix or {}).items():
        prog.fix(z[k - 1], val)
    prog.set_objective({Q: sense})
    return solve_milp(prog), Q, z


def test_dead_band_forces_zero():
    r, Q, z = solve_at(UNIT, 1.00)
    assert r.optimal and r.x[Q] == pytest.approx(0.0, abs=1e-12)
    assert r.x[z[2]] == 0.0


def test_zone_four_pins_slope():
    r, Q, z = solve_at(UNIT, 1.04, fix={4: 0.0})
    assert r.x[Q] == pytest.approx(1.0 * (1.04 - 1.02) / (1.02 - 1.06))


def test_wrong_zone_is_infeasible():
    r, _, _ = solve_at(UNIT, 1.00, fix={4: 0.0, 1: 1, 2: 1, 3: 1, 5: 1})
    assert r.status == SolveResult.INFEASIBLE


@pytest.mark.parametrize("zone", [2, 3])
def test_breakpoint_accepts_both_zones(zone):
    r, Q, _ = solve_at(UNIT, UNIT.v2, fix={zone: 0.0})
    assert r.optimal and r.x[Q] == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(s=st.sampled_from([UNIT, DroopSettings(q_max=0.044), DroopSettings(0.92, 0.97, 1.03, 1.08, 0.3)]),
       v=st.floats(V_MIN, V_MAX))
def test_encoding_sound_and_complete(s, v):
    # both extremes of Q at fixed V land on the curve
    for sense in (1.0, -1.0):
        r, Q, _ = solve_at(s, v, sense)
        assert r.optimal
        assert abs(r.x[Q] - droop_q(v, s)) <= 1e-6


def test_big_m_rows_never_bind():
    s = DroopSettings(q_max=0.044)
    for v in np.arange(0.95, 1.0500001, 0.01):
        prog, V, Q, z = single_pv_program(s)
        prog.fix(V, float(v))
        r = solve_milp(prog)
        assert r.optimal
        active = [k for k in range(5) if r.x[z[k]] < 0.5]
        assert len(active) >= 1
        for con in prog.constraints:
            zs = [k for k in range(5) if z[k] in con.coefs and r.x[z[k]] > 0.5]
            if not zs or con.name.startswith("dzone"):
                continue
            act = sum(a * r.x[j] for j, a in con.coefs.items())
            slack = con.rhs - act if con.sense == "<=" else act - con.rhs
            assert slack > 1e-6, con.name


def test_verify_on_curve_flat_curve():
    pv = droop_pv("PV", "n", q_max=0.0)
    feeder = SimpleNamespace(droop_pvs=(pv,))
    sol = SimpleNamespace(voltage=lambda b, p: 1.04 + 0j, pv_q={("PV", "a"): 0.0})
    (dev,) = verify_on_curve(sol, feeder)
    assert dev.deviation == 0.0 and not dev.flagged


def test_verify_on_curve_flags():
    pv = droop_pv("PV", "n", q_max=0.1)
    feeder = SimpleNamespace(droop_pvs=(pv,))
    sol = SimpleNamespace(voltage=lambda b, p: 1.00 + 0.01j, pv_q={("PV", "a"): 0.01})
    (dev,) = verify_on_curve(sol, feeder)
    assert dev.q_curve == 0.0 and dev.deviation == pytest.approx(0.01) and dev.flagged
