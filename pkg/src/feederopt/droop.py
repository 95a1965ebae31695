"""Volt-VAr droop curve: scalar evaluator and Big-M mixed-integer encoding."""

from __future__ import annotations

from dataclasses import dataclass

from .milp import GE, LE, MathProgram
from .network import DroopSettings, FeederModel, PvUnit

V_MIN = 0.95
V_MAX = 1.05
ZONES = (1, 2, 3, 4, 5)


def droop_q(v: float, s: DroopSettings) -> float:
    """Reactive set point commanded by the Q-V curve at local voltage ``v``.

    Positive output (injection) below ``v2``, zero in the dead band
    ``[v2, v3)``, absorption above ``v3``, saturating at ``±q_max``.
    """
    if v < s.v1:
        return s.q_max
    # the ratios stay in [0, 1] in floating point, keeping |Q| <= q_max
    if v < s.v2:
        return s.q_max * ((s.v2 - v) / (s.v2 - s.v1))
    if v < s.v3:
        return 0.0
    if v < s.v4:
        return -s.q_max * ((v - s.v3) / (s.v4 - s.v3))
    return -s.q_max


def zone_of(v: float, s: DroopSettings) -> int:
    """Curve segment (1..5) containing ``v``; half-open on the right."""
    for k, edge in enumerate((s.v1, s.v2, s.v3, s.v4), start=1):
        if v < edge:
            return k
    return 5


class BigMError(ValueError):
    pass


@dataclass(frozen=True)
class BigMPolicy:
    m_voltage: float
    m_q: float

    @classmethod
    def default(cls, s: DroopSettings) -> "BigMPolicy":
        return cls(1.0, 10.0 * s.q_max)

    @staticmethod
    def minimums(s: DroopSettings, v_min: float = V_MIN, v_max: float = V_MAX):
        """Smallest M values that never cut a point of the curve."""
        m_v = max(v_max - min(s.v1, s.v2, s.v3, s.v4), max(s.v1, s.v2, s.v3, s.v4) - v_min)
        m_q = s.q_max * (1.0 + (v_max - v_min) / min(s.v2 - s.v1, s.v4 - s.v3))
        return m_v, m_q

    def check(self, s: DroopSettings, v_min: float = V_MIN, v_max: float = V_MAX) -> None:
        m_v, m_q = self.minimums(s, v_min, v_max)
        if self.m_voltage < m_v or self.m_q < m_q:
            raise BigMError(
                f"Big-M too small: need m_voltage >= {m_v:.6g} and m_q >= {m_q:.6g}, "
                f"got {self.m_voltage:.6g} / {self.m_q:.6g}"
            )


@dataclass(frozen=True)
class ZoneFlags:
    """Zone binaries of one droop PV; zone k is active when its flag is 0."""

    pv: str
    flags: dict  # phase -> (z1, ..., z5) variable handles


def encode_droop_milp(
    pv: PvUnit,
    vm,
    prog: MathProgram,
    policy: BigMPolicy | dict | None = None,
    v_min: float = V_MIN,
    v_max: float = V_MAX,
) -> ZoneFlags:
    """Add the eleven Big-M row groups of the Q-V curve for every phase of ``pv``.

    ``vm`` must expose ``v_mag[(bus, phase)]`` and ``q_pvv[(pv, phase)]``
    handles.  ``policy`` is one policy for all phases, a per-phase dict, or
    ``None`` for :meth:`BigMPolicy.default`.
    """
    if pv.droop is None:
        raise ValueError(f"{pv.id} has no droop settings")
    flags = {}
    for ph in pv.phases:
        s = pv.droop[ph]
        pol = policy.get(ph) if isinstance(policy, dict) else policy
        pol = pol or BigMPolicy.default(s)
        pol.check(s, v_min, v_max)
        Mv, Mq = pol.m_voltage, pol.m_q
        V = vm.v_mag[(pv.bus, ph)]
        Q = vm.q_pvv[(pv.id, ph)]
        tag = f"{pv.id}.{ph}"
        z = tuple(prog.add_binary(f"z{k}[{tag}]") for k in ZONES)
        z1, z2, z3, z4, z5 = z
        up = s.q_max / (s.v2 - s.v1)  # zone-2 slope magnitude
        dn = s.q_max / (s.v3 - s.v4)  # zone-4 slope (negative)
        add = prog.add_constraint
        # zone 1: V <= v1, Q = q_max
        add({V: 1, z1: -Mv}, LE, s.v1, f"dz1v[{tag}]")
        add({Q: 1, z1: -Mq}, LE, s.q_max, f"dz1qu[{tag}]")
        add({Q: 1, z1: Mq}, GE, s.q_max, f"dz1ql[{tag}]")
        # zone 2: v1 <= V <= v2, Q = up * (v2 - V)
        add({V: 1, z2: Mv}, GE, s.v1, f"dz2vl[{tag}]")
        add({V: 1, z2: -Mv}, LE, s.v2, f"dz2vu[{tag}]")
        add({Q: 1, V: up, z2: -Mq}, LE, up * s.v2, f"dz2qu[{tag}]")
        add({Q: 1, V: up, z2: Mq}, GE, up * s.v2, f"dz2ql[{tag}]")
        # zone 3: dead band, Q = 0
        add({V: 1, z3: Mv}, GE, s.v2, f"dz3vl[{tag}]")
        add({V: 1, z3: -Mv}, LE, s.v3, f"dz3vu[{tag}]")
        add({Q: 1, z3: -Mq}, LE, 0.0, f"dz3qu[{tag}]")
        add({Q: 1, z3: Mq}, GE, 0.0, f"dz3ql[{tag}]")
        # zone 4: v3 <= V <= v4, Q = dn * (V - v3)
        add({V: 1, z4: Mv}, GE, s.v3, f"dz4vl[{tag}]")
        add({V: 1, z4: -Mv}, LE, s.v4, f"dz4vu[{tag}]")
        add({Q: 1, V: -dn, z4: -Mq}, LE, -dn * s.v3, f"dz4qu[{tag}]")
        add({Q: 1, V: -dn, z4: Mq}, GE, -dn * s.v3, f"dz4ql[{tag}]")
        # zone 5: V >= v4, Q = -q_max
        add({V: 1, z5: Mv}, GE, s.v4, f"dz5v[{tag}]")
        add({Q: 1, z5: -Mq}, LE, -s.q_max, f"dz5qu[{tag}]")
        add({Q: 1, z5: Mq}, GE, -s.q_max, f"dz5ql[{tag}]")
        # at least one zone active
        add({zk: 1 for zk in z}, LE, 4.0, f"dzone[{tag}]")
        flags[ph] = z
    return ZoneFlags(pv.id, flags)


@dataclass(frozen=True)
class CurveDeviation:
    pv: str
    phase: str
    v: float
    q: float
    q_curve: float
    deviation: float
    flagged: bool


def verify_on_curve(solution, feeder: FeederModel, tol: float = 1e-4) -> list[CurveDeviation]:
    """``|Q_scheduled - droop_q(V_scheduled)|`` for every droop PV phase."""
    out = []
    for pv in feeder.droop_pvs:
        for ph in pv.phases:
            v = abs(solution.voltage(pv.bus, ph))
            q = solution.pv_q[(pv.id, ph)]
            qc = droop_q(v, pv.droop[ph])
            dev = abs(q - qc)
            out.append(CurveDeviation(pv.id, ph, v, q, qc, dev, dev > tol))
    return out
