"""Per-unit model of an unbalanced feeder and the devices scheduled on it.

Sign convention: every device stores its own quantity as a positive number
(generation for sources, demand for loads, loss for transformers); the
balance equations in :mod:`feederopt.opf` carry the signs.
"""

from __future__ import annotations

import cmath
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

PHASES = ("a", "b", "c")
PHASE_ANGLE = {"a": 0.0, "b": -120.0, "c": 120.0}

# Stand-in for "unbounded" device limits; the LP needs finite boxes.
BIG_CAP = 10.0

PerPhase = Mapping[str, float]


def sort_phases(phases) -> tuple[str, ...]:
    return tuple(p for p in PHASES if p in set(phases))


def slack_phasor(magnitude: float, phase: str) -> complex:
    return cmath.rect(magnitude, math.radians(PHASE_ANGLE[phase]))


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Bus:
    id: str
    phases: tuple[str, ...]
    kv_base: float  # line-to-neutral, kV


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: str
    to_bus: str
    phases: tuple[str, ...]
    z: np.ndarray  # series impedance over ``phases``, pu
    y: np.ndarray  # total shunt admittance over ``phases``, pu
    ampacity: PerPhase  # pu current

    def __post_init__(self):
        object.__setattr__(self, "z", _readonly(self.z))
        object.__setattr__(self, "y", _readonly(self.y))

    def index(self, phase: str) -> int:
        return self.phases.index(phase)


@dataclass(frozen=True)
class Load:
    id: str
    bus: str
    p: PerPhase
    q: PerPhase

    @property
    def phases(self):
        return sort_phases(set(self.p) | set(self.q))


@dataclass(frozen=True)
class Transformer:
    """Constant no-load (core) loss drawn at a bus."""

    id: str
    bus: str
    no_load_loss: PerPhase

    @property
    def phases(self):
        return sort_phases(self.no_load_loss)


@dataclass(frozen=True)
class Capacitor:
    id: str
    bus: str
    q_max: PerPhase

    @property
    def phases(self):
        return sort_phases(self.q_max)


@dataclass(frozen=True)
class DroopSettings:
    """Q-V curve of one inverter phase (IEEE 1547-2018 category B shape)."""

    v1: float = 0.94
    v2: float = 0.98
    v3: float = 1.02
    v4: float = 1.06
    q_max: float = 0.0

    def problems(self) -> list[str]:
        out = []
        if not self.v1 < self.v2:
            out.append("v1 < v2")
        if not self.v2 < self.v3:
            out.append("dead-band nonempty")
        if not self.v3 < self.v4:
            out.append("v3 < v4")
        if not self.q_max > 0:
            out.append("q_max > 0")
        return out


@dataclass(frozen=True)
class PvUnit:
    id: str
    bus: str
    phases: tuple[str, ...]
    s_rating: PerPhase
    p_available: PerPhase
    price: float = 0.0
    droop: Mapping[str, DroopSettings] | None = None

    @property
    def has_droop(self) -> bool:
        return self.droop is not None


@dataclass(frozen=True)
class DerUnit:
    id: str
    bus: str
    phases: tuple[str, ...]
    p_max: PerPhase
    q_max: PerPhase
    price: float = 0.0


@dataclass(frozen=True)
class Substation:
    id: str
    bus: str
    v_slack: PerPhase
    price: float = 0.0
    p_min: PerPhase = field(default_factory=dict)
    p_max: PerPhase = field(default_factory=dict)
    q_min: PerPhase = field(default_factory=dict)
    q_max: PerPhase = field(default_factory=dict)

    @property
    def phases(self):
        return sort_phases(self.v_slack)

    def box(self, phase: str) -> tuple[float, float, float, float]:
        return (
            self.p_min.get(phase, -BIG_CAP),
            self.p_max.get(phase, BIG_CAP),
            self.q_min.get(phase, -BIG_CAP),
            self.q_max.get(phase, BIG_CAP),
        )

    def voltage(self, phase: str) -> complex:
        return slack_phasor(self.v_slack[phase], phase)


@dataclass(frozen=True)
class BusDevices:
    substations: tuple[Substation, ...] = ()
    ders: tuple[DerUnit, ...] = ()
    droop_pvs: tuple[PvUnit, ...] = ()
    plain_pvs: tuple[PvUnit, ...] = ()
    loads: tuple[Load, ...] = ()
    transformers: tuple[Transformer, ...] = ()
    capacitors: tuple[Capacitor, ...] = ()


@dataclass(frozen=True)
class FeederModel:
    name: str
    s_base_va: float
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...] = ()
    loads: tuple[Load, ...] = ()
    transformers: tuple[Transformer, ...] = ()
    capacitors: tuple[Capacitor, ...] = ()
    pvs: tuple[PvUnit, ...] = ()
    ders: tuple[DerUnit, ...] = ()
    substations: tuple[Substation, ...] = ()

    def __post_init__(self):
        index = {b.id: b for b in self.buses}
        attached = defaultdict(lambda: defaultdict(list))
        for group, items in (
            ("substations", self.substations),
            ("ders", self.ders),
            ("loads", self.loads),
            ("transformers", self.transformers),
            ("capacitors", self.capacitors),
        ):
            for dev in items:
                attached[dev.bus][group].append(dev)
        for pv in self.pvs:
            attached[pv.bus]["droop_pvs" if pv.has_droop else "plain_pvs"].append(pv)
        devices = {
            b: BusDevices(**{k: tuple(v) for k, v in groups.items()})
            for b, groups in attached.items()
        }
        incident = defaultdict(list)
        for ln in self.lines:
            incident[ln.from_bus].append((ln, +1))
            incident[ln.to_bus].append((ln, -1))
        object.__setattr__(self, "_bus_index", index)
        object.__setattr__(self, "_devices", devices)
        object.__setattr__(self, "_incident", dict(incident))

    def bus(self, bus_id: str) -> Bus:
        try:
            return self._bus_index[bus_id]
        except KeyError:
            raise KeyError(f"unknown bus {bus_id!r}") from None

    def devices_at(self, bus_id: str) -> BusDevices:
        self.bus(bus_id)
        return self._devices.get(bus_id, BusDevices())

    @property
    def substation(self) -> Substation:
        if len(self.substations) != 1:
            raise ValueError(f"expected exactly one substation, found {len(self.substations)}")
        return self.substations[0]

    @property
    def droop_pvs(self) -> tuple[PvUnit, ...]:
        return tuple(pv for pv in self.pvs if pv.has_droop)

    def bus_phases(self):
        """All (bus id, phase) pairs in bus order then phase order."""
        return [(b.id, p) for b in self.buses for p in b.phases]

    def line(self, line_id: str) -> Line:
        for ln in self.lines:
            if ln.id == line_id:
                return ln
        raise KeyError(f"unknown line {line_id!r}")


def attached_lines(feeder: FeederModel, bus_id: str) -> list[tuple[Line, int]]:
    """Lines incident to ``bus_id`` with +1 where the line current leaves the bus."""
    feeder.bus(bus_id)
    return list(feeder._incident.get(bus_id, []))


def _connected(feeder: FeederModel) -> bool:
    if not feeder.buses:
        return True
    adj = defaultdict(set)
    for ln in feeder.lines:
        adj[ln.from_bus].add(ln.to_bus)
        adj[ln.to_bus].add(ln.from_bus)
    seen = {feeder.buses[0].id}
    todo = deque(seen)
    while todo:
        u = todo.popleft()
        for v in adj[u] - seen:
            seen.add(v)
            todo.append(v)
    return len(seen) == len(feeder.buses)


def validate(feeder: FeederModel) -> list[str]:
    """Every broken invariant as ``"<entity>: <invariant>"``; empty when valid."""
    out: list[str] = []
    bus_ids = [b.id for b in feeder.buses]
    buses = {b.id: b for b in feeder.buses}
    all_ids = bus_ids + [x.id for x in feeder.lines]
    for group in (feeder.loads, feeder.transformers, feeder.capacitors, feeder.pvs,
                  feeder.ders, feeder.substations):
        all_ids += [d.id for d in group]
    seen = set()
    for i in all_ids:
        if i in seen:
            out.append(f"{i}: ids unique feeder-wide")
        seen.add(i)

    for b in feeder.buses:
        if not b.phases or not set(b.phases) <= set(PHASES):
            out.append(f"{b.id}: phases nonempty subset of a,b,c")
        if not b.kv_base > 0:
            out.append(f"{b.id}: kv_base > 0")

    def on_bus(entity, bus, phases):
        if bus not in buses:
            out.append(f"{entity}: unresolved bus {bus}")
            return
        if not set(phases) <= set(buses[bus].phases):
            out.append(f"{entity}: phases subset of bus phases")

    for ln in feeder.lines:
        for end in (ln.from_bus, ln.to_bus):
            on_bus(ln.id, end, ln.phases)
        k = len(ln.phases)
        if ln.z.shape != (k, k) or ln.y.shape != (k, k):
            out.append(f"{ln.id}: matrix shape matches phases")
            continue
        if not np.array_equal(ln.z, ln.z.T):
            out.append(f"{ln.id}: Z symmetric")
        if not np.array_equal(ln.y, ln.y.T):
            out.append(f"{ln.id}: y symmetric")
        if np.any(np.diag(ln.z) == 0):
            out.append(f"{ln.id}: Z diagonal nonzero")
        for p in ln.phases:
            if not ln.ampacity.get(p, 0.0) > 0:
                out.append(f"{ln.id}: I_max > 0 on phase {p}")

    for ld in feeder.loads:
        on_bus(ld.id, ld.bus, ld.phases)
        if not all(math.isfinite(v) for v in (*ld.p.values(), *ld.q.values())):
            out.append(f"{ld.id}: demands finite")
    for tr in feeder.transformers:
        on_bus(tr.id, tr.bus, tr.phases)
        if any(v < 0 for v in tr.no_load_loss.values()):
            out.append(f"{tr.id}: L_T >= 0")
    for cap in feeder.capacitors:
        on_bus(cap.id, cap.bus, cap.phases)
        if any(v < 0 for v in cap.q_max.values()):
            out.append(f"{cap.id}: Q_C_max >= 0")
    for pv in feeder.pvs:
        on_bus(pv.id, pv.bus, pv.phases)
        for p in pv.phases:
            s = pv.s_rating.get(p, 0.0)
            pav = pv.p_available.get(p, 0.0)
            if pav < 0:
                out.append(f"{pv.id}: P_av >= 0 on phase {p}")
            if pav > s:
                out.append(f"{pv.id}: P_av ≤ S on phase {p}")
            if pv.droop is not None:
                ds = pv.droop.get(p)
                if ds is None:
                    out.append(f"{pv.id}: droop settings on phase {p}")
                    continue
                out += [f"{pv.id}: {msg} on phase {p}" for msg in ds.problems()]
                if ds.q_max > s:
                    out.append(f"{pv.id}: q_max ≤ S on phase {p}")
    for der in feeder.ders:
        on_bus(der.id, der.bus, der.phases)
        for p in der.phases:
            if der.p_max.get(p, 0.0) < 0 or der.q_max.get(p, 0.0) < 0:
                out.append(f"{der.id}: P_max >= 0 and Q_max >= 0 on phase {p}")
    if len(feeder.substations) != 1:
        out.append(f"{feeder.name}: exactly one substation")
    for sub in feeder.substations:
        on_bus(sub.id, sub.bus, sub.phases)
        if sub.bus in buses and set(sub.phases) != set(buses[sub.bus].phases):
            out.append(f"{sub.id}: slack voltage on every bus phase")
        for p, v in sub.v_slack.items():
            if not 0.9 <= v <= 1.1:
                out.append(f"{sub.id}: slack magnitude in [0.9, 1.1] on phase {p}")
    if not _connected(feeder):
        out.append(f"{feeder.name}: connected")
    return out
