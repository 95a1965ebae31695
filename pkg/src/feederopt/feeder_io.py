"""Reading, writing and per-unit conversion of ``.feeder.json`` documents.

Physical units in records that are not flagged ``"per_unit": true``:
impedance in ohm, admittance in siemens, ampacity in A, power in kW / kvar /
kVA.  Droop settings, slack voltages and prices are always per unit.
"""

from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import (
    PHASES,
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
    sort_phases,
)

log = logging.getLogger(__name__)

SUPPORTED_SCHEMA_VERSIONS = (1,)
SECTIONS = ("buses", "lines", "loads", "transformers", "capacitors", "pvs", "ders", "substations")
DROOP_DEFAULTS = {"v1": 0.94, "v2": 0.98, "v3": 1.02, "v4": 1.06}

_FIELDS = {
    "top": ({"schema_version", "base"}, {"name", *SECTIONS}),
    "base": ({"s_base_va"}, {"default_kv"}),
    "buses": ({"id", "phases"}, {"kv_base"}),
    "lines": ({"id", "from", "to", "phases", "z", "ampacity"}, {"y", "per_unit"}),
    "loads": ({"id", "bus", "p"}, {"q", "per_unit"}),
    "transformers": ({"id", "bus", "no_load_loss"}, {"per_unit"}),
    "capacitors": ({"id", "bus", "q_max"}, {"per_unit"}),
    "pvs": ({"id", "bus", "phases", "s_rating", "p_available"}, {"price", "droop", "per_unit"}),
    "ders": ({"id", "bus", "phases", "p_max", "q_max"}, {"price", "per_unit"}),
    "substations": (
        {"id", "bus", "v_slack"},
        {"price", "p_min", "p_max", "q_min", "q_max", "per_unit"},
    ),
    "droop": ({"q_max"}, {"v1", "v2", "v3", "v4"}),
}
_POWER_FIELDS = {
    "loads": ("p", "q"),
    "transformers": ("no_load_loss",),
    "capacitors": ("q_max",),
    "pvs": ("s_rating", "p_available"),
    "ders": ("p_max", "q_max"),
    "substations": ("p_min", "p_max", "q_min", "q_max"),
}


class FeederFormatError(ValueError):
    """Invalid feeder document; the message carries the position or JSON path."""


@dataclass
class FeederDocument:
    """Parsed, normalised document: full matrices as complex, per-phase dicts."""

    schema_version: int
    base: dict
    name: str = "feeder"
    buses: list[dict] = field(default_factory=list)
    lines: list[dict] = field(default_factory=list)
    loads: list[dict] = field(default_factory=list)
    transformers: list[dict] = field(default_factory=list)
    capacitors: list[dict] = field(default_factory=list)
    pvs: list[dict] = field(default_factory=list)
    ders: list[dict] = field(default_factory=list)
    substations: list[dict] = field(default_factory=list)


# ----------------------------------------------------------------------
# parsing
def _no_duplicate_keys(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise FeederFormatError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _check_fields(rec, kind, where, strict):
    if not isinstance(rec, dict):
        raise FeederFormatError(f"{where}: expected an object")
    required, optional = _FIELDS[kind]
    missing = required - rec.keys()
    if missing:
        raise FeederFormatError(f"{where}: missing field(s) {sorted(missing)}")
    unknown = rec.keys() - required - optional
    for key in sorted(unknown):
        if strict:
            raise FeederFormatError(f"{where}: unknown field {key!r}")
        log.warning("%s: ignoring unknown field %r", where, key)
        rec = {k: v for k, v in rec.items() if k != key}
    return rec


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise FeederFormatError(f"{where}: expected a finite number, got {v!r}")
    return float(v)


def _phases(v, where):
    if not isinstance(v, list) or not v or any(p not in PHASES for p in v) or len(set(v)) != len(v):
        raise FeederFormatError(f"{where}: phases must be a nonempty list drawn from a, b, c")
    return list(sort_phases(v))


def _per_phase(v, where):
    if not isinstance(v, dict) or any(p not in PHASES for p in v):
        raise FeederFormatError(f"{where}: expected an object keyed by phase")
    return {p: _number(v[p], f"{where}.{p}") for p in sort_phases(v)}


def _complex(v, where):
    if not isinstance(v, list) or len(v) != 2:
        raise FeederFormatError(f"{where}: complex numbers are [re, im] pairs")
    return complex(_number(v[0], where), _number(v[1], where))


def _matrix(v, k, where):
    """Full k x k matrix or its lower triangle, mirrored to full."""
    if not isinstance(v, list) or len(v) != k:
        raise FeederFormatError(f"{where}: expected {k} rows")
    lens = [len(r) if isinstance(r, list) else -1 for r in v]
    out = [[0j] * k for _ in range(k)]
    if lens == list(range(1, k + 1)) and k > 1:
        for i in range(k):
            for j in range(i + 1):
                out[i][j] = out[j][i] = _complex(v[i][j], f"{where}[{i}][{j}]")
    elif lens == [k] * k:
        for i in range(k):
            for j in range(k):
                out[i][j] = _complex(v[i][j], f"{where}[{i}][{j}]")
    else:
        raise FeederFormatError(f"{where}: rows must form a full or lower-triangular matrix")
    return out


def _droop(v, phases, where, strict):
    if not isinstance(v, dict) or any(p not in phases for p in v):
        raise FeederFormatError(f"{where}: droop settings keyed by the unit's phases")
    out = {}
    for p in sort_phases(v):
        rec = _check_fields(v[p], "droop", f"{where}.{p}", strict)
        s = {k: _number(rec.get(k, d), f"{where}.{p}.{k}") for k, d in DROOP_DEFAULTS.items()}
        s["q_max"] = _number(rec["q_max"], f"{where}.{p}.q_max")
        out[p] = s
    return out


def _record(kind, rec, where, strict):
    rec = _check_fields(rec, kind, where, strict)
    out = {"id": rec["id"]}
    if not isinstance(rec["id"], str) or not rec["id"]:
        raise FeederFormatError(f"{where}.id: expected a nonempty string")
    if kind == "buses":
        out["phases"] = _phases(rec["phases"], f"{where}.phases")
        if "kv_base" in rec:
            out["kv_base"] = _number(rec["kv_base"], f"{where}.kv_base")
        return out
    if "per_unit" in rec:
        if not isinstance(rec["per_unit"], bool):
            raise FeederFormatError(f"{where}.per_unit: expected true/false")
        out["per_unit"] = rec["per_unit"]
    else:
        out["per_unit"] = False
    if kind == "lines":
        out["from"], out["to"] = rec["from"], rec["to"]
        ph = out["phases"] = _phases(rec["phases"], f"{where}.phases")
        k = len(ph)
        out["z"] = _matrix(rec["z"], k, f"{where}.z")
        out["y"] = _matrix(rec["y"], k, f"{where}.y") if "y" in rec else [[0j] * k for _ in range(k)]
        out["ampacity"] = _per_phase(rec["ampacity"], f"{where}.ampacity")
        return out
    out["bus"] = rec["bus"]
    if "phases" in rec:
        out["phases"] = _phases(rec["phases"], f"{where}.phases")
    for key in ("price",):
        if key in _FIELDS[kind][1]:
            out[key] = _number(rec.get(key, 0.0), f"{where}.{key}")
    for key in _POWER_FIELDS.get(kind, ()):
        if key in rec:
            out[key] = _per_phase(rec[key], f"{where}.{key}")
    if kind == "loads":
        out.setdefault("q", {})
    if kind == "substations":
        out["v_slack"] = _per_phase(rec["v_slack"], f"{where}.v_slack")
    if kind == "pvs" and "droop" in rec and rec["droop"] is not None:
        out["droop"] = _droop(rec["droop"], out["phases"], f"{where}.droop", strict)
    return out


def parse_feeder(text: str, strict: bool = True) -> FeederDocument:
    """Parse a feeder document.

    Syntax errors report line and column; schema errors report the JSON path
    of the offending value.  With ``strict=False`` unknown fields are logged
    and dropped instead of rejected.
    """
    try:
        raw = json.loads(text, object_pairs_hook=_no_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise FeederFormatError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    raw = _check_fields(raw, "top", "document", strict)
    version = raw["schema_version"]
    if version not in SUPPORTED_SCHEMA_VERSIONS or isinstance(version, bool):
        raise FeederFormatError(f"unsupported schema_version {version!r}")
    base = _check_fields(raw["base"], "base", "base", strict)
    doc = FeederDocument(
        schema_version=version,
        base={k: _number(v, f"base.{k}") for k, v in base.items()},
        name=str(raw.get("name", "feeder")),
    )
    for section in SECTIONS:
        items = raw.get(section, [])
        if not isinstance(items, list):
            raise FeederFormatError(f"{section}: expected an array")
        getattr(doc, section).extend(
            _record(section, rec, f"{section}[{i}]", strict) for i, rec in enumerate(items)
        )
    _check_references(doc)
    return doc


def _check_references(doc: FeederDocument) -> None:
    seen = set()
    for section in SECTIONS:
        for rec in getattr(doc, section):
            if rec["id"] in seen:
                raise FeederFormatError(f"duplicate id {rec['id']}")
            seen.add(rec["id"])
    buses = {b["id"] for b in doc.buses}
    for section in SECTIONS[1:]:
        for rec in getattr(doc, section):
            for key in ("from", "to", "bus"):
                if key in rec and rec[key] not in buses:
                    raise FeederFormatError(f"unresolved reference {rec[key]}")


def load_feeder_document(path: str | Path, strict: bool = True) -> FeederDocument:
    return parse_feeder(Path(path).read_text(encoding="utf-8"), strict=strict)


def load_feeder(path: str | Path, strict: bool = True) -> FeederModel:
    return to_per_unit(load_feeder_document(path, strict=strict))


# ----------------------------------------------------------------------
# serialisation
def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    return v


def serialize_feeder(doc: FeederDocument) -> str:
    out = {"schema_version": doc.schema_version, "name": doc.name, "base": dict(doc.base)}
    for section in SECTIONS:
        out[section] = [_jsonable(rec) for rec in getattr(doc, section)]
    return json.dumps(out, indent=1) + "\n"


# ----------------------------------------------------------------------
# per-unit conversion
@dataclass(frozen=True)
class _Bases:
    s_base_va: float
    kv: float

    @property
    def z(self) -> float:
        return self.kv**2 * 1e6 / self.s_base_va

    @property
    def i(self) -> float:
        return self.s_base_va / (self.kv * 1e3)

    @property
    def power_kw(self) -> float:
        return self.s_base_va / 1e3


def _bus_kv(doc: FeederDocument) -> dict[str, float]:
    default = doc.base.get("default_kv")
    out = {}
    for b in doc.buses:
        kv = b.get("kv_base", default)
        if kv is None or not kv > 0:
            raise FeederFormatError(f"bus {b['id']}: kv_base must be positive")
        out[b["id"]] = kv
    return out


def _scaled(values: dict, factor: float) -> dict:
    return {p: v * factor for p, v in values.items()}


def to_per_unit(doc: FeederDocument) -> FeederModel:
    """Convert a parsed document into a per-unit :class:`FeederModel`."""
    s_base = doc.base["s_base_va"]
    if not s_base > 0:
        raise FeederFormatError("base.s_base_va must be positive")
    kv = _bus_kv(doc)
    buses = tuple(Bus(b["id"], tuple(b["phases"]), kv[b["id"]]) for b in doc.buses)

    def bases(bus):
        return _Bases(s_base, kv[bus])

    lines = []
    for rec in doc.lines:
        z = np.array(rec["z"], dtype=complex)
        y = np.array(rec["y"], dtype=complex)
        amp = dict(rec["ampacity"])
        if not rec["per_unit"]:
            if kv[rec["from"]] != kv[rec["to"]]:
                raise FeederFormatError(
                    f"line {rec['id']} spans two voltage bases; give it in per unit"
                )
            bb = bases(rec["from"])
            z, y, amp = z / bb.z, y * bb.z, _scaled(amp, 1.0 / bb.i)
        lines.append(Line(rec["id"], rec["from"], rec["to"], tuple(rec["phases"]), z, y, amp))

    def powers(rec, kind):
        factor = 1.0 if rec["per_unit"] else 1.0 / bases(rec["bus"]).power_kw
        return {k: _scaled(rec[k], factor) for k in _POWER_FIELDS[kind] if k in rec}

    loads = tuple(Load(r["id"], r["bus"], **powers(r, "loads")) for r in doc.loads)
    transformers = tuple(
        Transformer(r["id"], r["bus"], **powers(r, "transformers")) for r in doc.transformers
    )
    capacitors = tuple(Capacitor(r["id"], r["bus"], **powers(r, "capacitors")) for r in doc.capacitors)
    pvs = []
    for r in doc.pvs:
        droop = None
        if "droop" in r:
            droop = {p: DroopSettings(**s) for p, s in r["droop"].items()}
        pvs.append(PvUnit(r["id"], r["bus"], tuple(r["phases"]), price=r["price"], droop=droop,
                          **powers(r, "pvs")))
    ders = tuple(
        DerUnit(r["id"], r["bus"], tuple(r["phases"]), price=r["price"], **powers(r, "ders"))
        for r in doc.ders
    )
    subs = tuple(
        Substation(r["id"], r["bus"], dict(r["v_slack"]), price=r["price"], **powers(r, "substations"))
        for r in doc.substations
    )
    return FeederModel(
        name=doc.name,
        s_base_va=s_base,
        buses=buses,
        lines=tuple(lines),
        loads=loads,
        transformers=transformers,
        capacitors=capacitors,
        pvs=tuple(pvs),
        ders=ders,
        substations=subs,
    )


def from_per_unit(feeder: FeederModel) -> FeederDocument:
    """Inverse of :func:`to_per_unit`: every record back in physical units.

    Lines joining buses of different voltage bases stay in per unit.
    """
    s_base = feeder.s_base_va
    kv = {b.id: b.kv_base for b in feeder.buses}
    doc = FeederDocument(1, {"s_base_va": s_base}, feeder.name)
    doc.buses = [{"id": b.id, "phases": list(b.phases), "kv_base": b.kv_base} for b in feeder.buses]
    for ln in feeder.lines:
        rec = {"id": ln.id, "per_unit": False, "from": ln.from_bus, "to": ln.to_bus,
               "phases": list(ln.phases)}
        if kv[ln.from_bus] != kv[ln.to_bus]:
            rec.update(per_unit=True, z=ln.z.tolist(), y=ln.y.tolist(), ampacity=dict(ln.ampacity))
        else:
            bb = _Bases(s_base, kv[ln.from_bus])
            rec.update(z=(ln.z * bb.z).tolist(), y=(ln.y / bb.z).tolist(),
                       ampacity=_scaled(ln.ampacity, bb.i))
        doc.lines.append(rec)

    def powers(dev, kind):
        factor = _Bases(s_base, kv[dev.bus]).power_kw
        return {k: _scaled(getattr(dev, k), factor) for k in _POWER_FIELDS[kind]
                if getattr(dev, k)}

    for ld in feeder.loads:
        doc.loads.append({"id": ld.id, "per_unit": False, "bus": ld.bus, **powers(ld, "loads")})
        doc.loads[-1].setdefault("q", {})
    for tr in feeder.transformers:
        doc.transformers.append({"id": tr.id, "per_unit": False, "bus": tr.bus,
                                 **powers(tr, "transformers")})
    for cap in feeder.capacitors:
        doc.capacitors.append({"id": cap.id, "per_unit": False, "bus": cap.bus,
                               **powers(cap, "capacitors")})
    for pv in feeder.pvs:
        rec = {"id": pv.id, "per_unit": False, "bus": pv.bus, "phases": list(pv.phases),
               "price": pv.price, **powers(pv, "pvs")}
        if pv.droop is not None:
            rec["droop"] = {
                p: {"v1": s.v1, "v2": s.v2, "v3": s.v3, "v4": s.v4, "q_max": s.q_max}
                for p, s in pv.droop.items()
            }
        doc.pvs.append(rec)
    for der in feeder.ders:
        doc.ders.append({"id": der.id, "per_unit": False, "bus": der.bus,
                         "phases": list(der.phases), "price": der.price, **powers(der, "ders")})
    for sub in feeder.substations:
        doc.substations.append({"id": sub.id, "per_unit": False, "bus": sub.bus,
                                "price": sub.price, **powers(sub, "substations"),
                                "v_slack": dict(sub.v_slack)})
    return doc


# ----------------------------------------------------------------------
# topology
@dataclass(frozen=True)
class RadialOrdering:
    """Breadth-first order from the substation bus with each bus's feeding line."""

    order: tuple[str, ...]
    parent_line: dict  # bus id -> (parent bus id, Line, +1 if line runs parent->child)


def check_radial(feeder: FeederModel) -> tuple[bool, RadialOrdering | None]:
    """``(True, ordering)`` for a tree rooted at the substation, else ``(False, None)``.

    Raises :class:`ValueError` when the feeder is disconnected.
    """
    root = feeder.substation.bus
    adj: dict[str, list] = {b.id: [] for b in feeder.buses}
    for ln in feeder.lines:
        adj[ln.from_bus].append((ln.to_bus, ln, +1))
        adj[ln.to_bus].append((ln.from_bus, ln, -1))
    order = [root]
    parent = {}
    seen = {root}
    todo = deque([root])
    while todo:
        u = todo.popleft()
        for v, ln, sign in adj[u]:
            if v not in seen:
                seen.add(v)
                parent[v] = (u, ln, sign)
                order.append(v)
                todo.append(v)
    if len(seen) != len(feeder.buses):
        raise ValueError(f"{feeder.name}: feeder is disconnected")
    if len(feeder.lines) != len(feeder.buses) - 1:
        return False, None
    return True, RadialOrdering(tuple(order), parent)
