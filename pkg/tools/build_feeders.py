"""Regenerate the bundled feeder files under src/feederopt/data.

Line constants, lengths, spot loads and capacitor banks follow the public IEEE
13-node test feeder.  Simplifications (all listed in the decisions notes):
the regulator is dropped and the slack magnitude set per scenario, switch
671-692 is closed and its two buses merged, delta loads are split across the
phases they span, the distributed 632-671 load is lumped half at each end,
and XFM-1 is a per-unit series branch.  PV, DER, price and core-loss figures
are scenario data.  Reactive sources are sized below the reactive demand at
their own bus so that full injection is loss-optimal, and DERs are active-only.

    python tools/build_feeders.py
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "feederopt" / "data"
MILE_FT = 5280.0
S_BASE = 1.0e6
KV_LN = 4.16 / 3**0.5
KV_LV = 0.48 / 3**0.5

# ohm/mile and uS/mile, phase order of the configuration
CONFIGS = {
    "601": ("abc",
            [[0.3465 + 1.0179j, 0.1560 + 0.5017j, 0.1580 + 0.4236j],
             [0.1560 + 0.5017j, 0.3375 + 1.0478j, 0.1535 + 0.3849j],
             [0.1580 + 0.4236j, 0.1535 + 0.3849j, 0.3414 + 1.0348j]],
            [[6.2998, -1.9958, -1.2595], [-1.9958, 5.9597, -0.7417], [-1.2595, -0.7417, 5.6386]],
            730.0),
    "602": ("abc",
            [[0.7526 + 1.1814j, 0.1580 + 0.4236j, 0.1560 + 0.5017j],
             [0.1580 + 0.4236j, 0.7475 + 1.1983j, 0.1535 + 0.3849j],
             [0.1560 + 0.5017j, 0.1535 + 0.3849j, 0.7436 + 1.2112j]],
            [[5.6990, -1.0817, -1.6905], [-1.0817, 5.1795, -0.6588], [-1.6905, -0.6588, 5.4246]],
            340.0),
    "603": ("bc",
            [[1.3294 + 1.3471j, 0.2066 + 0.4591j], [0.2066 + 0.4591j, 1.3238 + 1.3569j]],
            [[4.7097, -0.8999], [-0.8999, 4.6658]],
            230.0),
    "604": ("ac",
            [[1.3238 + 1.3569j, 0.2066 + 0.4591j], [0.2066 + 0.4591j, 1.3294 + 1.3471j]],
            [[4.6658, -0.8999], [-0.8999, 4.7097]],
            230.0),
    "605": ("c", [[1.3292 + 1.3475j]], [[4.5193]], 230.0),
    "606": ("abc",
            [[0.7982 + 0.4463j, 0.3192 + 0.0328j, 0.2849 - 0.0143j],
             [0.3192 + 0.0328j, 0.7891 + 0.4041j, 0.3192 + 0.0328j],
             [0.2849 - 0.0143j, 0.3192 + 0.0328j, 0.7982 + 0.4463j]],
            [[96.8897, 0.0, 0.0], [0.0, 96.8897, 0.0], [0.0, 0.0, 96.8897]],
            260.0),
    "607": ("a", [[1.3425 + 0.5124j]], [[88.9912]], 165.0),
}

IEEE13_BUSES = {
    "650": "abc", "632": "abc", "633": "abc", "634": "abc", "645": "bc", "646": "bc",
    "671": "abc", "675": "abc", "680": "abc", "684": "ac", "611": "c", "652": "a",
}
IEEE13_LINES = [  # from, to, feet, config
    ("650", "632", 2000, "601"),
    ("632", "633", 500, "602"),
    ("632", "645", 500, "603"),
    ("645", "646", 300, "603"),
    ("632", "671", 2000, "601"),
    ("671", "680", 1000, "601"),
    ("671", "684", 300, "604"),
    ("684", "611", 300, "605"),
    ("684", "652", 800, "607"),
    ("671", "675", 500, "606"),
]
# kW, kvar per phase
IEEE13_LOADS = {
    "634": {"a": (160, 110), "b": (120, 90), "c": (120, 90)},
    "645": {"b": (170, 125)},
    "646": {"b": (115, 66), "c": (115, 66)},
    "652": {"a": (128, 86)},
    "671": {"a": (385 + 8.5, 220 + 5), "b": (385 + 33, 220 + 19), "c": (385 + 170 + 58.5, 220 + 151 + 34)},
    "675": {"a": (485, 190), "b": (68, 60), "c": (290, 212)},
    "611": {"c": (170, 80)},
    "632": {"a": (8.5, 5), "b": (33, 19), "c": (58.5, 34)},
}
# the public feeder's banks trimmed below local demand
IEEE13_CAPS = {"675": {"a": 120, "c": 150}, "611": {"c": 40}}
# XFM-1: 500 kVA, 4.16/0.48 kV, R = 1.1 %, X = 2 % on its own base
XFM_RATING_KVA = 500.0
XFM_Z_PCT = 0.011 + 0.02j


def _cplx(z):
    return [z.real, z.imag]


def _pick(matrix, cfg_phases, phases):
    idx = [cfg_phases.index(p) for p in phases]
    return [[matrix[i][j] for j in idx] for i in idx]


def overhead_line(lid, frm, to, feet, cfg):
    phases, z, y, amp = CONFIGS[cfg]
    miles = feet / MILE_FT
    return {
        "id": lid, "from": frm, "to": to, "phases": list(phases),
        "z": [[_cplx(v * miles) for v in row] for row in z],
        "y": [[[0.0, v * 1e-6 * miles] for v in row] for row in y],
        "ampacity": {p: amp for p in phases},
    }


def per_phase(phases, value):
    return {p: value for p in phases}


def droop(q_max, phases):
    return {p: {"q_max": q_max} for p in phases}


def pv(pid, bus, phases, s_kva, p_kw, price, q_frac=None):
    rec = {"id": pid, "bus": bus, "phases": list(phases),
           "s_rating": per_phase(phases, s_kva), "p_available": per_phase(phases, p_kw),
           "price": price}
    if q_frac is not None:
        rec["droop"] = droop(q_frac * s_kva * 1e3 / S_BASE, phases)
    return rec


PV_KVA = {"675": 160.0, "611": 70.0, "652": 70.0, "634": 50.0}


def ieee13(slack, load_scale=1.0, pv_kw=None, pv_kva=None, caps=None, name="feeder_unbalanced_13"):
    buses = [{"id": b, "phases": list(ph), "kv_base": KV_LV if b == "634" else KV_LN}
             for b, ph in IEEE13_BUSES.items()]
    lines = [overhead_line(f"L{f}_{t}", f, t, ft, cfg) for f, t, ft, cfg in IEEE13_LINES]
    # transformer as a per-unit series branch; rating on a per-phase base
    z_pu = XFM_Z_PCT * (S_BASE / 1e3) / (XFM_RATING_KVA / 3)
    i_rated = (XFM_RATING_KVA / 3) / (S_BASE / 1e3)
    lines.append({
        "id": "XFM1", "from": "633", "to": "634", "phases": list("abc"), "per_unit": True,
        "z": [[_cplx(z_pu if i == j else 0j) for j in range(3)] for i in range(3)],
        "ampacity": per_phase("abc", 1.5 * i_rated),
    })
    loads = [{"id": f"D{b}", "bus": b,
              "p": {p: kw * load_scale for p, (kw, _) in ph.items()},
              "q": {p: kvar * load_scale for p, (_, kvar) in ph.items()}}
             for b, ph in IEEE13_LOADS.items()]
    caps = [{"id": f"C{b}", "bus": b, "q_max": dict(q)} for b, q in (caps or {}).items()]
    pv_kw = pv_kw or {"675": 150.0, "611": 60.0, "652": 60.0, "634": 40.0}
    kva = pv_kva or PV_KVA
    pvs = [
        pv("PV675", "675", "abc", kva["675"], pv_kw["675"], 10.0, q_frac=0.44),
        pv("PV611", "611", "c", kva["611"], pv_kw["611"], 10.0, q_frac=0.44),
        pv("PV652", "652", "a", kva["652"], pv_kw["652"], 10.0, q_frac=0.44),
        pv("PV634", "634", "abc", kva["634"], pv_kw["634"], 10.0),
    ]
    return {
        "schema_version": 1,
        "name": name,
        "base": {"s_base_va": S_BASE},
        "buses": buses,
        "lines": lines,
        "loads": loads,
        "transformers": [{"id": "T633", "bus": "633", "no_load_loss": per_phase("abc", 0.4)}],
        "capacitors": caps,
        "pvs": pvs,
        "ders": [{"id": "G671", "bus": "671", "phases": list("abc"),
                  "p_max": per_phase("abc", 100.0), "q_max": per_phase("abc", 0.0), "price": 70.0}],
        "substations": [{"id": "SUB", "bus": "650", "v_slack": per_phase("abc", slack), "price": 50.0}],
    }


def smoke():
    buses = [{"id": b, "phases": list("abc"), "kv_base": KV_LN} for b in ("s1", "n2", "n3", "n4")]
    lines = [
        overhead_line("L12", "s1", "n2", 2000, "601"),
        overhead_line("L23", "n2", "n3", 1500, "602"),
        overhead_line("L34", "n3", "n4", 1000, "602"),
    ]
    loads = [
        {"id": "D2", "bus": "n2", "p": {"a": 100, "b": 80, "c": 120}, "q": {"a": 50, "b": 40, "c": 60}},
        {"id": "D3", "bus": "n3", "p": {"a": 150, "b": 100, "c": 50}, "q": {"a": 80, "b": 50, "c": 30}},
        {"id": "D4", "bus": "n4", "p": {"a": 120, "b": 150, "c": 90}, "q": {"a": 60, "b": 70, "c": 45}},
    ]
    return {
        "schema_version": 1,
        "name": "feeder_smoke_4bus",
        "base": {"s_base_va": S_BASE},
        "buses": buses,
        "lines": lines,
        "loads": loads,
        "transformers": [{"id": "T2", "bus": "n2", "no_load_loss": per_phase("abc", 0.5)}],
        "capacitors": [{"id": "C3", "bus": "n3", "q_max": per_phase("abc", 40.0)}],
        "pvs": [
            pv("PV4", "n4", "ab", 110.0, 100.0, 10.0, q_frac=0.44),
            pv("PV3", "n3", "c", 60.0, 50.0, 10.0),
        ],
        "ders": [{"id": "G2", "bus": "n2", "phases": list("abc"),
                  "p_max": per_phase("abc", 50.0), "q_max": per_phase("abc", 0.0), "price": 70.0}],
        "substations": [{"id": "SUB", "bus": "s1", "v_slack": per_phase("abc", 1.02), "price": 50.0}],
    }


SCENARIOS = {
    "feeder_smoke_4bus": smoke(),
    # base case without switched banks: every reactive set point is then
    # fixed by a droop curve or absent
    "feeder_unbalanced_13": ieee13(slack=1.05, load_scale=0.8),
    "feeder_unbalanced_13_highload": ieee13(
        slack=1.05, load_scale=1.08, caps=IEEE13_CAPS, name="feeder_unbalanced_13_highload"
    ),
    # light load, large PV: the zero-Q power flow leaves the voltage window
    "feeder_unbalanced_13_highpv": ieee13(
        slack=1.04, load_scale=0.3, name="feeder_unbalanced_13_highpv",
        pv_kw={"675": 840.0, "611": 330.0, "652": 330.0, "634": 45.0},
        pv_kva={"675": 900.0, "611": 350.0, "652": 350.0, "634": 50.0},
    ),
}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, doc in SCENARIOS.items():
        path = OUT / f"{name}.feeder.json"
        path.write_text(json.dumps(copy.deepcopy(doc), indent=1) + "\n")
        print("wrote", path)


if __name__ == "__main__":
    main()
