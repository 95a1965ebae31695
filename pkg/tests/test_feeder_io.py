import json

import pytest
from hypothesis import given, settings, strategies as st

from feederopt.feeder_io import (
    FeederFormatError,
    check_radial,
    from_per_unit,
    load_feeder_document,
    parse_feeder,
    serialize_feeder,
    to_per_unit,
)

from builders import bus, feeder, line, substation
from conftest import BUNDLED, feeder_path


def minimal(**extra):
    doc = {
        "schema_version": 1,
        "name": "mini",
        "base": {"s_base_va": 1e6},
        "buses": [{"id": "B1", "phases": ["a"], "kv_base": 2.4018},
                  {"id": "B2", "phases": ["a"], "kv_base": 2.4018}],
        "lines": [{"id": "L1", "from": "B1", "to": "B2", "phases": ["a"],
                   "z": [[[0.0577, 0.1154]]], "ampacity": {"a": 400.0}}],
        "loads": [{"id": "D2", "bus": "B2", "p": {"a": 100.0}, "q": {"a": 40.0}}],
        "substations": [{"id": "S", "bus": "B1", "v_slack": {"a": 1.0}, "price": 50.0}],
    }
    doc.update(extra)
    return doc


def close(a, b, rel=1e-12):
    """Recursive comparison of parsed documents with a relative tolerance."""
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(close(a[k], b[k], rel) for k in a)
    if isinstance(a, list):
        return len(a) == len(b) and all(close(x, y, rel) for x, y in zip(a, b))
    if isinstance(a, (int, float, complex)) and not isinstance(a, bool):
        return abs(a - b) <= rel * max(abs(a), abs(b)) + 1e-300
    return a == b


def test_minimal_document():
    doc = parse_feeder(json.dumps(minimal()))
    assert (len(doc.buses), len(doc.lines)) == (2, 1)
    assert doc.lines[0]["y"] == [[0j]]


def test_unresolved_reference():
    d = minimal()
    d["lines"][0]["to"] = "B9"
    with pytest.raises(FeederFormatError, match="unresolved reference B9"):
        parse_feeder(json.dumps(d))


def test_lower_triangle_is_mirrored():
    d = minimal()
    for b in d["buses"]:
        b["phases"] = ["a", "b"]
    d["lines"][0].update(phases=["a", "b"], ampacity={"a": 400.0, "b": 400.0},
                         z=[[[0.3, 1.0]], [[0.1, 0.5], [0.3, 1.0]]])
    d["substations"][0]["v_slack"] = {"a": 1.0, "b": 1.0}
    z = parse_feeder(json.dumps(d)).lines[0]["z"]
    assert z[0][1] == z[1][0] == 0.1 + 0.5j


def test_hand_computed_per_unit():
    f = to_per_unit(parse_feeder(json.dumps(minimal())))
    # Z_base = 2.4018**2 * 1e6 / 1e6 ohm
    assert f.lines[0].z[0, 0].real == pytest.approx(0.0100, abs=5e-6)
    assert f.loads[0].p["a"] == pytest.approx(0.1)
    assert f.lines[0].ampacity["a"] == pytest.approx(400.0 / (1e6 / 2401.8))


def test_per_unit_records_unchanged():
    d = minimal()
    d["lines"][0].update(per_unit=True, z=[[[0.01, 0.02]]], ampacity={"a": 1.5})
    d["loads"][0].update(per_unit=True, p={"a": 0.2}, q={"a": 0.1})
    f = to_per_unit(parse_feeder(json.dumps(d)))
    assert f.lines[0].z[0, 0] == 0.01 + 0.02j
    assert f.lines[0].ampacity["a"] == 1.5
    assert f.loads[0].p["a"] == 0.2


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d.update(schema_version=2), "unsupported schema_version"),
    (lambda d: d["buses"][0].update(colour="red"), "unknown field 'colour'"),
    (lambda d: d["lines"][0].update(phases=["a", "x"]), "phases must be"),
    (lambda d: d["loads"][0].update(p={"a": "big"}), r"loads\[0\].p.a"),
    (lambda d: d["buses"].append({"id": "B1", "phases": ["a"]}), "duplicate id B1"),
])
def test_schema_errors(mutate, message):
    d = minimal()
    mutate(d)
    with pytest.raises(FeederFormatError, match=message):
        parse_feeder(json.dumps(d))


def test_syntax_error_has_position():
    with pytest.raises(FeederFormatError, match="line 2 column"):
        parse_feeder('{"schema_version": 1,\n  "base": }')


def test_duplicate_keys_rejected():
    with pytest.raises(FeederFormatError, match="duplicate key"):
        parse_feeder('{"schema_version": 1, "schema_version": 1, "base": {"s_base_va": 1}}')


def test_lenient_drops_unknown_fields():
    d = minimal()
    d["buses"][0]["colour"] = "red"
    doc = parse_feeder(json.dumps(d), strict=False)
    assert "colour" not in doc.buses[0]


@pytest.mark.parametrize("name", BUNDLED)
def test_serialise_round_trip(name):
    doc = load_feeder_document(feeder_path(name))
    again = parse_feeder(serialize_feeder(doc))
    assert again == doc


@pytest.mark.parametrize("name", BUNDLED)
def test_per_unit_round_trip(name):
    doc = load_feeder_document(feeder_path(name))
    back = from_per_unit(to_per_unit(doc))
    for section in ("buses", "loads", "pvs", "ders", "capacitors", "transformers"):
        assert close(getattr(back, section), getattr(doc, section)), section
    for a, b in zip(back.lines, doc.lines):
        assert close(a, b)


@settings(max_examples=40, deadline=None)
@given(kv=st.floats(0.1, 50.0), r=st.floats(1e-4, 10.0), x=st.floats(1e-4, 10.0),
       kw=st.floats(0.0, 5e3))
def test_per_unit_inverse_property(kv, r, x, kw):
    d = minimal()
    for b in d["buses"]:
        b["kv_base"] = kv
    d["lines"][0]["z"] = [[[r, x]]]
    d["loads"][0]["p"] = {"a": kw}
    doc = parse_feeder(json.dumps(d))
    back = from_per_unit(to_per_unit(doc))
    assert close(back.lines[0]["z"], doc.lines[0]["z"])
    assert close(back.loads[0]["p"], doc.loads[0]["p"])


def test_check_radial_chain_order():
    f = feeder([bus(b) for b in "1234"],
               [line("L23", "2", "3", 0.01j), line("L12", "1", "2", 0.01j), line("L34", "3", "4", 0.01j)],
               substations=[substation("1")])
    ok, order = check_radial(f)
    assert ok and order.order == ("1", "2", "3", "4")
    parent, ln, sign = order.parent_line["3"]
    assert (parent, ln.id, sign) == ("2", "L23", 1)


def test_check_radial_loop():
    f = feeder([bus(b) for b in "1234"],
               [line(f"L{a}{b}", a, b, 0.01j) for a, b in ("12", "23", "34", "41")],
               substations=[substation("1")])
    assert check_radial(f) == (False, None)


def test_check_radial_disconnected():
    f = feeder([bus(b) for b in "1234"], [line("L12", "1", "2", 0.01j), line("L34", "3", "4", 0.01j)],
               substations=[substation("1")])
    with pytest.raises(ValueError, match="disconnected"):
        check_radial(f)


def test_bundled_ieee13_shape():
    doc = load_feeder_document(feeder_path("feeder_unbalanced_13"))
    phases = {b["id"]: "".join(b["phases"]) for b in doc.buses}
    assert len(doc.buses) == 12
    assert phases["611"] == "c" and phases["652"] == "a" and phases["684"] == "ac"
    # config 601, 2000 ft: Z_aa = 0.3465 + 1.0179j ohm/mile
    l632 = next(ln for ln in doc.lines if ln["id"] == "L650_632")
    assert l632["z"][0][0] == pytest.approx((0.3465 + 1.0179j) * 2000 / 5280)
