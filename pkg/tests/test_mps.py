from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from feederopt.milp import BINARY, CONTINUOUS, EQ, GE, LE, MathProgram, export_mps, parse_mps, write_mps
from feederopt.milp.mps import MpsError, programs_equal
from feederopt.opf import DROOP, NODROOP, OperatingPoint, build_program

from conftest import IEEE13, SMOKE, bundled

GOLDEN = Path(__file__).parent / "golden"


def test_empty_program():
    assert export_mps(MathProgram()) == (
        "NAME          model\nROWS\n N  OBJ\nCOLUMNS\nRHS\nBOUNDS\nENDATA\n"
    )
    assert programs_equal(parse_mps(export_mps(MathProgram())), MathProgram())


def one_var():
    p = MathProgram(name="tiny")
    x = p.add_var("x", 0.0, 4.0)
    p.add_constraint({x: 2.0}, LE, 3.0, "cap")
    p.set_objective({x: -1.0})
    return p


def test_one_variable_golden():
    assert export_mps(one_var()) == (GOLDEN / "one_var.mps").read_text()


def test_fixed_columns():
    text = export_mps(one_var())
    # fields start at columns 2, 5, 15 and 25
    assert " L  cap" in text.splitlines()
    assert "    x         cap       2.0" in text.splitlines()
    assert " UP BND       x         4.0" in text.splitlines()


def smoke_program(mode):
    f = bundled(SMOKE)
    return build_program(f, OperatingPoint.flat(f), mode, 12)[0]


def test_smoke_golden():
    # frozen from the first build; its optimum was confirmed with an external reader
    assert export_mps(smoke_program(DROOP)) == (GOLDEN / "smoke_droop.mps").read_text()


def test_markers_only_with_binaries():
    droop = export_mps(smoke_program(DROOP))
    assert "'MARKER'                 'INTORG'" in droop
    assert droop.count("'INTEND'") == 1
    assert "MARKER" not in export_mps(smoke_program(NODROOP))


@pytest.mark.parametrize("name", [SMOKE, IEEE13])
@pytest.mark.parametrize("mode", [DROOP, NODROOP])
def test_feeder_programs_round_trip(name, mode, tmp_path):
    f = bundled(name)
    prog = build_program(f, OperatingPoint.flat(f), mode, 12)[0]
    write_mps(prog, tmp_path / "m.mps")
    assert programs_equal(parse_mps((tmp_path / "m.mps").read_text()), prog)


def test_long_and_clashing_names_are_mangled():
    p = MathProgram()
    a = p.add_var("C0000001", 0, 1)
    b = p.add_var("a name", 0, 1)
    c = p.add_var("x", 0, 1)
    p.add_constraint({a: 1, b: 1, c: 1}, GE, 1, "OBJ")
    text = export_mps(p)
    assert "* NAMEMAP C0000001 C0000001" in text
    assert "* NAMEMAP C0000002 a name" in text
    assert "* NAMEMAP R0000001 OBJ" in text
    assert programs_equal(parse_mps(text), p)


def test_unknown_row_rejected():
    text = export_mps(one_var()).replace("    x         cap", "    x         nope")
    with pytest.raises(MpsError, match="unknown row"):
        parse_mps(text)


names = st.text(st.characters(min_codepoint=33, max_codepoint=126), min_size=1, max_size=12)
values = st.floats(-1e6, 1e6, allow_nan=False).filter(lambda v: v != 0.0)


@st.composite
def programs(draw):
    p = MathProgram(name="p")
    used = set()
    for j in range(draw(st.integers(0, 6))):
        name = draw(names.filter(lambda s: s not in used))
        used.add(name)
        if draw(st.booleans()):
            p.add_var(name, 0, 1, BINARY)
        else:
            lo = draw(st.floats(-1e3, 1e3))
            p.add_var(name, lo, lo + draw(st.floats(0, 1e3)), CONTINUOUS)
    n = p.num_vars
    for i in range(draw(st.integers(0, 5))):
        row = draw(st.dictionaries(st.integers(0, n - 1), values, max_size=n)) if n else {}
        p.add_constraint(row, draw(st.sampled_from([LE, GE, EQ])), draw(st.floats(-1e3, 1e3)),
                         draw(names))
    if n:
        p.set_objective(draw(st.dictionaries(st.integers(0, n - 1), values, max_size=n)))
    return p


@settings(max_examples=150, deadline=None)
@given(programs())
def test_round_trip_property(p):
    assert programs_equal(parse_mps(export_mps(p)), p)


def test_marker_row_name_is_mangled():
    p = MathProgram()
    x = p.add_var("x", 0, 1)
    p.add_constraint({x: 1}, LE, 1, "'MARKER'")
    assert programs_equal(parse_mps(export_mps(p)), p)
