import cmath

import numpy as np
import pytest
from hypothesis import given, strategies as st

from feederopt.network import (
    BIG_CAP,
    DroopSettings,
    attached_lines,
    slack_phasor,
    validate,
)

from builders import bus, droop_pv, feeder, line, load, plain_pv, substation, two_bus
from conftest import BUNDLED, bundled


def star():
    return feeder(
        [bus("1"), bus("2"), bus("3")],
        [line("L12", "1", "2", 0.01 + 0.02j), line("L13", "1", "3", 0.01 + 0.02j)],
        substations=[substation("1")],
    )


def test_attached_lines_orientation():
    f = two_bus()
    assert [(ln.id, s) for ln, s in attached_lines(f, "1")] == [("L12", 1)]
    assert [(ln.id, s) for ln, s in attached_lines(f, "2")] == [("L12", -1)]


def test_attached_lines_fan_out():
    assert [(ln.id, s) for ln, s in attached_lines(star(), "1")] == [("L12", 1), ("L13", 1)]


def test_attached_lines_unknown_bus():
    with pytest.raises(KeyError):
        attached_lines(star(), "9")


@pytest.mark.parametrize("name", BUNDLED)
def test_orientation_signs_cancel(name):
    f = bundled(name)
    total = {ln.id: 0 for ln in f.lines}
    for b in f.buses:
        for ln, s in attached_lines(f, b.id):
            total[ln.id] += s
    assert set(total.values()) == {0}


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_feeders_valid_and_symmetric(name):
    f = bundled(name)
    assert validate(f) == []
    for ln in f.lines:
        assert np.array_equal(ln.z, ln.z.T)
        assert ln.z.shape == (len(ln.phases),) * 2


def test_matrices_are_read_only():
    ln = two_bus().lines[0]
    with pytest.raises(ValueError):
        ln.z[0, 0] = 1.0


def test_validate_dead_band():
    pv = droop_pv("PV", "2", v2=1.0, v3=1.0)
    problems = validate(two_bus(pvs=[pv]))
    assert problems == ["PV: dead-band nonempty on phase a"]


def test_validate_available_above_rating():
    problems = validate(two_bus(pvs=[plain_pv("PV", "2", s=1.0, p=1.2)]))
    assert problems == ["PV: P_av ≤ S on phase a"]


def test_validate_collects_several():
    f = feeder([bus("1"), bus("2"), bus("3")], [line("L12", "1", "2", 0.01j)],
               loads=[load("D9", "9", {"a": 0.1})], substations=[])
    problems = validate(f)
    assert "D9: unresolved bus 9" in problems
    assert "test: exactly one substation" in problems
    assert "test: connected" in problems


def test_validate_is_pure():
    f = two_bus(pvs=[plain_pv("PV", "2", s=1.0, p=1.2)])
    assert validate(f) == validate(f)


def test_slack_phasors_rotate():
    assert slack_phasor(1.0, "a") == 1.0
    assert slack_phasor(1.0, "b") == pytest.approx(cmath.rect(1.0, -2 * cmath.pi / 3))
    assert slack_phasor(1.02, "c") == pytest.approx(cmath.rect(1.02, 2 * cmath.pi / 3))


def test_substation_box_defaults_finite():
    assert substation("1").box("a") == (-BIG_CAP, BIG_CAP, -BIG_CAP, BIG_CAP)


def test_devices_at_groups_pvs():
    f = two_bus(pvs=[droop_pv("A", "2"), plain_pv("B", "2")])
    dev = f.devices_at("2")
    assert [p.id for p in dev.droop_pvs] == ["A"]
    assert [p.id for p in dev.plain_pvs] == ["B"]
    assert f.devices_at("1").substations[0].id == "SUB"


@given(st.floats(0.8, 1.2), st.floats(0.001, 0.1), st.floats(0.8, 1.2))
def test_droop_problems_follow_ordering(v1, gap, v3):
    s = DroopSettings(v1=v1, v2=v1 + gap, v3=v3, v4=v3 + 0.04, q_max=0.1)
    assert ("dead-band nonempty" in s.problems()) == (not v1 + gap < v3)
