import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from matafkit.errors import ConfigError, GateNotCrossed, OutOfRange, TooFewKeyframes
from matafkit.geometry import SiteGeometry, WorldPoint
from matafkit.tracks import (
    Cohort,
    Track,
    downsample,
    interpolate_position,
    path_length,
    positions_at,
    segment_speeds,
    validate_track,
    walk_time,
)

# frozen: 2 * 10 * sin(pi / 32), chord of a 1/16 turn on a 10 m circle
QUARTER_CIRCLE_CHORD_SPEED = 1.960342806591212


def track(keys, id="t"):
    return Track.from_keyframes(id, keys)


def test_interpolate_examples():
    t = track([(0, (0, 0)), (10, (10, 0))])
    assert interpolate_position(t, 5) == (5, 0)
    assert interpolate_position(t, 10) == (10, 0)
    assert interpolate_position(t, 0) == (0, 0)
    assert interpolate_position(track([(0, (0, 0)), (4, (0, 8))]), 1) == (0, 2)
    with pytest.raises(OutOfRange):
        interpolate_position(t, 11)


@given(
    st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=2, max_size=8),
    st.floats(-50, 50),
    st.floats(-50, 50),
    st.floats(0, 1),
)
def test_interpolation_exact_and_translation_equivariant(pts, dx, dy, s):
    keys = [(10 * i, p) for i, p in enumerate(pts)]
    t = track(keys)
    moved = track([(f, (x + dx, y + dy)) for f, (x, y) in keys])
    for f, p in keys:
        assert interpolate_position(t, f) == pytest.approx(p)
    f = s * keys[-1][0]
    a, b = interpolate_position(t, f), interpolate_position(moved, f)
    assert b == pytest.approx((a[0] + dx, a[1] + dy), abs=1e-9)
    assert a == pytest.approx(oracles.lerp_keys(keys, f), abs=1e-9)


def test_positions_at_matches_scalar_interpolation():
    t1 = track([(0, (0, 0)), (10, (10, 0))], "a")
    t2 = track([(5, (0, 0)), (20, (0, 30))], "b")
    pos = positions_at([t1, t2], [0, 5, 10, 20])
    assert np.isnan(pos[0, 1]).all()
    assert pos[1, 0].tolist() == [5, 0]
    assert pos[3, 1].tolist() == [0, 30]
    assert np.isnan(pos[3, 0]).all()


def test_segment_speed_examples():
    s = segment_speeds(track([(0, (0, 0)), (25, (1.25, 0))]), 25)
    assert s.speed.tolist() == [1.25]
    assert s.mid_frame.tolist() == [12.5]
    assert s.pos.tolist() == [[0.625, 0.0]]
    assert segment_speeds(track([(0, (3, 4)), (50, (3, 4))]), 25).speed.tolist() == [0.0]
    with pytest.raises(TooFewKeyframes):
        segment_speeds(track([(0, (0, 0))]))
    with pytest.raises(ConfigError):
        segment_speeds(track([(0, (0, 0)), (1, (0, 0))]), 0)


def test_quarter_circle_chord_speeds():
    keys = [(25 * k, (10 * math.cos(k * math.pi / 16), 10 * math.sin(k * math.pi / 16))) for k in range(9)]
    s = segment_speeds(track(keys), 25)
    assert len(s) == 8
    np.testing.assert_allclose(s.speed, QUARTER_CIRCLE_CHORD_SPEED, rtol=1e-12)


@settings(deadline=None)
@given(
    st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=2, max_size=6),
    st.floats(0, 2 * math.pi),
    st.floats(-100, 100),
    st.floats(0.1, 10),
)
def test_speed_rigid_invariance_and_scaling(pts, angle, shift, k):
    keys = [(7 * i, p) for i, p in enumerate(pts)]
    c, s = math.cos(angle), math.sin(angle)
    rot = [(f, (c * x - s * y + shift, s * x + c * y - shift)) for f, (x, y) in keys]
    scaled = [(f, (k * x, k * y)) for f, (x, y) in keys]
    base = segment_speeds(track(keys)).speed
    np.testing.assert_allclose(segment_speeds(track(rot)).speed, base, atol=1e-9)
    np.testing.assert_allclose(segment_speeds(track(scaled)).speed, k * base, rtol=1e-9, atol=1e-12)


def test_path_length_examples():
    assert path_length(track([(0, (1, 1))])) == 0
    assert path_length(track([(0, (0, 0)), (1, (3, 4))])) == 5
    loop = [(0, (0, 0)), (1, (5, 0)), (2, (5, 5)), (3, (0, 5)), (4, (0, 0))]
    assert path_length(track(loop)) == 20


@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=1, max_size=10))
def test_path_length_triangle_inequality(pts):
    t = track(list(enumerate(pts)))
    assert path_length(t) >= math.dist(pts[0], pts[-1]) - 1e-9


def gates_site(gates):
    return SiteGeometry(WorldPoint(-50, -50), 1.0, (-100, -100, 200, 200), gates=gates)


def test_walk_time_straight():
    # 1.25 m/s = 0.05 m per frame at 25 fps; gates at x = 5 and x = 30
    site = gates_site({"A": ((5, -10), (5, 10)), "B": ((30, -10), (30, 10))})
    t = track([(0, (0, 0)), (1000, (50, 0))])
    w = walk_time(t, site, "A", "B", 25)
    assert w.t_p == pytest.approx(20.0)
    assert w.distance == pytest.approx(25.0)
    assert w.speed == pytest.approx(1.25)
    assert w.speed == pytest.approx(segment_speeds(t, 25).speed[0], abs=1e-9)


def test_walk_time_gate_not_crossed():
    site = gates_site({"A": ((5, -10), (5, 10)), "B": ((300, -10), (300, 10))})
    t = track([(0, (0, 0)), (100, (50, 0))])
    with pytest.raises(GateNotCrossed):
        walk_time(t, site, "A", "B")
    with pytest.raises(GateNotCrossed):
        walk_time(t, site, "B", "A")


def test_walk_time_oblique_gates_against_frame_scan():
    a_gate = ((10, -5), (2, 30))
    b_gate = ((40, 0), (55, 40))
    site = gates_site({"A": a_gate, "B": b_gate})
    keys = [(0, (0, 0)), (300, (20, 12)), (700, (35, 30)), (1000, (70, 25))]
    w = walk_time(track(keys), site, "A", "B", 25)
    fa = oracles.scan_crossing_frame(keys, *a_gate)
    fb = oracles.scan_crossing_frame(keys, *b_gate)
    # the scan reports the first whole frame past the line
    assert w.t_p * 25 == pytest.approx(fb - fa, abs=1.0)


def test_validate_track():
    assert validate_track(track([(0, (0, 0)), (25, (1, 0)), (50, (2, 0))])) == []
    dup = Track("d", [0, 25, 25, 50], [[0, 0], [1, 0], [1, 0], [2, 0]])
    v = validate_track(dup)
    assert [x.kind for x in v] == ["frame_order"]
    fast = track([(0, (0, 0)), (25, (10, 0))])
    v = validate_track(fast, max_speed=3.0, fps=25)
    assert [x.kind for x in v] == ["speed"]
    nan = Track("n", [0, 1], [[0, 0], [np.nan, 0]])
    assert [x.kind for x in validate_track(nan)] == ["non_finite"]


def test_cohort_validation_and_label():
    assert Cohort("female").label == "female"
    assert Cohort("male", mobility="wheelchair").label == "wheelchair"
    with pytest.raises(ConfigError):
        Cohort(group_size=0)
    with pytest.raises(ConfigError):
        Cohort("other")


def test_downsample_keeps_ends():
    t = Track("x", np.arange(101), np.column_stack([np.arange(101.0), np.zeros(101)]))
    d = downsample(t, 30)
    assert d.frames.tolist() == [0, 30, 60, 90, 100]
    # straight constant-speed path: interpolation loses nothing
    assert interpolate_position(d, 47) == pytest.approx((47.0, 0.0))
