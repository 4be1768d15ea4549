import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles
from matafkit.errors import (
    ConfigError,
    DegenerateConfiguration,
    InsufficientPairs,
    PointAtInfinity,
    SingularMap,
    UnknownGate,
)
from matafkit.geometry import (
    CellIndex,
    GridSpec,
    Homography,
    ImagePoint,
    SiteGeometry,
    WorldPoint,
    cell_of,
    distance_to_wall,
    fit_homography,
    invert,
    project_points,
    project_to_plane,
)

UNIT_SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]

# ground-truth perspective map and its four image corners
H_TRUE = [2, 0.3, 5, 0.1, 1.5, -3, 0.001, 0.002, 1]
PERSPECTIVE_PAIRS = [
    (0, 0, 5.0, -3.0),
    (100, 0, 186.36363636363635, 6.363636363636363),
    (100, 80, 181.74603174603175, 100.7936507936508),
    (0, 80, 25.0, 100.86206896551725),
]
# frozen from oracles.dlt_8x8(PERSPECTIVE_PAIRS), h33 = 1
DLT_ORACLE = [2.0, 0.3, 5.0, 0.1, 1.5, -3.0, 0.001, 0.002, 1.0]


def pairs_of(img, wld):
    return [(ImagePoint(*p), WorldPoint(*q)) for p, q in zip(img, wld)]


def test_identity_fit():
    h = fit_homography(pairs_of(UNIT_SQUARE, UNIT_SQUARE))
    np.testing.assert_allclose(h.matrix, np.eye(3), atol=1e-12)
    assert h.rms_error <= 1e-12


def test_scale_fit():
    h = fit_homography(pairs_of(UNIT_SQUARE, [(5 * x, 5 * y) for x, y in UNIT_SQUARE]))
    # largest coefficient normalized to 1
    np.testing.assert_allclose(h.matrix, np.diag([1.0, 1.0, 0.2]), atol=1e-12)
    assert max(abs(c) for c in h.m) == pytest.approx(1.0)
    assert project_to_plane(h, (0.2, 0.4)) == pytest.approx((1.0, 2.0), abs=1e-12)


def test_perspective_fit_matches_gaussian_elimination_oracle():
    live = oracles.dlt_8x8(PERSPECTIVE_PAIRS)
    np.testing.assert_allclose(live, DLT_ORACLE, rtol=1e-9, atol=1e-12)
    h = fit_homography(PERSPECTIVE_PAIRS)
    got = h.matrix.reshape(-1) / h.m[8]
    np.testing.assert_allclose(got, DLT_ORACLE, rtol=1e-9, atol=1e-12)
    for u, v, x, y in PERSPECTIVE_PAIRS:
        assert math.dist(project_to_plane(h, (u, v)), (x, y)) <= 1e-9


def test_held_out_point():
    h = fit_homography(PERSPECTIVE_PAIRS)
    x, y = oracles.apply_h(H_TRUE, 37, 51)
    assert math.dist(project_to_plane(h, (37, 51)), (x, y)) <= 1e-6


def test_overdetermined_fit_reports_rms():
    rng = np.random.default_rng(3)
    img = rng.uniform(0, 100, size=(12, 2))
    wld = np.array([oracles.apply_h(H_TRUE, u, v) for u, v in img])
    h = fit_homography(pairs_of(img, wld))
    assert h.rms_error < 1e-8
    noisy = wld + rng.normal(0, 0.05, size=wld.shape)
    h2 = fit_homography(pairs_of(img, noisy))
    assert 0.005 < h2.rms_error < 0.1


def test_errors():
    with pytest.raises(InsufficientPairs):
        fit_homography(pairs_of(UNIT_SQUARE[:3], UNIT_SQUARE[:3]))
    with pytest.raises(DegenerateConfiguration):
        fit_homography(pairs_of([(0, 0), (1, 1), (2, 2), (0, 1)], UNIT_SQUARE))
    with pytest.raises(DegenerateConfiguration):
        fit_homography(pairs_of([(0, 0), (0, 0), (1, 1), (0, 1)], UNIT_SQUARE))
    with pytest.raises(DegenerateConfiguration):
        fit_homography(pairs_of([(0, 0), (1, 0), (2, 0), (3, 0), (4, 0)], [(0, 0), (1, 0), (1, 1), (0, 1), (2, 3)]))


def test_point_at_infinity():
    h = Homography.from_matrix([[1, 0, 0], [0, 1, 0], [1, 0, -1]])
    with pytest.raises(PointAtInfinity):
        project_to_plane(h, (1.0, 5.0))


def test_singular_map_rejected():
    with pytest.raises(SingularMap):
        Homography.from_matrix([[1, 2, 3], [2, 4, 6], [0, 0, 1]])


def test_invert_examples():
    np.testing.assert_allclose(invert(Homography.identity()).matrix, np.eye(3), atol=1e-15)
    scale5 = Homography.from_matrix(np.diag([5.0, 5.0, 1.0]))
    inv = invert(scale5)
    assert project_to_plane(inv, (5.0, 10.0)) == pytest.approx((1.0, 2.0))
    assert project_to_plane(inv, (1.0, 0.0))[0] == pytest.approx(0.2)


def test_invert_matrix_product_oracle():
    rng = np.random.default_rng(11)
    for _ in range(20):
        m = np.eye(3) + 0.3 * rng.standard_normal((3, 3))
        h = Homography.from_matrix(m)
        prod = oracles.matmul3(list(h.m), list(invert(h).m))
        prod = np.array(prod).reshape(3, 3)
        np.testing.assert_allclose(prod / prod[0, 0], np.eye(3), atol=1e-9)


@st.composite
def well_conditioned(draw):
    m = np.eye(3) + np.array(draw(st.lists(st.floats(-0.3, 0.3), min_size=9, max_size=9))).reshape(3, 3)
    m[2, :2] *= 0.01
    return m


@settings(max_examples=200, deadline=None)
@given(well_conditioned(), st.floats(-50, 50), st.floats(-50, 50))
def test_round_trip_property(m, u, v):
    assume(abs(np.linalg.det(m)) > 0.1)
    h = Homography.from_matrix(m)
    hom = h.matrix @ [u, v, 1.0]
    assume(abs(hom[2]) > 1e-6 * np.abs(hom).max())
    back = project_to_plane(invert(h), project_to_plane(h, (u, v)))
    assert math.dist(back, (u, v)) <= 1e-9 * max(1.0, math.hypot(u, v))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=4, max_size=4, unique=True))
def test_four_point_fit_is_exact(img):
    img = np.array(img)
    for a, b, c in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]:
        (x1, y1), (x2, y2) = img[b] - img[a], img[c] - img[a]
        cross = x1 * y2 - y1 * x2
        assume(abs(cross) > 50.0)
    wld = np.array([oracles.apply_h(H_TRUE, u, v) for u, v in img])
    assume(np.all(np.abs(wld) < 1e4))
    h = fit_homography(pairs_of(img, wld))
    err = np.hypot(*(project_points(h, img) - wld).T)
    assert err.max() <= 1e-9 * max(1.0, np.abs(wld).max())


def test_cell_of_examples():
    g = GridSpec(WorldPoint(0, 0), 5.0, 10, 10)
    assert cell_of(g, (0, 0)) == CellIndex(0, 0)
    assert cell_of(GridSpec(WorldPoint(0, 0), 5.0, 1, 1), (5, 0)) is None
    assert cell_of(g, (12.5, 7.1)) == CellIndex(2, 1)
    assert cell_of(g, (-0.001, 3)) is None
    assert cell_of(g, (float("nan"), 3)) is None


def test_cell_of_float_edges_follow_half_open_rule():
    g = GridSpec(WorldPoint(0.1, 0.0), 0.1, 10, 1)
    for k in range(10):
        x = 0.1 + k * 0.1
        c = cell_of(g, (x, 0.05))
        assert c is not None
        assert 0.1 + c.col * 0.1 <= x < 0.1 + (c.col + 1) * 0.1


dyadic = st.integers(-4000, 4000).map(lambda k: k / 8.0)


@given(dyadic, dyadic, dyadic, dyadic)
def test_cell_of_partition_and_translation(px, py, ox, oy):
    g = GridSpec(WorldPoint(0, 0), 2.5, 20, 20)
    shifted = GridSpec(WorldPoint(ox, oy), 2.5, 20, 20)
    assert cell_of(g, (px, py)) == cell_of(shifted, (px + ox, py + oy))
    c = cell_of(g, (px, py))
    inside = 0 <= px < 50 and 0 <= py < 50
    assert (c is not None) == inside
    if c is not None:
        assert c.col * 2.5 <= px < (c.col + 1) * 2.5
        assert c.row * 2.5 <= py < (c.row + 1) * 2.5


def test_grid_validation():
    with pytest.raises(ConfigError):
        GridSpec(WorldPoint(0, 0), 0.0, 1, 1)
    with pytest.raises(ConfigError):
        GridSpec(WorldPoint(0, 0), 1.0, 0, 1)
    g = GridSpec.covering((0, 0, 105, 154), 5.0)
    assert (g.ncols, g.nrows) == (21, 31)
    assert g.area == 25.0


def test_distance_to_wall_examples():
    geom = SiteGeometry(WorldPoint(0, 0), 10.0, (-100, -100, 100, 100))
    assert distance_to_wall(geom, (0, 0)) == 0
    assert distance_to_wall(geom, (15, 0)) == 5
    assert distance_to_wall(geom, (6, 8)) == 0


@given(*(st.floats(-80, 80) for _ in range(4)))
def test_distance_to_wall_is_1_lipschitz(ax, ay, bx, by):
    geom = SiteGeometry(WorldPoint(0, 0), 10.0, (-100, -100, 100, 100))
    d = abs(distance_to_wall(geom, (ax, ay)) - distance_to_wall(geom, (bx, by)))
    assert d <= math.hypot(ax - bx, ay - by) + 1e-12


def test_site_defaults_and_validation():
    s = SiteGeometry.default()
    assert s.bounds == (0.0, 0.0, 105.0, 154.0)
    assert set(s.gates) == {"east", "north"}
    with pytest.raises(UnknownGate):
        s.gate("nope")
    with pytest.raises(ConfigError):
        SiteGeometry(WorldPoint(1, 1), 5.0, (0, 0, 10, 10))
    with pytest.raises(ConfigError):
        SiteGeometry(WorldPoint(5, 5), 0.0, (0, 0, 10, 10))
    assert SiteGeometry.from_dict(s.to_dict()) == s
