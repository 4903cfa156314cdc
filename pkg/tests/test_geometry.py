"""Tubes, plates, rescale maps, and the canonical universe.

Inexact predicates are tested against dense-sampling oracles at tolerances
well above 2^-40; exact identities are asserted directly.
"""

import numpy as np
import pytest

from fractalab.dyadic import DyadicCube
from fractalab.geometry import (CLIP_RADIUS, TOL, CubeMap, Plate, PlateMap,
                                Tube, TubeUniverse, complement_basis,
                                grassmann_distance, rescale_to_unit, slope,
                                segment_box_distance, sphere_net,
                                tube_meets_cube, unit)


def test_tube_validation():
    with pytest.raises(ValueError):
        Tube(np.zeros(2), np.array([1.0, 1.0]), 0.1)   # not unit
    with pytest.raises(ValueError):
        Tube(np.zeros(2), np.array([1.0, 0.0]), 0.0)   # zero width
    with pytest.raises(ValueError):
        Tube(np.zeros(2), np.array([1.0, 0.0]), 0.1, (1.0, 1.0))


def test_tube_distance_oracle(rng):
    T = Tube(rng.uniform(-0.3, 0.3, 3), unit(rng.standard_normal(3)), 0.05,
             (-1.0, 1.5))
    ts = np.linspace(-1.0, 1.5, 20001)
    seg = T.anchor + ts[:, None] * T.direction
    for _ in range(30):
        x = rng.uniform(-1, 1, 3)
        brute = np.linalg.norm(seg - x, axis=1).min()
        assert abs(T.distance_to_point(x) - brute) < 1e-7


def test_tube_reverse_same_set(rng):
    T = Tube(rng.uniform(-0.3, 0.3, 2), unit(rng.standard_normal(2)), 0.05)
    R = T.reverse()
    for _ in range(50):
        x = rng.uniform(-1, 1, 2)
        assert abs(T.distance_to_point(x) - R.distance_to_point(x)) < 1e-12
    assert np.allclose(slope(T), slope(R))


def test_slope_canonical():
    u = unit(np.array([-1.0, 0.5]))
    T = Tube(np.zeros(2), u, 0.1)
    assert slope(T)[0] > 0
    T2 = Tube(np.zeros(2), -u, 0.1)
    assert np.allclose(slope(T), slope(T2))


def test_segment_box_distance_oracle(rng):
    for _ in range(20):
        a = rng.uniform(-1, 1, 2)
        u = unit(rng.standard_normal(2))
        lo = rng.uniform(-1, 0, 2)
        hi = lo + rng.uniform(0.1, 1, 2)
        got = segment_box_distance(a, u, -2.0, 2.0, lo, hi)
        ts = np.linspace(-2, 2, 40001)
        pts = a + ts[:, None] * u
        clipped = np.clip(pts, lo, hi)
        brute = np.linalg.norm(pts - clipped, axis=1).min()
        assert got <= brute + 1e-9
        assert got >= brute - 1e-4   # brute grid is the coarse side


def test_tube_meets_cube_tangency():
    # tube along the x-axis, width w: touches cubes up to height w exactly
    w = 2.0 ** -4
    T = Tube(np.zeros(2), np.array([1.0, 0.0]), w)
    assert not tube_meets_cube(T, DyadicCube(2, (1, 2)))  # [0.25,0.5)x[0.5,0.75): dist 0.5 >> w
    q_touch = DyadicCube(4, (3, 1))    # corner (3/16, 1/16): dist to axis = 1/16 = w
    assert tube_meets_cube(T, q_touch)
    q_miss = DyadicCube(4, (3, 2))     # lower face at 2/16 = 2w: outside
    assert not tube_meets_cube(T, q_miss)


def test_plate_validation():
    with pytest.raises(ValueError):
        Plate(1, np.array([[1.0, 1.0]]), np.zeros(2), 0.1)     # not orthonormal
    with pytest.raises(ValueError):
        Plate(1, np.array([[1.0, 0.0]]), np.array([1.0, 0.0]), 0.1)  # offset not perp
    with pytest.raises(ValueError):
        Plate(2, np.eye(2), np.zeros(2), 0.1)                  # k > d-1


def test_plate_make_and_distance(rng):
    H = Plate.make(1, np.array([[2.0, 0.0, 0.0]]), np.array([0.3, 0.1, -0.2]), 0.25)
    assert np.allclose(H.basis @ H.basis.T, np.eye(1))
    x = np.array([0.7, 0.1, -0.2])
    assert abs(H.plane_distance(x)) < 1e-12         # same line
    y = np.array([0.0, 0.1 + 0.3, -0.2 + 0.4])
    assert abs(H.plane_distance(y) - 0.5) < 1e-12
    X = rng.uniform(-1, 1, (40, 3))
    assert np.allclose(H.plane_distances(X),
                       [H.plane_distance(row) for row in X])


def test_plate_clip_radius():
    H = Plate.make(1, np.eye(2)[:1], np.zeros(2), 0.5)
    assert H.contains_point(np.array([CLIP_RADIUS - 0.01, 0.0]))
    assert not H.contains_point(np.array([CLIP_RADIUS + 0.1, 0.0]))


def test_plate_contains_tube_and_cube():
    H = Plate.make(1, np.eye(2)[:1], np.zeros(2), 0.25)
    inside = Tube(np.array([0.0, 0.1]), np.array([1.0, 0.0]), 0.05)
    tilted = Tube(np.zeros(2), unit(np.array([1.0, 0.5])), 0.05)
    assert H.contains(inside)
    assert not H.contains(tilted)
    assert H.contains(DyadicCube(3, (4, 1)))        # y in [0.125, 0.25]
    assert not H.contains(DyadicCube(2, (0, 3)))    # y in [0.75, 1]


def test_plate_projection_and_inflate():
    H = Plate.make(2, np.eye(3)[:2], np.array([0.0, 0.0, 0.4]), 0.1)
    Pi = H.projection_matrix()
    assert np.allclose(Pi @ Pi, Pi)
    assert np.allclose(np.trace(Pi), 2.0)
    assert H.inflate(0.3).thickness == 0.3


def test_grassmann_examples():
    x_axis = Plate.make(1, np.eye(2)[:1], np.zeros(2), 0.1)
    y_axis = Plate.make(1, np.eye(2)[1:], np.zeros(2), 0.1)
    assert grassmann_distance(x_axis, x_axis) == 0.0
    assert abs(grassmann_distance(x_axis, y_axis) - 1.0) < 1e-12
    shifted = Plate.make(1, np.eye(2)[:1], np.array([0.0, 0.25]), 0.1)
    assert abs(grassmann_distance(x_axis, shifted) - 0.25) < 1e-12
    with pytest.raises(ValueError):
        grassmann_distance(x_axis, Plate.make(1, np.eye(3)[:1], np.zeros(3), 0.1))


def test_cube_map_roundtrip(rng):
    q = DyadicCube(3, (5, 2))
    S = CubeMap(q)
    for _ in range(20):
        x = q.corner() + rng.uniform(0, q.side, 2)
        y = S.forward(x)
        assert np.all((y >= -TOL) & (y <= 1 + TOL))
        assert np.linalg.norm(S.inverse(y) - x) < 2.0 ** -38
    with pytest.raises(ValueError):
        S.forward(np.array([0.99, 0.99]))


def test_plate_map_roundtrip(rng):
    H = Plate.make(1, np.array([[1.0, 1.0, 0.0]]), np.array([0.1, -0.1, 0.2]),
                   2.0 ** -3)
    S = PlateMap(H)
    for _ in range(30):
        y0 = np.concatenate([rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 2)])
        x = S.inverse(y0)
        if np.linalg.norm(x) > CLIP_RADIUS:
            continue
        y = S.forward(x)
        assert np.linalg.norm(y - y0) < 2.0 ** -38
        assert np.linalg.norm(S.inverse(y) - x) < 2.0 ** -38
    far = S.inverse(np.array([0.0, 5.0, 0.0]))
    with pytest.raises(ValueError):
        S.forward(far)
    X = rng.uniform(-0.2, 0.2, (25, 3))
    assert np.allclose(S.forward_many(X),
                       [S.forward(row, check=False) for row in X])


def test_rescale_dispatch():
    assert isinstance(rescale_to_unit(DyadicCube(1, (0, 0))), CubeMap)
    assert isinstance(
        rescale_to_unit(Plate.make(1, np.eye(2)[:1], np.zeros(2), 0.1)),
        PlateMap)
    with pytest.raises(TypeError):
        rescale_to_unit("line")


@pytest.mark.parametrize("d", [2, 3])
def test_sphere_net_covers(d, rng):
    spacing = 0.1
    net = sphere_net(d, spacing)
    for _ in range(200):
        v = unit(rng.standard_normal(d))
        cosines = np.abs(net @ v)
        assert np.arccos(np.clip(cosines.max(), -1, 1)) <= spacing + 1e-9


def test_complement_basis(rng):
    for d in (2, 3, 4):
        u = unit(rng.standard_normal(d))
        B = complement_basis(u)
        assert B.shape == (d - 1, d)
        assert np.allclose(B @ B.T, np.eye(d - 1), atol=1e-12)
        assert np.allclose(B @ u, 0.0, atol=1e-12)


def test_universe_key_roundtrip(universe2_16, rng):
    U = universe2_16
    for _ in range(50):
        a = rng.uniform(-0.5, 0.5, 2)
        v = unit(rng.standard_normal(2))
        key = U.canonical_key(a, v)
        assert U.unpack(U.pack(key)) == key
        T = U.tube(key)
        # the canonical tube contains the defining line near the anchor
        assert T.distance_to_point(a) <= U.width


def test_universe_keys_for_matches_scalar(universe2_16, rng):
    U = universe2_16
    anchors = rng.uniform(-0.5, 0.5, (40, 2))
    dirs = np.array([unit(v) for v in rng.standard_normal((40, 2))])
    packed = U.keys_for(anchors, dirs)
    for a, v, code in zip(anchors, dirs, packed):
        assert code == U.pack(U.canonical_key(a, v))


def test_universe_overlap_measured(universe2_16):
    # every probe line lies in >= 1 universe tube, and the overlap is O(1)
    C_d = universe2_16.measure_overlap(n_probes=60)
    assert 1 <= C_d <= 64
