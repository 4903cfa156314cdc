"""Exact dyadic-cube arithmetic against brute-force set oracles."""

import collections

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fractalab.dyadic import DiscretizedSet, DyadicCube, dyadic_level, is_dyadic


def test_is_dyadic():
    assert is_dyadic(1.0)
    assert is_dyadic(0.5)
    assert is_dyadic(2.0 ** -14)
    assert not is_dyadic(0.3)
    assert not is_dyadic(2.0)
    assert not is_dyadic(0.0)
    assert not is_dyadic(-0.5)


def test_dyadic_level():
    assert dyadic_level(1.0) == 0
    assert dyadic_level(2.0 ** -9) == 9
    with pytest.raises(ValueError):
        dyadic_level(0.75)


def test_cube_geometry():
    q = DyadicCube(2, (1, 3))
    assert q.side == 0.25
    assert np.allclose(q.corner(), [0.25, 0.75])
    assert np.allclose(q.center(), [0.375, 0.875])
    assert q.contains_point(np.array([0.25, 0.75]))       # half-open: corner in
    assert not q.contains_point(np.array([0.5, 0.75]))    # far corner out
    with pytest.raises(ValueError):
        DyadicCube(1, (2, 0))
    with pytest.raises(ValueError):
        DyadicCube(-1, ())


def test_cube_ancestry():
    q = DyadicCube(4, (13, 6))
    a = q.ancestor(2)
    assert a == DyadicCube(2, (3, 1))
    assert a.contains_cube(q)
    assert not q.contains_cube(a)
    assert q.ancestor(4) == q
    with pytest.raises(ValueError):
        q.ancestor(5)


def test_set_dedup_and_sort():
    P = DiscretizedSet(3, [[5, 1], [0, 0], [5, 1], [2, 7]])
    assert len(P) == 3
    assert np.array_equal(P.coords[0], [0, 0])
    with pytest.raises(ValueError):
        DiscretizedSet(2, [[4, 0]])
    with pytest.raises(ValueError):
        DiscretizedSet(2, np.empty((0, 0)))  # empty set needs dim
    E = DiscretizedSet(2, [], dim=3)
    assert len(E) == 0 and E.dim == 3


def test_from_points_floor_and_clip():
    pts = np.array([[0.0, 0.999], [0.25, 0.25], [1.0, 0.5]])
    P = DiscretizedSet.from_points(pts, 2)
    assert {tuple(c) for c in P.coords} == {(0, 3), (1, 1), (3, 2)}


def _coarsen_oracle(coords, level, j):
    return {tuple(z // 2 ** (level - j) for z in row) for row in coords}


def test_covering_number_oracle(rng):
    coords = rng.integers(0, 2 ** 5, size=(200, 3))
    P = DiscretizedSet(5, coords)
    for j in range(6):
        r = 2.0 ** -j
        assert P.covering_number(r) == len(_coarsen_oracle(coords, 5, j))
    with pytest.raises(ValueError):
        P.covering_number(2.0 ** -6)


def test_per_cube_counts_oracle(rng):
    coords = rng.integers(0, 2 ** 4, size=(120, 2))
    P = DiscretizedSet(4, coords)
    want = collections.Counter(tuple(z >> 2 for z in row) for row in P.coords)
    got_coords, got_counts = P.per_cube_counts(0.25)
    got = {tuple(c): int(n) for c, n in zip(got_coords, got_counts)}
    assert got == dict(want)


def test_restrict_to_cube(rng):
    coords = rng.integers(0, 2 ** 4, size=(80, 2))
    P = DiscretizedSet(4, coords)
    q = DyadicCube(1, (0, 1))
    sub = P.restrict_to_cube(q)
    want = {tuple(r) for r in P.coords if (r[0] >> 3, r[1] >> 3) == (0, 1)}
    assert {tuple(r) for r in sub.coords} == want


def test_save_load_roundtrip(tmp_path, rng):
    P = DiscretizedSet(6, rng.integers(0, 2 ** 6, size=(50, 2)))
    path = tmp_path / "set.txt"
    P.save(path)
    Q = DiscretizedSet.load(path)
    assert P == Q


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.lists(st.integers(0, 2 ** 6 - 1), min_size=2,
                                   max_size=60))
def test_coarsen_tower_property(j, xs):
    """Coarsening is transitive and covering numbers decrease with scale."""
    coords = np.array(xs, dtype=np.int64).reshape(-1, 1) % 2 ** 6
    P = DiscretizedSet(6, coords)
    j = min(j, 6)
    r = 2.0 ** -j
    Q = P.coarsen(r)
    assert Q.level == j
    assert len(Q) == P.covering_number(r)
    if j >= 1:
        assert P.coarsen(2.0 ** -(j - 1)) == Q.coarsen(2.0 ** -(j - 1))
    assert P.covering_number(r) <= len(P)
