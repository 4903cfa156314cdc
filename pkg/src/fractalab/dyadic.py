"""Dyadic cubes and discretized point sets with exact integer arithmetic.

A level-m cube is 2^-m (z + [0,1)^d) for integer coordinates z.  All counting
(covering numbers, per-cube multiplicities) is done on the integer coordinates
so there is no floating point anywhere in this module's hot paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def is_dyadic(r):
    """True if r = 2^-j for a nonnegative integer j."""
    if r <= 0 or r > 1:
        return False
    j = round(np.log2(1.0 / r))
    return j >= 0 and 2.0 ** (-j) == r


def dyadic_level(r):
    if not is_dyadic(r):
        raise ValueError(f"scale {r} is not dyadic in (0, 1]")
    return round(np.log2(1.0 / r))


@dataclass(frozen=True)
class DyadicCube:
    """Axis-aligned cube 2^-level (coords + [0,1)^d)."""

    level: int
    coords: tuple

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("negative level")
        for z in self.coords:
            if not (0 <= z < 2 ** self.level):
                raise ValueError(f"coordinate {z} outside [0, 2^{self.level})")

    @property
    def dim(self):
        return len(self.coords)

    @property
    def side(self):
        return 2.0 ** (-self.level)

    def corner(self):
        return np.array(self.coords, dtype=float) * self.side

    def center(self):
        return (np.array(self.coords, dtype=float) + 0.5) * self.side

    def ancestor(self, level):
        """The coarser cube at the given level containing this one."""
        if level > self.level:
            raise ValueError("ancestor level must be <= cube level")
        shift = self.level - level
        return DyadicCube(level, tuple(z >> shift for z in self.coords))

    def contains_point(self, x):
        c = self.corner()
        return bool(np.all(x >= c) and np.all(x < c + self.side))

    def contains_cube(self, other):
        if other.level < self.level:
            return False
        return other.ancestor(self.level) == self


class DiscretizedSet:
    """A finite set of level-m dyadic cubes in [0,1)^d.

    Stored as a unique, lexicographically sorted (n, d) integer array.
    """

    def __init__(self, level, coords, dim=None):
        coords = np.asarray(coords, dtype=np.int64)
        if coords.size == 0:
            if dim is None:
                raise ValueError("empty set needs an explicit dimension")
            coords = coords.reshape(0, dim)
        if coords.ndim != 2:
            raise ValueError("coords must be (n, d)")
        if coords.size and (coords.min() < 0 or coords.max() >= 2 ** level):
            raise ValueError("coordinates outside [0, 2^level)")
        self.level = int(level)
        self.coords = np.unique(coords, axis=0)
        self.dim = self.coords.shape[1]

    @classmethod
    def from_points(cls, points, level):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        z = np.floor(points * 2 ** level).astype(np.int64)
        z = np.clip(z, 0, 2 ** level - 1)
        return cls(level, z)

    @property
    def resolution(self):
        return 2.0 ** (-self.level)

    def __len__(self):
        return self.coords.shape[0]

    def __eq__(self, other):
        return (isinstance(other, DiscretizedSet) and self.level == other.level
                and self.coords.shape == other.coords.shape
                and bool(np.all(self.coords == other.coords)))

    def cubes(self):
        return [DyadicCube(self.level, tuple(int(z) for z in row)) for row in self.coords]

    def centers(self):
        return (self.coords.astype(float) + 0.5) * self.resolution

    def coarsen_coords(self, r):
        """Integer coordinates of the level-log2(1/r) cubes meeting the set (unique)."""
        j = dyadic_level(r)
        if j > self.level:
            raise ValueError(f"scale {r} finer than resolution {self.resolution}")
        return np.unique(self.coords >> (self.level - j), axis=0)

    def covering_number(self, r):
        return self.coarsen_coords(r).shape[0]

    def coarsen(self, r):
        j = dyadic_level(r)
        return DiscretizedSet(j, self.coarsen_coords(r), dim=self.dim)

    def restrict_to_cube(self, cube):
        """Subset of cubes lying inside the given coarser cube."""
        shift = self.level - cube.level
        if shift < 0:
            raise ValueError("cube must be coarser than the set resolution")
        anc = self.coords >> shift
        mask = np.all(anc == np.asarray(cube.coords, dtype=np.int64), axis=1)
        return DiscretizedSet(self.level, self.coords[mask], dim=self.dim)

    def per_cube_counts(self, r):
        """(coarse coords, counts): multiplicity of set cubes per level-log2(1/r) cube."""
        j = dyadic_level(r)
        anc = self.coords >> (self.level - j)
        return np.unique(anc, axis=0, return_counts=True)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(f"{self.dim} {self.level}\n")
            for row in self.coords:
                fh.write(" ".join(str(int(z)) for z in row) + "\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            d, level = (int(tok) for tok in fh.readline().split())
            rows = [[int(tok) for tok in line.split()] for line in fh if line.strip()]
        return cls(level, np.array(rows, dtype=np.int64).reshape(len(rows), d), dim=d)
