"""Tubes, plates, the affine-Grassmannian metric, and the canonical tube universe.

Conventions
-----------
* A delta-tube is the closed width-neighborhood of a line segment (the central
  segment ell(T)), default extent [-2, 2] so tubes always span the unit ball.
* An (r,k)-plate is the r-neighborhood of an affine k-plane, clipped to B(0,2).
  An (r,0)-plate is an r-ball.
* Cube arithmetic is exact; every inexact predicate uses absolute tolerance TOL.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicCube

TOL = 2.0 ** -40
CLIP_RADIUS = 2.0  # plates and tube segments live inside B(0, 2)


def unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < TOL:
        raise ValueError("zero direction")
    return v / n


def canonical_direction(v):
    """Flip sign so the first coordinate that is not ~0 is positive."""
    v = np.asarray(v, dtype=float)
    for x in v:
        if abs(x) > 1e-12:
            return v if x > 0 else -v
    return v


def complement_basis(direction):
    """Deterministic orthonormal basis of direction^perp, rows (d-1, d).

    Built from the standard basis with the dominant axis dropped, then
    Gram-Schmidt; for directions along a coordinate axis this returns the
    remaining standard axes.
    """
    u = unit(direction)
    d = u.shape[0]
    drop = int(np.argmax(np.abs(u)))
    rows = []
    for i in range(d):
        if i == drop:
            continue
        e = np.zeros(d)
        e[i] = 1.0
        w = e - (e @ u) * u
        for r in rows:
            w = w - (w @ r) * r
        rows.append(w / np.linalg.norm(w))
    return np.array(rows)


def orthonormal_frame(basis_rows):
    """Extend orthonormal rows (k, d) to a full frame; returns (d-k, d) complement rows."""
    basis_rows = np.atleast_2d(np.asarray(basis_rows, dtype=float))
    k, d = basis_rows.shape
    rows = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        w = e - basis_rows.T @ (basis_rows @ e)
        for r in rows:
            w = w - (w @ r) * r
        n = np.linalg.norm(w)
        if n > 1e-9:
            rows.append(w / n)
        if len(rows) == d - k:
            break
    return np.array(rows).reshape(d - k, d)


@dataclass(frozen=True)
class Tube:
    """Closed width-neighborhood of the segment anchor + t * direction, t in extent."""

    anchor: np.ndarray
    direction: np.ndarray
    width: float
    extent: tuple = (-2.0, 2.0)

    def __post_init__(self):
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float))
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=float))
        if abs(np.linalg.norm(self.direction) - 1.0) > TOL:
            raise ValueError("direction must be unit norm within 2^-40")
        if self.width <= 0:
            raise ValueError("width must be positive")
        if self.extent[0] >= self.extent[1]:
            raise ValueError("empty extent")

    @property
    def dim(self):
        return self.anchor.shape[0]

    def point_at(self, t):
        return self.anchor + t * self.direction

    def endpoints(self):
        return self.point_at(self.extent[0]), self.point_at(self.extent[1])

    def distance_to_point(self, x):
        x = np.asarray(x, dtype=float)
        t = (x - self.anchor) @ self.direction
        t = min(max(t, self.extent[0]), self.extent[1])
        return float(np.linalg.norm(x - self.point_at(t)))

    def contains_point(self, x):
        return self.distance_to_point(x) <= self.width + TOL

    def reverse(self):
        return Tube(self.anchor, -self.direction, self.width,
                    (-self.extent[1], -self.extent[0]))


def slope(T):
    """Direction of ell(T) on S^{d-1}, canonicalized so antipodal tubes agree."""
    return canonical_direction(T.direction)


def _dist_point_box(x, lo, hi):
    return float(np.linalg.norm(np.maximum(np.maximum(lo - x, x - hi), 0.0)))


def segment_box_distance(anchor, direction, t0, t1, lo, hi):
    """min over t in [t0,t1] of dist(anchor + t*direction, box); convex in t."""
    g = lambda t: _dist_point_box(anchor + t * direction, lo, hi)
    a, b = t0, t1
    # golden-section on a convex objective down to parameter tolerance 2^-46
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    gc, gd = g(c), g(d)
    while b - a > 2.0 ** -46 * max(1.0, abs(t0) + abs(t1)):
        if gc < gd:
            b, d, gd = d, c, gc
            c = b - invphi * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + invphi * (b - a)
            gd = g(d)
    return min(gc, gd, g(a), g(b))


def tube_meets_cube(T, p):
    """True iff the closed tube intersects the closed cube (tolerance 2^-40)."""
    lo = p.corner()
    hi = lo + p.side
    dist = segment_box_distance(T.anchor, T.direction, T.extent[0], T.extent[1], lo, hi)
    return dist <= T.width + TOL


@dataclass(frozen=True)
class Plate:
    """(thickness, k)-plate: neighborhood of the affine k-plane offset + span(basis)."""

    k: int
    basis: np.ndarray          # (k, d) orthonormal rows spanning V_0
    offset: np.ndarray         # point in the orthogonal complement of V_0
    thickness: float

    def __post_init__(self):
        offset = np.asarray(self.offset, dtype=float)
        basis = np.asarray(self.basis, dtype=float).reshape(self.k, offset.shape[0])
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "offset", offset)
        d = offset.shape[0]
        if not (0 <= self.k <= d - 1):
            raise ValueError("need 0 <= k <= d-1")
        if self.k:
            gram = basis @ basis.T
            if np.max(np.abs(gram - np.eye(self.k))) > 1e-9:
                raise ValueError("basis rows must be orthonormal")
            if np.max(np.abs(basis @ offset)) > 1e-9:
                raise ValueError("offset must be orthogonal to the basis")
        if self.thickness <= 0:
            raise ValueError("thickness must be positive")

    @classmethod
    def make(cls, k, directions, point, thickness):
        """Orthonormalize directions and project the point; convenience constructor."""
        point = np.asarray(point, dtype=float)
        d = point.shape[0]
        if k == 0:
            return cls(0, np.zeros((0, d)), point, thickness)
        m = np.atleast_2d(np.asarray(directions, dtype=float))[:k]
        q, _ = np.linalg.qr(m.T)
        basis = q.T[:k]
        offset = point - basis.T @ (basis @ point)
        return cls(k, basis, offset, thickness)

    @property
    def dim(self):
        return self.offset.shape[0]

    def plane_distance(self, x):
        """Distance from x to the central plane (no clipping)."""
        v = np.asarray(x, dtype=float) - self.offset
        if self.k == 0:
            return float(np.linalg.norm(v))
        return float(np.linalg.norm(v - self.basis.T @ (self.basis @ v)))

    def plane_distances(self, X):
        """Vectorized plane_distance over rows of X."""
        V = np.asarray(X, dtype=float) - self.offset
        if self.k == 0:
            return np.linalg.norm(V, axis=1)
        proj = V @ self.basis.T
        return np.sqrt(np.maximum((V * V).sum(1) - (proj * proj).sum(1), 0.0))

    def contains_point(self, x):
        x = np.asarray(x, dtype=float)
        if np.linalg.norm(x) > CLIP_RADIUS + TOL:
            return False
        return self.plane_distance(x) <= self.thickness + TOL

    def contains_tube(self, T):
        """Tube containment: both clipped segment endpoints within thickness - width."""
        pts = _clipped_segment_endpoints(T)
        if pts is None:
            return False
        return all(self.plane_distance(x) + T.width <= self.thickness + TOL for x in pts)

    def contains_cube(self, p):
        lo = p.corner()
        corners = lo + p.side * np.array(
            np.meshgrid(*[[0, 1]] * p.dim, indexing="ij")).reshape(p.dim, -1).T
        return all(self.contains_point(c) for c in corners)

    def contains(self, obj):
        if isinstance(obj, Tube):
            return self.contains_tube(obj)
        if isinstance(obj, DyadicCube):
            return self.contains_cube(obj)
        return self.contains_point(obj)

    def projection_matrix(self):
        if self.k == 0:
            return np.zeros((self.dim, self.dim))
        return self.basis.T @ self.basis

    def inflate(self, thickness):
        return Plate(self.k, self.basis, self.offset, thickness)


def _clipped_segment_endpoints(T):
    """Endpoints of ell(T) clipped to B(0, CLIP_RADIUS); None if the segment misses it."""
    a, u = T.anchor, T.direction
    # |a + t u|^2 = R^2
    b = a @ u
    c = a @ a - CLIP_RADIUS ** 2
    disc = b * b - c
    if disc < 0:
        return None
    t_lo = max(T.extent[0], -b - np.sqrt(disc))
    t_hi = min(T.extent[1], -b + np.sqrt(disc))
    if t_lo > t_hi:
        return None
    return T.point_at(t_lo), T.point_at(t_hi)


def grassmann_distance(V, W):
    """||pi_V0 - pi_W0||_op + |a - b| for affine k-planes given as Plates."""
    if V.k != W.k or V.dim != W.dim:
        raise ValueError("planes must share k and ambient dimension")
    op = np.linalg.norm(V.projection_matrix() - W.projection_matrix(), 2)
    return float(op + np.linalg.norm(V.offset - W.offset))


# ---------------------------------------------------------------------------
# rescale maps S_Q, S_H


class CubeMap:
    """S_Q: affine map sending the dyadic cube Q onto [0,1)^d."""

    def __init__(self, cube):
        self.cube = cube
        self.scale = 2.0 ** cube.level

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        y = (x - self.cube.corner()) * self.scale
        if np.any(y < -TOL * self.scale) or np.any(y > 1 + TOL * self.scale):
            raise ValueError("point outside the cube")
        return y

    def inverse(self, y):
        return np.asarray(y, dtype=float) / self.scale + self.cube.corner()


class PlateMap:
    """S_H: expands the short directions of a plate by 1/thickness.

    Coordinates are taken in the plate frame (long directions first); for a
    thickness-1 plate in the standard frame this is the identity.
    """

    def __init__(self, plate):
        self.plate = plate
        self.long = plate.basis
        self.short = orthonormal_frame(plate.basis) if plate.k else np.eye(plate.dim)
        if plate.k == 0:
            self.long = np.zeros((0, plate.dim))
        self.frame = np.vstack([self.long, self.short])

    def forward(self, x, check=True):
        x = np.asarray(x, dtype=float)
        v = x - self.plate.offset
        y_long = self.long @ v
        y_short = (self.short @ v) / self.plate.thickness
        if check and (np.max(np.abs(y_short)) > 1 + TOL / self.plate.thickness
                      or np.linalg.norm(x) > CLIP_RADIUS + TOL):
            raise ValueError("point outside the plate")
        return np.concatenate([y_long, y_short])

    def forward_many(self, X):
        V = np.asarray(X, dtype=float) - self.plate.offset
        y_long = V @ self.long.T
        y_short = (V @ self.short.T) / self.plate.thickness
        return np.concatenate([y_long, y_short], axis=1)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        k = self.plate.k
        v = self.long.T @ y[:k] + self.short.T @ (y[k:] * self.plate.thickness)
        return v + self.plate.offset


def rescale_to_unit(obj):
    """Return the rescale map (forward/inverse) for a Plate or DyadicCube."""
    if isinstance(obj, DyadicCube):
        return CubeMap(obj)
    if isinstance(obj, Plate):
        return PlateMap(obj)
    raise TypeError("expected Plate or DyadicCube")


def check_tube_plate_inflation(H, x, y, r, c_sep=1.0, n_samples=200, seed=0,
                               factor_bound=32.0):
    """Do all r-tubes through x and y stay inside a modest inflation of H?

    Samples the tube's free parameters (r-perturbations of the two through
    points), measures the worst extra thickness needed, normalized by c_sep*r.
    Returns (ok, measured_factor).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (H.contains_point(x) and H.contains_point(y)):
        raise ValueError("x and y must lie in H")
    sep = np.linalg.norm(x - y)
    if sep < 1.0 / c_sep - TOL:
        raise ValueError(f"|x-y| = {sep:.4g} below the separation floor {1.0/c_sep:.4g}")
    rng = np.random.default_rng(seed)
    d = x.shape[0]
    worst = 0.0
    for _ in range(n_samples):
        xp = x + r * rng.uniform(-1, 1, d)
        yp = y + r * rng.uniform(-1, 1, d)
        u = unit(yp - xp)
        T = Tube(xp, u, r)
        pts = _clipped_segment_endpoints(T)
        if pts is None:
            continue
        dev = max(H.plane_distance(p) for p in pts) + r
        worst = max(worst, dev - H.thickness)
    factor = worst / (c_sep * r)
    return factor <= factor_bound, factor


# ---------------------------------------------------------------------------
# direction nets on the sphere


def sphere_net(d, spacing, seed=0):
    """Unit directions whose +/- orbit covers S^{d-1} within ~spacing (geodesic).

    d=2: evenly spaced angles on [0, pi).  d=3: latitude bands on the upper
    hemisphere.  d>=4: seeded greedy over quasi-random candidates (coarse
    spacings only).
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if d == 2:
        n = max(1, int(np.ceil(np.pi / spacing)))
        ang = (np.arange(n) + 0.5) * np.pi / n
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if d == 3:
        nb = max(1, int(np.ceil((np.pi / 2) / spacing)))
        dirs = []
        for j in range(nb):
            th = (j + 0.5) * (np.pi / 2) / nb
            na = max(1, int(np.ceil(2 * np.pi * np.sin(th) / spacing)))
            ph = (np.arange(na) + 0.5) * 2 * np.pi / na
            dirs.append(np.stack([np.sin(th) * np.cos(ph),
                                  np.sin(th) * np.sin(ph),
                                  np.full(na, np.cos(th))], axis=1))
        return np.concatenate(dirs)
    est = int(8.0 * (np.pi / spacing) ** (d - 1))
    if est > 2_000_000:
        raise ResourceWarning(f"sphere net too large: ~{est} candidates")
    rng = np.random.default_rng(seed)
    cand = rng.standard_normal((est, d))
    cand /= np.linalg.norm(cand, axis=1, keepdims=True)
    kept = []
    cos_thr = np.cos(spacing)
    for v in cand:
        if not kept or np.max(np.abs(np.array(kept) @ v)) < cos_thr:
            kept.append(v)
    return np.array(kept)


def nearest_direction(dirs, v):
    """Index of the net direction closest to the line spanned by v."""
    return int(np.argmax(np.abs(dirs @ unit(v))))


class TubeUniverse:
    """Canonical universe T^delta of width-w tubes covering B(0,1).

    Directions from a w/2-net on the sphere; anchors on a w/2-grid in the
    orthogonal complement of each direction.  The halved spacing guarantees
    every width-(w/2) tube (in particular every finer-scale tube) lies inside
    at least one universe tube; the overlap constant C_d is measured, never
    assumed.
    """

    def __init__(self, width, d, max_offset_radius=None):
        self.width = float(width)
        self.d = int(d)
        self.spacing = self.width / 2.0
        self.dirs = sphere_net(d, self.spacing)
        self.comps = np.array([complement_basis(u) for u in self.dirs])
        self.max_offset_radius = max_offset_radius or (np.sqrt(d) + 1.0)
        # offset integers fit in a fixed base for int64 packing
        self._span = 2 * int(np.ceil(self.max_offset_radius / self.spacing)) + 3
        if len(self.dirs) * self._span ** (d - 1) > 2 ** 62:
            raise ValueError("universe too large to key")

    def n_directions(self):
        return len(self.dirs)

    def canonical_key(self, anchor, direction):
        """(dir index, offset integers) of the universe tube containing the given line."""
        i = nearest_direction(self.dirs, direction)
        u = self.dirs[i]
        a = np.asarray(anchor, dtype=float)
        perp = a - (a @ u) * u
        y = self.comps[i] @ perp
        ints = np.round(y / self.spacing).astype(np.int64)
        return i, tuple(int(z) for z in ints)

    def pack(self, key):
        i, ints = key
        code = np.int64(i)
        half = self._span // 2
        for z in ints:
            code = code * self._span + (z + half)
        return int(code)

    def unpack(self, code):
        half = self._span // 2
        ints = []
        for _ in range(self.d - 1):
            code, rem = divmod(code, self._span)
            ints.append(rem - half)
        return int(code), tuple(reversed(ints))

    def keys_for(self, anchors, directions):
        """Vectorized canonical packed keys for rows of anchors/directions."""
        anchors = np.atleast_2d(anchors)
        directions = np.atleast_2d(directions)
        idx = np.empty(len(directions), dtype=np.int64)
        step = max(1, 2 ** 22 // max(len(self.dirs), 1))
        for start in range(0, len(directions), step):
            chunk = directions[start:start + step]
            idx[start:start + step] = np.argmax(np.abs(chunk @ self.dirs.T), axis=1)
        out = np.empty(len(anchors), dtype=np.int64)
        half = self._span // 2
        for i in np.unique(idx):
            m = idx == i
            u = self.dirs[i]
            A = anchors[m]
            perp = A - np.outer(A @ u, u)
            Y = perp @ self.comps[i].T
            ints = np.round(Y / self.spacing).astype(np.int64) + half
            code = np.full(m.sum(), i, dtype=np.int64)
            for col in range(self.d - 1):
                code = code * self._span + ints[:, col]
            out[m] = code
        return out

    def tube(self, key):
        if isinstance(key, (int, np.integer)):
            key = self.unpack(int(key))
        i, ints = key
        anchor = self.comps[i].T @ (np.array(ints, dtype=float) * self.spacing)
        return Tube(anchor, self.dirs[i], self.width)

    def measure_overlap(self, n_probes=500, seed=0):
        """Measured C_d: max over random probe lines of universe tubes containing them."""
        rng = np.random.default_rng(seed)
        worst = 0
        for _ in range(n_probes):
            x = rng.uniform(-0.5, 0.5, self.d)
            u = unit(rng.standard_normal(self.d))
            probe = Tube(x, u, self.width / 2.0, (-1.0, 1.0))
            count = 0
            i0 = nearest_direction(self.dirs, u)
            cos_thr = np.cos(min(3 * self.spacing, np.pi / 2))
            close = np.nonzero(np.abs(self.dirs @ u) >= cos_thr)[0]
            for i in close:
                uu = self.dirs[i]
                perp = x - (x @ uu) * uu
                y = self.comps[i] @ perp
                base = np.round(y / self.spacing).astype(int)
                for off in np.ndindex(*([5] * (self.d - 1))):
                    ints = tuple(base + np.array(off) - 2)
                    cand = self.tube((i, ints))
                    pts = _clipped_segment_endpoints(probe)
                    if pts is None:
                        continue
                    if all(cand.distance_to_point(p) + probe.width <= cand.width + TOL
                           for p in pts):
                        count += 1
            worst = max(worst, count)
        return worst
