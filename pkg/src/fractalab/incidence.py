"""Tube-cube incidence engine and the elementary incidence estimates.

A Configuration is a set P of delta-cubes with a tube bundle T(p) per cube,
all tubes drawn from one canonical universe.  I(P,T) counts bundle membership
pairs (p, T); the estimates verified here are the square-function incidence
upper bound, its lower-bound corollary, and the plate-localized variant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dyadic import DiscretizedSet, DyadicCube, dyadic_level
from .geometry import (Plate, PlateMap, Tube, TubeUniverse, segment_box_distance,
                       tube_meets_cube, unit)
from .sets import TubeFamily, check_ball_set


class Configuration:
    """P plus per-cube tube bundles in CSR layout (keys, indptr)."""

    def __init__(self, P, universe, keys, indptr, params=None, uniform=None):
        self.P = P
        self.universe = universe
        self.keys = np.asarray(keys, dtype=np.int64)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        if len(self.indptr) != len(P) + 1:
            raise ValueError("indptr must have |P|+1 entries")
        self.params = dict(params or {})
        sizes = np.diff(self.indptr)
        self.uniform = bool(np.all(sizes == sizes[0])) if uniform is None else uniform

    @property
    def n_points(self):
        return len(self.P)

    def bundle(self, i):
        return self.keys[self.indptr[i]:self.indptr[i + 1]]

    def bundle_sizes(self):
        return np.diff(self.indptr)

    @property
    def M(self):
        sizes = self.bundle_sizes()
        if not self.uniform:
            raise ValueError("bundles are not M-uniform")
        return int(sizes[0]) if len(sizes) else 0

    def all_tube_keys(self):
        return np.unique(self.keys)

    def tube_family(self):
        return TubeFamily(self.universe, self.all_tube_keys())

    def trim_uniform(self):
        """Uniformize bundle sizes to the minimum by keeping smallest keys."""
        sizes = self.bundle_sizes()
        m = int(sizes.min()) if len(sizes) else 0
        keep = np.nonzero(sizes >= max(m, 1))[0]
        keys = np.concatenate([np.sort(self.bundle(i))[:m] for i in keep]) \
            if len(keep) else np.empty(0, dtype=np.int64)
        coords = self.P.coords[keep]
        P = DiscretizedSet(self.P.level, coords, dim=self.P.dim)
        indptr = np.arange(len(keep) + 1, dtype=np.int64) * m
        return Configuration(P, self.universe, keys, indptr, self.params, uniform=True)

    def verify_meets(self, sample=200, seed=0):
        """Geometry invariant: every bundle tube meets its cube (sampled)."""
        rng = np.random.default_rng(seed)
        n_pairs = len(self.keys)
        if n_pairs == 0:
            return True
        picks = rng.integers(0, n_pairs, min(sample, n_pairs))
        rows = np.searchsorted(self.indptr, picks, side="right") - 1
        cubes = self.P.cubes()
        for j, row in zip(picks, rows):
            T = self.universe.tube(int(self.keys[j]))
            if not tube_meets_cube(T, cubes[int(row)]):
                return False
        return True


def count_incidences(cfg):
    """|I(P,T)| = sum of bundle sizes (exact)."""
    return int(len(cfg.keys))


def count_incidences_oracle(cfg):
    """Naive double loop over P x (union of tubes) testing bundle membership."""
    tube_keys = cfg.all_tube_keys()
    total = 0
    for i in range(cfg.n_points):
        bundle = set(int(k) for k in cfg.bundle(i))
        for key in tube_keys:
            if int(key) in bundle:
                total += 1
    return total


# ---------------------------------------------------------------------------
# geometric bundle construction (grid-bucket index vs naive oracle)


def bundles_from_family(P, family, bucket_side=None):
    """T(p) = {T in family : T meets p}, via a uniform grid-bucket index.

    Buckets of side 2*delta over the cube range; candidates are gathered by
    walking each tube's central line, then filtered with the exact predicate.
    Result is index-independent (the exact test decides membership).
    """
    delta = P.resolution
    side = bucket_side or 2 * delta
    centers = P.centers()
    bucket_of = {}
    for idx, c in enumerate(centers):
        bucket_of.setdefault(tuple(np.floor(c / side).astype(int)), []).append(idx)
    cubes = P.cubes()
    bundles = [[] for _ in range(len(P))]
    reach = 2  # bucket neighborhood radius covering width + cube diameter
    d = P.dim
    neighborhood = np.stack(np.meshgrid(*[np.arange(-reach, reach + 1)] * d,
                                        indexing="ij"), -1).reshape(-1, d)
    for key, tube in zip(family.keys, family.tubes()):
        t0, t1 = tube.extent
        n_steps = max(2, int(np.ceil((t1 - t0) / (delta / 2.0))))
        ts = np.linspace(t0, t1, n_steps)
        pts = tube.anchor + ts[:, None] * tube.direction
        base = np.unique(np.floor(pts / side).astype(int), axis=0)
        cand = set()
        for b in base:
            for off in neighborhood:
                lst = bucket_of.get(tuple(b + off))
                if lst:
                    cand.update(lst)
        for idx in cand:
            if tube_meets_cube(tube, cubes[idx]):
                bundles[idx].append(int(key))
    keys = np.array([k for b in bundles for k in sorted(b)], dtype=np.int64)
    indptr = np.cumsum([0] + [len(b) for b in bundles])
    return Configuration(P, family.universe, keys, indptr)


def bundles_from_family_naive(P, family):
    """Brute-force oracle: test every (cube, tube) pair."""
    cubes = P.cubes()
    bundles = [[] for _ in range(len(P))]
    for key, tube in zip(family.keys, family.tubes()):
        for idx, cube in enumerate(cubes):
            if tube_meets_cube(tube, cube):
                bundles[idx].append(int(key))
    keys = np.array([k for b in bundles for k in sorted(b)], dtype=np.int64)
    indptr = np.cumsum([0] + [len(b) for b in bundles])
    return Configuration(P, family.universe, keys, indptr)


# ---------------------------------------------------------------------------
# incidence estimates


def theta(s, t, d):
    """(d-1-t)/(d-1-s), clamped to 0 when t >= d-1 (t may run up to d)."""
    if not (0 <= s <= t <= d):
        raise ValueError("need 0 <= s <= t <= d")
    if t >= d - 1:
        return 0.0
    return (d - 1 - t) / (d - 1 - s)


@dataclass
class IncidenceReport:
    estimate: str
    lhs: float
    rhs: float
    ratio: float
    polylog_budget: float
    passed: bool
    params: dict = field(default_factory=dict)

    def to_record(self):
        return {"estimate": self.estimate, "lhs": self.lhs, "rhs": self.rhs,
                "ratio": self.ratio, "budget": self.polylog_budget,
                "pass": self.passed, "params": self.params}


def polylog_budget(delta, C):
    return C * np.log2(1.0 / delta) ** C


def _slope_chart_points(universe, keys):
    from .geometry import canonical_direction
    idx = np.array([universe.unpack(int(k))[0] for k in keys])
    dirs = universe.dirs[idx]
    dirs = np.array([canonical_direction(u) for u in dirs])
    return (dirs + 1.0) / 2.0


def bundle_slope_constant(cfg, s, sample=64, seed=0, scales=None):
    """C_T: worst non-concentration constant of bundle slope sets (chart balls).

    Bundles share a cube, so the tube-set constant agrees with the slope-chart
    ball constant up to O(1) (slope duality); sampled over bundles.
    """
    rng = np.random.default_rng(seed)
    n = cfg.n_points
    rows = rng.choice(n, size=min(sample, n), replace=False)
    level = cfg.P.level
    worst = 0.0
    for i in rows:
        keys = cfg.bundle(int(i))
        if len(keys) == 0:
            continue
        pts = _slope_chart_points(cfg.universe, keys)
        chart = DiscretizedSet.from_points(np.clip(pts, 0, 1 - 2.0 ** -40), level)
        rep = check_ball_set(chart, s, k=0, scales=scales)
        worst = max(worst, rep.C_min)
    return worst


def verify_easy_estimate(cfg, C_poly, pair_sample=1000, seed=0):
    """|I(P,T)| <= budget * sqrt(C_P C_T) (M delta^s)^{theta/2} |T|^{1/2} |P|.

    Also spot-checks the pairwise bundle-intersection bound on random cube
    pairs; the measured pairwise constant is reported in params.
    """
    s, t = cfg.params["s"], cfg.params["t"]
    d = cfg.P.dim
    delta = cfg.P.resolution
    C_P = check_ball_set(cfg.P, t, k=0).C_min
    C_T = bundle_slope_constant(cfg, s, seed=seed)
    M = cfg.M
    n_tubes = len(cfg.all_tube_keys())
    lhs = count_incidences(cfg)
    th = theta(s, t, d)
    rhs = np.sqrt(C_P * C_T) * (M * delta ** s) ** (th / 2.0) \
        * np.sqrt(n_tubes) * cfg.n_points
    budget = polylog_budget(delta, C_poly)
    ratio = lhs / rhs
    pairwise = _pairwise_spot_check(cfg, s, C_T, M, pair_sample, seed)
    return IncidenceReport("easy_estimate_upper", float(lhs), float(rhs),
                           float(ratio), float(budget), bool(ratio <= budget),
                           {"C_P": C_P, "C_T": C_T, "M": M, "|T|": n_tubes,
                            "theta": th, "pairwise_max": pairwise})


def _pairwise_spot_check(cfg, s, C_T, M, n_pairs, seed):
    """max over sampled (p,p') of |T(p) cap T(p')| / min(C_T M (delta/(dist+delta))^s,
    (1/(dist+delta))^{d-1})."""
    rng = np.random.default_rng(seed)
    n = cfg.n_points
    if n < 2:
        return 0.0
    delta = cfg.P.resolution
    d = cfg.P.dim
    centers = cfg.P.centers()
    worst = 0.0
    for _ in range(n_pairs):
        i, j = rng.integers(0, n, 2)
        if i == j:
            continue
        inter = np.intersect1d(cfg.bundle(int(i)), cfg.bundle(int(j))).size
        if inter == 0:
            continue
        dist = np.linalg.norm(centers[i] - centers[j])
        bound = min(C_T * M * (delta / (dist + delta)) ** s,
                    (1.0 / (dist + delta)) ** (d - 1))
        worst = max(worst, inter / bound)
    return float(worst)


def easy_lower_bound(cfg, C_poly):
    """|T| >= budget^{-1} (C_P C_T)^{-1} M delta^{-s} (M delta^s)^{(t-s)/(d-1-s)}."""
    s, t = cfg.params["s"], cfg.params["t"]
    d = cfg.P.dim
    delta = cfg.P.resolution
    C_P = check_ball_set(cfg.P, t, k=0).C_min
    C_T = bundle_slope_constant(cfg, s)
    M = cfg.M
    lhs = len(cfg.all_tube_keys())
    expo = (t - s) / (d - 1 - s) if d - 1 > s else 0.0
    rhs = M * delta ** (-s) * (M * delta ** s) ** expo / (C_P * C_T)
    budget = polylog_budget(delta, C_poly)
    ratio = lhs / rhs
    return IncidenceReport("easy_lower_bound", float(lhs), float(rhs), float(ratio),
                           float(budget), bool(ratio >= 1.0 / budget),
                           {"C_P": C_P, "C_T": C_T, "M": M})


def j_p_statistics(cfg):
    """j_p = #paths of length 2 through p: sum over T in T(p) of |P(T)|."""
    uniq, inv, counts = np.unique(cfg.keys, return_inverse=True, return_counts=True)
    weights = counts[inv]
    return np.add.reduceat(weights, cfg.indptr[:-1]) if len(cfg.keys) else np.zeros(0)


def j_p_oracle(cfg):
    """Brute-force j_p by pairwise bundle intersections (small instances)."""
    bundles = [set(int(k) for k in cfg.bundle(i)) for i in range(cfg.n_points)]
    out = np.zeros(cfg.n_points, dtype=np.int64)
    for i, bi in enumerate(bundles):
        out[i] = sum(len(bi & bj) for bj in bundles)
    return out


def plate_localized_lower_bound(cfg, H, r0, k, C_poly, bundle_sample=64, seed=0):
    """|T| >= budget^{-1} (C_P C_T)^{-1} M r0^{s-k} delta^{-s} for configurations
    inside an (r0,k+1)-plate, with the two-band non-concentration hypotheses
    measured through the plate rescale map; j_p statistics reported alongside."""
    s, t = cfg.params["s"], cfg.params["t"]
    delta = cfg.P.resolution
    smap = PlateMap(H)
    centers = cfg.P.centers()
    inside = H.plane_distances(centers) <= H.thickness + delta
    if not np.all(inside):
        raise ValueError("configuration is not inside the plate")
    # band 1: rescaled coordinates, r in [delta/r0, 1]
    img = smap.forward_many(centers)
    span = 8.0
    img01 = np.clip(img / span + 0.5, 0, 1 - 2.0 ** -40)
    lvl1 = max(1, dyadic_level(delta / r0))
    img_set = DiscretizedSet.from_points(img01, lvl1)
    band1 = check_ball_set(img_set, t, k=0)
    # band 2: plain balls below delta/r0
    scales2 = [2.0 ** -j for j in range(dyadic_level(delta / r0), cfg.P.level + 1)]
    band2 = check_ball_set(cfg.P, t, k=0, scales=scales2)
    C_P = max(band1.C_min, band2.C_min)
    C_T = _localized_tube_constant(cfg, s, k, r0, bundle_sample, seed)
    M = cfg.M
    lhs = len(cfg.all_tube_keys())
    rhs = M * r0 ** (s - k) * delta ** (-s) / (C_P * C_T)
    budget = polylog_budget(delta, C_poly)
    ratio = lhs / rhs
    jp = j_p_statistics(cfg)
    jp_bound = C_P * C_T * cfg.n_points * M * r0 ** (k - s) * delta ** s
    return IncidenceReport(
        "plate_localized_lower_bound", float(lhs), float(rhs), float(ratio),
        float(budget), bool(ratio >= 1.0 / budget),
        {"C_P": C_P, "C_T": C_T, "M": M, "band1": band1.C_min, "band2": band2.C_min,
         "jp_max": float(jp.max()) if len(jp) else 0.0, "jp_bound": float(jp_bound),
         "jp_ratio": float(jp.max() / jp_bound) if len(jp) else 0.0})


def _localized_tube_constant(cfg, s, k, r0, sample, seed):
    """C_T of the banded tube condition |T(p) cap T_x| <= C_T M r0^{k-s} x^s,
    via slope-chart ball counts at scales x in [delta, r0]."""
    rng = np.random.default_rng(seed)
    rows = rng.choice(cfg.n_points, size=min(sample, cfg.n_points), replace=False)
    delta = cfg.P.resolution
    M = cfg.M
    worst = 0.0
    scales = [2.0 ** -j for j in range(dyadic_level(r0), cfg.P.level + 1)]
    for i in rows:
        keys = cfg.bundle(int(i))
        if len(keys) == 0:
            continue
        pts = _slope_chart_points(cfg.universe, keys)
        chart = DiscretizedSet.from_points(np.clip(pts, 0, 1 - 2.0 ** -40), cfg.P.level)
        for x in scales:
            _, counts = chart.per_cube_counts(x)
            worst = max(worst, counts.max() / (M * r0 ** (k - s) * x ** s))
    return worst


# ---------------------------------------------------------------------------
# slice covering


MIN_SLICE_ANGLE = 1.0 / 100.0


def _check_slice_angles(family):
    d = family.universe.d
    _, dirs = family.geometry_arrays()
    sines = np.abs(dirs[:, d - 1])
    if np.any(sines < np.sin(MIN_SLICE_ANGLE)):
        raise ValueError("a tube makes angle < 1/100 with the slicing plane")


def slice_covering(family, z0, r=None):
    """delta-covering number of {x : (x, z0) in union of tubes}.

    Exact: counts grid cells whose closed cell (embedded at height z0)
    intersects some closed tube, via the convex segment-box distance.
    """
    _check_slice_angles(family)
    r = r or family.resolution
    d = family.universe.d
    hit = set()
    for tube in family.tubes():
        uz = tube.direction[d - 1]
        t_star = (z0 - tube.anchor[d - 1]) / uz
        center = (tube.anchor + t_star * tube.direction)[:d - 1]
        radius = tube.width / abs(uz) + tube.width
        lo = np.floor((center - radius) / r).astype(int)
        hi = np.floor((center + radius) / r).astype(int)
        for cell in np.ndindex(*(hi - lo + 1)):
            idx = lo + np.array(cell)
            box_lo = np.append(idx * r, z0)
            box_hi = np.append((idx + 1) * r, z0)
            dist = segment_box_distance(tube.anchor, tube.direction,
                                        tube.extent[0], tube.extent[1],
                                        box_lo, box_hi)
            if dist <= tube.width + 2.0 ** -40:
                hit.add(tuple(idx))
    return len(hit)


def slice_covering_oracle(family, z0, r=None):
    """Raster oracle at resolution r/4: a cell counts if one of its raster
    points lies inside some tube."""
    _check_slice_angles(family)
    r = r or family.resolution
    d = family.universe.d
    tubes = family.tubes()
    anchors = np.array([t.anchor for t in tubes])
    dirs = np.array([t.direction for t in tubes])
    widths = np.array([t.width for t in tubes])
    lo = np.full(d - 1, np.inf)
    hi = np.full(d - 1, -np.inf)
    for t in tubes:
        uz = t.direction[d - 1]
        c = (t.anchor + (z0 - t.anchor[d - 1]) / uz * t.direction)[:d - 1]
        rad = t.width / abs(uz) + t.width + r
        lo = np.minimum(lo, c - rad)
        hi = np.maximum(hi, c + rad)
    axes = [np.arange(lo[i], hi[i], r / 4.0) for i in range(d - 1)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d - 1)
    pts = np.concatenate([grid, np.full((len(grid), 1), z0)], axis=1)
    hit = set()
    for start in range(0, len(pts), 8192):
        chunk = pts[start:start + 8192]
        v = chunk[:, None, :] - anchors[None, :, :]
        tt = np.einsum("pnd,nd->pn", v, dirs)
        tt = np.clip(tt, -2.0, 2.0)
        closest = anchors[None, :, :] + tt[..., None] * dirs[None, :, :]
        dist = np.linalg.norm(chunk[:, None, :] - closest, axis=2)
        inside = (dist <= widths[None, :]).any(axis=1)
        for x in chunk[inside]:
            hit.add(tuple(np.floor(x[:d - 1] / r).astype(int)))
    return len(hit)


# ---------------------------------------------------------------------------
# multilinear Kakeya


def multilinear_kakeya_ratio(families, grid_resolution, window=2.0):
    """Riemann-sum LHS/RHS of the multilinear Kakeya inequality for k families
    of width-1 tubes in R^d; integration over [-window, window]^d."""
    k = len(families)
    if not families or not all(families):
        raise ValueError("need k nonempty tube families")
    d = families[0][0].dim
    if not (2 <= k <= d):
        raise ValueError("need 2 <= k <= d")
    width = families[0][0].width
    if grid_resolution > width / 8.0:
        raise ValueError("grid resolution must be <= width/8")
    axes = [np.arange(-window + grid_resolution / 2, window, grid_resolution)] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
    chis = []
    for fam in families:
        fam_chis = []
        for t in fam:
            v = grid - t.anchor
            tt = np.clip(v @ t.direction, t.extent[0], t.extent[1])
            dist2 = ((v - tt[:, None] * t.direction) ** 2).sum(1)
            fam_chis.append(dist2 <= t.width ** 2)
        chis.append(fam_chis)
    F = np.zeros(len(grid))
    from itertools import product as iproduct
    for combo in iproduct(*[range(len(f)) for f in families]):
        dirs = np.array([families[i][j].direction for i, j in enumerate(combo)])
        gram = dirs @ dirs.T
        wedge = float(np.sqrt(max(np.linalg.det(gram), 0.0)))
        if wedge == 0.0:
            continue
        mask = chis[0][combo[0]].copy()
        for i in range(1, k):
            mask &= chis[i][combo[i]]
        F[mask] += wedge
    lhs = float((F ** (1.0 / (k - 1))).sum() * grid_resolution ** d)
    rhs = float(np.prod([len(f) for f in families]) ** (1.0 / (k - 1)))
    return lhs / rhs


# ---------------------------------------------------------------------------
# exponent fitting


def furstenberg_exponent(counts_by_level):
    """OLS slope of log2(count) against level; counts_by_level maps the dyadic
    level j (delta = 2^-j) to |union T| (or |union P_t|)."""
    if len(counts_by_level) < 3:
        raise ValueError("need at least 3 scales")
    levels = np.array(sorted(counts_by_level))
    logs = np.array([np.log2(counts_by_level[j]) for j in levels])
    slope_fit, intercept = np.polyfit(levels, logs, 1)
    resid = logs - (slope_fit * levels + intercept)
    return {"exponent": float(slope_fit), "intercept": float(intercept),
            "residuals": resid.tolist(),
            "max_residual": float(np.max(np.abs(resid))),
            "power_law": bool(np.max(np.abs(resid)) <= 0.05 * max(1.0, abs(slope_fit)) * 1.0
                              or np.max(np.abs(resid)) <= 0.25),
            "n_scales": int(len(levels)),
            "few_scales_warning": len(levels) < 4}
