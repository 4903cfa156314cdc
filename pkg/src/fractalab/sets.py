"""Non-concentration checkers for discretized sets and tube families.

A (delta,s,C,k)-set of cubes has |P cap H|_delta <= C |P|_delta r^s for every
(r,k)-plate H; for tubes the shapes are (r,k+1)-plates and membership means
containment of the whole tube.  Checkers quantify over dyadic scales and net
plates only; the resulting slack is recorded in the report, never hidden.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dyadic import DiscretizedSet, DyadicCube, dyadic_level
from .geometry import CLIP_RADIUS, Plate, TubeUniverse, tube_meets_cube
from .nets import DEFAULT_BUDGET, PlateNet, PlateNetBudgetError, build_plate_net, projected_count


class TubeFamily:
    """Finite set of width-delta tubes, deduplicated against a tube universe."""

    def __init__(self, universe, keys):
        self.universe = universe
        self.keys = np.unique(np.asarray(keys, dtype=np.int64))

    @classmethod
    def from_lines(cls, universe, anchors, directions):
        return cls(universe, universe.keys_for(anchors, directions))

    @property
    def resolution(self):
        return self.universe.width

    def __len__(self):
        return len(self.keys)

    def tubes(self):
        return [self.universe.tube(int(c)) for c in self.keys]

    def geometry_arrays(self):
        """(anchors, directions) of the canonical tubes, rows aligned with keys."""
        tubes = self.tubes()
        return (np.array([t.anchor for t in tubes]),
                np.array([t.direction for t in tubes]))

    def slopes(self):
        from .geometry import canonical_direction
        _, dirs = self.geometry_arrays()
        return np.array([canonical_direction(u) for u in dirs])

    def clipped_endpoints(self):
        from .geometry import _clipped_segment_endpoints
        e1, e2 = [], []
        for t in self.tubes():
            pts = _clipped_segment_endpoints(t)
            if pts is None:
                pts = t.endpoints()
            e1.append(pts[0])
            e2.append(pts[1])
        return np.array(e1), np.array(e2)


@dataclass
class NonConcentrationReport:
    s: float
    k: int
    C_min: float
    witness: object
    witness_scale: float
    scales_tested: list
    method: str
    slack: str
    per_scale: dict = field(default_factory=dict)

    def constant_at_most(self, C):
        return self.C_min <= C


def covering_number(obj, r):
    """Dispatching |A|_r: DiscretizedSet, TubeFamily slopes, or raw points."""
    if isinstance(obj, DiscretizedSet):
        return obj.covering_number(r)
    j = dyadic_level(r)
    if isinstance(obj, TubeFamily):
        pts = (obj.slopes() + 1.0) / 2.0  # chart into [0,1)^d
        return DiscretizedSet.from_points(pts, j).covering_number(r)
    pts = np.atleast_2d(np.asarray(obj, dtype=float))
    lo = np.floor(pts.min(0))
    span = max(1.0, float(np.ceil((pts - lo).max())))
    return DiscretizedSet.from_points((pts - lo) / span, j).covering_number(r)


def dyadic_scales(level, coarse_level=0):
    return [2.0 ** -j for j in range(level, coarse_level - 1, -1)]


def feasible_net_scales(level, k, d, budget=DEFAULT_BUDGET, max_scales=8):
    """Dyadic r in (2^-level, 1] whose (r,k)-net fits the budget, coarse first."""
    out = []
    for j in range(0, level + 1):
        r = 2.0 ** -j
        if projected_count(r, k, d) <= budget:
            out.append(r)
        else:
            break
    return out[:max_scales]


def default_nets(level, k, d, budget=DEFAULT_BUDGET, seed=0, scales=None):
    scales = scales or feasible_net_scales(level, k, d, budget)
    return {r: build_plate_net(r, k, d, seed=seed, budget=budget) for r in scales}


def check_ball_set(P, s, k=0, nets=None, scales=None):
    """Measure the best non-concentration constant of P against (r,k)-plates.

    k=0 without nets uses exact dyadic-cube counting (a factor <= 2^d from the
    ball-based definition, recorded as slack).  Otherwise nets map scale -> PlateNet.
    """
    if len(P) == 0:
        raise ValueError("empty set")
    n = len(P)
    per_scale = {}
    best = (0.0, None, None)
    if k == 0 and nets is None:
        scales = scales or dyadic_scales(P.level)
        for r in scales:
            coords, counts = P.per_cube_counts(r)
            i = int(np.argmax(counts))
            ratio = counts[i] / (n * r ** s)
            per_scale[r] = float(ratio)
            if ratio > best[0]:
                cube = DyadicCube(dyadic_level(r), tuple(int(z) for z in coords[i]))
                best = (float(ratio), cube, r)
        return NonConcentrationReport(s, k, best[0], best[1], best[2],
                                      list(per_scale), "dyadic-cubes",
                                      "<= 2^d vs ball plates", per_scale)
    if nets is None:
        nets = default_nets(P.level, k, P.dim)
    if not nets:
        raise ValueError("no net scales available for this (k, d, resolution)")
    centers = P.centers()
    for r, net in sorted(nets.items(), reverse=True):
        counts = net.point_counts(centers)
        idx = np.unravel_index(int(np.argmax(counts)), counts.shape)
        ratio = counts[idx] / (n * r ** s)
        per_scale[r] = float(ratio)
        if ratio > best[0]:
            best = (float(ratio), net.plate(*idx), r)
    return NonConcentrationReport(s, k, best[0], best[1], best[2],
                                  list(per_scale), "plate-net",
                                  "<= 2^s * C_net covering slack", per_scale)


def _net_tube_counts(net, e1, e2, width):
    """Tubes fully inside each net plate, via clipped segment endpoints."""
    thr = net.r - width + 2.0 ** -40
    if thr <= 0:
        return np.zeros((net.n_directions, net.n_offsets), dtype=np.int64)
    out = np.empty((net.n_directions, net.n_offsets), dtype=np.int64)
    for i in range(net.n_directions):
        offs = net.offset_ints * net.h
        y1 = e1 @ net.comps[i].T
        y2 = e2 @ net.comps[i].T
        d1 = ((y1[:, None, :] - offs[None, :, :]) ** 2).sum(-1)
        d2 = ((y2[:, None, :] - offs[None, :, :]) ** 2).sum(-1)
        out[i] = ((d1 <= thr * thr) & (d2 <= thr * thr)).sum(0)
    return out


def check_tube_set(T, s, k=0, nets=None, scales=None, band=None,
                   budget=DEFAULT_BUDGET):
    """Non-concentration of a tube family against (r,k+1)-plates.

    band=(r2, r1) restricts to the scale-banded definition.  Tested scales are
    the net-feasible dyadic r (recorded in the report).
    """
    if len(T) == 0:
        raise ValueError("empty family")
    d = T.universe.d
    if k > d - 2:
        raise ValueError("need k <= d-2")
    level = dyadic_level(T.resolution)
    if nets is None:
        scales = scales or feasible_net_scales(level, k + 1, d, budget)
        if band is not None:
            scales = [r for r in scales if band[0] <= r <= band[1]]
        nets = {r: build_plate_net(r, k + 1, d, budget=budget) for r in scales}
    if not nets:
        raise ValueError("no net scales available in the requested band")
    e1, e2 = T.clipped_endpoints()
    n = len(T)
    per_scale = {}
    best = (0.0, None, None)
    for r, net in sorted(nets.items(), reverse=True):
        counts = _net_tube_counts(net, e1, e2, T.resolution)
        idx = np.unravel_index(int(np.argmax(counts)), counts.shape)
        ratio = counts[idx] / (n * r ** s)
        per_scale[r] = float(ratio)
        if ratio > best[0]:
            best = (float(ratio), net.plate(*idx), r)
    return NonConcentrationReport(s, k, best[0], best[1], best[2],
                                  list(per_scale), "plate-net tubes",
                                  "<= 2^s * C_net covering slack", per_scale)


def check_regular(P, s, C, K):
    """(delta,s,C,K)-regular: a (delta,s,C,0)-set whose sqrt(delta)-covering is
    at most K * delta^{-s/2}."""
    if P.level % 2:
        raise ValueError("regularity needs an even level so sqrt(delta) is dyadic")
    rep = check_ball_set(P, s, k=0)
    half = 2.0 ** (-P.level // 2)
    coarse = P.covering_number(half)
    bound = K * (2.0 ** (P.level * s / 2.0))
    ok = rep.C_min <= C and coarse <= bound
    return ok, {"ball_constant": rep.C_min, "half_scale_count": int(coarse),
                "half_scale_bound": float(bound), "report": rep}


def slope_chart_set(T, level=None):
    """Slopes of T as a discretized subset of [0,1)^{d} via the (x+1)/2 chart."""
    level = level or dyadic_level(T.resolution)
    pts = (T.slopes() + 1.0) / 2.0
    return DiscretizedSet.from_points(np.clip(pts, 0, 1 - 2.0 ** -40), level)


def verify_slope_duality(T, p, s, k=0, nets=None, scales=None, budget=DEFAULT_BUDGET):
    """Compare C (tube non-concentration) with C' (slope non-concentration).

    Requires every tube of T to meet the cube p.  Returns a report with both
    constants and their measured ratio C_dual.
    """
    for t in T.tubes():
        if not tube_meets_cube(t, p):
            raise ValueError("all tubes must meet the anchor cube")
    rep_t = check_tube_set(T, s, k=k, nets=nets, scales=scales, budget=budget)
    chart = slope_chart_set(T)
    rep_s = check_ball_set(chart, s, k=k) if k == 0 else check_ball_set(
        chart, s, k=k, nets=default_nets(chart.level, k, chart.dim, budget))
    c_dual = max(rep_t.C_min / rep_s.C_min, rep_s.C_min / rep_t.C_min)
    return {"C_tubes": rep_t.C_min, "C_slopes": rep_s.C_min, "C_dual": float(c_dual),
            "tube_report": rep_t, "slope_report": rep_s}


def prune_to_small_set(P, s, C=None):
    """Greedy coarse-to-fine thinning to |P'| <= ceil(delta^{-s}) keeping the
    (delta,s,O(C),0)-set property: per level-j cube the count is capped at
    ceil(delta^{-s} r^s) = ceil(2^{(m-j)s}), lexicographically-first survivors."""
    if C is not None:
        rep = check_ball_set(P, s, k=0)
        if rep.C_min > C * (1 + 2.0 ** -30):
            raise ValueError(f"P is not a (delta,{s},{C})-set: measured {rep.C_min}")
    m = P.level
    coords = P.coords.copy()
    for j in range(0, m + 1):
        cap = int(np.ceil(2.0 ** ((m - j) * s)))
        anc = coords >> (m - j)
        # stable grouping: coords are lex-sorted, so ancestors appear in runs
        _, starts, counts = np.unique(anc, axis=0, return_index=True,
                                      return_counts=True)
        keep = np.ones(len(coords), dtype=bool)
        for st, ct in zip(starts, counts):
            if ct > cap:
                keep[st + cap: st + ct] = False
        coords = coords[keep]
    return DiscretizedSet(m, coords, dim=P.dim)
