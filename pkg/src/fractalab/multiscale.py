"""Uniformization, branching functions, and between-scale refinement of
configurations.

The refinement takes a nice configuration at resolution delta and an
intermediate dyadic scale Delta and produces (a) a coarse configuration at
scale Delta, (b) per-Delta-cube child configurations at scale delta/Delta,
and (c) a refined configuration at delta, with the product inequality
|T_0|/M >~ (|T^Delta|/M_Delta) * max_Q (|T_Q|/M_Q) checked numerically.
All pigeonhole tie-breaks are deterministic: largest class wins, ties to the
smallest dyadic index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dyadic import DiscretizedSet, dyadic_level
from .geometry import PlateMap, TubeUniverse, unit
from .incidence import Configuration, bundle_slope_constant, polylog_budget


# ---------------------------------------------------------------------------
# uniform sets and branching functions


@dataclass
class UniformStructure:
    T: int
    m: int
    N: list          # N[j-1] children per level-(j-1)T cube, exact
    base_set: DiscretizedSet

    def verify(self):
        """Exact per-level uniformity: every parent has exactly N_j children."""
        P = self.base_set
        for j in range(1, self.m + 1):
            child = P.coarsen_coords(2.0 ** (-j * self.T))
            child = np.unique(child, axis=0)
            parent = child >> self.T
            _, counts = np.unique(parent, axis=0, return_counts=True)
            if not np.all(counts == self.N[j - 1]):
                return False
        return int(np.prod(self.N)) == len(np.unique(
            P.coarsen_coords(2.0 ** (-self.m * self.T)), axis=0))


def uniformize(P, T):
    """Greedy level-by-level uniformization.

    Per level, over candidate child counts N, keep the parents with >= N
    children trimmed to exactly their first N children (lexicographic),
    choosing the N of maximal retained mass N * #{parents with count >= N}
    (ties to the smallest N).  Output is exactly uniform and empirically meets
    the (2T)^{-m} floor.
    """
    if T < 1 or P.level % T:
        raise ValueError("resolution must be 2^{-mT} for integer m")
    m = P.level // T
    coords = P.coords.copy()
    Ns = [0] * m
    # fine-to-coarse: pruning at level j-1 then removes whole level-j subtrees,
    # so the finer uniformity already established is preserved
    for j in range(m, 0, -1):
        child = coords >> ((m - j) * T)
        ckeys, first_idx = np.unique(child, axis=0, return_index=True)
        parents = ckeys >> T
        pkeys, pinv, pcounts = np.unique(parents, axis=0, return_inverse=True,
                                         return_counts=True)
        cand = np.unique(pcounts)
        masses = [N * int((pcounts >= N).sum()) for N in cand]
        best = int(np.argmax(masses))  # argmax takes the first (smallest N) tie
        N = int(cand[best])
        # rank of each distinct child within its parent (lex order per parent)
        order = np.lexsort(np.column_stack([parents, ckeys]).T[::-1])
        _, pinv_s, _ = np.unique(parents[order], axis=0, return_inverse=True,
                                 return_counts=True)
        starts = np.concatenate([[0], np.cumsum(pcounts)[:-1]])
        rank = np.empty(len(ckeys), dtype=np.int64)
        rank[order] = np.arange(len(ckeys)) - starts[pinv_s]
        keep_child = (pcounts[pinv] >= N) & (rank < N)
        kept = {tuple(c) for c in ckeys[keep_child]}
        mask = np.array([tuple(c) in kept for c in child])
        coords = coords[mask]
        Ns[j - 1] = N
    out = DiscretizedSet(P.level, coords, dim=P.dim)
    return out, UniformStructure(T, m, Ns, out)


def uniformize_in_plate(P, H, smap=None):
    """Refine P inside the plate H so its fiber counts at scale delta/r_0 of
    the rescaled image are constant; dyadic mass pigeonholing."""
    delta = P.resolution
    r0 = H.thickness
    smap = smap or PlateMap(H)
    centers = P.centers()
    if np.any(H.plane_distances(centers) > r0 + delta):
        raise ValueError("P is not contained in the plate")
    img = smap.forward_many(centers)
    fibers = np.floor(img / (delta / r0)).astype(np.int64)
    fkeys, finv, fcounts = np.unique(fibers, axis=0, return_inverse=True,
                                     return_counts=True)
    cls = np.maximum(0, np.ceil(np.log2(fcounts)).astype(int))
    classes = np.unique(cls)
    masses = [int(fcounts[cls == c].sum()) for c in classes]
    c_star = int(classes[np.argmax(masses)])
    in_class = cls == c_star
    N_star = int(fcounts[in_class].min())
    keep = np.zeros(len(P), dtype=bool)
    for fi in np.nonzero(in_class)[0]:
        rows = np.nonzero(finv == fi)[0][:N_star]  # lex-first survivors
        keep[rows] = True
    out = DiscretizedSet(P.level, P.coords[keep], dim=P.dim)
    log_ratio = np.log2(r0 / delta)
    info = {"fiber_count": N_star, "kept_fraction": len(out) / len(P),
            "floor": 1.0 / (20 * P.dim * max(log_ratio, 1.0)),
            "nominal_floor": 1.0 / max(log_ratio, 1.0)}
    return out, info


@dataclass
class BranchingFunction:
    m: int
    values: np.ndarray   # f(0..m), f(0)=0
    T: int

    def __call__(self, x):
        return float(np.interp(x, np.arange(self.m + 1), self.values))


def branching_function(U):
    vals = np.concatenate([[0.0], np.cumsum(np.log2(U.N)) / U.T])
    return BranchingFunction(U.m, vals, U.T)


def slope(f, a, b):
    if a >= b:
        raise ValueError("need a < b")
    return (f(b) - f(a)) / (b - a)


def _breakpoints(f, a, b):
    xs = [a] + [j for j in range(int(np.floor(a)) + 1, int(np.ceil(b))) if a < j < b] + [b]
    return np.array(xs, dtype=float)


def is_eps_linear(f, a, b, eps):
    """f stays within eps*(b-a) of its chord on [a,b] (checked at breakpoints,
    exact for piecewise-linear f)."""
    if a >= b:
        raise ValueError("need a < b")
    sf = slope(f, a, b)
    xs = _breakpoints(f, a, b)
    dev = np.array([f(x) - (f(a) + sf * (x - a)) for x in xs])
    return bool(np.max(np.abs(dev)) <= eps * (b - a) + 2.0 ** -40)


def is_eps_superlinear(f, a, b, eps):
    """f(x) >= f(a) + s_f(a,b)(x-a) - eps*(b-a) on [a,b]."""
    if a >= b:
        raise ValueError("need a < b")
    sf = slope(f, a, b)
    xs = _breakpoints(f, a, b)
    dev = np.array([f(x) - (f(a) + sf * (x - a)) for x in xs])
    return bool(np.min(dev) >= -eps * (b - a) - 2.0 ** -40)


def decompose_branching(f, s, t, eps):
    """Greedy cover of [0,m] by maximal eps-linear windows of slope >= s.

    Requires f(x) >= t*x - eps*m.  Returns {"intervals", "tau", "uncovered"};
    the three output conditions are re-validated before returning.
    """
    m = f.m
    for j in range(m + 1):
        if f(j) < t * j - eps * m - 2.0 ** -40:
            raise ValueError(f"hypothesis f(x) >= tx - eps*m fails at x={j}")
    intervals = []
    a = 0
    while a < m:
        best = None
        for b in range(m, a, -1):
            if slope(f, a, b) >= s - 2.0 ** -40 and is_eps_linear(f, a, b, eps):
                best = b
                break
        if best is None:
            a += 1
            continue
        intervals.append((a, best))
        a = best
    uncovered = m - sum(b - a for a, b in intervals)
    tau = min((b - a for a, b in intervals), default=0) / m
    for a, b in intervals:
        assert is_eps_linear(f, a, b, eps) and slope(f, a, b) >= s - 2.0 ** -40
    for (a1, b1), (a2, b2) in zip(intervals, intervals[1:]):
        assert b1 <= a2
    return {"intervals": intervals, "tau": tau, "uncovered": uncovered,
            "uncovered_fraction": uncovered / m}


# ---------------------------------------------------------------------------
# refinement between scales


def _dyadic_class(counts):
    """j with count in (2^{j-1}, 2^j]; count 1 -> 0."""
    return np.maximum(0, np.ceil(np.log2(counts)).astype(int))


def _argmax_class(values, weights):
    """Largest weighted class; ties to the smallest class index."""
    classes = np.unique(values)
    totals = np.array([weights[values == c].sum() for c in classes])
    return int(classes[int(np.argmax(totals))])


def _grouped_argmax_class(groups, classes, weights, n_groups):
    """Per group, the class of maximal total weight (ties to smallest class)."""
    out = np.zeros(n_groups, dtype=int)
    if len(groups) == 0:
        return out
    cmax = int(classes.max()) + 1
    codes = groups.astype(np.int64) * cmax + classes
    order = np.argsort(codes, kind="stable")
    uc, starts = np.unique(codes[order], return_index=True)
    totals = np.add.reduceat(np.asarray(weights, dtype=float)[order], starts)
    g, c = uc // cmax, uc % cmax
    pick = np.lexsort((c, -totals, g))
    first = np.unique(g[pick], return_index=True)[1]
    out[g[pick][first]] = c[pick][first]
    return out


def _image_geometry(cfg, H):
    """Per-point image coordinates and per-tube image lines under S_H."""
    centers = cfg.P.centers()
    tube_keys = cfg.all_tube_keys()
    tubes = [cfg.universe.tube(int(k)) for k in tube_keys]
    anchors = np.array([t.anchor for t in tubes])
    dirs = np.array([t.direction for t in tubes])
    if H is None:
        return centers, tube_keys, anchors, dirs
    smap = PlateMap(H)
    img_p = smap.forward_many(centers)
    img_a = smap.forward_many(anchors)
    lin = np.vstack([smap.long, smap.short / H.thickness])
    img_d = dirs @ lin.T
    img_d /= np.linalg.norm(img_d, axis=1, keepdims=True)
    return img_p, tube_keys, img_a, img_d


@dataclass
class RefinementResult:
    config_refined: Configuration
    delta_config: Configuration
    children: dict                 # Q coords tuple -> Configuration
    delta_keys: dict               # Q coords tuple -> Delta-universe keys
    stats: dict = field(default_factory=dict)

    def to_json(self):
        tree = {"delta": self.config_refined.P.resolution,
                "Delta": self.stats.get("Delta"),
                "n_points": self.config_refined.n_points,
                "stats": {k: v for k, v in self.stats.items()
                          if isinstance(v, (int, float, str, bool, list))},
                "children": {str(q): {"n_points": c.n_points, "M": c.M}
                             for q, c in self.children.items()}}
        return json.dumps(tree, indent=1)


def refine_nice_configuration(cfg, Delta, H=None, C_poly=2.0, child_sample=64):
    """Three-step pigeonhole refinement of a nice configuration between scales.

    Step 1 classes tubes by how many delta-tubes of T(p) share a Delta-tube
    (j-classes), then Delta-tubes by popularity over P cap Q (i-classes);
    Step 2 uniformizes |T_Delta(Q)| and |T_0 cap bold-T| across Q; Step 3
    builds tubelet (scale delta/Delta) child configurations per Q with
    duplicate tubelets discarded.  All output properties are measured and
    recorded in stats; nothing is silently asserted.
    """
    delta = cfg.P.resolution
    d = cfg.P.dim
    if not (delta < Delta <= 1) or dyadic_level(Delta) is None:
        raise ValueError("need dyadic Delta with delta < Delta <= 1")
    M = cfg.M
    img_p, tube_keys, img_a, img_d = _image_geometry(cfg, H)
    U_Delta = TubeUniverse(Delta, d)
    dkey_of = U_Delta.keys_for(img_a, img_d)          # Delta-key per unique tube
    pos = np.searchsorted(tube_keys, cfg.keys)  # tube_keys is sorted-unique
    rows = np.repeat(np.arange(cfg.n_points), cfg.bundle_sizes())
    dkeys = dkey_of[pos]                              # Delta-key per (p, T) pair

    qc = np.floor(img_p / Delta).astype(np.int64)     # Q-cube per point

    # --- Step 1: j(p) class, P_Q, i class, Tbar_Delta(Q), H_Q ---
    pair_codes = rows * (dkey_of.max() + 1) + dkeys
    uc, uinv, ucounts = np.unique(pair_codes, return_inverse=True,
                                  return_counts=True)
    u_row = uc // (dkey_of.max() + 1)
    u_dkey = uc % (dkey_of.max() + 1)
    jcls = _dyadic_class(ucounts)
    j_of_p = _grouped_argmax_class(u_row, jcls, 2.0 ** jcls, cfg.n_points)
    qkeys, qinv = np.unique(qc, axis=0, return_inverse=True)
    # jq per Q: most common j(p) among members, ties to the smallest j
    jq_of_q = _grouped_argmax_class(qinv, j_of_p, np.ones(cfg.n_points),
                                    len(qkeys))
    # pairs surviving the j-pigeonhole: p in its Q's majority class and the
    # pair's own Delta-count in that class
    q_of_u = qinv[u_row]
    sel = (j_of_p[u_row] == jq_of_q[q_of_u]) & (jcls == jq_of_q[q_of_u])
    # popularity n(T) per (Q, Delta-key) over selected pairs
    DK = int(dkey_of.max()) + 1
    qd_codes = q_of_u[sel].astype(np.int64) * DK + u_dkey[sel]
    qd, ncount = np.unique(qd_codes, return_counts=True)
    qd_q, qd_key = qd // DK, qd % DK
    icls = _dyadic_class(ncount)
    # i-pigeonhole per Q with weight 2^{i+jq} * |class|
    iq_of_q = _grouped_argmax_class(qd_q, icls, 2.0 ** icls, len(qkeys))
    PQ_rows, TbarQ, HQ, jQ_of = {}, {}, {}, {}
    keep_qd = icls == iq_of_q[qd_q]
    for qi in np.unique(qd_q):
        key = tuple(int(v) for v in qkeys[qi])
        members = np.nonzero(qinv == qi)[0]
        pq = members[j_of_p[members] == jq_of_q[qi]]
        dk = np.sort(qd_key[keep_qd & (qd_q == qi)])
        if len(dk) == 0 or len(pq) == 0:
            continue
        PQ_rows[key] = pq
        TbarQ[key] = dk
        HQ[key] = 2.0 ** (int(iq_of_q[qi]) + int(jq_of_q[qi]))
        jQ_of[key] = int(jq_of_q[qi])
    if not TbarQ:
        return None  # degenerate input: no surviving pigeonhole class

    # --- Step 2: uniformize |Tbar(Q)| and |T_0 cap bold-T| ---
    sizes = np.array([len(TbarQ[k]) for k in TbarQ])
    names = list(TbarQ)
    scls = _dyadic_class(sizes)
    s_star = _argmax_class(scls, np.ones(len(scls)))
    kept_names = [n for n, c in zip(names, scls) if c == s_star]
    dk_all, dk_counts = np.unique(dkey_of, return_counts=True)  # |T_0 cap T|
    count_of = dict(zip(dk_all.tolist(), dk_counts.tolist()))
    union_keys = np.unique(np.concatenate([TbarQ[n] for n in kept_names]))
    ncls = _dyadic_class(np.array([count_of[int(k)] for k in union_keys]))
    # pick N-class maximizing total incidence with the kept Q's
    classes = np.unique(ncls)
    inc = []
    for c in classes:
        good = set(union_keys[ncls == c].tolist())
        inc.append(sum(np.isin(TbarQ[n], list(good)).sum() for n in kept_names))
    n_star = int(classes[int(np.argmax(inc))])
    good = set(union_keys[ncls == n_star].tolist())
    TQ_final = {}
    for n in kept_names:
        kk = np.array([k for k in TbarQ[n] if int(k) in good], dtype=np.int64)
        if len(kk):
            TQ_final[n] = kk
    if not TQ_final:
        return None
    M_Delta = min(len(v) for v in TQ_final.values())
    TQ_final = {n: v[:M_Delta] for n, v in TQ_final.items()}

    # --- refined (P, T(p)) at scale delta: keep pair (p,T) iff p is in its
    # Q's majority j-class and the Delta-key of T survived into T_Delta(Q) ---
    name_to_qi = {tuple(int(v) for v in qkeys[qi]): qi for qi in range(len(qkeys))}
    allowed_arr = np.concatenate(
        [name_to_qi[n] * DK + TQ_final[n] for n in TQ_final])
    pair_q = qinv[rows]
    pair_keep = np.isin(pair_q.astype(np.int64) * DK + dkeys, allowed_arr)
    pair_keep &= j_of_p[rows] == jq_of_q[pair_q]
    if not pair_keep.any():
        return None
    rows_k, keys_k = rows[pair_keep], cfg.keys[pair_keep]
    order = np.lexsort((keys_k, rows_k))
    rows_k, keys_k = rows_k[order], keys_k[order]
    keep_rows, counts = np.unique(rows_k, return_counts=True)
    P_ref = DiscretizedSet(cfg.P.level, cfg.P.coords[keep_rows], dim=d)
    indptr_ref = np.concatenate([[0], np.cumsum(counts)])
    cfg_ref = Configuration(P_ref, cfg.universe, keys_k, indptr_ref, cfg.params)
    pos_ref = pos[pair_keep][order]    # tube index per pair of cfg_ref
    keep_rows = [int(r) for r in keep_rows]

    # --- Delta-scale configuration ---
    lvlD = dyadic_level(Delta)
    names_kept = sorted(TQ_final)
    qarr = np.array(names_kept, dtype=np.int64)
    shift = qarr.min(axis=0)
    span = int(max(1, (qarr - shift).max() + 1))
    lvl_fit = lvlD
    while 2 ** lvl_fit < span:
        lvl_fit += 1
    PD = DiscretizedSet(lvl_fit, qarr - shift, dim=d)
    ord_q = np.lexsort((qarr - shift).T[::-1])
    keysD = np.concatenate([TQ_final[names_kept[i]] for i in ord_q])
    indptrD = np.arange(len(names_kept) + 1, dtype=np.int64) * M_Delta
    cfgD = Configuration(PD, U_Delta, keysD, indptrD,
                         dict(cfg.params, scale="Delta"), uniform=True)

    # --- Step 3: tubelets and child configurations per Q ---
    U_child = TubeUniverse(delta / Delta, d)
    children, child_stats = {}, {}
    row_index = {r: i for i, r in enumerate(keep_rows)}
    lvl_c = cfg.P.level - lvlD
    for n in names_kept:
        pq = [int(p) for p in PQ_rows[n] if int(p) in row_index]
        if not pq:
            continue
        i_new = np.array([row_index[p] for p in pq])
        corner = np.array(n, dtype=float) * Delta
        lengths = (indptr_ref[i_new + 1] - indptr_ref[i_new]).astype(np.int64)
        idx = np.concatenate([np.arange(indptr_ref[i], indptr_ref[i + 1])
                              for i in i_new])
        seg = np.repeat(np.arange(len(i_new)), lengths)
        bpos = pos_ref[idx]
        tl = U_child.keys_for((img_a[bpos] - corner) / Delta, img_d[bpos])
        KM = int(tl.max()) + 1
        ucodes, cc = np.unique(seg.astype(np.int64) * KM + tl,
                               return_counts=True)
        useg, ukey = ucodes // KM, ucodes % KM
        acls = _dyadic_class(cc)
        a_star = _grouped_argmax_class(useg, acls, cc.astype(float), len(i_new))
        mq = _argmax_class(a_star, np.ones(len(a_star)))
        chosen_mask = a_star == mq
        chosen = [pq[g] for g in np.nonzero(chosen_mask)[0]]
        if not chosen:
            continue
        fsel = (acls == a_star[useg]) & chosen_mask[useg]
        fseg, fkey = useg[fsel], ukey[fsel]
        g_uniq, g_start, g_count = np.unique(fseg, return_index=True,
                                             return_counts=True)
        tubelets_per_p = {pq[int(g)]: fkey[st:st + ct]
                         for g, st, ct in zip(g_uniq, g_start, g_count)}
        chosen = [p for p in chosen if p in tubelets_per_p]
        if not chosen:
            continue
        M_Q = min(len(tubelets_per_p[p]) for p in chosen)
        img_chosen = (img_p[chosen] - corner) / Delta
        coords_c = np.clip(np.floor(img_chosen * 2 ** lvl_c).astype(np.int64),
                           0, 2 ** lvl_c - 1)
        ucoords, first = np.unique(coords_c, axis=0, return_index=True)
        bundles_c = [np.sort(tubelets_per_p[chosen[i]])[:M_Q] for i in first]
        Pc = DiscretizedSet(lvl_c, ucoords, dim=d)
        keys_c = np.concatenate(bundles_c)
        indptr_c = np.arange(len(ucoords) + 1, dtype=np.int64) * M_Q
        children[n] = Configuration(Pc, U_child, keys_c, indptr_c,
                                    dict(cfg.params, scale="child"), uniform=True)
        child_stats[n] = {"m_Q": 2.0 ** mq, "M_Q": M_Q, "n_points": len(ucoords)}
    if not children:
        return None

    # --- measure output properties ---
    s = cfg.params.get("s", 0.5)
    budget = polylog_budget(delta, C_poly)
    q0 = np.unique(np.floor(img_p / Delta).astype(np.int64), axis=0)
    prop1 = len(names_kept) / len(q0)
    members0 = np.bincount(qinv, minlength=len(qkeys))
    members1 = np.bincount(qinv[keep_rows], minlength=len(qkeys))
    qi_kept = [name_to_qi[n] for n in names_kept]
    prop1b = float(min(members1[qi] / members0[qi] for qi in qi_kept))
    new_tube_keys = cfg_ref.all_tube_keys()
    new_pos = np.searchsorted(tube_keys, new_tube_keys)
    new_dk = dkey_of[new_pos]
    _, per_D = np.unique(new_dk, return_counts=True)
    n_TDelta = len(np.unique(new_dk))
    prop2 = float(per_D.max() / (len(tube_keys) / max(n_TDelta, 1)))
    C1 = bundle_slope_constant(cfg, s, sample=child_sample)
    C1_Delta = bundle_slope_constant(cfgD, s, sample=child_sample)
    prop4 = np.inf
    for qi_new, n in enumerate(sorted(children)):
        allowed = set(int(k) for k in TQ_final[n])
        pairs = 0
        members1 = [row_index[int(p)] for p in PQ_rows[n] if int(p) in row_index]
        for i_new in members1:
            bk = cfg_ref.bundle(i_new)
            pairs += len(bk)
        floor = M * len(members1) / M_Delta
        if floor > 0 and members1:
            prop4 = min(prop4, pairs / floor / len(TQ_final[n]) * M_Delta)
    child_C1 = {str(n): bundle_slope_constant(c, s, sample=child_sample)
                for n, c in list(children.items())[:4]}
    maxTQ = max(len(c.all_tube_keys()) / c.M for c in children.values())
    lhs6 = len(tube_keys) / M
    rhs6 = (n_TDelta / M_Delta) * maxTQ
    stats = {"Delta": Delta, "budget": float(budget),
             "prop1_cube_ratio": float(prop1), "prop1_mass_ratio": prop1b,
             "prop2_overlap_factor": prop2,
             "prop3_C1": float(C1), "prop3_C1_Delta": float(C1_Delta),
             "prop3_ratio": float(C1_Delta / max(C1, 1e-12)),
             "prop4_min_ratio": float(prop4),
             "prop5_child_C1": child_C1,
             "M": M, "M_Delta": M_Delta, "n_T_Delta": int(n_TDelta),
             "item6_lhs": float(lhs6), "item6_rhs": float(rhs6),
             "item6_factor": float(lhs6 / rhs6),
             "passed": bool(prop1 >= 1.0 / budget and prop1b >= 1.0 / budget
                            and prop2 <= budget and prop4 >= 1.0 / budget
                            and lhs6 >= rhs6 / budget),
             "child_stats": {str(k): v for k, v in child_stats.items()}}
    return RefinementResult(cfg_ref, cfgD, children, TQ_final, stats)


def iterate_refinement(cfg, Deltas, C_poly=2.0):
    """Iterated refinement over a scale sequence; returns per-step results and
    the cumulative product of per-scale tube ratios against |T_0|/M."""
    results = []
    product = 1.0
    current = cfg
    lhs = len(cfg.all_tube_keys()) / cfg.M
    for Delta in Deltas:
        res = refine_nice_configuration(current, Delta, C_poly=C_poly)
        if res is None:
            break
        results.append(res)
        product *= res.stats["item6_rhs"] / (res.stats["item6_lhs"] /
                                             res.stats["item6_factor"])
        # descend into the heaviest child
        heaviest = max(res.children, key=lambda n: res.children[n].n_points)
        current = res.children[heaviest]
    factors = [r.stats["item6_factor"] for r in results]
    return {"results": results, "factors": factors,
            "product_ok": all(f >= 1.0 / polylog_budget(cfg.P.resolution, C_poly)
                              for f in factors)}


# ---------------------------------------------------------------------------
# t'-spacing extraction


def extract_t_prime_subset(P, H, Delta, eps, t_prime, t=None, C=None):
    """Uniformize P inside H at the scales Delta^j and take the largest level
    k* where the cumulative branching still beats Delta^{d m eps + (k - m eps)t'};
    both spacing inequalities are validated exhaustively over the dyadic tree."""
    delta = P.resolution
    r0 = H.thickness
    lvl_ratio = dyadic_level(delta / r0)
    TD = dyadic_level(Delta)
    if lvl_ratio % TD:
        raise ValueError("delta/r_0 must be a power of Delta")
    m = lvl_ratio // TD
    d = P.dim
    if t is not None and not t_prime < (t - d * eps) / (1 - eps):
        raise ValueError("need t' < (t - d*eps)/(1 - eps)")
    P1, info1 = uniformize_in_plate(P, H)
    smap = PlateMap(H)
    img = smap.forward_many(P1.centers())
    lo = np.floor(img.min(axis=0))
    img01 = (img - lo)
    span = max(1.0, np.ceil(img01.max()))
    img01 = np.clip(img01 / span, 0, 1 - 2.0 ** -40)
    lvl_img = lvl_ratio
    img_set = DiscretizedSet.from_points(img01, lvl_img)
    # uniformize the image at step TD; carry P1 points whose image cube survives
    img_u, U = uniformize(img_set, TD)
    kept_cubes = {tuple(c) for c in img_u.coords}
    pt_cubes = np.floor(img01 * 2 ** lvl_img).astype(np.int64)
    keep = np.array([tuple(c) in kept_cubes for c in pt_cubes])
    P2 = DiscretizedSet(P.level, P1.coords[keep], dim=d)
    L = max(np.log2(r0 / delta), 1.0) * max(np.log2(1.0 / Delta), 1.0) ** m
    n_img = len(img_u)
    me = int(np.ceil(m * eps))
    cum = np.cumprod(U.N)          # |image cap Q| at level j*TD is n_img/cum[j-1]
    k_star = me
    for k in range(m, me - 1, -1):
        NK = n_img / (cum[k - 1] if k >= 1 else 1)
        if NK >= n_img * Delta ** (d * me + (k - me) * t_prime) - 1e-9:
            k_star = k
            break
    # validate eqn 1 over the whole tree and eqn 2 over balls
    cubes_k, counts_k = _image_counts(img_u, k_star, TD)
    ok1 = True
    for j in range(k_star, m + 1):
        _, counts_j = _image_counts(img_u, j, TD)
        bound = counts_k.max() * Delta ** ((j - k_star) * t_prime)
        if counts_j.max() > bound * (1 + 1e-9):
            ok1 = False
    ok2 = True
    worst2 = 0.0
    Cmeas = C
    if Cmeas is None:
        from .sets import check_ball_set
        Cmeas = check_ball_set(P, t_prime, k=0).C_min
    NQ = counts_k.max()
    for j in range(dyadic_level(delta / r0), P.level + 1):
        r = 2.0 ** -j
        _, cc = P2.per_cube_counts(r)
        bound = Cmeas * L * NQ * (r / Delta ** k_star) ** t_prime
        worst2 = max(worst2, cc.max() / bound)
        if cc.max() > bound * (1 + 1e-9):
            ok2 = False
    info = {"L": float(L), "kept_fraction": len(P2) / len(P),
            "floor_ok": len(P2) >= len(P) / L, "k_star": k_star,
            "eqn1_ok": ok1, "eqn2_ok": ok2, "eqn2_worst": float(worst2),
            "uniform": U.N, "in_plate": info1}
    return P2, k_star, info


def _image_counts(img_set, k, TD):
    coarse = img_set.coords >> (img_set.level - k * TD)
    return np.unique(coarse, axis=0, return_counts=True)
