"""Delta-discretized additive combinatorics.

Restricted sumsets, Ruzsa/Pluennecke verification, ring sets, iterated
sum-product closure, the constructive Balog-Szemeredi-Gowers extraction, and
the probabilistic event-intersection bound.  Point sets are float arrays;
delta-covering numbers are computed by exact cube hashing.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

MAX_PAIRS = 10 ** 7
MAX_CLOSURE = 2 * 10 ** 6


def _as_points(A):
    A = np.asarray(A, dtype=float)
    return A[:, None] if A.ndim == 1 else A


def covering(A, delta):
    """|A|_delta by cube hashing (exact)."""
    A = _as_points(A)
    return len(np.unique(np.floor(A / delta).astype(np.int64), axis=0))


@dataclass
class PairGraph:
    A: np.ndarray
    B: np.ndarray
    edges: np.ndarray          # (n_edges, 2) index pairs into A, B

    def __post_init__(self):
        self.A = _as_points(self.A)
        self.B = _as_points(self.B)
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(self.edges) and (self.edges[:, 0].max() >= len(self.A)
                                or self.edges[:, 1].max() >= len(self.B)):
            raise ValueError("edge index out of range")

    @classmethod
    def complete(cls, A, B):
        A, B = _as_points(A), _as_points(B)
        ii, jj = np.meshgrid(np.arange(len(A)), np.arange(len(B)), indexing="ij")
        return cls(A, B, np.column_stack([ii.ravel(), jj.ravel()]))

    def adjacency(self):
        G = np.zeros((len(self.A), len(self.B)), dtype=bool)
        G[self.edges[:, 0], self.edges[:, 1]] = True
        return G

    def degrees_A(self):
        return np.bincount(self.edges[:, 0], minlength=len(self.A))


def sumset_covering(A, B, delta, P=None):
    """|A +^P B|_delta; P is an edge list (defaults to all pairs)."""
    A, B = _as_points(A), _as_points(B)
    if P is None:
        if len(A) * len(B) > MAX_PAIRS:
            raise ValueError("pair count exceeds guard; pass an edge list")
        sums = (A[:, None, :] + B[None, :, :]).reshape(-1, A.shape[1])
    else:
        P = np.asarray(P, dtype=np.int64).reshape(-1, 2)
        sums = A[P[:, 0]] + B[P[:, 1]]
    return len(np.unique(np.floor(sums / delta).astype(np.int64), axis=0))


def sumset_covering_oracle(A, B, delta, P=None):
    """Brute-force rasterization of every pairwise sum."""
    A, B = _as_points(A), _as_points(B)
    pairs = ([(i, j) for i in range(len(A)) for j in range(len(B))]
             if P is None else [tuple(p) for p in P])
    cells = {tuple(np.floor((A[i] + B[j]) / delta).astype(int)) for i, j in pairs}
    return len(cells)


def verify_ruzsa_triangle(A, B, C, delta, C_d=None):
    """|B| * |A - C| <= C_d * |A - B| * |B - C| at scale delta."""
    A, B, C = _as_points(A), _as_points(B), _as_points(C)
    lhs = covering(B, delta) * sumset_covering(A, -C, delta)
    rhs = sumset_covering(A, -B, delta) * sumset_covering(B, -C, delta)
    ratio = lhs / rhs
    out = {"lhs": int(lhs), "rhs": int(rhs), "ratio": float(ratio)}
    if C_d is not None:
        out["passed"] = bool(ratio <= C_d)
    return out


def _snap(A, delta):
    A = _as_points(A)
    return np.unique(np.floor(A / delta).astype(np.int64), axis=0) * delta \
        + delta / 2.0


def iterated_sumset(A, k, delta):
    """k-fold sumset A + ... + A, snapped to the delta-grid each step."""
    S = _snap(A, delta)
    for _ in range(k - 1):
        if len(S) * len(A) > MAX_PAIRS:
            raise ResourceWarning("iterated sumset exceeds the pair guard")
        S = _snap((S[:, None, :] + _as_points(A)[None, :, :]).reshape(-1, S.shape[1]),
                  delta)
    return S


def verify_plunnecke(A, B, k, ell, delta, C_d=None):
    """|kA - ell*A| <= C_d * K^{k+ell} * |B| where K = |A + B| / |B|."""
    if k < 1 or ell < 1:
        raise ValueError("need k, ell >= 1")
    if k + ell > 5:
        raise ResourceWarning("k + ell > 5 exceeds the blowup guard")
    A, B = _as_points(A), _as_points(B)
    nB = covering(B, delta)
    K = sumset_covering(A, B, delta) / nB
    kA = iterated_sumset(A, k, delta)
    lA = iterated_sumset(A, ell, delta)
    diff = sumset_covering(kA, -lA, delta)
    ratio = diff / (K ** (k + ell) * nB)
    out = {"K": float(K), "diff_covering": int(diff), "ratio": float(ratio)}
    if C_d is not None:
        out["passed"] = bool(ratio <= C_d)
    return out


# ---------------------------------------------------------------------------
# ring sets and sum-product closure (1D)


def ring_set_membership(X, w, delta, K):
    """w is in S_delta(X; K) iff |X + wX|_delta <= K |X|_delta."""
    X = np.asarray(X, dtype=float).ravel()
    return sumset_covering(X, w * X, delta) <= K * covering(X, delta)


def ring_membership_exponent(X, w, delta):
    """Smallest eps with |X + wX|_delta <= delta^{-eps} |X|_delta."""
    X = np.asarray(X, dtype=float).ravel()
    K = sumset_covering(X, w * X, delta) / covering(X, delta)
    return float(np.log(max(K, 1.0)) / np.log(1.0 / delta))


def ring_closure_check(X, a, b, delta, eps):
    """If 1, a, b lie in S_delta(X; delta^{-eps}), measure the exponents needed
    for a+b, a-b, and ab; the closure constant is their max over eps."""
    for w in (1.0, a, b):
        if not ring_set_membership(X, w, delta, delta ** -eps):
            raise ValueError(f"hypothesis fails: {w} not in S_delta(X; delta^-eps)")
    exps = {op: ring_membership_exponent(X, w, delta)
            for op, w in [("a+b", a + b), ("a-b", a - b), ("ab", a * b)]}
    C = max(exps.values()) / eps if eps > 0 else np.inf
    return {"exponents": exps, "closure_constant": float(C), "eps": eps}


def iterate_sum_product(A, s_steps, delta):
    """<A>_{s+1} = <A>_s  union  (<A>_s + <A>_1)  union  (<A>_s * <A>_1),
    snapped to the delta-grid each step; <A>_1 = A union -A."""
    if s_steps > 6:
        raise ResourceWarning("s_steps > 6 exceeds the growth guard")
    A = np.asarray(A, dtype=float).ravel()
    A1 = np.unique(np.round(np.concatenate([A, -A]) / delta)) * delta
    S = A1.copy()
    for _ in range(s_steps - 1):
        if len(S) * len(A1) > MAX_CLOSURE:
            raise ResourceWarning("closure size exceeds the growth guard")
        sums = (S[:, None] + A1[None, :]).ravel()
        prods = (S[:, None] * A1[None, :]).ravel()
        S = np.unique(np.round(np.concatenate([S, sums, prods]) / delta)) * delta
    return S


def interval_coverage(A, s_steps, delta, eps0):
    """Is every delta-cube of B(0, delta^{eps0}) within delta of <A>_s?"""
    S = np.sort(iterate_sum_product(A, s_steps, delta))
    R = delta ** eps0
    grid = np.arange(-R, R + delta / 2, delta)
    idx = np.clip(np.searchsorted(S, grid), 1, len(S) - 1)
    near = np.minimum(np.abs(grid - S[idx - 1]), np.abs(grid - S[idx]))
    covered = near <= delta + 2.0 ** -40
    return {"covered": bool(covered.all()), "fraction": float(covered.mean()),
            "closure_size": int(len(S))}


# ---------------------------------------------------------------------------
# Balog-Szemeredi-Gowers


class BSGPreconditionError(ValueError):
    pass


class BSGInternalError(RuntimeError):
    """Raised if no vertex passes the A_v bound; would falsify the theorem."""


def _distinct_count(pts):
    return len(np.unique(np.round(pts * 2.0 ** 30).astype(np.int64), axis=0))


def bsg_extract(A, B, P, K, delta=0.0, seed=0):
    """Constructive BSG: subsets A', B' with |A'| >= |A|/(16K^2),
    |A' + B'| <= 2^12 K^8 (|A||B|)^{1/2}, |P cap (A' x B')| >= |A||B|/(16K^2).

    delta = 0 is the exact finite-set theorem; delta > 0 first identifies
    points within the same delta-cube (the covering reduction) and reports
    counts at scale delta.
    """
    rng = np.random.default_rng(seed)
    A, B = _as_points(A), _as_points(B)
    P = np.asarray(P, dtype=np.int64).reshape(-1, 2)
    if delta > 0:
        A, B, P = _reduce_to_cubes(A, B, P, delta)
    nA, nB = len(A), len(B)
    P = np.unique(P, axis=0)
    if len(P) < nA * nB / K - 1e-9:
        raise BSGPreconditionError("|P| < K^{-1}|A||B|")
    sums = A[P[:, 0]] + B[P[:, 1]]
    if _distinct_count(sums) > K * np.sqrt(nA * nB) + 1e-9:
        raise BSGPreconditionError("|A +^P B| > K(|A||B|)^{1/2}")
    # prune edges in a seeded order down to exactly ceil(K^{-1}|A||B|)
    target = int(np.ceil(nA * nB / K))
    order = rng.permutation(len(P))
    E = P[np.sort(order[:target])]
    # delete A-vertices of degree <= (1/2) K^{-1} |B|
    degA = np.bincount(E[:, 0], minlength=nA)
    alive = degA > nB / (2 * K)
    E = E[alive[E[:, 0]]]
    G = np.zeros((nA, nB), dtype=bool)
    G[E[:, 0], E[:, 1]] = True
    common = G.astype(np.int32) @ G.astype(np.int32).T     # |N(a) cap N(a')|
    bad = common < nB / (128 * K ** 3)
    np.fill_diagonal(bad, False)
    # per v in B: A_v = N(v) minus vertices in >= |A|/(32K^2) bad pairs of N(v)^2
    best_v, best_size, best_Av = -1, -1, None
    thr_bad = nA / (32 * K ** 2)
    for v in range(nB):
        Nv = np.nonzero(G[:, v])[0]
        if len(Nv) == 0:
            continue
        bad_counts = bad[np.ix_(Nv, Nv)].sum(axis=1)
        Av = Nv[bad_counts < thr_bad]
        if len(Av) > best_size:
            best_v, best_size, best_Av = v, len(Av), Av
    if best_Av is None or best_size <= nA / (4 * K):
        raise BSGInternalError("no vertex v with |A_v| > |A|/(4K)")
    A_idx = best_Av
    inA = np.zeros(nA, dtype=bool)
    inA[A_idx] = True
    nbrs_in_A = (G & inA[:, None]).sum(axis=0)
    B_idx = np.nonzero(nbrs_in_A >= nA / (16 * K ** 2))[0]
    # conclusions, with the paper's explicit constants
    GP = np.zeros((nA, nB), dtype=bool)
    GP[P[:, 0], P[:, 1]] = True
    inter = int(GP[np.ix_(A_idx, B_idx)].sum())
    sumAB = _distinct_count(
        (A[A_idx][:, None, :] + B[B_idx][None, :, :]).reshape(-1, A.shape[1]))
    cert = {
        "K": K, "n_A": nA, "n_B": nB,
        "size_A_prime": int(len(A_idx)), "size_B_prime": int(len(B_idx)),
        "A_floor": nA / (16 * K ** 2), "B_floor": nB / (16 * K ** 2),
        "sum_covering": int(sumAB),
        "sum_bound": 2 ** 12 * K ** 8 * np.sqrt(nA * nB),
        "edge_count": int(inter), "edge_floor": nA * nB / (16 * K ** 2),
        "v_star": int(best_v),
    }
    cert["conclusions_ok"] = bool(
        len(A_idx) >= cert["A_floor"] - 1e-9
        and len(B_idx) >= cert["B_floor"] - 1e-9
        and sumAB <= cert["sum_bound"] + 1e-9
        and inter >= cert["edge_floor"] - 1e-9)
    cert["path3"] = _path3_spot_check(G, A_idx, B_idx, nA, nB, K, rng)
    return A[A_idx], B[B_idx], cert


def _path3_spot_check(G, A_idx, B_idx, nA, nB, K, rng, n_pairs=100):
    """#paths (a, w', a', b) of length 3 >= |A||B|/(2^12 K^5) on sampled pairs."""
    floor = nA * nB / (2 ** 12 * K ** 5)
    Gi = G.astype(np.int64)
    worst = np.inf
    for _ in range(min(n_pairs, len(A_idx) * len(B_idx))):
        a = int(rng.choice(A_idx))
        b = int(rng.choice(B_idx))
        aprime = np.nonzero(G[:, b])[0]
        paths = int((Gi[a] @ Gi[aprime].T).sum())
        worst = min(worst, paths)
    return {"min_paths": None if worst is np.inf else int(worst),
            "floor": float(floor),
            "ok": bool(worst is np.inf or worst >= floor - 1e-9)}


def _reduce_to_cubes(A, B, P, delta):
    """Identify points in the same delta-cube; edges map to cube pairs."""
    ca, ia = np.unique(np.floor(A / delta).astype(np.int64), axis=0,
                       return_inverse=True)
    cb, ib = np.unique(np.floor(B / delta).astype(np.int64), axis=0,
                       return_inverse=True)
    newP = np.unique(np.column_stack([ia[P[:, 0]], ib[P[:, 1]]]), axis=0)
    return (ca * delta + delta / 2.0, cb * delta + delta / 2.0, newP)


# ---------------------------------------------------------------------------
# intersections of events


def verify_event_intersection(weights, events, K, q, trials=20000, seed=0,
                              exhaustive_limit=10 ** 6):
    """P[nu(A_{th_1} cap ... cap A_{th_q}) >= nu(A)/(2K^q)] >= 1/(2K^q).

    events is a boolean (n_events, n_atoms) array; weights the measure atoms.
    Exhaustive over index tuples when n_events^q fits the limit, else Monte
    Carlo (reported, not asserted).
    """
    w = np.asarray(weights, dtype=float)
    ev = np.asarray(events, dtype=bool)
    total = w.sum()
    masses = ev @ w
    if np.any(masses < total / K - 1e-12):
        raise ValueError("an event has mass below nu(A)/K")
    thr = total / (2 * K ** q)
    n = len(ev)
    if n ** q <= exhaustive_limit:
        good = 0
        for combo in itertools.product(range(n), repeat=q):
            mask = np.ones(ev.shape[1], dtype=bool)
            for i in combo:
                mask &= ev[i]
            good += (w[mask].sum() >= thr)
        frac = good / n ** q
        return {"mode": "exhaustive", "fraction": float(frac),
                "floor": 1.0 / (2 * K ** q), "passed": bool(frac >= 1.0 / (2 * K ** q))}
    rng = np.random.default_rng(seed)
    good = 0
    for _ in range(trials):
        combo = rng.integers(0, n, q)
        mask = np.ones(ev.shape[1], dtype=bool)
        for i in combo:
            mask &= ev[i]
        good += (w[mask].sum() >= thr)
    return {"mode": "monte-carlo", "fraction": good / trials,
            "floor": 1.0 / (2 * K ** q), "trials": trials}
