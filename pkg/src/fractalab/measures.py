"""Discrete measures on dyadic cubes and their non-degeneracy diagnostics.

A DiscreteMeasure assigns nonnegative mass to delta-cubes.  On top of it we
measure plate-Frostman constants, Riesz (s,k)-energies (exact and Monte
Carlo), extract non-concentrated subsets from small energies, detect heavy
plates and their coherence exceptions, decompose products into a small bad
pair set plus a thin-plate certificate, and count radial-projection covers.
"""

import json
import math

import numpy as np
from dataclasses import dataclass, field

from .dyadic import DyadicCube, DiscretizedSet, dyadic_level, is_dyadic
from .geometry import Plate, TOL
from .nets import PlateNet, build_plate_net, projected_count, DEFAULT_BUDGET
from .sets import (check_ball_set, dyadic_scales, default_nets,
                   feasible_net_scales)

MAX_EXACT_TUPLES = 10 ** 8
_DEGENERATE_TOL = 1e-12


class PreconditionError(ValueError):
    """A documented hypothesis failed before the operation could run."""


# ---------------------------------------------------------------------------
# measures


class DiscreteMeasure:
    """Nonnegative masses on distinct dyadic cubes at a single resolution.

    The cached total is a compensated sum, accurate to < 2^-40 relative.
    """

    def __init__(self, level, coords, masses, dim=None):
        coords = np.atleast_2d(np.asarray(coords, dtype=np.int64))
        masses = np.asarray(masses, dtype=float)
        if coords.shape[0] != masses.shape[0]:
            raise ValueError("coords/masses length mismatch")
        if np.any(masses < 0):
            raise ValueError("negative mass")
        keep = masses > 0
        coords, masses = coords[keep], masses[keep]
        order = np.lexsort(coords.T[::-1]) if len(coords) else np.array([], int)
        self.level = int(level)
        self.coords = coords[order]
        self.masses = masses[order]
        self.dim = int(dim if dim is not None else coords.shape[1])
        if len(np.unique(self.coords, axis=0)) != len(self.coords):
            raise ValueError("duplicate cubes; aggregate masses first")
        self._total = math.fsum(self.masses.tolist())

    @classmethod
    def uniform(cls, P, total=1.0):
        """Equal mass on every cube of a DiscretizedSet, summing to total."""
        n = len(P)
        return cls(P.level, P.coords, np.full(n, total / n), dim=P.dim)

    @classmethod
    def from_points(cls, points, level, weights=None):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        n, d = points.shape
        weights = np.ones(n) / n if weights is None else np.asarray(weights, float)
        coords = np.floor(points * 2 ** level).astype(np.int64)
        coords = np.clip(coords, 0, 2 ** level - 1)
        uniq, inv = np.unique(coords, axis=0, return_inverse=True)
        return cls(level, uniq, np.bincount(inv, weights=weights), dim=d)

    @property
    def delta(self):
        return 2.0 ** -self.level

    @property
    def total(self):
        return self._total

    def __len__(self):
        return len(self.masses)

    def support(self):
        return DiscretizedSet(self.level, self.coords, dim=self.dim)

    def centers(self):
        return (self.coords + 0.5) * self.delta

    def restrict(self, keep):
        """mu|_G for a boolean mask or index array over the atoms."""
        keep = np.asarray(keep)
        if keep.dtype == bool:
            idx = np.flatnonzero(keep)
        else:
            idx = keep.astype(np.int64)
        return DiscreteMeasure(self.level, self.coords[idx], self.masses[idx],
                               dim=self.dim)

    def renormalized_restrict(self, keep):
        """mu_G = mu|_G / mu(G)."""
        sub = self.restrict(keep)
        if sub.total <= 0:
            raise ValueError("restriction has zero mass")
        return DiscreteMeasure(sub.level, sub.coords, sub.masses / sub.total,
                               dim=sub.dim)

    def coarse_masses(self, r):
        """(coords, masses) aggregated onto dyadic r-cubes."""
        j = dyadic_level(r)
        if j > self.level:
            raise ValueError("r below resolution")
        coarse = self.coords >> (self.level - j)
        uniq, inv = np.unique(coarse, axis=0, return_inverse=True)
        return uniq, np.bincount(inv, weights=self.masses)

    def save(self, path):
        rec = {"d": self.dim, "level": self.level, "total": self.total,
               "coords": self.coords.tolist(), "masses": self.masses.tolist()}
        with open(path, "w") as f:
            json.dump(rec, f)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            rec = json.load(f)
        mu = cls(rec["level"], rec["coords"], rec["masses"], dim=rec["d"])
        if abs(mu.total - rec["total"]) > 2.0 ** -40 * max(1.0, rec["total"]):
            raise ValueError("stored total does not match masses")
        return mu


# ---------------------------------------------------------------------------
# Frostman constants


@dataclass
class FrostmanReport:
    s: float
    k: int
    C: float
    witness: object
    witness_scale: float
    per_scale: dict
    method: str

    def constant_at_most(self, C):
        return self.C <= C


def frostman_constant(mu, s, k=0, r_range=None, nets=None,
                      budget=DEFAULT_BUDGET):
    """Minimal C with mu(H_r) <= C r^s over (r,k)-plates, dyadic r in range.

    k=0 tests dyadic cubes (a bounded factor from balls, as in the set
    checker); k>=1 scans plate nets.  Returns the constant and a witness.
    """
    if len(mu) == 0:
        raise ValueError("empty measure")
    scales = _select_scales(mu.level, r_range)
    per_scale, best = {}, (0.0, None, None)
    if k == 0 and nets is None:
        for r in scales:
            coords, masses = mu.coarse_masses(r)
            i = int(np.argmax(masses))
            ratio = masses[i] / r ** s
            per_scale[r] = float(ratio)
            if ratio > best[0]:
                cube = DyadicCube(dyadic_level(r), tuple(int(z) for z in coords[i]))
                best = (float(ratio), cube, r)
        return FrostmanReport(s, k, best[0], best[1], best[2], per_scale,
                              "dyadic-cubes")
    if nets is None:
        feasible = set(feasible_net_scales(mu.level, k, mu.dim, budget=budget))
        nets = default_nets(mu.level, k, mu.dim, budget=budget,
                            scales=[r for r in scales if r in feasible])
    if not nets:
        raise ValueError("no feasible net scales for this (k, d, resolution)")
    centers = mu.centers()
    for r, net in sorted(nets.items(), reverse=True):
        if r not in scales:
            continue
        masses = net.point_masses(centers, mu.masses)
        idx = np.unravel_index(int(np.argmax(masses)), masses.shape)
        ratio = masses[idx] / r ** s
        per_scale[r] = float(ratio)
        if ratio > best[0]:
            best = (float(ratio), net.plate(*idx), r)
    return FrostmanReport(s, k, best[0], best[1], best[2], per_scale,
                          "plate-net")


def _select_scales(level, r_range):
    scales = dyadic_scales(level)
    if r_range is None:
        return scales
    if isinstance(r_range, tuple) and len(r_range) == 2 \
            and not hasattr(r_range[0], "__len__"):
        lo, hi = r_range
        return [r for r in scales if lo - TOL <= r <= hi + TOL]
    wanted = set(float(r) for r in r_range)
    return [r for r in scales if r in wanted]


# ---------------------------------------------------------------------------
# Riesz (s,k)-energies


@dataclass
class EnergyEstimate:
    value: float
    stderr: float
    mode: str
    n_tuples: int
    s: float
    k: int
    delta: float

    def __float__(self):
        return self.value


def _gram_volumes(D):
    """k-dimensional parallelepiped volumes of difference vectors (m,k,d)."""
    k = D.shape[1]
    if k == 1:
        return np.linalg.norm(D[:, 0, :], axis=1)
    G = np.einsum("mkd,mld->mkl", D, D)
    return np.sqrt(np.clip(np.linalg.det(G), 0.0, None))


def riesz_energy(mu, s, k, delta, mode="auto", n_samples=200000, seed=0,
                 n_batches=20, max_exact=MAX_EXACT_TUPLES):
    """I^delta_{s,k}(mu): (k+1)-fold sum of (wedge volume + delta)^{-s}.

    Exact mode sums every atom tuple (diagonal included when delta > 0;
    delta = 0 sums distinct-atom tuples only and refuses degenerate wedges).
    Monte Carlo samples tuples proportionally to mass and reports a batch-
    means standard error.
    """
    n = len(mu)
    if n == 0:
        raise ValueError("empty measure")
    n_tuples = n ** (k + 1)
    if mode == "auto":
        mode = "exact" if n_tuples <= max_exact else "mc"
    if mode == "exact":
        if n_tuples > max_exact:
            raise ResourceWarning(
                f"{n_tuples} tuples exceed the exact guard; use mode='mc'")
        val = _exact_energy(mu.centers(), mu.masses, s, k, float(delta))
        return EnergyEstimate(val, 0.0, "exact", n_tuples, s, k, float(delta))
    if delta == 0:
        raise ValueError("delta = 0 requires exact mode")
    return _mc_energy(mu, s, k, float(delta), n_samples, seed, n_batches)


def _exact_energy(X, W, s, k, delta):
    n = len(X)
    if k == 1:
        D = X[:, None, :] - X[None, :, :]
        dist = np.sqrt((D * D).sum(-1))
        if delta == 0:
            off = ~np.eye(n, dtype=bool)
            if np.any(dist[off] <= _DEGENERATE_TOL):
                raise PreconditionError("coincident atoms; delta = 0 unusable")
            F = np.zeros_like(dist)
            F[off] = dist[off] ** -s
        else:
            F = (dist + delta) ** -s
        return float(W @ F @ W)
    total = 0.0
    for a in range(n):
        D = X - X[a]
        if k == 2:
            G = D @ D.T
            g = np.diag(G).copy()
            vol2 = np.clip(np.outer(g, g) - G * G, 0.0, None)
            vol = np.sqrt(vol2)
        else:
            vol = _volumes_general(D, k, n)
        if delta == 0:
            distinct = _distinct_mask(a, k, n)
            if np.any(vol[distinct] <= _DEGENERATE_TOL):
                raise PreconditionError(
                    "affinely degenerate tuple; use delta > 0")
            F = np.zeros_like(vol)
            F[distinct] = vol[distinct] ** -s
        else:
            F = (vol + delta) ** -s
        total += W[a] * float(_weighted_sum(F, W, k))
    return total


def _volumes_general(D, k, n, chunk=2 ** 20):
    shape = (n,) * k
    out = np.empty(shape)
    flat = out.reshape(-1)
    m = n ** k
    for start in range(0, m, chunk):
        idx = np.unravel_index(np.arange(start, min(start + chunk, m)), shape)
        vecs = np.stack([D[i] for i in idx], axis=1)
        flat[start:min(start + chunk, m)] = _gram_volumes(vecs)
    return out


def _distinct_mask(a, k, n):
    """Tuples (x_1..x_k) with pairwise-distinct indices, all != a."""
    shape = (n,) * k
    mask = np.ones(shape, dtype=bool)
    grids = np.indices(shape)
    for i in range(k):
        mask &= grids[i] != a
        for j in range(i + 1, k):
            mask &= grids[i] != grids[j]
    return mask


def _weighted_sum(F, W, k):
    for _ in range(k):
        F = F @ W
    return F


def _mc_energy(mu, s, k, delta, n_samples, seed, n_batches):
    rng = np.random.default_rng(seed)
    X, W = mu.centers(), mu.masses
    n = len(X)
    p = W / mu.total
    n_samples = (n_samples // n_batches) * n_batches
    idx = rng.choice(n, size=(n_samples, k + 1), p=p)
    D = X[idx[:, 1:]] - X[idx[:, :1]]
    f = (_gram_volumes(D) + delta) ** -s
    scale = mu.total ** (k + 1)
    batches = scale * f.reshape(n_batches, -1).mean(axis=1)
    value = float(batches.mean())
    stderr = float(batches.std(ddof=1) / math.sqrt(n_batches))
    return EnergyEstimate(value, stderr, "mc", n_samples, s, k, delta)


def verify_energy_upper(mu, s, t, k, C_frozen=None, mc_samples=10 ** 6,
                        seed=0, max_exact=MAX_EXACT_TUPLES):
    """Check I_{s,k}(mu) <= const * C^k under the (r,k-1)-plate hypothesis.

    C is measured (minimal constant with mu(H_r) <= C r^t).  The energy is
    delta = 0 when no distinct tuple is degenerate; otherwise it switches to
    the resolution-regularized energy and records the switch.
    """
    if not s < t:
        raise ValueError("requires s < t")
    hyp = frostman_constant(mu, t, k - 1)
    if np.max(mu.masses) >= mu.total * (1 - 2.0 ** -20):
        raise PreconditionError(
            "hypothesis constant unbounded: a single atom carries the mass")
    C = hyp.C
    delta_used, switched, mode = 0.0, False, "exact"
    try:
        est = riesz_energy(mu, s, k, 0.0, mode="exact", max_exact=max_exact)
    except (PreconditionError, ResourceWarning) as exc:
        delta_used, switched = mu.delta, str(exc)
        n_tuples = len(mu) ** (k + 1)
        mode = "exact" if n_tuples <= max_exact else "mc"
        est = riesz_energy(mu, s, k, delta_used, mode=mode,
                           n_samples=mc_samples, seed=seed,
                           max_exact=max_exact)
    ratio = est.value / C ** k
    report = {"energy": est.value, "stderr": est.stderr, "C_hypothesis": C,
              "ratio": ratio, "mode": est.mode, "delta": delta_used,
              "regularized": switched, "hypothesis": hyp,
              "C_frozen": C_frozen,
              "passed": None if C_frozen is None else bool(ratio <= C_frozen)}
    return report


# ---------------------------------------------------------------------------
# energy -> non-concentrated subset


def _inner_potentials(mu, s, k, delta):
    """g(x_0) = sum over k-tuples of prod(w) * (wedge + delta)^{-s}."""
    X, W = mu.centers(), mu.masses
    n = len(X)
    if k == 1:
        D = X[:, None, :] - X[None, :, :]
        dist = np.sqrt((D * D).sum(-1))
        return ((dist + delta) ** -s) @ W
    out = np.empty(n)
    for a in range(n):
        D = X - X[a]
        if k == 2:
            G = D @ D.T
            g = np.diag(G).copy()
            vol = np.sqrt(np.clip(np.outer(g, g) - G * G, 0.0, None))
        else:
            vol = _volumes_general(D, k, n)
        out[a] = _weighted_sum((vol + delta) ** -s, W, k)
    return out


def extract_nonconcentrated_subset(mu, specs, C, delta=None, c_frozen=None,
                                   max_exact=MAX_EXACT_TUPLES):
    """From small (s_i,k_i)-energies, extract one simultaneously good set.

    Markov at threshold 2mC keeps the atoms with small inner potential for
    every spec; a dyadic pigeonhole on atom masses then selects a level set
    carrying at least a 1/log share of the mass.  The output is re-verified
    as a (delta, s_i/k_i, ., k_i - 1)-set for each spec.
    """
    if abs(mu.total - 1.0) > 1e-9:
        raise PreconditionError("extraction expects a probability measure")
    delta = mu.delta if delta is None else float(delta)
    m = len(specs)
    energies = []
    for s_i, k_i in specs:
        est = riesz_energy(mu, s_i, k_i, delta, mode="auto",
                           max_exact=max_exact, seed=1)
        energies.append(est.value)
        slack = 3 * est.stderr
        if est.value > C + slack:
            raise PreconditionError(
                f"I_{{{s_i},{k_i}}} = {est.value:.4g} exceeds C = {C}")
    keep = np.ones(len(mu), dtype=bool)
    potentials = {}
    for (s_i, k_i) in specs:
        g = _inner_potentials(mu, s_i, k_i, delta)
        potentials[(s_i, k_i)] = g
        keep &= g < 2 * m * C
    if not keep.any():
        raise PreconditionError("Markov step removed every atom")
    P_mass = float(mu.masses[keep].sum())
    # dyadic pigeonhole on atom masses over [delta^d, 1]
    w = mu.masses[keep]
    classes = np.floor(-np.log2(np.maximum(w, mu.delta ** mu.dim))).astype(int)
    totals = np.bincount(classes, weights=w)
    c_star = int(np.argmax(totals))
    sel = np.flatnonzero(keep)[classes == c_star]
    out = DiscretizedSet(mu.level, mu.coords[sel], dim=mu.dim)
    log_fac = math.log2(1.0 / delta)
    checks = {}
    for i, (s_i, k_i) in enumerate(specs):
        rep = check_ball_set(out, s_i / k_i, k=k_i - 1)
        advertised = (C * m) ** (1.0 / k_i) * log_fac
        nolog = (C * m) ** (1.0 / k_i)
        checks[(s_i, k_i)] = {
            "report": rep,
            "advertised": advertised if c_frozen is None else c_frozen * advertised,
            "advertised_nolog": nolog,
            "passed": rep.C_min <= (advertised if c_frozen is None
                                    else c_frozen * advertised),
        }
    info = {"energies": energies, "markov_mass": P_mass,
            "class_exponent": c_star, "class_mass": float(totals[c_star]),
            "class_floor": 1.0 / (4 * max(log_fac, 1.0)),
            "checks": checks, "delta": delta}
    return out, info


# ---------------------------------------------------------------------------
# heavy plates


def heavy_plates(nu, r, a, net, kappa=None, C_nu=None, N=None):
    """All net plates with nu-mass >= a, plus the (C_nu/a)^N count bound.

    If kappa and C_nu are supplied, the (rho, k-1)-plate hypothesis
    nu(W) <= C_nu rho^kappa is verified down to r first.
    """
    if abs(net.r - r) > TOL:
        raise ValueError("net resolution does not match r")
    if kappa is not None and C_nu is not None:
        hyp = frostman_constant(nu, kappa, net.k - 1, r_range=(r, 1.0))
        if hyp.C > C_nu * (1 + 1e-9):
            raise PreconditionError(
                f"measured plate constant {hyp.C:.4g} exceeds C_nu = {C_nu}")
    masses = net.point_masses(nu.centers(), nu.masses)
    di, oi = np.nonzero(masses >= a - TOL)
    out = [{"dir_idx": int(i), "off_idx": int(j),
            "plate": net.plate(int(i), int(j)),
            "mass": float(masses[i, j])} for i, j in zip(di, oi)]
    out.sort(key=lambda h: -h["mass"])
    info = {"count": len(out), "a": a}
    if N is not None and C_nu is not None:
        info["bound"] = (C_nu / a) ** N
        info["passed"] = len(out) <= info["bound"]
    return out, info


def _plate_mass(nu, plate):
    d = plate.plane_distances(nu.centers())
    return float(nu.masses[d <= plate.thickness + TOL].sum())


def _pair_mass(nu, p1, p2):
    c = nu.centers()
    inside = (p1.plane_distances(c) <= p1.thickness + TOL) \
        & (p2.plane_distances(c) <= p2.thickness + TOL)
    return float(nu.masses[inside].sum())


def _plate_in_plate(H, T, n_samples=40, seed=0):
    """H subset T, tested on central-plane samples of H inside B(0,2)."""
    rng = np.random.default_rng(seed)
    if H.k == 0:
        pts = H.offset[None, :]
    else:
        coef = rng.uniform(-2.0, 2.0, size=(n_samples, H.k))
        pts = H.offset + coef @ H.basis
        pts = pts[np.linalg.norm(pts, axis=1) <= 2.0 + TOL]
        pts = np.vstack([H.offset[None, :], pts])
    return bool(np.all(T.plane_distances(pts) + H.thickness
                       <= T.thickness + TOL))


def covering_plates(nu, r, a, kappa, C_nu, net=None, seed=0,
                    budget=DEFAULT_BUDGET):
    """Greedy maximal a-heavy family with small pairwise overlap, dilated.

    Picks net plates with nu(Y) >= a and pairwise nu(Y_i cap Y_j) <= a^2/2,
    verifies the m <= 2/a cap, then dilates each pick to thickness
    r (C_nu/a^2)^{1/kappa} and checks every heavy net plate embeds in one.
    """
    if net is None:
        net = build_plate_net(r, _infer_k(nu, r, budget), nu.dim, seed=seed,
                              budget=budget)
    heavy, _ = heavy_plates(nu, r, a, net, kappa=kappa, C_nu=C_nu)
    picks = []
    for h in heavy:
        if all(_pair_mass(nu, h["plate"], p["plate"]) <= a * a / 2 + TOL
               for p in picks):
            picks.append(h)
    m = len(picks)
    cap_ok = m <= 2.0 / a + TOL
    thick = r * (C_nu / a ** 2) ** (1.0 / kappa)
    dilated = [Plate(p["plate"].k, p["plate"].basis, p["plate"].offset, thick)
               for p in picks]
    embeds = []
    for h in heavy:
        ok = any(_plate_in_plate(h["plate"], T, seed=seed) for T in dilated)
        embeds.append(ok)
    info = {"m": m, "cap": 2.0 / a, "cap_ok": cap_ok,
            "dilated_thickness": thick,
            "all_embedded": bool(all(embeds)) if heavy else True,
            "n_heavy": len(heavy)}
    return dilated, info


def _infer_k(nu, r, budget):
    for k in range(1, nu.dim):
        if projected_count(r, k, nu.dim) > budget:
            return max(1, k - 1)
    return nu.dim - 1


def plate_coherence_exceptions(mu, H_list, r, r0, kappa, C_mu, C_frozen=1.0):
    """Atoms lying in two list-plates that meet at angle >= r/r0.

    Through any other atom, all list-plates fit in one coarse plate; the
    exceptional mass obeys C_frozen * C_mu (r/r0)^kappa |H|^2.
    """
    plates = [h["plate"] if isinstance(h, dict) else h for h in H_list]
    n = len(plates)
    bad = np.zeros(len(mu), dtype=bool)
    if n >= 2:
        c = mu.centers()
        inside = np.array([p.plane_distances(c) <= p.thickness + TOL
                           for p in plates])
        thr = r / r0
        proj = [p.projection_matrix() for p in plates]
        for i in range(n):
            for j in range(i + 1, n):
                ang = float(np.linalg.norm(proj[i] - proj[j], 2))
                if ang >= thr - TOL:
                    bad |= inside[i] & inside[j]
    mass = float(mu.masses[bad].sum())
    bound = C_frozen * C_mu * (r / r0) ** kappa * n * n
    report = {"mass": mass, "bound": bound, "passed": mass <= bound + TOL,
              "n_plates": n, "angle_threshold": r / r0}
    return np.flatnonzero(bad), report


# ---------------------------------------------------------------------------
# pair sets and thin-plate certificates


class PairSet:
    """Sparse subset of (mu-atom, nu-atom) index pairs.

    Stored as fully-included mu rows plus per-row nu index arrays.
    """

    def __init__(self, n_x, n_y):
        self.n_x, self.n_y = int(n_x), int(n_y)
        self.full_rows = set()
        self._buf = {}       # x -> list of index arrays, deduped lazily
        self._rows = {}

    def add_full_row(self, x):
        self.full_rows.add(int(x))
        self._buf.pop(int(x), None)
        self._rows.pop(int(x), None)

    def add(self, x, ys):
        x = int(x)
        if x in self.full_rows:
            return
        self._buf.setdefault(x, []).append(np.asarray(ys, dtype=np.int64))
        self._rows.pop(x, None)

    @property
    def rows(self):
        for x in list(self._buf):
            self.row(x)
        return self._rows

    def row(self, x):
        x = int(x)
        if x in self.full_rows:
            return np.arange(self.n_y)
        if x in self._buf:
            parts = self._buf.pop(x)
            cur = self._rows.get(x)
            if cur is not None:
                parts.append(cur)
            self._rows[x] = np.unique(np.concatenate(parts))
        return self._rows.get(x, np.array([], dtype=np.int64))

    def union(self, other):
        out = PairSet(self.n_x, self.n_y)
        out.full_rows = set(self.full_rows) | set(other.full_rows)
        for src in (self.rows, other.rows):
            for x, ys in src.items():
                if x not in out.full_rows:
                    out.add(x, ys)
        return out

    def mass(self, mu, nu):
        total = math.fsum(float(mu.masses[x]) for x in self.full_rows) * nu.total
        total += math.fsum(float(mu.masses[x]) * float(nu.masses[ys].sum())
                           for x, ys in self.rows.items())
        return total

    def n_pairs(self):
        return len(self.full_rows) * self.n_y \
            + sum(len(v) for v in self.rows.values())


@dataclass
class ThinPlateCertificate:
    t: float
    K: float
    k: int
    r_0: float
    G: dict
    violations: list
    scales: list = field(default_factory=list)
    kind: str = "plates"

    @property
    def passed(self):
        return len(self.violations) == 0

    def to_json(self, path=None):
        rec = {"t": self.t, "K": self.K, "k": self.k, "r_0": self.r_0,
               "G": self.G, "kind": self.kind, "scales": self.scales,
               "violations": self.violations, "passed": self.passed}
        if path is not None:
            with open(path, "w") as f:
                json.dump(rec, f, indent=1)
        return rec


def thin_check(kind, mu, nu, excluded, t, K, r0, k, scales=None, nets=None,
               budget=DEFAULT_BUDGET, seed=0, atom_margin=None):
    """Certify nu(H cap G|_x) <= K r^t over atoms x, dyadic r, shapes near x.

    kind 'plates' scans (r,k)-plate nets; 'tubes' scans width-r tube slabs
    via k=1 nets (a superset of every r-tube, so passing is conservative).
    G|_x is the nu-support minus the excluded PairSet row at x; shapes count
    as passing through x when their plane is within 2 delta + r of x.
    """
    net_k = 1 if kind == "tubes" else k
    d = nu.dim
    delta = max(mu.delta, nu.delta)
    if scales is None:
        scales = [r for r in dyadic_scales(dyadic_level(delta))
                  if delta - TOL <= r <= r0 + TOL]
    if nets is None:
        nets = {}
        for r in scales:
            if projected_count(r, net_k, d) <= budget:
                nets[r] = build_plate_net(r, net_k, d, seed=seed,
                                          budget=budget)
    tested, violations = [], []
    cx, cy = mu.centers(), nu.centers()
    w = nu.masses
    margin = 2 * delta if atom_margin is None else atom_margin
    # group mu-atoms by identical exclusion row so each group vectorizes
    groups = {}          # row-bytes -> (excl indices, atom indices)
    plain = []
    for x in range(len(cx)):
        excl = excluded.row(x) if excluded is not None else None
        if excl is None or len(excl) == 0:
            plain.append(x)
        else:
            groups.setdefault(excl.tobytes(), (excl, []))[1].append(x)
    plain = np.asarray(plain, dtype=np.int64)
    for r in sorted(nets, reverse=True):
        net = nets[r]
        bound = K * r ** t
        tested.append(r)
        for i in range(net.n_directions):
            offs = net.offset_ints * net.h
            yx = cx @ net.comps[i].T
            yy = cy @ net.comps[i].T
            dx = ((yx[:, None, :] - offs[None, :, :]) ** 2).sum(-1)
            dy = ((yy[:, None, :] - offs[None, :, :]) ** 2).sum(-1)
            memb_x = dx <= (r + margin + TOL) ** 2   # (n_mu, m) shape near x
            memb_y = dy <= (r + TOL) ** 2            # (n_nu, m)
            plate_mass = w @ memb_y
            batches = [(plain, plate_mass)]
            for excl, xs in groups.values():
                adj = plate_mass - w[excl] @ memb_y[excl]
                batches.append((np.asarray(xs, dtype=np.int64), adj))
            for xs, vals in batches:
                cols = np.flatnonzero(vals > bound + TOL)
                if len(cols) == 0 or len(xs) == 0:
                    continue
                hit_x, hit_c = np.nonzero(memb_x[np.ix_(xs, cols)])
                for a, c in zip(hit_x, hit_c):
                    violations.append({
                        "x": int(xs[a]), "r": float(r), "dir_idx": int(i),
                        "off_idx": int(cols[c]),
                        "mass": float(vals[cols[c]]), "bound": float(bound)})
    desc = {"excluded_pairs": 0 if excluded is None else excluded.n_pairs(),
            "n_mu": len(mu), "n_nu": len(nu)}
    return ThinPlateCertificate(t, K, k, r0, desc, violations, tested, kind)


# ---------------------------------------------------------------------------
# power decay across a super-exponential scale ladder


def power_decay_decomposition(mu, nu, K, r0, kappa, C_mu, C_nu, k,
                              K0=4.0, N=3.0, seed=0, budget=DEFAULT_BUDGET,
                              scale_cap=6):
    """Split off a small pair set B so heavy plates vanish outside A u B.

    The ladder r_n = r0 K^{-2^n} is truncated at the resolution and at net
    feasibility.  At each rung, nu-heavy net plates at threshold
    K (r_n/r0)^eta are found; atoms seeing two heavy plates at large angle
    form the exceptional set E_n, and for the rest, heavy plates through x
    merge into one coarse plate P_n(x).  B collects E x Y and the P(x)
    masses not already inside A (pairs in a K^{-1}-concentrated
    (r0,k)-plate).  eta = kappa/(4N) with frozen N.
    """
    if K < K0:
        raise PreconditionError(f"K = {K} below K0 = {K0}")
    eta = kappa / (4.0 * N)
    d = mu.dim
    delta = max(mu.delta, nu.delta)
    cx = mu.centers()

    # A: pairs inside a K^{-1}-concentrated (r0,k)-plate.  Atoms sharing the
    # same set of concentrated plates share one row array.
    A = PairSet(len(mu), len(nu))
    net0 = build_plate_net(r0, k, d, seed=seed, budget=budget)
    conc, _ = heavy_plates(nu, r0, 1.0 / K, net0)
    cy = nu.centers()
    if conc:
        Mx = np.stack([h["plate"].plane_distances(cx) <= h["plate"].thickness
                       + TOL for h in conc])
        My = np.stack([h["plate"].plane_distances(cy) <= h["plate"].thickness
                       + TOL for h in conc])
        patterns = {}
        for x in range(len(mu)):
            key = Mx[:, x].tobytes()
            if Mx[:, x].any():
                patterns.setdefault(key, []).append(x)
        for key, xs in patterns.items():
            sel = np.frombuffer(key, dtype=bool)
            ys = np.flatnonzero(My[sel].any(axis=0))
            for x in xs:
                A.add(x, ys)

    # scale ladder
    ladder = []
    n = 0
    while len(ladder) < scale_cap:
        r_n = r0 * K ** -(2 ** n)
        r_n = 2.0 ** math.floor(math.log2(r_n))
        if r_n < delta - TOL:
            break
        if projected_count(r_n, k, d) > budget:
            break
        ladder.append(r_n)
        n += 1

    B = PairSet(len(mu), len(nu))
    rungs = []
    if not ladder:
        cert_scales = [r for r in dyadic_scales(dyadic_level(delta))
                       if r0 / K - TOL <= r <= r0 + TOL]
        cert = thin_check("plates", mu, nu, A.union(B), eta,
                          K * r0 ** -eta, r0, k, scales=cert_scales,
                          budget=budget, seed=seed)
        cert.G.update({"degenerate": True, "ladder": [], "eta": eta, "N": N,
                       "B_mass": 0.0, "B_bound": K0 / K, "B_ok": True})
        return B, cert

    exceptional = np.zeros(len(mu), dtype=bool)
    plate_of = {}      # x -> list of coarse plates P_n(x)
    nets = {}
    for r_n in ladder:
        a_n = K * (r_n / r0) ** eta
        net = build_plate_net(r_n, k, d, seed=seed, budget=budget)
        nets[r_n] = net
        heavy, _ = heavy_plates(nu, r_n, a_n, net)
        idx_bad, rep = plate_coherence_exceptions(
            mu, heavy, r_n, math.sqrt(r0 * r_n), kappa, C_mu)
        exceptional[idx_bad] = True
        thick = math.sqrt(r0 * r_n)
        members = [np.flatnonzero(h["plate"].plane_distances(cx)
                                  <= h["plate"].thickness + TOL)
                   for h in heavy]
        for h, xs in zip(heavy, members):
            coarse = Plate(h["plate"].k, h["plate"].basis,
                           h["plate"].offset, thick)
            for x in xs:
                if not exceptional[x]:
                    plate_of.setdefault(int(x), []).append(coarse)
        rungs.append({"r": r_n, "a": a_n, "n_heavy": len(heavy),
                      "exception_mass": rep["mass"],
                      "exception_bound": (r_n / r0) ** eta / K ** 2})

    for x in np.flatnonzero(exceptional):
        B.add_full_row(x)
    for x, plates in plate_of.items():
        if x in B.full_rows:
            continue
        ys = np.zeros(len(nu), dtype=bool)
        for pl in plates:
            ys |= pl.plane_distances(cy) <= pl.thickness + TOL
        extra = np.setdiff1d(np.flatnonzero(ys), A.row(x))
        if len(extra):
            B.add(x, extra)

    B_mass = B.mass(mu, nu)
    B_bound = K0 / K * mu.total * nu.total
    cert_scales = [r for r in dyadic_scales(dyadic_level(delta))
                   if ladder[-1] - TOL <= r <= r0 + TOL
                   and projected_count(r, k, d) <= budget]
    # the proof's certified pair: exponent eta/2, constant K^2 r0^{-eta/2}
    cert = thin_check("plates", mu, nu, A.union(B), eta / 2,
                      K * K * r0 ** -(eta / 2), r0, k, scales=cert_scales,
                      nets={r: nets[r] for r in nets if r in cert_scales} or None,
                      budget=budget, seed=seed)
    cert.G.update({"degenerate": False, "ladder": ladder, "eta": eta, "N": N,
                   "rungs": rungs, "B_mass": B_mass, "B_bound": B_bound,
                   "B_ok": bool(B_mass <= B_bound + TOL),
                   "stated_t": eta, "stated_K": K * r0 ** -eta})
    return B, cert


# ---------------------------------------------------------------------------
# radial projections


def radial_projection_covering(nu, x, r):
    """Greedy r-covering count of the radial image of spt(nu) from x."""
    x = np.asarray(x, dtype=float)
    diff = nu.centers() - x
    dist = np.linalg.norm(diff, axis=1)
    if np.min(dist) < r - TOL:
        raise PreconditionError("x closer than r to the support")
    dirs = diff / dist[:, None]
    uncovered = np.ones(len(dirs), dtype=bool)
    count = 0
    while uncovered.any():
        i = int(np.argmax(uncovered))
        count += 1
        chord = np.linalg.norm(dirs[uncovered] - dirs[i], axis=1)
        idx = np.flatnonzero(uncovered)
        uncovered[idx[chord <= r]] = False
    return count
