"""Seeded generators for every set and configuration family the checkers use.

Set kinds return DiscretizedSet; configuration kinds return Configuration.
All randomness flows through numpy Generators derived from (seed, label) so
adding a generator never perturbs another's stream.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .dyadic import DiscretizedSet
from .geometry import TubeUniverse, unit
from .incidence import Configuration


def derive_rng(seed, label):
    digest = hashlib.sha256(f"{label}:{seed}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


# ---------------------------------------------------------------------------
# set generators


def full_grid(d, level):
    if level * d > 24:
        raise ValueError("full grid too large")
    axes = [np.arange(2 ** level)] * d
    coords = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
    return DiscretizedSet(level, coords)


def line_set(d, level):
    i = np.arange(2 ** level)
    return DiscretizedSet(level, np.stack([i] * d, axis=1))


def frostman_random(t, d, level, rng, T=1):
    """Top-down subdivision keeping ceil(2^{tT}) children per cube per T-step;
    the output is {2^{-jT}}-uniform by construction."""
    if level % T:
        raise ValueError("level must be divisible by T")
    if not (0 < t <= d):
        raise ValueError("need 0 < t <= d")
    keep = int(np.ceil(2.0 ** (t * T)))
    children = np.stack(np.meshgrid(*[np.arange(2 ** T)] * d, indexing="ij"),
                        -1).reshape(-1, d)
    coords = np.zeros((1, d), dtype=np.int64)
    for _ in range(level // T):
        n = len(coords)
        picks = np.argsort(rng.random((n, len(children))), axis=1)[:, :keep]
        coords = (coords[:, None, :] << T) + children[picks]
        coords = coords.reshape(-1, d)
    return DiscretizedSet(level, coords)


def cantor_product(allowed_digits, n_blocks, d=None):
    """Product of base-4 digit-restricted Cantor sets; allowed_digits is one
    list (shared) or a list per axis; resolution 4^{-n_blocks}."""
    nested = len(allowed_digits) > 0 and isinstance(allowed_digits[0], (list, tuple))
    if nested:
        per_axis = [list(a) for a in allowed_digits]
    else:
        per_axis = [list(allowed_digits)] * (d or 2)
    level = 2 * n_blocks
    axes_vals = []
    for digits in per_axis:
        vals = np.zeros(1, dtype=np.int64)
        for _ in range(n_blocks):
            vals = (vals[:, None] * 4 + np.asarray(digits, dtype=np.int64)).ravel()
        axes_vals.append(vals)
    coords = np.stack(np.meshgrid(*axes_vals, indexing="ij"), -1).reshape(-1, len(per_axis))
    return DiscretizedSet(level, coords)


def quasi_product(tau, kappa, s, k, d, level, rng):
    """Z = union over y in Y of X_y x {y}: Y a (delta,tau)-set in the last
    coordinate, each X_y a (delta,s)-nonconcentrated (d-1)-dimensional fiber."""
    if k > d - 2:
        raise ValueError("need k <= d-2")
    if s > k + 1:
        raise ValueError("quasi-product requires s <= k+1")
    if not (0 < kappa <= s):
        raise ValueError("need 0 < kappa <= s")
    Y = frostman_random(tau, 1, level, rng)
    rows = []
    for y in Y.coords[:, 0]:
        X = frostman_random(s, d - 1, level, rng)
        block = np.concatenate(
            [X.coords, np.full((len(X), 1), y, dtype=np.int64)], axis=1)
        rows.append(block)
    return DiscretizedSet(level, np.concatenate(rows))


def plate_counterexample_set(k, d, level, max_points=None, rng=None):
    """delta-grid inside the slab spanned by the first k+1 axes (others < delta)."""
    if not (0 <= k <= d - 2):
        raise ValueError("need 0 <= k <= d-2")
    axes = [np.arange(2 ** level)] * (k + 1)
    head = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, k + 1)
    coords = np.concatenate(
        [head, np.zeros((len(head), d - k - 1), dtype=np.int64)], axis=1)
    if max_points and len(coords) > max_points and rng is not None:
        coords = coords[rng.choice(len(coords), max_points, replace=False)]
    return DiscretizedSet(level, coords)


# ---------------------------------------------------------------------------
# direction sets on the universe


def frostman_direction_indices(universe, s, level, rng):
    """Indices into universe.dirs forming a (delta,s)-nonconcentrated slope set
    of size ~ 2^{level*s}."""
    d = universe.d
    if d == 2:
        F = frostman_random(s, 1, level, rng)
        frac = F.coords[:, 0] / 2.0 ** level
        idx = np.round(frac * (len(universe.dirs) - 1)).astype(int)
        return np.unique(idx)
    F = frostman_random(s, d - 1, level, rng)
    chart = (F.coords + 0.5) / 2.0 ** level
    phi = 2 * np.pi * chart[:, 0]
    cz = chart[:, 1] if d == 3 else chart[:, 1]
    st = np.sqrt(np.maximum(1 - cz ** 2, 0.0))
    if d == 3:
        pts = np.stack([st * np.cos(phi), st * np.sin(phi), cz], axis=1)
    else:
        extra = chart[:, 2:]
        pts = np.concatenate([np.stack([st * np.cos(phi), st * np.sin(phi), cz], 1),
                              extra], axis=1)
        pts = np.array([unit(p) for p in pts])
    idx = np.empty(len(pts), dtype=int)
    for start in range(0, len(pts), 2048):
        chunk = pts[start:start + 2048]
        idx[start:start + 2048] = np.argmax(np.abs(chunk @ universe.dirs.T), axis=1)
    return np.unique(idx)


def slab_direction_indices(universe, k, target=None):
    """Universe directions lying (within net spacing) in the span of the first
    k+1 axes; optionally evenly subsampled to a target count."""
    mask = np.all(np.abs(universe.dirs[:, k + 1:]) <= 0.75 * universe.spacing, axis=1)
    idx = np.nonzero(mask)[0]
    if target and len(idx) > target:
        idx = idx[np.round(np.linspace(0, len(idx) - 1, target)).astype(int)]
    return idx


def all_direction_indices(universe, target=None):
    idx = np.arange(len(universe.dirs))
    if target and len(idx) > target:
        idx = idx[np.round(np.linspace(0, len(idx) - 1, target)).astype(int)]
    return idx


# ---------------------------------------------------------------------------
# configuration builders


def _central_keys(universe, centers, dir_indices):
    """Packed keys of canonical tubes through each center, one per direction.

    Mirrors TubeUniverse packing; the offset rounding error is < width/2, so
    every produced tube contains its center point.
    """
    n = len(centers)
    half = universe._span // 2
    cols = []
    for i in dir_indices:
        u = universe.dirs[i]
        perp = centers - np.outer(centers @ u, u)
        y = perp @ universe.comps[i].T
        ints = np.round(y / universe.spacing).astype(np.int64) + half
        code = np.full(n, i, dtype=np.int64)
        for col in range(universe.d - 1):
            code = code * universe._span + ints[:, col]
        cols.append(code)
    return np.stack(cols, axis=1)  # (n, m)


def central_config(P, universe, dir_indices, params=None):
    """Bundles = canonical tubes through each cube center with the shared
    direction set; exactly M-uniform (distinct directions give distinct keys)."""
    keys2d = _central_keys(universe, P.centers(), dir_indices)
    keys = keys2d.ravel()
    m = keys2d.shape[1]
    indptr = np.arange(len(P) + 1, dtype=np.int64) * m
    return Configuration(P, universe, keys, indptr, params, uniform=True)


def grid_config(s, t, d, level, seed, universe=None):
    rng = derive_rng(seed, "grid_config")
    universe = universe or TubeUniverse(2.0 ** -level, d)
    P = full_grid(d, level) if t >= d else frostman_random(t, d, level, rng)
    dirs = frostman_direction_indices(universe, s, level, rng)
    return central_config(P, universe, dirs,
                          {"s": s, "t": t, "kind": "grid", "seed": seed})


def frostman_config(s, t, d, level, seed, universe=None):
    rng = derive_rng(seed, "frostman_config")
    universe = universe or TubeUniverse(2.0 ** -level, d)
    P = frostman_random(t, d, level, rng)
    dirs = frostman_direction_indices(universe, s, level, rng)
    return central_config(P, universe, dirs,
                          {"s": s, "t": t, "kind": "frostman", "seed": seed})


def bush_config(s, t, d, level, seed, universe=None, n_per_tube=None):
    """All tubes through one point; P sampled along the tubes, bundle size 1."""
    rng = derive_rng(seed, "bush_config")
    universe = universe or TubeUniverse(2.0 ** -level, d)
    delta = 2.0 ** -level
    x0 = np.full(d, 0.5)
    dirs = frostman_direction_indices(universe, s, level, rng)
    keys = _central_keys(universe, x0[None, :], dirs)[0]
    n_per = n_per_tube or max(1, int(round(2.0 ** (level * (t - s)))))
    pts, owner = [], []
    for key in keys:
        tube = universe.tube(int(key))
        tproj = (x0 - tube.anchor) @ tube.direction
        offs = 0.08 + 0.34 * rng.random(n_per)
        signs = rng.choice([-1.0, 1.0], n_per)
        for o, sg in zip(offs, signs):
            x = tube.anchor + (tproj + sg * o) * tube.direction
            if np.all(x >= 0) and np.all(x < 1):
                pts.append(x)
                owner.append(int(key))
    pts = np.array(pts)
    z = np.floor(pts / delta).astype(np.int64)
    order = np.lexsort(z.T[::-1])
    z, owner = z[order], np.array(owner, dtype=np.int64)[order]
    uniq, starts = np.unique(z, axis=0, return_index=True)
    bundle_keys = owner[starts]  # one tube per cube: the first owner
    P = DiscretizedSet(level, uniq, dim=d)
    # rows of P.coords are sorted-unique == uniq rows (same order)
    indptr = np.arange(len(P) + 1, dtype=np.int64)
    cfg = Configuration(P, universe, bundle_keys, indptr,
                        {"s": s, "t": t, "kind": "bush", "seed": seed}, uniform=True)
    return cfg


def plate_slab_config(s, k, d, level, seed, universe=None, max_points=4096,
                      target_dirs=None):
    """Configuration confined to the (delta,k+1)-slab: the s=k counterexample."""
    rng = derive_rng(seed, "plate_slab_config")
    universe = universe or TubeUniverse(2.0 ** -level, d)
    P = plate_counterexample_set(k, d, level, max_points=max_points, rng=rng)
    target = target_dirs or int(round(2.0 ** (level * s)))
    dirs = slab_direction_indices(universe, k, target=target)
    return central_config(P, universe, dirs,
                          {"s": s, "t": k + 1.0, "k": k, "kind": "plate_slab",
                           "seed": seed})


def quasi_product_config(tau, kappa, s, k, d, level, seed, universe=None):
    rng = derive_rng(seed, "quasi_product_config")
    universe = universe or TubeUniverse(2.0 ** -level, d)
    P = quasi_product(tau, kappa, s, k, d, level, rng)
    dirs = frostman_direction_indices(universe, min(s, d - 1), level, rng)
    return central_config(P, universe, dirs,
                          {"s": min(s, d - 1), "t": min(s + tau, d), "k": k,
                           "kind": "quasi_product", "seed": seed})


# ---------------------------------------------------------------------------
# dispatch


SET_KINDS = {"full_grid", "line_set", "frostman_random", "cantor_product",
             "quasi_product", "plate_counterexample"}
CONFIG_KINDS = {"grid_config", "frostman_config", "bush_config",
                "plate_slab_config", "quasi_product_config"}


def generate(kind, params, seed=0):
    """Build a named set or configuration family; deterministic per seed."""
    p = dict(params)
    rng = derive_rng(seed, kind)
    if kind == "full_grid":
        return full_grid(p["d"], p["level"])
    if kind == "line_set":
        return line_set(p["d"], p["level"])
    if kind == "frostman_random":
        return frostman_random(p["t"], p["d"], p["level"], rng, T=p.get("T", 1))
    if kind == "cantor_product":
        return cantor_product(p["allowed_digits"], p["n_blocks"], p.get("d"))
    if kind == "quasi_product":
        return quasi_product(p["tau"], p["kappa"], p["s"], p["k"], p["d"],
                             p["level"], rng)
    if kind == "plate_counterexample":
        return plate_counterexample_set(p["k"], p["d"], p["level"],
                                        p.get("max_points"), rng)
    if kind in CONFIG_KINDS:
        fn = globals()[kind]
        return fn(**p, seed=seed)
    raise ValueError(f"unknown generator kind: {kind}")
