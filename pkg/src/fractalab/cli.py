"""Batch experiment runner: generate -> check -> report pipelines.

Subcommands: gen, check, run, sweep, calibrate, report.  Specs are JSON;
reports are JSON-lines (one record per line, flushed as produced, sorted
keys, no timestamps in the body, so equal seeds give identical bodies);
sweeps are CSV.  Per-component randomness is derived from one master seed
by stable labeled hashing, so adding a check never perturbs another's.
"""

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import constants as frozen
from .dyadic import DiscretizedSet
from .generators import (generate, derive_rng, SET_KINDS, CONFIG_KINDS,
                         full_grid)
from .geometry import Tube, Plate, unit
from .incidence import (verify_easy_estimate, easy_lower_bound,
                        plate_localized_lower_bound, count_incidences,
                        count_incidences_oracle, furstenberg_exponent,
                        multilinear_kakeya_ratio, j_p_statistics, j_p_oracle)
from .measures import (DiscreteMeasure, frostman_constant, verify_energy_upper,
                       heavy_plates, power_decay_decomposition,
                       PreconditionError)
from .multiscale import uniformize, refine_nice_configuration
from .nets import build_plate_net, projected_count, DEFAULT_BUDGET
from .sets import check_ball_set, check_tube_set, feasible_net_scales

SCHEMA_VERSION = 1
ENV_OUT = "FRACTALAB_OUT"


class SpecError(ValueError):
    """Spec parse/validation failure, naming the offending field."""


# ---------------------------------------------------------------------------
# spec handling


def load_spec(path):
    try:
        with open(path) as f:
            spec = json.load(f)
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec parse error at line {exc.lineno}: {exc.msg}")
    except OSError as exc:
        raise SpecError(f"spec unreadable: {exc}")
    return validate_spec(spec)


def validate_spec(spec):
    if spec.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise SpecError("schema: unsupported version")
    for fld in ("name", "generator"):
        if fld not in spec:
            raise SpecError(f"{fld}: missing")
    gen = spec["generator"]
    kind = gen.get("kind")
    if kind not in SET_KINDS | CONFIG_KINDS:
        raise SpecError(f"generator.kind: unknown '{kind}'")
    params = gen.get("params", {})
    d = params.get("d", 2)
    for key in ("s", "t"):
        if key in params and not (0 <= params[key] <= d):
            raise SpecError(f"generator.params.{key}: out of range [0, d]")
    levels = spec.get("levels", [params.get("level", 4)])
    if not all(isinstance(j, int) and 1 <= j <= 14 for j in levels):
        raise SpecError("levels: must be integers in [1, 14]")
    for name in spec.get("checks", []):
        if name not in CHECKS and name != "furstenberg":
            raise SpecError(f"checks: unknown check '{name}'")
    spec.setdefault("seed", 0)
    spec.setdefault("checks", [])
    spec.setdefault("levels", levels)
    return spec


def _constants(path):
    try:
        return frozen.load_constants(path)
    except FileNotFoundError:
        # calibration has not run yet; conservative stand-ins
        return {k: v for k, v in _FALLBACK.items()}


_FALLBACK = {"polylog_C": 2.0, "refinement_C_poly": 2.0, "energy_ratio": {},
             "heavy_plate_N": 5.0, "power_decay_K0": 4.0, "kakeya_ratio": 1.0,
             "ruzsa_C_d": 16.0, "extraction_c": 2.0, "coherence_C": 2.0}


# ---------------------------------------------------------------------------
# checks


def _artifact(spec, level, seed):
    gen = spec["generator"]
    params = dict(gen.get("params", {}))
    params["level"] = level
    return generate(gen["kind"], params, seed=seed)


def _as_set(art):
    return art.P if hasattr(art, "P") else art


def check_covering(art, ctx):
    P = _as_set(art)
    per = {}
    for j in range(max(P.level - 3, 0), P.level + 1):
        per[f"2^-{j}"] = int(P.covering_number(2.0 ** -j))
    return {"lhs": len(P), "per_scale": per, "pass": True}


def check_ball(art, ctx):
    P = _as_set(art)
    s = ctx["params"].get("t", ctx["params"].get("s", P.dim))
    rep = check_ball_set(P, s)
    return {"lhs": rep.C_min, "s": s, "witness_scale": rep.witness_scale,
            "pass": True}


def check_tubes(art, ctx):
    if not hasattr(art, "tube_family"):
        return {"pass": True, "skipped": "set artifact has no tubes"}
    s = ctx["params"].get("s", 1.0)
    rep = check_tube_set(art.tube_family(), s)
    return {"lhs": rep.C_min, "s": s, "pass": True}


def check_easy_estimate(art, ctx):
    rep = verify_easy_estimate(art, ctx["constants"]["polylog_C"],
                               seed=ctx["seed"])
    return rep.to_record()


def check_easy_lower(art, ctx):
    return easy_lower_bound(art, ctx["constants"]["polylog_C"]).to_record()


def check_incidence_oracle(art, ctx):
    exact = count_incidences(art)
    if art.n_points * max(1, len(art.all_tube_keys())) > 2 * 10 ** 6:
        return {"lhs": exact, "pass": True, "skipped": "oracle too large"}
    oracle = count_incidences_oracle(art)
    return {"lhs": exact, "rhs": oracle, "pass": bool(exact == oracle)}


def check_j_p(art, ctx):
    stats = j_p_statistics(art)
    rec = {"lhs": float(stats.sum()), "max": float(stats.max(initial=0)),
           "pass": True}
    if art.n_points <= 300:
        rec["pass"] = bool(np.array_equal(stats, j_p_oracle(art)))
    return rec


def check_refine(art, ctx):
    level = art.P.level
    Delta = 2.0 ** -(level // 2)
    res = refine_nice_configuration(art, Delta,
                                    C_poly=ctx["constants"]["refinement_C_poly"])
    if res is None:
        return {"pass": False, "skipped": "degenerate pigeonhole"}
    st = res.stats
    return {"pass": bool(st["passed"]), "item6_factor": st["item6_factor"],
            "M": st["M"], "M_Delta": st["M_Delta"],
            "n_children": len(res.children)}


def check_uniformize(art, ctx):
    P = _as_set(art)
    out, U = uniformize(P, 1)
    floor = 2.0 ** -P.level * len(P)          # (2T)^-m |P| at T = 1
    ok = U.verify() and len(out) >= floor - 2.0 ** -40
    return {"lhs": len(out), "rhs": floor, "pass": bool(ok),
            "branching": U.N}


def check_frostman(art, ctx):
    P = _as_set(art)
    mu = DiscreteMeasure.uniform(P)
    s = ctx["params"].get("t", ctx["params"].get("s", 1.0))
    rep = frostman_constant(mu, s, 0)
    return {"lhs": rep.C, "s": s, "pass": True}


def check_energy(art, ctx):
    P = _as_set(art)
    mu = DiscreteMeasure.uniform(P)
    t = ctx["params"].get("t", P.dim)
    s = max(t - 1.0, t / 2.0)
    ceil_map = ctx["constants"].get("energy_ratio", {})
    ceiling = ceil_map.get(f"1,{P.dim}")
    try:
        rep = verify_energy_upper(mu, s, t, 1, C_frozen=ceiling,
                                  seed=ctx["seed"])
    except PreconditionError as exc:
        return {"pass": False, "error": str(exc)}
    return {"lhs": rep["energy"], "rhs": rep["C_hypothesis"],
            "ratio": rep["ratio"], "pass": rep["passed"] is not False}


def check_heavy_plates(art, ctx):
    P = _as_set(art)
    nu = DiscreteMeasure.uniform(P)
    r = 2.0 ** -2
    k = 1 if P.dim == 2 else P.dim - 1
    if projected_count(r, k, P.dim) > DEFAULT_BUDGET:
        return {"pass": True, "skipped": "net over budget"}
    net = build_plate_net(r, k, P.dim, seed=ctx["seed"])
    a = ctx.get("a", 0.25)
    C_nu = frostman_constant(nu, 1.0, k - 1).C
    H, info = heavy_plates(nu, r, a, net, C_nu=C_nu,
                           N=ctx["constants"]["heavy_plate_N"])
    return {"lhs": info["count"], "rhs": info.get("bound"),
            "pass": bool(info.get("passed", True))}


def check_power_decay(art, ctx):
    P = _as_set(art)
    mu = DiscreteMeasure.uniform(P)
    gen = ctx["spec"]["generator"]
    params = dict(gen.get("params", {}))
    params["level"] = P.level
    other = generate(gen["kind"], params, seed=ctx["seed"] + 1)
    nu = DiscreteMeasure.uniform(_as_set(other))
    K = ctx.get("K", 4.0)
    r0 = ctx.get("r_0", 0.25)
    C_mu = frostman_constant(mu, 0.5, 0).C
    C_nu = frostman_constant(nu, 0.5, 0).C
    K0 = ctx["constants"]["power_decay_K0"]
    N = ctx["constants"]["heavy_plate_N"]
    B, cert = power_decay_decomposition(mu, nu, K, r0, 0.5, C_mu, C_nu, 1,
                                        K0=K0, N=N, seed=ctx["seed"])
    return {"lhs": cert.G["B_mass"], "rhs": cert.G["B_bound"],
            "K": K, "violations": len(cert.violations),
            "pass": bool(cert.passed and cert.G["B_ok"])}


def check_plate_localized(art, ctx):
    k = ctx["params"].get("k", 1)
    d = art.P.dim
    r0 = ctx.get("r_0", 0.5)
    axes = np.eye(d)[:k + 1]
    H = Plate.make(k + 1, axes, np.full(d, 0.5), r0)
    rep = plate_localized_lower_bound(art, H, r0, k,
                                      ctx["constants"]["polylog_C"],
                                      seed=ctx["seed"])
    return rep.to_record()


def check_tube_count(art, ctx):
    if hasattr(art, "all_tube_keys"):
        return {"lhs": int(len(art.all_tube_keys())), "pass": True}
    return {"lhs": len(art), "pass": True}


CHECKS = {
    "covering": check_covering,
    "ball_set": check_ball,
    "tube_set": check_tubes,
    "easy_estimate": check_easy_estimate,
    "easy_lower_bound": check_easy_lower,
    "incidence_oracle": check_incidence_oracle,
    "j_p": check_j_p,
    "refine": check_refine,
    "uniformize": check_uniformize,
    "frostman": check_frostman,
    "energy": check_energy,
    "heavy_plates": check_heavy_plates,
    "power_decay": check_power_decay,
    "plate_localized": check_plate_localized,
    "tube_count": check_tube_count,
}


# ---------------------------------------------------------------------------
# run / sweep


def _context(spec, constants, seed, **extra):
    ctx = {"spec": spec, "constants": constants, "seed": seed,
           "params": spec["generator"].get("params", {})}
    ctx.update(extra)
    return ctx


def _emit(fh, record):
    fh.write(json.dumps(record, sort_keys=True, default=_json_default) + "\n")
    fh.flush()


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def run_spec(spec, constants, out_fh, seed=None, levels=None):
    """Execute the spec pipeline; returns (n_checks, n_failed)."""
    seed = spec["seed"] if seed is None else seed
    levels = spec["levels"] if levels is None else levels
    _emit(out_fh, {"record": "spec", "schema": SCHEMA_VERSION, "spec": spec})
    n, failed = 0, 0
    counts_by_level = {}
    fit_wanted = "furstenberg" in spec.get("checks", [])
    check_names = [c for c in spec["checks"] if c != "furstenberg"]
    for level in levels:
        art = _artifact(spec, level, seed)
        if fit_wanted:
            counts_by_level[level] = (len(art.all_tube_keys())
                                      if hasattr(art, "all_tube_keys")
                                      else len(art))
        for name in check_names:
            ctx = _context(spec, constants, _check_seed(seed, name, level))
            try:
                data = CHECKS[name](art, ctx)
            except (PreconditionError, ResourceWarning, ValueError) as exc:
                data = {"pass": False, "error": f"{type(exc).__name__}: {exc}"}
            rec = {"record": "check", "name": name, "level": level,
                   "delta": 2.0 ** -level}
            rec.update(data)
            _emit(out_fh, rec)
            n += 1
            failed += 0 if rec.get("pass") else 1
    if fit_wanted and len(counts_by_level) >= 3:
        fit = furstenberg_exponent(counts_by_level)
        rec = {"record": "check", "name": "furstenberg", "level": None,
               "pass": True}
        rec.update(fit)
        _emit(out_fh, rec)
        n += 1
    return n, failed


def _check_seed(master, name, level):
    return int(derive_rng(master, f"{name}:{level}").integers(0, 2 ** 31))


def sweep_spec(spec, constants, axis, values, out_path, seed=None, jobs=1):
    """One CSV row per axis value; rows computed concurrently, merged in order."""
    seed = spec["seed"] if seed is None else seed
    checks = [c for c in spec["checks"] if c != "furstenberg"]

    def one(value):
        row = {axis: value}
        if axis == "delta":
            level = int(round(-math.log2(value))) if value < 1 else int(value)
            art = _artifact(spec, level, seed)
            extra = {}
        else:
            level = spec["levels"][0]
            art = _artifact(spec, level, seed)
            extra = {axis.replace("delta", ""): value, axis: value}
        for name in checks:
            ctx = _context(spec, constants, _check_seed(seed, name, level),
                           **extra)
            try:
                data = CHECKS[name](art, ctx)
            except (PreconditionError, ResourceWarning, ValueError) as exc:
                data = {"pass": False, "error": f"{type(exc).__name__}: {exc}"}
            for key in ("lhs", "rhs", "ratio", "pass"):
                if key in data:
                    row[f"{name}_{key}"] = data[key]
        return row

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, values))
    else:
        rows = [one(v) for v in values]
    fields = [axis]
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    with open(out_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    return rows


# ---------------------------------------------------------------------------
# calibration


CALIBRATION_ZOO = [
    {"kind": "grid_config", "params": {"s": 1.0, "t": 2.0, "d": 2}},
    {"kind": "frostman_config", "params": {"s": 0.8, "t": 1.5, "d": 2}},
    {"kind": "bush_config", "params": {"s": 1.0, "t": 1.5, "d": 2}},
    {"kind": "plate_slab_config", "params": {"s": 0.5, "k": 0, "d": 2}},
    {"kind": "quasi_product_config",
     "params": {"tau": 0.5, "kappa": 0.5, "s": 1.0, "k": 0, "d": 2}},
    {"kind": "grid_config", "params": {"s": 1.0, "t": 3.0, "d": 3}},
    {"kind": "frostman_config", "params": {"s": 1.0, "t": 2.0, "d": 3}},
]

_REQUIRED_FAMILIES = {"grid_config", "frostman_config", "bush_config",
                      "plate_slab_config", "quasi_product_config"}


def kakeya_family(d, k, n_tubes, seed):
    """k transverse families of width-1 tubes near the coordinate axes."""
    rng = derive_rng(seed, "kakeya")
    fams = []
    for i in range(k):
        fam = []
        for _ in range(n_tubes):
            v = np.eye(d)[i] + 0.2 * rng.standard_normal(d)
            anchor = 0.5 * rng.standard_normal(d)
            fam.append(Tube(anchor, unit(v), 1.0, (-2.0, 2.0)))
        fams.append(fam)
    return fams


def _fit_polylog(ratios_deltas, grid=(0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0)):
    """Smallest C on the grid with ratio <= C log2(1/delta)^C throughout."""
    for C in grid:
        if all(r <= C * math.log2(1.0 / dl) ** C + 1e-12
               for r, dl in ratios_deltas):
            return C
    return grid[-1]


def calibrate(zoo=None, seed=0, levels=(4, 5, 6, 7, 8), verbose=True):
    """Measure every frozen constant on the calibration zoo."""
    zoo = CALIBRATION_ZOO if zoo is None else zoo
    present = {g["kind"] for g in zoo}
    missing = sorted(_REQUIRED_FAMILIES - present)
    if missing:
        raise SpecError(f"calibration zoo missing families: {missing}")

    def log(msg):
        if verbose:
            print(msg, file=sys.stderr)

    ratios, lower_ratios = [], []
    refine_factors = []
    for gen in zoo:
        for level in levels:
            params = dict(gen["params"])
            params["level"] = level
            if gen["params"].get("d", 2) == 3 and level > 5:
                continue
            cfg = generate(gen["kind"], params, seed=seed)
            delta = 2.0 ** -level
            up = verify_easy_estimate(cfg, 1.0, seed=seed)
            lo = easy_lower_bound(cfg, 1.0)
            ratios.append((up.ratio, delta))
            lower_ratios.append((1.0 / max(lo.ratio, 1e-12), delta))
            res = refine_nice_configuration(cfg, 2.0 ** -(level // 2))
            if res is not None:
                refine_factors.append((1.0 / max(res.stats["item6_factor"],
                                                 1e-12), delta))
    polylog_C = _fit_polylog(ratios + lower_ratios)
    refinement_C = _fit_polylog(refine_factors)
    log(f"polylog_C = {polylog_C}, refinement_C_poly = {refinement_C}")

    energy_ratio = {}
    for d in (2, 3):
        for k in (1, 2):
            worst = 0.0
            for i in range(20):
                rng = derive_rng(seed, f"energy:{d}:{k}:{i}")
                t = float(rng.uniform(k + 0.2, d)) if k < d else float(d)
                P = generate("frostman_random",
                             {"t": t, "d": d, "level": 4}, seed=seed + i)
                mu = DiscreteMeasure.uniform(P)
                s = float(rng.uniform(0.3, t - 0.1))
                try:
                    rep = verify_energy_upper(mu, s, t, k)
                except PreconditionError:
                    continue
                worst = max(worst, rep["ratio"])
            energy_ratio[f"{k},{d}"] = round(worst * 1.5, 6)
            log(f"energy_ratio[{k},{d}] = {energy_ratio[f'{k},{d}']}")

    worst_N = 1.0
    for i in range(10):
        rng = derive_rng(seed, f"heavy:{i}")
        t = float(rng.uniform(1.2, 2.0))
        P = generate("frostman_random", {"t": t, "d": 2, "level": 6},
                     seed=seed + 100 + i)
        nu = DiscreteMeasure.uniform(P)
        for r in (0.25, 0.125):
            net = build_plate_net(r, 1, 2, seed=seed)
            C_nu = frostman_constant(nu, 0.5, 0).C
            for a in (0.125, 0.25):
                H, info = heavy_plates(nu, r, a, net)
                if info["count"] > 0 and C_nu / a > 1.001:
                    worst_N = max(worst_N, math.log(info["count"])
                                  / math.log(C_nu / a))
    heavy_N = round(worst_N * 1.25 + 0.5, 3)
    log(f"heavy_plate_N = {heavy_N}")

    kakeya = []
    for i in range(10):
        k = 2 + (i % 2)
        fams = kakeya_family(3, k, 3, seed=seed + i)
        kakeya.append(multilinear_kakeya_ratio(fams, 1.0 / 32))
    kakeya_ratio = round(float(np.max(kakeya)), 6)
    log(f"kakeya_ratio = {kakeya_ratio} (per-family: "
        + ", ".join(f"{v:.3f}" for v in kakeya) + ")")

    from .additive import verify_ruzsa_triangle
    worst_cd = 1.0
    for i in range(10):
        rng = derive_rng(seed, f"ruzsa:{i}")
        pts = lambda: rng.random((rng.integers(16, 64), 2))
        rec = verify_ruzsa_triangle(pts(), pts(), pts(), 2.0 ** -5)
        worst_cd = max(worst_cd, rec["ratio"])
    ruzsa_C_d = round(worst_cd * 1.25, 6)
    log(f"ruzsa_C_d = {ruzsa_C_d}")

    values = {"polylog_C": polylog_C, "refinement_C_poly": refinement_C,
              "energy_ratio": energy_ratio, "heavy_plate_N": heavy_N,
              "power_decay_K0": 4.0, "kakeya_ratio": kakeya_ratio,
              "ruzsa_C_d": ruzsa_C_d, "extraction_c": 2.0, "coherence_C": 2.0}
    provenance = {"seed": seed, "levels": list(levels),
                  "zoo": [g["kind"] for g in zoo],
                  "schema": SCHEMA_VERSION}
    return values, provenance


# ---------------------------------------------------------------------------
# entry points


def _default_out(name, suffix):
    base = os.environ.get(ENV_OUT, ".")
    os.makedirs(base, exist_ok=True)
    return os.path.join(base, f"{name}.{suffix}")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="fractalab",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("gen", "check", "run", "sweep", "calibrate", "report"):
        p = sub.add_parser(name)
        p.add_argument("--spec", help="experiment spec (JSON)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--constants", default=None,
                       help="frozen constants file")
        p.add_argument("--out", default=None)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--scale", type=int, default=None,
                       help="dyadic level override")
    sub.choices["sweep"].add_argument("--axis", default="delta",
                                      choices=("delta", "K", "r_0"))
    sub.choices["sweep"].add_argument("--values", default=None,
                                      help="comma-separated axis values")
    sub.choices["check"].add_argument("--check", dest="check_name",
                                      default=None)
    sub.choices["report"].add_argument("file", nargs="?", default=None)
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except SpecError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args):
    cmd = args.command
    if cmd == "calibrate":
        seed = 0 if args.seed is None else args.seed
        values, provenance = calibrate(seed=seed)
        out = args.out or str(frozen.default_path())
        frozen.save_constants(values, out, provenance)
        print(out)
        return 0
    if cmd == "report":
        path = args.file or args.spec
        if path is None:
            raise SpecError("report: missing input file")
        return _print_report(path)

    spec = load_spec(args.spec) if args.spec else None
    if spec is None:
        raise SpecError(f"{cmd}: --spec is required")
    constants = _constants(args.constants)
    seed = spec["seed"] if args.seed is None else args.seed
    levels = [args.scale] if args.scale else spec["levels"]

    if cmd == "gen":
        art = _artifact(spec, levels[0], seed)
        out = args.out or _default_out(spec["name"], "set.json")
        _save_artifact(art, out)
        print(out)
        return 0
    if cmd == "check":
        names = [args.check_name] if args.check_name else spec["checks"]
        one = dict(spec)
        one["checks"] = names
        n, failed = run_spec(one, constants, sys.stdout, seed=seed,
                             levels=levels[:1])
        return 0 if failed == 0 else 1
    if cmd == "run":
        out = args.out or _default_out(spec["name"], "report.jsonl")
        t0 = time.monotonic()
        with open(out, "w") as fh:
            n, failed = run_spec(spec, constants, fh, seed=seed,
                                 levels=levels)
        print(f"{out}: {n} checks, {failed} failed, "
              f"{time.monotonic() - t0:.1f}s", file=sys.stderr)
        return 0 if failed == 0 else 1
    if cmd == "sweep":
        if args.values:
            values = [float(v) for v in args.values.split(",")]
        elif args.axis == "delta":
            values = [2.0 ** -j for j in spec["levels"]]
        else:
            raise SpecError("sweep: --values required for this axis")
        if args.axis == "delta":
            bad = [v for v in values if not math.log2(v).is_integer()]
            if bad:
                raise SpecError(f"sweep: non-dyadic delta values {bad}")
        out = args.out or _default_out(spec["name"], f"{args.axis}.csv")
        sweep_spec(spec, constants, args.axis, values, out, seed=seed,
                   jobs=args.jobs)
        print(out)
        return 0
    raise SpecError(f"unknown command {cmd}")


def _save_artifact(art, path):
    if hasattr(art, "P"):
        rec = {"type": "configuration", "level": art.P.level,
               "d": art.P.dim, "coords": art.P.coords.tolist(),
               "keys": art.keys.tolist(), "indptr": art.indptr.tolist(),
               "params": art.params}
        with open(path, "w") as f:
            json.dump(rec, f)
    else:
        art.save(path)


def _print_report(path):
    failed = 0
    with open(path) as f:
        for line in f:
            rec = json.loads(line)
            if rec.get("record") != "check":
                continue
            status = "PASS" if rec.get("pass") else "FAIL"
            failed += 0 if rec.get("pass") else 1
            lhs = rec.get("lhs", rec.get("exponent", ""))
            print(f"{status} {rec['name']:<18} level={rec.get('level')} "
                  f"lhs={lhs}")
    return 0 if failed == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
