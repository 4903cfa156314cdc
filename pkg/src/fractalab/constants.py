"""Frozen measured constants.

The library's inequalities hide absolute constants that no closed form pins
down.  They are measured once on the calibration zoo, written to a versioned
JSON file shipped with the package, and asserted against thereafter.  A file
is reproducible: same seed and zoo give byte-identical output.
"""

import json
from importlib import resources

SCHEMA_VERSION = 1

REQUIRED_KEYS = [
    "polylog_C",            # C in the (C log(1/delta))^C incidence budget
    "refinement_C_poly",    # same role for the multiscale refinement
    "energy_ratio",         # per "k,d": I_{s,k}/C^k ceiling, energy upper bound
    "heavy_plate_N",        # exponent in the (C_nu/a)^N heavy-plate count
    "power_decay_K0",       # minimal admissible K in the decay decomposition
    "kakeya_ratio",         # multilinear Kakeya LHS/RHS regression ceiling
    "ruzsa_C_d",            # dimensional factor in sumset covering bounds
    "extraction_c",         # O(1) factor in the energy-extraction constant
    "coherence_C",          # factor in the plate-coherence exception bound
]


def default_path():
    return resources.files("fractalab").joinpath("data/frozen_constants.json")


def save_constants(values, path=None, provenance=None):
    missing = [k for k in REQUIRED_KEYS if k not in values]
    if missing:
        raise ValueError(f"missing constants: {missing}")
    rec = {"schema": SCHEMA_VERSION,
           "provenance": provenance or {},
           "values": {k: values[k] for k in sorted(values)}}
    path = default_path() if path is None else path
    with open(path, "w") as f:
        json.dump(rec, f, indent=1, sort_keys=True)
        f.write("\n")
    return path


def load_constants(path=None):
    path = default_path() if path is None else path
    with open(path) as f:
        rec = json.load(f)
    if rec.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"unsupported constants schema: {rec.get('schema')}")
    missing = [k for k in REQUIRED_KEYS if k not in rec["values"]]
    if missing:
        raise ValueError(f"constants file lacks: {missing}")
    return rec["values"]


def get(name, path=None, default=None):
    try:
        values = load_constants(path)
    except FileNotFoundError:
        if default is not None:
            return default
        raise
    if name in values:
        return values[name]
    if default is not None:
        return default
    raise KeyError(name)
