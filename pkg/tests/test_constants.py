"""Frozen-constants file: roundtrip, schema, and the shipped values."""

import json

import pytest

from fractalab.constants import (REQUIRED_KEYS, get, load_constants,
                                 save_constants)

GOOD = {
    "polylog_C": 1.0, "refinement_C_poly": 1.0,
    "energy_ratio": {"1,2": 2.0}, "heavy_plate_N": 3.0,
    "power_decay_K0": 4.0, "kakeya_ratio": 5.0, "ruzsa_C_d": 1.25,
    "extraction_c": 2.0, "coherence_C": 2.0,
}


def test_roundtrip(tmp_path):
    path = tmp_path / "c.json"
    save_constants(GOOD, path, provenance={"seed": 0})
    back = load_constants(path)
    assert back == {k: GOOD[k] for k in sorted(GOOD)}


def test_missing_key_rejected(tmp_path):
    bad = dict(GOOD)
    del bad["kakeya_ratio"]
    with pytest.raises(ValueError):
        save_constants(bad, tmp_path / "c.json")
    path = tmp_path / "c2.json"
    save_constants(GOOD, path)
    rec = json.loads(path.read_text())
    del rec["values"]["polylog_C"]
    path.write_text(json.dumps(rec))
    with pytest.raises(ValueError):
        load_constants(path)


def test_schema_rejected(tmp_path):
    path = tmp_path / "c.json"
    save_constants(GOOD, path)
    rec = json.loads(path.read_text())
    rec["schema"] = 99
    path.write_text(json.dumps(rec))
    with pytest.raises(ValueError):
        load_constants(path)


def test_get(tmp_path):
    path = tmp_path / "c.json"
    save_constants(GOOD, path)
    assert get("polylog_C", path) == 1.0
    assert get("nope", path, default=7) == 7
    with pytest.raises(KeyError):
        get("nope", path)
    assert get("anything", tmp_path / "absent.json", default=3) == 3
    with pytest.raises(FileNotFoundError):
        load_constants(tmp_path / "absent.json")


def test_shipped_constants(frozen):
    assert set(REQUIRED_KEYS) <= set(frozen)
    assert frozen["power_decay_K0"] == 4.0
    assert frozen["polylog_C"] >= 0.5
    assert set(frozen["energy_ratio"]) == {"1,2", "2,2", "1,3", "2,3"}
    assert all(v > 0 for v in frozen["energy_ratio"].values())
