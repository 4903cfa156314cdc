"""Incidence counting vs naive oracles, the elementary estimates, slices,
multilinear Kakeya, and exponent fitting."""

import numpy as np
import pytest

from fractalab.dyadic import DiscretizedSet
from fractalab.generators import (bush_config, derive_rng, frostman_random,
                                  full_grid, grid_config)
from fractalab.geometry import Tube, TubeUniverse, unit
from fractalab.incidence import (bundles_from_family, bundles_from_family_naive,
                                 count_incidences, count_incidences_oracle,
                                 easy_lower_bound, furstenberg_exponent,
                                 j_p_oracle, j_p_statistics,
                                 multilinear_kakeya_ratio, polylog_budget,
                                 slice_covering, slice_covering_oracle, theta,
                                 verify_easy_estimate)
from fractalab.sets import TubeFamily


def test_theta_values():
    assert theta(0.0, 0.0, 2) == 1.0
    assert theta(0.5, 1.0, 2) == 0.0          # t >= d-1 clamps to 0
    assert theta(0.5, 2.0, 3) == 0.0
    assert abs(theta(0.5, 1.0, 3) - (3 - 1 - 1.0) / (3 - 1 - 0.5)) < 1e-12
    with pytest.raises(ValueError):
        theta(1.0, 0.5, 2)
    with pytest.raises(ValueError):
        theta(-0.1, 0.5, 2)


def test_polylog_budget():
    assert polylog_budget(2.0 ** -8, 1.0) == 8.0
    assert polylog_budget(2.0 ** -4, 2.0) == 2.0 * 16.0


@pytest.fixture(scope="module")
def small_cfg():
    return grid_config(1.0, 2.0, 2, 4, seed=1)


def test_count_incidences_oracle_agreement(small_cfg):
    assert count_incidences(small_cfg) == count_incidences_oracle(small_cfg)
    assert small_cfg.verify_meets()


def test_bundles_from_family_matches_naive(universe2_16, rng):
    U = universe2_16
    P = frostman_random(1.2, 2, 4, derive_rng(0, "bundle-P"))
    anchors = rng.uniform(0, 1, (25, 2))
    dirs = np.array([unit(v) for v in rng.standard_normal((25, 2))])
    fam = TubeFamily.from_lines(U, anchors, dirs)
    fast = bundles_from_family(P, fam)
    slow = bundles_from_family_naive(P, fam)
    assert np.array_equal(fast.keys, slow.keys)
    assert np.array_equal(fast.indptr, slow.indptr)


def test_j_p_oracle_agreement(small_cfg):
    assert np.array_equal(j_p_statistics(small_cfg), j_p_oracle(small_cfg))


def test_trim_uniform(universe2_16, rng):
    P = frostman_random(1.2, 2, 4, derive_rng(0, "trim-P"))
    anchors = rng.uniform(0, 1, (30, 2))
    dirs = np.array([unit(v) for v in rng.standard_normal((30, 2))])
    cfg = bundles_from_family(P, TubeFamily.from_lines(universe2_16, anchors, dirs))
    tr = cfg.trim_uniform()
    assert tr.uniform
    sizes = tr.bundle_sizes()
    assert len(sizes) == 0 or np.all(sizes == sizes[0])


def test_easy_estimate_on_grid(small_cfg, frozen):
    rep = verify_easy_estimate(small_cfg, frozen["polylog_C"], seed=0)
    assert rep.passed
    lo = easy_lower_bound(small_cfg, frozen["polylog_C"])
    assert lo.passed


def test_bush_config_shape():
    cfg = bush_config(1.0, 1.5, 2, 5, seed=2)
    assert cfg.M == 1
    assert cfg.verify_meets()


def _axis_tube_family(universe, n):
    """n parallel horizontal tubes at well-separated heights."""
    U = universe
    i_h = int(np.argmax(np.abs(U.dirs[:, 0])))   # most horizontal direction
    keys = [U.pack((i_h, (4 * j,))) for j in range(n)]
    return TubeFamily(U, keys)


def test_slice_covering_parallel_tubes(universe2_64):
    # horizontal tubes make angle < 1/100 with the slicing plane: rejected
    fam = _axis_tube_family(universe2_64, 3)
    with pytest.raises(ValueError):
        slice_covering(fam, 0.5)


def test_slice_covering_oracle_agreement(universe2_16, rng):
    U = universe2_16
    anchors = rng.uniform(-0.2, 0.2, (6, 2))
    dirs = np.array([unit(np.array([c, 1.0])) for c in rng.uniform(-0.6, 0.6, 6)])
    fam = TubeFamily.from_lines(U, anchors, dirs)
    exact = slice_covering(fam, 0.3)
    raster = slice_covering_oracle(fam, 0.3)
    # the raster sees a subset of the cells the exact engine counts
    assert raster <= exact
    assert exact <= raster + 4 * len(fam)     # boundary cells only


def test_kakeya_transverse_axes():
    # two orthogonal width-1 tubes in the plane: overlap is the unit square
    tubes = [Tube(np.zeros(2), np.eye(2)[i], 1.0) for i in range(2)]
    ratio = multilinear_kakeya_ratio([[tubes[0]], [tubes[1]]], 1.0 / 16)
    assert 3.0 <= ratio <= 5.0                # area ~4, wedge = 1
    # coplanar (parallel) directions: zero wedge kills the integrand
    ratio0 = multilinear_kakeya_ratio([[tubes[0]], [tubes[0]]], 1.0 / 16)
    assert ratio0 == 0.0
    with pytest.raises(ValueError):
        multilinear_kakeya_ratio([[tubes[0]], [tubes[1]]], 0.5)   # grid too coarse
    with pytest.raises(ValueError):
        multilinear_kakeya_ratio([[tubes[0]]], 1.0 / 16)          # k < 2


def test_furstenberg_exponent_fit():
    counts = {j: 2.0 ** (0.8 * j + 1.3) for j in range(4, 9)}
    fit = furstenberg_exponent(counts)
    assert abs(fit["exponent"] - 0.8) < 1e-9
    assert abs(fit["intercept"] - 1.3) < 1e-9
    assert fit["power_law"] and fit["max_residual"] < 1e-9
    with pytest.raises(ValueError):
        furstenberg_exponent({4: 10, 5: 20})


def test_incidence_report_record(small_cfg, frozen):
    rec = verify_easy_estimate(small_cfg, frozen["polylog_C"]).to_record()
    for key in ("estimate", "lhs", "rhs", "ratio", "budget", "pass", "params"):
        assert key in rec
