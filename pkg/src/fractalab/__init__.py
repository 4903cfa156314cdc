"""fractalab: a desk-scale lab for discretized fractal geometry.

Dyadic cubes, delta-tubes, (r,k)-plates and their nets; non-concentration
checkers; tube-cube incidence estimates; multiscale uniformization and
refinement; additive-combinatorics tools including a constructive
Balog-Szemeredi-Gowers extraction; Riesz energies, heavy plates, and
power-decay certificates.  Everything is exact or comes with a measured
constant frozen in a versioned file.
"""

from .dyadic import DyadicCube, DiscretizedSet, dyadic_level, is_dyadic
from .geometry import (Tube, Plate, TubeUniverse, CubeMap, PlateMap,
                       sphere_net, tube_meets_cube, grassmann_distance,
                       rescale_to_unit, TOL, CLIP_RADIUS)
from .nets import PlateNet, PlateNetBudgetError, build_plate_net, projected_count
from .sets import (TubeFamily, NonConcentrationReport, covering_number,
                   check_ball_set, check_tube_set, check_regular,
                   verify_slope_duality, prune_to_small_set, default_nets,
                   feasible_net_scales)
from .incidence import (Configuration, count_incidences, bundles_from_family,
                        theta, verify_easy_estimate, easy_lower_bound,
                        plate_localized_lower_bound, j_p_statistics,
                        slice_covering, multilinear_kakeya_ratio,
                        furstenberg_exponent, polylog_budget)
from .multiscale import (uniformize, uniformize_in_plate, UniformStructure,
                         BranchingFunction, branching_function,
                         is_eps_linear, is_eps_superlinear,
                         decompose_branching, refine_nice_configuration,
                         iterate_refinement, extract_t_prime_subset,
                         RefinementResult)
from .additive import (sumset_covering, verify_ruzsa_triangle,
                       verify_plunnecke, iterated_sumset, ring_set_membership,
                       ring_closure_check, iterate_sum_product, bsg_extract,
                       verify_event_intersection, BSGPreconditionError,
                       BSGInternalError)
from .measures import (DiscreteMeasure, FrostmanReport, frostman_constant,
                       riesz_energy, verify_energy_upper,
                       extract_nonconcentrated_subset, heavy_plates,
                       covering_plates, plate_coherence_exceptions,
                       power_decay_decomposition, thin_check, PairSet,
                       ThinPlateCertificate, radial_projection_covering,
                       PreconditionError)
from .generators import generate, derive_rng, SET_KINDS, CONFIG_KINDS
from .constants import load_constants, save_constants

__version__ = "0.1.0"
