"""Stable partial matchings of a lattice to a point process on the torus."""

from .flower import (PHI, PSI, Chain, Flower, FlowerBudgetExceeded, Window, chain_bound,
                     descending_chains, flower_by_chains, is_decisive, matching_flower,
                     verify_stopping_set)
from .geometry import (Box, Neighbor, NeighborIndex, PointSet, k_nearest, preference_order,
                       prefers, torus_displacement, torus_distance)
from .matching import NONE, Matching, brute_force_match, find_unstable_pairs, stable_match
from .queue import QueueTrace, one_sided_match, queue_identity_residuals
from .rigidity import Ball, RigidityRecord, rigidity_recover
from .samplers import (LatticeSpec, SpectralModel, make_lattice, make_rng, sample_dpp_spectral,
                       sample_poisson)
from .stats import (EccdfTable, GrTable, SkTable, VarianceTable, fit_power_law,
                    matching_distance_eccdf, number_variance, pair_correlation,
                    scattering_intensity)

__version__ = "0.1.0"

__all__ = [
    "PHI", "PSI", "NONE", "Ball", "Box", "Chain", "EccdfTable", "Flower",
    "FlowerBudgetExceeded", "GrTable", "LatticeSpec", "Matching", "Neighbor", "NeighborIndex",
    "PointSet", "QueueTrace", "RigidityRecord", "SkTable", "SpectralModel", "VarianceTable",
    "Window", "brute_force_match", "chain_bound", "descending_chains", "find_unstable_pairs",
    "fit_power_law", "flower_by_chains", "is_decisive", "k_nearest", "make_lattice", "make_rng",
    "matching_distance_eccdf", "matching_flower", "number_variance", "one_sided_match",
    "pair_correlation", "preference_order", "prefers", "queue_identity_residuals",
    "rigidity_recover", "sample_dpp_spectral", "sample_poisson", "scattering_intensity",
    "stable_match", "torus_displacement", "torus_distance", "verify_stopping_set",
]
