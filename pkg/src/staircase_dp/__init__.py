"""Staircase additive-noise mechanisms for epsilon-DP vector queries under l_p norms."""

__version__ = "0.1.0"

from ._series import SeriesDivergenceError
from .cost import CostSpec, band_conditional_moment, expected_cost_mc, expected_cost_series, phi
from .dpverify import (
    DpReport,
    check_levelset_enlargement,
    check_maximal_decay,
    check_radial_loglip,
    check_ratio_pairs,
    enlargement_radius,
    laplace_sandwich_check,
)
from .estimator import StaircaseMechanism
from .norms import NormSpec, ball_volume, norm, sample_direction
from .optimize import TradeoffRow, find_gamma_star, laplace_baseline_cost, tradeoff_sweep
from .profiles import GridSet, RadialProfile, StepDensity1D
from .rearrange import (
    DecompositionError,
    check_domination,
    decompose_staircase_mixture,
    find_mass_matching_y,
    make_rho_y,
    psi,
    rearrange_profile,
    rearrange_set,
)
from .staircase import (
    BandTable,
    DegenerateBandError,
    StaircaseParams,
    build_band_table,
    density,
    radius_from_uniform,
    sample,
    total_mass,
)

__all__ = [
    "BandTable", "CostSpec", "DecompositionError", "DegenerateBandError", "DpReport", "GridSet",
    "NormSpec", "RadialProfile", "SeriesDivergenceError", "StaircaseMechanism", "StaircaseParams",
    "StepDensity1D", "TradeoffRow", "ball_volume", "band_conditional_moment", "build_band_table",
    "check_domination", "check_levelset_enlargement", "check_maximal_decay", "check_radial_loglip",
    "check_ratio_pairs", "decompose_staircase_mixture", "density", "enlargement_radius",
    "expected_cost_mc", "expected_cost_series", "find_gamma_star", "find_mass_matching_y",
    "laplace_baseline_cost", "laplace_sandwich_check", "make_rho_y", "norm", "phi", "psi",
    "radius_from_uniform", "rearrange_profile", "rearrange_set", "sample", "sample_direction",
    "total_mass", "tradeoff_sweep",
]
