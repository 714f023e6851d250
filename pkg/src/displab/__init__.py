"""Numerical laboratory for odd-order nonlinear dispersive equations.

Pseudospectral fields on a truncated torus, dyadic frequency analysis, Picard
iteration for the integral form of odd-order dispersive equations, frequency-side
witnesses for the failure of smooth flow maps, and a verification harness for
the linear and bilinear estimates the solver relies on.
"""

from displab.dyadic import DyadicDecomposition
from displab.estimates import (
    Ensemble,
    EstimateReport,
    block_ensemble,
    merge_reports,
    mode_ensemble,
    packet_ensemble,
    random_ensemble,
    verify_bernstein,
    verify_bilinear,
    verify_equivalences,
    verify_localized,
    verify_maximal,
    verify_smoothing,
)
from displab.equations import (
    BenjaminOnoEquation,
    EquationSpec,
    GenericEquation,
    IntermediateLongWaveEquation,
    apply_group,
    dispersion_values,
    duhamel,
    duhamel_trajectory,
    free_trajectory,
    nonlinearity,
    picard_map,
)
from displab.grid import (
    MultiplierSymbol,
    SpectralField,
    TorusGrid,
    apply_multiplier,
    boundary_mass_fraction,
    depth_averaged_symbol,
    derivative,
    fractional_derivative,
    hilbert_symbol,
    l2_norm,
    multiply_by_x,
    pointwise_product,
    real_projection,
    to_physical,
    to_spectral,
)
from displab.norms import (
    NormReport,
    besov_norm,
    besov_report,
    mixed_norm,
    sobolev_norm,
    sobolev_report,
    weighted_besov_norm,
    weighted_besov_report,
    weighted_sobolev_norm,
    weighted_sobolev_report,
    x_norm,
    xt_seminorms,
    xts_seminorms,
    y_norm,
)
from displab.solver import (
    BlowUpError,
    SolveConfig,
    SolveReport,
    picard_solve,
    reference_solve,
    smallness_beta,
    suggest_horizon,
)
from displab.trajectory import Trajectory, uniform_times
from displab.witness import (
    FrechetReport,
    FrequencyProfile,
    GrowthFitReport,
    WitnessConfig,
    WitnessPair,
    bilinear_duhamel,
    frechet_check,
    growth_scan,
    oscillatory_factor,
    overlap_length,
    q_poly,
    resonance,
    second_iterate_transform,
    witness_norm,
    witness_pair,
)

__version__ = "0.1.0"
