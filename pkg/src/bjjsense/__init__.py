"""Fidelity susceptibilities and critical sensing in the two-mode boson model."""

from .model import (
    DistributionOverM,
    EigensolverError,
    ModelParams,
    Spectrum,
    ThermalState,
    TridiagonalHamiltonian,
    build_hamiltonian,
    diagonalize,
    eigenvalues_only,
    equilibrium_state,
    jz_distribution,
    jz_moments,
    thermal_state,
)
from .fidelity import (
    DensityOperator,
    SusceptibilityEstimate,
    bhattacharyya_fidelity,
    chi_mom_from_curves,
    default_epsilons,
    susceptibility_from_fidelity,
    uhlmann_fidelity,
)
from .criticality import (
    CriticalPointResult,
    DeltaOptimization,
    PeakEstimate,
    PowerLawFit,
    ScalingStudyResult,
    ScanConfig,
    SusceptibilityCurve,
    chi_at_point,
    default_delta_grid,
    default_lambda_grid,
    fit_power_law,
    locate_critical_gap,
    optimize_delta,
    scaling_study,
    scan_lambda,
)

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "TridiagonalHamiltonian",
    "Spectrum",
    "ThermalState",
    "DistributionOverM",
    "EigensolverError",
    "build_hamiltonian",
    "diagonalize",
    "eigenvalues_only",
    "equilibrium_state",
    "thermal_state",
    "jz_distribution",
    "jz_moments",
    "DensityOperator",
    "SusceptibilityEstimate",
    "bhattacharyya_fidelity",
    "uhlmann_fidelity",
    "susceptibility_from_fidelity",
    "chi_mom_from_curves",
    "default_epsilons",
    "ScanConfig",
    "SusceptibilityCurve",
    "PeakEstimate",
    "CriticalPointResult",
    "DeltaOptimization",
    "PowerLawFit",
    "ScalingStudyResult",
    "scan_lambda",
    "chi_at_point",
    "default_lambda_grid",
    "default_delta_grid",
    "locate_critical_gap",
    "optimize_delta",
    "fit_power_law",
    "scaling_study",
    "__version__",
]
