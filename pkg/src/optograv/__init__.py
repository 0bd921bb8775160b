"""Simulation of two gravitationally coupled optomechanical oscillators.

The package predicts the experimental signatures of the Newtonian coupling
between two cavity-mirror micro-rods: the shift of the interference
visibility's revival period, the change of the visibility pattern, and the
entanglement the coupling generates; an exact truncated-Fock-space
propagator cross-checks every closed-form result.
"""

from ._version import __version__
from .errors import (
    ConfigError,
    DegenerateFrequencyError,
    DimensionLimitError,
    OptogravError,
    ParameterError,
    QuadratureError,
    ToleranceError,
    TruncationError,
)
from .params import (
    DerivedCouplings,
    PhysicalParams,
    ThermalEnv,
    derive_couplings,
    dimensionless_params,
    feasibility_bound,
    gravitational_potential,
    reference_params,
    thermal_env,
    without_gravity,
)
from .analytic import (
    CoherentTrajectory,
    VisibilityTrace,
    coherent_trajectories,
    linear_entropy_first_order,
    revival_peak_width,
    thermal_visibility,
    visibility_first_order,
    visibility_shift,
    visibility_uncoupled,
)
from .oracle import (
    DensityMatrix,
    HilbertSpec,
    Propagator,
    QuadratureSpec,
    StateVector,
    build_hamiltonian,
    closed_form_state,
    dyson_first_order_state,
    initial_state,
    interaction_picture_check,
    linear_entropy_exact,
    propagate,
    reduce,
    thermal_visibility_montecarlo,
    visibility_exact,
)
from .scan import ScanPlan, ScanResult, convergence_audit, run_scan, scaling_study

__all__ = [
    "__version__",
    "OptogravError",
    "ConfigError",
    "ParameterError",
    "DegenerateFrequencyError",
    "DimensionLimitError",
    "TruncationError",
    "QuadratureError",
    "ToleranceError",
    "PhysicalParams",
    "DerivedCouplings",
    "ThermalEnv",
    "derive_couplings",
    "without_gravity",
    "gravitational_potential",
    "thermal_env",
    "feasibility_bound",
    "reference_params",
    "dimensionless_params",
    "CoherentTrajectory",
    "VisibilityTrace",
    "coherent_trajectories",
    "visibility_uncoupled",
    "visibility_first_order",
    "visibility_shift",
    "thermal_visibility",
    "revival_peak_width",
    "linear_entropy_first_order",
    "HilbertSpec",
    "StateVector",
    "DensityMatrix",
    "QuadratureSpec",
    "Propagator",
    "build_hamiltonian",
    "initial_state",
    "closed_form_state",
    "propagate",
    "reduce",
    "visibility_exact",
    "linear_entropy_exact",
    "interaction_picture_check",
    "dyson_first_order_state",
    "thermal_visibility_montecarlo",
    "ScanPlan",
    "ScanResult",
    "run_scan",
    "scaling_study",
    "convergence_audit",
]
