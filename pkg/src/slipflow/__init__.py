"""Stochastic Stokes/heat flows with Navier-slip walls and wall-singular
forcing: explicit Euler-Maruyama solver, energy diagnostics, closed-form
analysis checks, and the viscosity-sweep experiment harness."""

from .errors import (ConfigurationError, NumericsError, ResolutionError,
                     ShapeError, StabilityError)
from .geometry import (HalfSpaceGrid, SphereGrid, VelocityField,
                       build_halfspace_grid, build_sphere_grid,
                       kolmogorov_scale, surface_integral, volume_integral)
from .forcing import (ForcingField, ForcingSpec, build_forcing,
                      divergence_residual, forcing_l2_norm_sq)
from .solver import (NoiseStream, SimConfig, apply_laplacian, build_grid,
                     final_state, make_operator, run_realization, step,
                     validate_stability)
from .diagnostics import (DiagnosticsSeries, EnsembleStats,
                          accumulate_ensemble, duchon_robert_density,
                          fit_scaling_exponent, gradient_energy,
                          hs_seminorm_sq, kinetic_energy, slip_norm,
                          wall_energy, weak_dissipation_value)
from .analysis import (BBMResult, FeasibilityQuery, LowerBoundParams,
                       bbm_limit_check, feasibility_check,
                       feasibility_threshold, feasibility_threshold_exact,
                       gaussian_radial_moment, interpolation_exponent,
                       lower_bound_value, run_verification)
from .harness import (ExperimentPlan, RunManifest, fit_report,
                      load_plan_file, canned_plans, parse_config_file,
                      run_ensemble, run_plan)

__version__ = "0.1.0"
