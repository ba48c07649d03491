"""Maximum-entropy moment closure and Maxwell-Stefan diffusion for gas mixtures."""
from .closure import (MomentTargets, Multipliers, entropy_density, entropy_flux,
                      multipliers_closed_form, solve_dual)
from .collisions import (OracleEstimate, energy_exchange_rate, entropy_production_species,
                         entropy_production_total, exchange_force, mc_weak_form,
                         momentum_exchange_rate)
from .config import RunConfig, parse_config
from .diagnostics import (conservation_audit, convergence_study, entropy_balance_residual,
                          entropy_report)
from .errors import CompatibilityError, ConvergenceError, NumericalError, ValidationError
from .model import (CellState, Field1D, MixtureSpec, ScalingConfig, maxwellian_eval,
                    moments_numeric, nondimensionalize)
from .solver import (FrictionSystem, SolverConfig, friction_matrix, run_simulation,
                     solve_velocities, step_limit, step_scaled)

__version__ = "0.1.0"

__all__ = [
    "CellState",
    "CompatibilityError",
    "ConvergenceError",
    "Field1D",
    "FrictionSystem",
    "MixtureSpec",
    "MomentTargets",
    "Multipliers",
    "NumericalError",
    "OracleEstimate",
    "RunConfig",
    "ScalingConfig",
    "SolverConfig",
    "ValidationError",
    "conservation_audit",
    "convergence_study",
    "energy_exchange_rate",
    "entropy_balance_residual",
    "entropy_density",
    "entropy_flux",
    "entropy_production_species",
    "entropy_production_total",
    "entropy_report",
    "exchange_force",
    "friction_matrix",
    "maxwellian_eval",
    "mc_weak_form",
    "moments_numeric",
    "momentum_exchange_rate",
    "multipliers_closed_form",
    "nondimensionalize",
    "parse_config",
    "run_simulation",
    "solve_dual",
    "solve_velocities",
    "step_limit",
    "step_scaled",
]
