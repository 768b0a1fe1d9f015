"""Heat-flow scores, reverse dynamics and diagnostics for empirical measures."""

from ._core import (
    Measure,
    Trajectory,
    __version__,
    empirical_score,
    fit_rate,
    heat_to_ou,
    integrate_ode,
    integrate_sde,
    lemniscate,
    li_yau_margin,
    log_density,
    loss,
    mean_shift,
    neighborhood_mass,
    ou_to_heat,
    run_ensemble,
    run_experiment,
    validate_config,
)

__all__ = [
    "Measure",
    "Trajectory",
    "__version__",
    "empirical_score",
    "fit_rate",
    "heat_to_ou",
    "integrate_ode",
    "integrate_sde",
    "lemniscate",
    "li_yau_margin",
    "log_density",
    "loss",
    "mean_shift",
    "neighborhood_mass",
    "ou_to_heat",
    "run_ensemble",
    "run_experiment",
    "validate_config",
]
