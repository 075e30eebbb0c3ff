"""Pseudo-spectral toolkit for dispersively regularized wave systems on the periodic line."""

__version__ = "0.1.0"

from .experiments import (
    ContinuationSchedule,
    DatumSpec,
    SweepResult,
    SweepRow,
    continuation_schedule,
    existence_time,
    growth_experiment,
    lemma_m_suite,
    make_datum,
    norm_domination_margin,
    normal_history,
    scaling_sweep,
    sobolev_constant,
)
from .integrate import IntegratorConfig, PicardReport, Trajectory, picard_solve, solve
from .jets_ibp import (
    IbpCoefficients,
    choose_n,
    f_n,
    f_n_directional,
    ibp_once_p2,
    implicit_residual,
    ode_jet,
    verify_fn_bound,
)
from .model import (
    EnergyReport,
    PressureLaw,
    State,
    SystemSpec,
    energy,
    linear_growth_rate,
    pressure,
    rhs_full,
)
from .normalform import (
    NormalFormSetting,
    ReducedState,
    apply_M,
    cancellation_residual,
    from_normal_coords,
    operator_E,
    oscillate,
    reduced_rhs,
    remainder_R,
    to_normal_coords,
)
from .spectral import (
    Grid,
    SpectralField,
    apply_m,
    conjugate,
    derivative,
    multiply,
    norm,
    random_field,
    remove_mean,
    to_physical,
    to_spectral,
    zeros,
)

__all__ = [
    "__version__",
    "ContinuationSchedule",
    "DatumSpec",
    "EnergyReport",
    "Grid",
    "IbpCoefficients",
    "IntegratorConfig",
    "NormalFormSetting",
    "PicardReport",
    "PressureLaw",
    "ReducedState",
    "SpectralField",
    "State",
    "SweepResult",
    "SweepRow",
    "SystemSpec",
    "Trajectory",
    "apply_M",
    "apply_m",
    "cancellation_residual",
    "choose_n",
    "conjugate",
    "continuation_schedule",
    "derivative",
    "energy",
    "existence_time",
    "f_n",
    "f_n_directional",
    "from_normal_coords",
    "growth_experiment",
    "ibp_once_p2",
    "implicit_residual",
    "lemma_m_suite",
    "linear_growth_rate",
    "make_datum",
    "multiply",
    "norm",
    "norm_domination_margin",
    "normal_history",
    "ode_jet",
    "operator_E",
    "oscillate",
    "picard_solve",
    "pressure",
    "random_field",
    "reduced_rhs",
    "remainder_R",
    "remove_mean",
    "rhs_full",
    "scaling_sweep",
    "sobolev_constant",
    "solve",
    "to_normal_coords",
    "to_physical",
    "to_spectral",
    "verify_fn_bound",
    "zeros",
]
