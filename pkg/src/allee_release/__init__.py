"""Impulsive releases of a competitor against a resident species with an Allee effect."""

__version__ = "0.1.0"

from allee_release.model import (  # noqa: E402
    TABLE1,
    ModelParams,
    OutcomeClass,
    RawParams,
    State,
    depensation_roots,
    derive_params,
    predict_outcome,
    steady_states,
    vector_field,
)
from allee_release.simulate import (  # noqa: E402
    ReleaseSchedule,
    Trajectory,
    apply_impulse,
    classify_elimination,
    final_states,
    simulate,
)
from allee_release.periodic import (  # noqa: E402
    Interval,
    PeriodicOrbit,
    StabilityReport,
    SufficientCondition,
    Verdict,
    eta,
    eta_max,
    orbit_eval,
    recursion_map,
    stability_sufficient,
    z2_plus,
)
from allee_release.optimize import (  # noqa: E402
    ControlProblem,
    OptimizationResult,
    SolverOptions,
    brute_force_oracle,
    evaluate,
    min_single_release,
    solve,
)

__all__ = [
    "TABLE1",
    "ModelParams",
    "OutcomeClass",
    "RawParams",
    "State",
    "depensation_roots",
    "derive_params",
    "predict_outcome",
    "steady_states",
    "vector_field",
    "ReleaseSchedule",
    "Trajectory",
    "apply_impulse",
    "classify_elimination",
    "final_states",
    "simulate",
    "Interval",
    "PeriodicOrbit",
    "StabilityReport",
    "SufficientCondition",
    "Verdict",
    "eta",
    "eta_max",
    "orbit_eval",
    "recursion_map",
    "stability_sufficient",
    "z2_plus",
    "ControlProblem",
    "OptimizationResult",
    "SolverOptions",
    "brute_force_oracle",
    "evaluate",
    "min_single_release",
    "solve",
]
