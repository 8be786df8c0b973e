"""Time-parallel solver for time-periodic ODEs with quickly-switching inputs.

The periodic Parareal iteration here relaxes the periodicity constraint
(feeding each iteration's end value back as the next start value) and runs
its coarse propagator on a smooth reduced input instead of the switching
one, so a single implicit step per subinterval is enough on the coarse
level.  The package bundles the solver, exact scalar oracles, the
error-iteration convergence analysis, and an experiment harness for an RL
circuit driven by a PWM source.
"""

from .analysis import (
    BoundNotApplicableError,
    BoundSequence,
    ContractionCheck,
    ErrorIterationMatrix,
    PeriodicSolution,
    SpectralRadiusError,
    bound_xl,
    build_S,
    closed_form_periodic,
    contraction_check,
    rho_numerical,
    spectral_radius,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    plot_signals,
    run_convergence_sweep,
    run_cost_comparison,
    run_single,
)
from .parareal import (
    CostLedger,
    PararealConfig,
    PararealRun,
    SteadyStateResult,
    classical_parareal_ivp_solve,
    coarse_initialize,
    coarse_periodic_initial_value,
    correction_sweep,
    jump_residual,
    pp_ic_solve,
    sequential_steady_state,
)
from .problem import (
    LinearScalarProblem,
    PeriodicODEProblem,
    RLCircuitProblem,
    nonlinear_decay_problem,
    normalize_rl,
    split_rhs,
)
from .propagators import (
    PropagationError,
    PropagatorSpec,
    SolveCounter,
    StabilityEvaluation,
    UnsupportedForcingError,
    backward_euler_run,
    coarse_one_step,
    evaluate_stability_be,
    exact_linear_propagate,
    make_propagator,
    stability_function_be,
)
from .signals import (
    ConstantSignal,
    PwmSignal,
    SawtoothCarrier,
    SmoothCoarseInput,
    eval_coarse_input,
    eval_pwm,
    eval_sawtooth,
    pwm_breakpoints,
)

__version__ = "0.1.0"
