"""Experiment harness: convergence-factor sweep, cost comparison, signal plot.

Configs are flat key=value text files with units spelled out in the key names
(resistance_ohm, period_s, ...).  Every run writes a versioned CSV and a
static SVG next to it.  Sweep points are independent and can be evaluated by
a process pool; the merged CSV is written once, in a fixed order, so output
is deterministic for a given config and seed.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .analysis import bound_xl, closed_form_periodic, contraction_check, rho_numerical
from .parareal import (
    PararealConfig,
    classical_parareal_ivp_solve,
    pp_ic_solve,
    coarse_periodic_initial_value,
    sequential_steady_state,
)
from .problem import LinearScalarProblem, RLCircuitProblem, normalize_rl
from .propagators import PropagatorSpec, backward_euler_run, stability_function_be
from .signals import PwmSignal, SawtoothCarrier, SmoothCoarseInput
from .svg import Series, bar_chart, line_plot

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SweepRow",
    "CostRow",
    "run_convergence_sweep",
    "run_cost_comparison",
    "run_single",
    "plot_signals",
]

SCHEMA_VERSION = 1

_FINE_KINDS = ("exact", "backward_euler")


class ConfigError(ValueError):
    """Invalid or unparsable experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of the experiment harness with their default study values."""

    resistance_ohm: float = 0.01
    inductance_h: float = 0.001
    period_s: float = 0.02
    pwm_teeth: int = 400
    coarse_inputs: tuple[str, ...] = ("sine", "step")
    fine_propagator: str = "exact"
    fine_steps_log2: int = 18
    p_min: int = 1
    p_max: int = 17
    tolerance: float = 1e-8
    max_iterations: int = 100
    bound_depth: int = 256
    initial_guess: float | str = 0.0
    subintervals: int = 20
    steady_tol: float = 1e-8
    max_periods: int = 5000
    plot_pwm_teeth: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.fine_propagator not in _FINE_KINDS:
            raise ConfigError(f"fine_propagator must be one of {_FINE_KINDS}, got {self.fine_propagator!r}")
        for kind in self.coarse_inputs:
            if kind not in ("sine", "step"):
                raise ConfigError(f"unknown coarse input kind {kind!r}")
        if not self.coarse_inputs:
            raise ConfigError("need at least one coarse input kind")
        if self.p_min < 1 or self.p_max < self.p_min:
            raise ConfigError(f"need 1 <= p_min <= p_max, got {self.p_min}..{self.p_max}")
        if self.fine_propagator == "backward_euler" and self.p_max >= self.fine_steps_log2:
            raise ConfigError(
                "the coarse step must stay strictly coarser than the fine step: "
                f"p_max={self.p_max} >= fine_steps_log2={self.fine_steps_log2}"
            )
        if self.tolerance <= 0 or self.steady_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if min(self.resistance_ohm, self.inductance_h, self.period_s) <= 0:
            raise ConfigError("circuit parameters must be positive")
        if self.pwm_teeth < 1 or self.subintervals < 1 or self.bound_depth < 1:
            raise ConfigError("counts must be positive integers")

    # -- construction -----------------------------------------------------

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        mapping = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            mapping[key] = value
        return cls.from_mapping(mapping)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        kwargs = {}
        known = {f.name: f for f in fields(cls)}
        for key, value in mapping.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, value)
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    # -- derived objects ---------------------------------------------------

    @property
    def kappa(self) -> float:
        return self.resistance_ohm / self.inductance_h

    def fine_substep(self) -> float:
        return self.period_s / 2**self.fine_steps_log2

    def circuit(self, coarse_kind: str, teeth: int | None = None) -> RLCircuitProblem:
        teeth = self.pwm_teeth if teeth is None else teeth
        carrier = SawtoothCarrier(period=self.period_s, teeth=teeth)
        return RLCircuitProblem(
            resistance=self.resistance_ohm,
            inductance=self.inductance_h,
            period=self.period_s,
            pwm=PwmSignal(carrier),
            coarse_input=SmoothCoarseInput(kind=coarse_kind, period=self.period_s),
        )

    def scalar_problem(self, coarse_kind: str) -> LinearScalarProblem:
        return normalize_rl(self.circuit(coarse_kind))

    def fine_spec(self) -> PropagatorSpec:
        if self.fine_propagator == "exact":
            return PropagatorSpec(kind="exact_linear")
        return PropagatorSpec(kind="backward_euler", substep=self.fine_substep())

    def solver_config(self, subintervals: int, problem: LinearScalarProblem | None = None) -> PararealConfig:
        guess = self.initial_guess
        cfg = PararealConfig(
            subintervals=subintervals,
            max_iterations=self.max_iterations,
            tolerance=self.tolerance,
            fine_spec=self.fine_spec(),
            initial_guess=0.0 if isinstance(guess, str) else float(guess),
        )
        if isinstance(guess, str):
            if guess != "coarse_periodic":
                raise ConfigError(f"initial_guess must be a number or 'coarse_periodic', got {guess!r}")
            if problem is None:
                raise ConfigError("warm start needs the problem at hand")
            cfg = replace(cfg, initial_guess=coarse_periodic_initial_value(problem, cfg))
        return cfg


def _coerce(key: str, value: str):
    if key == "coarse_inputs":
        return tuple(part.strip() for part in value.split(",") if part.strip())
    if key == "fine_propagator":
        return value
    if key == "initial_guess":
        try:
            return float(value)
        except ValueError:
            return value
    if key in ("pwm_teeth", "fine_steps_log2", "p_min", "p_max", "max_iterations",
               "bound_depth", "subintervals", "max_periods", "plot_pwm_teeth", "seed"):
        try:
            return int(value)
        except ValueError as exc:
            raise ConfigError(f"config key {key} needs an integer, got {value!r}") from exc
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"config key {key} needs a number, got {value!r}") from exc


# -- reference solutions ---------------------------------------------------


def reference_states(config: ExperimentConfig, problem: LinearScalarProblem, times: np.ndarray) -> np.ndarray:
    """Periodic solution at the synchronization points, at fine accuracy.

    With the exact fine propagator the closed form is the reference; with a
    Backward Euler fine propagator the reference is a sequential run at the
    same substep, driven to its own steady state and then sampled.
    """
    if config.fine_propagator == "exact":
        return closed_form_periodic(problem.kappa, problem.forcing, problem.forcing_scale).at_times(times)
    spec = config.fine_spec()
    settle = sequential_steady_state(problem, spec, steady_tol=1e-13, max_periods=20000)
    if not settle.converged:
        raise RuntimeError("reference run did not reach a steady state")
    states = np.empty(len(times))
    states[0] = settle.final_state
    for n in range(1, len(times)):
        states[n] = backward_euler_run(problem, times[n - 1], times[n], states[n - 1], spec)
    return states


# -- convergence sweep ------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    p: int
    dT_s: float
    coarse_kind: str
    iterations: int
    converged: bool
    rho_num: float
    x_bound: float
    contraction_margin: float


def _sweep_point(config: ExperimentConfig, kind: str, p: int) -> SweepRow:
    problem = config.scalar_problem(kind)
    n_sub = 2**p
    solver_cfg = replace(config.solver_config(n_sub, problem), max_iterations=config.max_iterations)
    run = pp_ic_solve(problem, solver_cfg)
    reference = reference_states(config, problem, run.times)
    iterations = run.converged_at if run.converged else run.cost.iterations
    rho = rho_numerical(run, reference, iterations=iterations)

    delta_t = config.period_s / n_sub
    z = problem.kappa * delta_t
    phi = stability_function_be(z)
    defect = math.exp(-z) - phi
    bound = bound_xl(phi, defect, n_sub, config.bound_depth).final
    margin = contraction_check(phi, z).margin
    return SweepRow(
        p=p,
        dT_s=delta_t,
        coarse_kind=kind,
        iterations=iterations,
        converged=run.converged,
        rho_num=rho,
        x_bound=bound,
        contraction_margin=margin,
    )


def run_convergence_sweep(config: ExperimentConfig, out_dir, workers: int = 1) -> list[SweepRow]:
    """Measure the convergence factor against its bound across coarse steps.

    For every p in [p_min, p_max] and every configured coarse input, runs the
    periodic solver with dT = T/2^p, evaluates the measured factor against
    the depth-``bound_depth`` bound, and records one CSV row.  Non-converged
    runs keep their row with the flag column cleared.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    points = [(kind, p) for kind in config.coarse_inputs for p in range(config.p_min, config.p_max + 1)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, *zip(*((config, k, p) for k, p in points))))
    else:
        rows = [_sweep_point(config, k, p) for k, p in points]

    _write_csv(
        out / "sweep.csv",
        ["p", "dT_s", "coarse_kind", "iterations", "converged", "rho_num", "x_bound", "contraction_margin"],
        [
            [r.p, f"{r.dT_s:.12e}", r.coarse_kind, r.iterations, int(r.converged),
             f"{r.rho_num:.12e}", f"{r.x_bound:.12e}", f"{r.contraction_margin:.12e}"]
            for r in rows
        ],
    )

    series = []
    for kind in config.coarse_inputs:
        mine = [r for r in rows if r.coarse_kind == kind]
        series.append(Series(f"measured ({kind})", [r.dT_s for r in mine], [r.rho_num for r in mine]))
    first = [r for r in rows if r.coarse_kind == config.coarse_inputs[0]]
    series.append(Series("bound x_L", [r.dT_s for r in first], [r.x_bound for r in first]))
    line_plot(
        out / "sweep.svg",
        series,
        xlabel="coarse step dT (s)",
        ylabel="convergence factor",
        title="Convergence factor vs. coarse step",
        xlog=True,
    )
    return rows


# -- cost comparison ---------------------------------------------------------


@dataclass(frozen=True)
class CostRow:
    method: str
    effective_solves: int
    total_solves: int
    iterations_or_periods: int
    end_state_diff_vs_oracle: float


def run_cost_comparison(config: ExperimentConfig, out_dir, coarse_kind: str | None = None) -> list[CostRow]:
    """Compare solve counts of the three routes to the periodic state.

    Runs sequential stepping from zero to the steady state, classical
    Parareal on the horizon the sequential run needed, and the periodic
    solver on one period, all with the same propagators, then reports
    effective and total solve units per method.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kind = coarse_kind or config.coarse_inputs[0]
    problem = config.scalar_problem(kind)
    fine_spec = config.fine_spec()
    times = np.linspace(0.0, config.period_s, config.subintervals + 1)
    oracle = reference_states(config, problem, times)

    settle = sequential_steady_state(problem, fine_spec, config.steady_tol, config.max_periods)
    if not settle.converged:
        raise RuntimeError(f"sequential run did not settle within {config.max_periods} periods")

    solver_cfg = config.solver_config(config.subintervals, problem)
    horizon = settle.periods_used * config.period_s
    ivp_cfg = replace(solver_cfg, initial_guess=0.0)
    classical = classical_parareal_ivp_solve(problem, horizon, ivp_cfg)
    periodic = pp_ic_solve(problem, solver_cfg)

    rows = [
        CostRow(
            method="sequential",
            effective_solves=settle.cost.effective_cost(),
            total_solves=settle.cost.total_cost(),
            iterations_or_periods=settle.periods_used,
            end_state_diff_vs_oracle=abs(float(settle.final_state) - float(oracle[0])),
        ),
        CostRow(
            method="classical_parareal_ivp",
            effective_solves=classical.cost.effective_cost(),
            total_solves=classical.cost.total_cost(),
            iterations_or_periods=classical.cost.iterations,
            end_state_diff_vs_oracle=abs(float(classical.solution[-1]) - float(oracle[0])),
        ),
        CostRow(
            method="pp_ic",
            effective_solves=periodic.cost.effective_cost(),
            total_solves=periodic.cost.total_cost(),
            iterations_or_periods=periodic.cost.iterations,
            end_state_diff_vs_oracle=float(np.max(np.abs(periodic.solution - oracle))),
        ),
    ]

    _write_csv(
        out / "costs.csv",
        ["method", "effective_solves", "total_solves", "iterations_or_periods", "end_state_diff_vs_oracle"],
        [
            [r.method, r.effective_solves, r.total_solves, r.iterations_or_periods,
             f"{r.end_state_diff_vs_oracle:.12e}"]
            for r in rows
        ],
    )
    bar_chart(
        out / "costs.svg",
        labels=[r.method for r in rows],
        values=[r.effective_solves for r in rows],
        ylabel="effective solve units",
        title="Cost to reach the periodic steady state",
    )
    return rows


# -- single run and signal plot ----------------------------------------------


def run_single(config: ExperimentConfig, out_dir, coarse_kind: str | None = None):
    """One periodic solve with a full iterate dump for inspection."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kind = coarse_kind or config.coarse_inputs[0]
    problem = config.scalar_problem(kind)
    run = pp_ic_solve(problem, config.solver_config(config.subintervals, problem))

    _write_csv(
        out / "iterates.csv",
        ["iteration"] + [f"t_{n}" for n in range(len(run.times))],
        [[k, *(f"{v:.15e}" for v in run.iterates[k])] for k in range(len(run.iterates))],
    )
    _write_csv(
        out / "residuals.csv",
        ["iteration", "jump_residual", "periodicity_residual"],
        [
            [k, f"{run.jump_history[k]:.12e}", f"{run.periodicity_history[k]:.12e}"]
            for k in range(len(run.jump_history))
        ],
    )
    return run


def plot_signals(config: ExperimentConfig, out_dir):
    """One period of the switching input next to both smooth surrogates."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    period = config.period_s
    pwm = PwmSignal(SawtoothCarrier(period=period, teeth=config.plot_pwm_teeth))

    # draw the switching trace from its exact breakpoints
    bps = pwm.breakpoints_between(0.0, period)
    edges = np.concatenate(([0.0], bps, [period]))
    xs, ys = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        level = pwm(0.5 * (a + b))
        xs.extend([a, b])
        ys.extend([level, level])

    grid = np.linspace(0.0, period, 801)
    sine = SmoothCoarseInput(kind="sine", period=period)
    step = SmoothCoarseInput(kind="step", period=period)
    line_plot(
        out / "signals.svg",
        [
            Series(f"pwm (m={config.plot_pwm_teeth})", xs, ys),
            Series("sine input", grid.tolist(), np.asarray(sine(grid)).tolist()),
            Series("step input", grid.tolist(), np.asarray(step(grid)).tolist()),
        ],
        xlabel="time (s)",
        ylabel="input value",
        title="Switching excitation and smooth coarse inputs",
    )
    return out / "signals.svg"


def _write_csv(path, header: list[str], rows: list[list]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
