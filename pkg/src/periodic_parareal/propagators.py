"""Fine and coarse propagators on one subinterval.

The fine propagator is either the exact piecewise-exponential solution of the
scalar linear problem (valid because the switching input is constant between
breakpoints) or a repeated-step Backward Euler integrator.  The coarse
propagator is a single Backward Euler step over the whole subinterval applied
to the smooth reduced right-hand side; for the scalar model it acts as
``u -> phi(kappa*dT) * u + xi`` with stability function phi(z) = 1/(1+z).

Propagators are stateless; linear-solve counts are reported through an
optional :class:`SolveCounter` so concurrent tasks can keep private tallies
and merge them afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import LinearScalarProblem, PeriodicODEProblem

__all__ = [
    "PropagatorSpec",
    "SolveCounter",
    "StabilityEvaluation",
    "UnsupportedForcingError",
    "PropagationError",
    "stability_function_be",
    "evaluate_stability_be",
    "exact_linear_propagate",
    "backward_euler_run",
    "coarse_one_step",
    "make_propagator",
]

_KINDS = ("exact_linear", "backward_euler")

# Vectorized Backward Euler sweeps are chunked to bound peak memory.
_CHUNK = 1 << 20


class UnsupportedForcingError(TypeError):
    """Raised when a forcing offers no breakpoint enumeration for exact integration."""


class PropagationError(RuntimeError):
    """Implicit step failed to converge; carries the step time and last residual."""

    def __init__(self, message: str, time: float, residual: float):
        super().__init__(message)
        self.time = time
        self.residual = residual


class SolveCounter:
    """Mutable tally of linear-system solves (one Newton iteration counts as one)."""

    __slots__ = ("count",)

    def __init__(self):
        self.count = 0

    def add(self, n: int):
        self.count += n


@dataclass(frozen=True)
class PropagatorSpec:
    """Selects a propagator kind and its discretization parameters.

    ``substep`` is only meaningful for ``backward_euler``: when given, the
    subinterval is advanced in steps of that size (it must divide the span);
    when omitted, a single implicit step covers the whole subinterval, which
    is the coarse one-step mode.
    """

    kind: str
    substep: float | None = None
    newton_tol: float = 1e-12
    newton_max_iter: int = 25

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"propagator kind must be one of {_KINDS}, got {self.kind!r}")
        if self.substep is not None and not (math.isfinite(self.substep) and self.substep > 0.0):
            raise ValueError(f"substep must be positive, got {self.substep}")
        if self.newton_tol <= 0.0:
            raise ValueError("newton_tol must be positive")


@dataclass(frozen=True)
class StabilityEvaluation:
    """Backward Euler amplification phi(z) next to the exact decay exp(-z)."""

    z: float
    value: float
    exact_decay: float
    defect: float


def stability_function_be(z: float) -> float:
    """Backward Euler stability function 1 / (1 + z)."""
    if z == -1.0:
        raise ZeroDivisionError("stability function has a pole at z = -1")
    return 1.0 / (1.0 + z)


def evaluate_stability_be(z: float) -> StabilityEvaluation:
    phi = stability_function_be(z)
    decay = math.exp(-z)
    return StabilityEvaluation(z=z, value=phi, exact_decay=decay, defect=abs(decay - phi))


def _resolve_steps(span: float, substep: float) -> int:
    steps = max(1, round(span / substep))
    if not math.isclose(steps * substep, span, rel_tol=1e-9):
        raise ValueError(f"substep {substep} does not divide the span {span} (needs {span / substep} steps)")
    return steps


def exact_linear_propagate(
    kappa: float,
    forcing,
    scale: float,
    t0: float,
    t1: float,
    u0: float,
    counter: SolveCounter | None = None,
) -> float:
    """Exact solution of u' + kappa*u = scale*f(t) over [t0, t1].

    Requires a piecewise-constant forcing with known breakpoints; each
    constant piece contributes its closed-form exponential update.  The
    per-piece updates are counted as solve units.
    """
    if not (t0 < t1):
        raise ValueError(f"need t0 < t1, got t0={t0}, t1={t1}")
    if kappa <= 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if not getattr(forcing, "piecewise_constant", False):
        raise UnsupportedForcingError(
            f"exact propagation needs a piecewise-constant forcing with breakpoints, got {type(forcing).__name__}"
        )
    edges = [t0, *np.asarray(forcing.breakpoints_between(t0, t1), dtype=float), t1]
    u = float(u0)
    for a, b in zip(edges[:-1], edges[1:]):
        c = float(forcing(0.5 * (a + b)))
        decay = math.exp(-kappa * (b - a))
        u = u * decay + (scale * c / kappa) * (1.0 - decay)
    if counter is not None:
        counter.add(len(edges) - 1)
    return u


def _linear_be_span(
    problem: LinearScalarProblem,
    t0: float,
    steps: int,
    substep: float,
    u0: float,
    smooth: bool,
) -> float:
    """Backward Euler on the scalar linear problem, solved directly per step.

    The recurrence u_j = a*u_{j-1} + a*dt*scale*f(t_j) with a = 1/(1+kappa*dt)
    is unrolled into a weighted sum, evaluated in chunks.
    """
    a = 1.0 / (1.0 + problem.kappa * substep)
    forcing = problem.smooth_forcing if smooth else problem.forcing
    gain = a * substep * problem.forcing_scale
    u = float(u0)
    done = 0
    while done < steps:
        n = min(_CHUNK, steps - done)
        t = t0 + substep * np.arange(done + 1, done + n + 1)
        c = gain * np.asarray(forcing(t), dtype=float)
        w = a ** np.arange(n - 1, -1, -1, dtype=float)
        u = (a**n) * u + float(w @ c)
        done += n
    return u


def _numeric_jacobian(rhs, t: float, u: np.ndarray) -> np.ndarray:
    n = u.size
    jac = np.empty((n, n))
    f0 = np.asarray(rhs(t, u), dtype=float)
    for j in range(n):
        h = 1e-8 * (1.0 + abs(u[j]))
        up = u.copy()
        up[j] += h
        jac[:, j] = (np.asarray(rhs(t, up), dtype=float) - f0) / h
    return jac


def _implicit_step(
    rhs,
    jac,
    t_next: float,
    u_prev: np.ndarray,
    dt: float,
    spec: PropagatorSpec,
    counter: SolveCounter | None,
) -> np.ndarray:
    """One Backward Euler step solved by Newton on u - u_prev - dt*f(t_next, u) = 0."""
    u = u_prev.copy()
    eye = np.eye(u.size)
    for _ in range(spec.newton_max_iter):
        f = np.asarray(rhs(t_next, u), dtype=float)
        residual = u - u_prev - dt * f
        jf = jac(t_next, u) if jac is not None else _numeric_jacobian(rhs, t_next, u)
        delta = np.linalg.solve(eye - dt * np.asarray(jf, dtype=float), residual)
        u = u - delta
        if counter is not None:
            counter.add(1)
        if float(np.max(np.abs(delta))) <= spec.newton_tol:
            return u
    raise PropagationError(
        f"Newton did not converge within {spec.newton_max_iter} iterations at t={t_next}",
        time=t_next,
        residual=float(np.max(np.abs(residual))),
    )


def backward_euler_run(
    problem,
    t0: float,
    t1: float,
    u0,
    spec: PropagatorSpec,
    counter: SolveCounter | None = None,
    smooth: bool = False,
):
    """Advance from t0 to t1 by repeated implicit Euler steps of ``spec.substep``.

    Scalar linear problems are solved directly (one linear solve per step);
    general problems go through Newton, and every Newton iteration counts as
    one linear solve.  Set ``smooth=True`` to integrate the reduced
    right-hand side instead of the full one.
    """
    if spec.kind != "backward_euler":
        raise ValueError(f"spec kind must be backward_euler, got {spec.kind!r}")
    if not (t0 < t1):
        raise ValueError(f"need t0 < t1, got t0={t0}, t1={t1}")
    substep = spec.substep if spec.substep is not None else (t1 - t0)
    steps = _resolve_steps(t1 - t0, substep)

    if isinstance(problem, LinearScalarProblem):
        u = _linear_be_span(problem, t0, steps, substep, float(u0), smooth)
        if counter is not None:
            counter.add(steps)
        return u

    rhs = problem.smooth_rhs if smooth else problem.full_rhs
    jac = problem.smooth_jacobian if smooth else problem.full_jacobian
    u = np.atleast_1d(np.asarray(u0, dtype=float)).copy()
    for j in range(1, steps + 1):
        u = _implicit_step(rhs, jac, t0 + j * substep, u, substep, spec, counter)
    return u


def coarse_one_step(
    problem,
    t_prev: float,
    t_next: float,
    u0,
    spec: PropagatorSpec | None = None,
    counter: SolveCounter | None = None,
):
    """Reduced coarse propagator: one Backward Euler step on the smooth input.

    For the scalar linear problem this is phi(kappa*dT)*u0 + xi with
    xi = dT * scale * fbar(t_next) / (1 + kappa*dT), sampling the smooth
    input at the right endpoint of the step.
    """
    if spec is None:
        spec = PropagatorSpec(kind="backward_euler")
    if not (t_prev < t_next):
        raise ValueError(f"need t_prev < t_next, got {t_prev}, {t_next}")
    dt = t_next - t_prev
    if isinstance(problem, LinearScalarProblem):
        phi = stability_function_be(problem.kappa * dt)
        xi = dt * problem.forcing_scale * float(problem.smooth_forcing(t_next)) * phi
        if counter is not None:
            counter.add(1)
        return phi * float(u0) + xi
    u = np.atleast_1d(np.asarray(u0, dtype=float))
    return _implicit_step(problem.smooth_rhs, problem.smooth_jacobian, t_next, u, dt, spec, counter)


def make_propagator(problem, spec: PropagatorSpec, smooth: bool = False):
    """Bind a problem and a spec into a map ``(t0, t1, u0, counter) -> state``.

    ``smooth=True`` selects the reduced right-hand side (coarse dynamics).
    A ``backward_euler`` spec without substep produces the one-step coarse
    propagator; ``exact_linear`` requires the scalar problem and a
    piecewise-constant forcing.
    """
    if spec.kind == "exact_linear":
        if not isinstance(problem, LinearScalarProblem):
            raise UnsupportedForcingError("exact propagation is only available for scalar linear problems")
        forcing = problem.smooth_forcing if smooth else problem.forcing
        kappa, scale = problem.kappa, problem.forcing_scale

        def propagate(t0, t1, u0, counter=None):
            return exact_linear_propagate(kappa, forcing, scale, t0, t1, u0, counter)

        return propagate

    if spec.substep is None:

        def propagate(t0, t1, u0, counter=None):
            return coarse_one_step(problem, t0, t1, u0, spec, counter)

        return propagate

    def propagate(t0, t1, u0, counter=None):
        return backward_euler_run(problem, t0, t1, u0, spec, counter, smooth=smooth)

    return propagate
