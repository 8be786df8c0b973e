"""Time-periodic ODE problems with a smooth/remainder splitting of the input.

The general vector form carries a full right-hand side f(t, u) together with
a smooth reduced right-hand side fbar(t, u); their difference must depend on
t only.  The scalar linear problem u' + kappa*u = scale*f(t) is the model the
convergence theory is stated for, and the RL circuit normalizes onto it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .signals import ConstantSignal, PwmSignal, SmoothCoarseInput

__all__ = [
    "PeriodicODEProblem",
    "LinearScalarProblem",
    "RLCircuitProblem",
    "normalize_rl",
    "split_rhs",
    "nonlinear_decay_problem",
]

RhsFn = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PeriodicODEProblem:
    """System u' = f(t, u) on (0, T) with the periodic constraint u(0) = u(T).

    ``smooth_rhs`` is the reduced right-hand side used by coarse propagators;
    the remainder ``full_rhs - smooth_rhs`` is expected to be independent of
    the state (see :func:`split_rhs`).  Jacobians are optional and only speed
    up the implicit solves.
    """

    dimension: int
    full_rhs: RhsFn
    smooth_rhs: RhsFn
    period: float
    full_jacobian: RhsFn | None = None
    smooth_jacobian: RhsFn | None = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if not (math.isfinite(self.period) and self.period > 0.0):
            raise ValueError(f"period must be finite and positive, got {self.period}")


def split_rhs(problem: PeriodicODEProblem, t: float, probe: np.ndarray | None = None) -> np.ndarray:
    """State-independent remainder of the splitting, f(t, u0) - fbar(t, u0).

    Evaluated at a fixed probe state (zeros by default); by the splitting
    contract the result does not depend on the probe.
    """
    if probe is None:
        probe = np.zeros(problem.dimension)
    probe = np.asarray(probe, dtype=float)
    full = np.asarray(problem.full_rhs(t, probe), dtype=float)
    smooth = np.asarray(problem.smooth_rhs(t, probe), dtype=float)
    return full - smooth


@dataclass(frozen=True)
class LinearScalarProblem:
    """Scalar model u' + kappa*u = forcing_scale * f(t), kappa > 0.

    ``forcing`` is the full (typically switching) input, ``smooth_forcing``
    the reduced input integrated by the coarse propagator.  Both share the
    same period and the same gain.
    """

    kappa: float
    forcing: object
    smooth_forcing: object
    forcing_scale: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and self.kappa > 0.0):
            raise ValueError(f"decay rate kappa must be finite and positive, got {self.kappa}")
        fp = getattr(self.forcing, "period", None)
        sp = getattr(self.smooth_forcing, "period", None)
        if fp is not None and sp is not None and not math.isclose(fp, sp, rel_tol=1e-12):
            raise ValueError(f"forcing periods disagree: {fp} vs {sp}")

    @property
    def period(self) -> float:
        return self.forcing.period

    def rate(self, t, u, smooth: bool = False):
        f = self.smooth_forcing if smooth else self.forcing
        return self.forcing_scale * f(t) - self.kappa * u

    def as_ode(self) -> PeriodicODEProblem:
        """Vector (dimension 1) view for the generic propagators."""
        kappa = self.kappa
        scale = self.forcing_scale
        forcing = self.forcing
        smooth = self.smooth_forcing

        def full_rhs(t, u):
            return scale * forcing(t) - kappa * u

        def smooth_rhs(t, u):
            return scale * smooth(t) - kappa * u

        def jac(t, u):
            return np.full((1, 1), -kappa)

        return PeriodicODEProblem(
            dimension=1,
            full_rhs=full_rhs,
            smooth_rhs=smooth_rhs,
            period=self.period,
            full_jacobian=jac,
            smooth_jacobian=jac,
        )


@dataclass(frozen=True)
class RLCircuitProblem:
    """RL circuit driven by a PWM current source.

    The flux equation (1/R) * phi'(t) + (1/L) * phi(t) = pwm(t) with the
    periodic constraint phi(0) = phi(T).
    """

    resistance: float
    inductance: float
    period: float
    pwm: PwmSignal
    coarse_input: SmoothCoarseInput

    def __post_init__(self):
        if self.resistance <= 0.0 or self.inductance <= 0.0:
            raise ValueError(
                f"resistance and inductance must be positive, got R={self.resistance}, L={self.inductance}"
            )
        if not math.isclose(self.pwm.period, self.period, rel_tol=1e-12):
            raise ValueError(f"PWM period {self.pwm.period} does not match circuit period {self.period}")


def normalize_rl(circuit: RLCircuitProblem) -> LinearScalarProblem:
    """Multiply the flux equation through by R: phi' + (R/L) phi = R * pwm(t)."""
    return LinearScalarProblem(
        kappa=circuit.resistance / circuit.inductance,
        forcing=circuit.pwm,
        smooth_forcing=circuit.coarse_input,
        forcing_scale=circuit.resistance,
    )


def nonlinear_decay_problem(
    kappa: float,
    forcing,
    smooth_forcing,
    forcing_scale: float = 1.0,
) -> PeriodicODEProblem:
    """Mildly nonlinear scalar test problem u' = -kappa*(1 + 0.1 sin u)*u + scale*f(t).

    Keeps the same smooth/remainder splitting structure as the linear model
    while exercising the Newton path of the implicit propagators.
    """
    period = forcing.period

    def full_rhs(t, u):
        return forcing_scale * forcing(t) - kappa * (1.0 + 0.1 * np.sin(u)) * u

    def smooth_rhs(t, u):
        return forcing_scale * smooth_forcing(t) - kappa * (1.0 + 0.1 * np.sin(u)) * u

    def jacobian(t, u):
        diag = -kappa * (1.0 + 0.1 * np.sin(u) + 0.1 * u * np.cos(u))
        return np.diag(np.atleast_1d(diag))

    return PeriodicODEProblem(
        dimension=1,
        full_rhs=full_rhs,
        smooth_rhs=smooth_rhs,
        period=period,
        full_jacobian=jacobian,
        smooth_jacobian=jacobian,
    )


def constant_forcing(value: float, period: float) -> ConstantSignal:
    """Convenience constructor mirroring the signal module's constant input."""
    return ConstantSignal(value=value, period=period)
