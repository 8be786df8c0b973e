"""Convergence machinery for the periodic time-parallel iteration.

For the scalar linear model with an exact fine propagator, the errors at the
synchronization points obey the fixed-point iteration e^(k+1) = S e^(k) with

    e_0^(k+1) = e_N^(k)
    e_n^(k+1) = phi * e_{n-1}^(k+1) + d * e_{n-1}^(k),

where phi is the coarse stability value and d = exp(-kappa*dT) - phi is its
defect against the exact decay.  This module builds S explicitly, estimates
its dominant eigenvalue modulus, evaluates the contraction condition
|phi| + |d| < 1 and the scalar bound recursion

    x_0 = 1,   x_l = (|phi| * x_{l-1} + |d|) ** (N / (N + 1)),

and provides the closed-form periodic solution used as the reference when
measuring numerical convergence factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .parareal import PararealRun
from .propagators import UnsupportedForcingError
from .signals import SmoothCoarseInput

__all__ = [
    "ErrorIterationMatrix",
    "BoundSequence",
    "ContractionCheck",
    "PeriodicSolution",
    "SpectralRadiusError",
    "BoundNotApplicableError",
    "build_S",
    "spectral_radius",
    "bound_xl",
    "contraction_check",
    "rho_numerical",
    "closed_form_periodic",
]


class SpectralRadiusError(RuntimeError):
    """Power iteration failed to settle; carries the last two estimates."""

    def __init__(self, message: str, estimates: tuple[float, float]):
        super().__init__(message)
        self.estimates = estimates


class BoundNotApplicableError(ValueError):
    """The contraction condition fails, so the bound recursion says nothing."""


@dataclass(frozen=True)
class ErrorIterationMatrix:
    """Dense (N+1) x (N+1) error propagation matrix with its parameters."""

    subintervals: int
    phi: float
    defect: float
    matrix: np.ndarray


def build_S(n_sub: int, phi: float, defect: float) -> ErrorIterationMatrix:
    """Assemble the error-iteration matrix for N subintervals.

    Row 0 forwards the periodicity relaxation (top-right entry 1); row n
    carries phi^n on the last column and phi^(n-1-j) * defect below the
    diagonal, which is exactly the unrolled two-term error recursion.
    """
    if n_sub < 1:
        raise ValueError(f"need at least one subinterval, got {n_sub}")
    size = n_sub + 1
    matrix = np.zeros((size, size))
    powers = phi ** np.arange(size)
    matrix[:, n_sub] = powers
    for n in range(1, size):
        # columns j = 0 .. n-1 hold phi^(n-1-j) * d
        matrix[n, :n] = defect * powers[n - 1 :: -1]
    return ErrorIterationMatrix(subintervals=n_sub, phi=phi, defect=defect, matrix=matrix)


def spectral_radius(
    matrix: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    seed: int | None = 0,
) -> float:
    """Dominant eigenvalue modulus by power iteration with a random start.

    The estimate is the norm growth |M x| / |x| per step (no Rayleigh
    quotient), accepted once successive estimates agree to ``tol``.  A
    sustained period-two oscillation of the estimate indicates a dominant
    complex-conjugate or opposite-sign pair; in that case the iteration
    restarts on M @ M and the square root of its radius is returned.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"matrix must be square, got shape {matrix.shape}")
    if tol <= 0.0:
        raise ValueError("tol must be positive")

    def run(m: np.ndarray, allow_fallback: bool) -> float:
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(m.shape[0])
        x /= np.linalg.norm(x)
        estimates = [math.inf, math.inf]
        oscillating = 0
        for _ in range(max_iter):
            y = m @ x
            norm = float(np.linalg.norm(y))
            if norm == 0.0:
                return 0.0  # start vector mapped into the kernel of a nilpotent part
            if abs(norm - estimates[-1]) <= tol * max(1.0, norm):
                return norm
            if abs(norm - estimates[-2]) <= tol * max(1.0, norm):
                oscillating += 1
                if allow_fallback and oscillating >= 8:
                    return math.sqrt(run(m @ m, allow_fallback=False))
            else:
                oscillating = 0
            estimates.append(norm)
            x = y / norm
        raise SpectralRadiusError(
            f"power iteration did not settle within {max_iter} iterations",
            estimates=(estimates[-2], estimates[-1]),
        )

    return run(matrix, allow_fallback=True)


@dataclass(frozen=True)
class BoundSequence:
    """Values x_0 .. x_L of the bound recursion with their parameters."""

    phi: float
    defect: float
    subintervals: int
    values: np.ndarray

    @property
    def final(self) -> float:
        return float(self.values[-1])


def bound_xl(phi: float, defect: float, n_sub: int, depth: int) -> BoundSequence:
    """Iterate the convergence-factor bound to the requested depth.

    Requires the contraction condition |phi| + |defect| < 1; outside it the
    recursion has no meaning and a :class:`BoundNotApplicableError` is raised.
    """
    if n_sub < 1:
        raise ValueError(f"need at least one subinterval, got {n_sub}")
    if depth < 1:
        raise ValueError(f"bound depth must be >= 1, got {depth}")
    if abs(phi) + abs(defect) >= 1.0:
        raise BoundNotApplicableError(
            f"contraction condition fails: |phi| + |d| = {abs(phi) + abs(defect)} >= 1"
        )
    exponent = n_sub / (n_sub + 1.0)
    values = np.empty(depth + 1)
    values[0] = 1.0
    for level in range(1, depth + 1):
        values[level] = (abs(phi) * values[level - 1] + abs(defect)) ** exponent
    return BoundSequence(phi=phi, defect=defect, subintervals=n_sub, values=values)


@dataclass(frozen=True)
class ContractionCheck:
    holds: bool
    margin: float


def contraction_check(phi: float, z: float) -> ContractionCheck:
    """Evaluate |phi| + |exp(-z) - phi| < 1 and its margin for step size z."""
    total = abs(phi) + abs(math.exp(-z) - phi)
    return ContractionCheck(holds=total < 1.0, margin=1.0 - total)


def rho_numerical(run: PararealRun, reference: np.ndarray, iterations: int | None = None) -> float:
    """Measured convergence factor (|e^(K)| / |e^(0)|) ** (1/K) in the max norm.

    ``reference`` holds the periodic solution at the synchronization points.
    ``iterations`` defaults to the run's converged iteration index and must be
    supplied explicitly for non-converged runs.
    """
    if iterations is None:
        iterations = run.converged_at
    if iterations is None:
        raise ValueError("run did not converge; pass the iteration count explicitly")
    if iterations < 1:
        raise ValueError("the convergence factor needs at least one iteration")
    reference = np.asarray(reference)
    if reference.shape != run.iterates[0].shape:
        raise ValueError(f"reference shape {reference.shape} does not match iterates {run.iterates[0].shape}")
    initial = float(np.max(np.abs(reference - run.iterates[0])))
    final = float(np.max(np.abs(reference - run.iterates[iterations])))
    if initial == 0.0:
        raise ValueError("initial error is zero; the error ratio is undefined")
    return (final / initial) ** (1.0 / iterations)


class PeriodicSolution:
    """Exact periodic solution of u' + kappa*u = scale*f(t), evaluable anywhere.

    Supports piecewise-constant forcings (through their breakpoints) and the
    smooth sine input (through the standard first-order response).  The
    unique periodic start value is

        u(0) = (1 - exp(-kappa*T))^(-1) * integral_0^T exp(-kappa*(T-s)) * scale * f(s) ds.
    """

    def __init__(self, kappa: float, forcing, scale: float):
        if not (math.isfinite(kappa) and kappa > 0.0):
            raise ValueError(f"a unique periodic solution needs kappa > 0, got {kappa}")
        self.kappa = kappa
        self.scale = scale
        self.period = forcing.period
        self._sine = isinstance(forcing, SmoothCoarseInput) and forcing.kind == "sine"
        if self._sine:
            omega = 2.0 * math.pi / self.period
            denom = kappa * kappa + omega * omega
            self._sin_coeff = scale * kappa / denom
            self._cos_coeff = -scale * omega / denom
            self._omega = omega
            self.initial_value = self._cos_coeff
            return
        if not getattr(forcing, "piecewise_constant", False):
            raise UnsupportedForcingError(
                f"periodic closed form needs a piecewise-constant or sine forcing, got {type(forcing).__name__}"
            )
        period = self.period
        edges = np.concatenate(([0.0], np.asarray(forcing.breakpoints_between(0.0, period), dtype=float), [period]))
        values = np.asarray([float(forcing(0.5 * (a + b))) for a, b in zip(edges[:-1], edges[1:])])
        # integral of exp(-kappa*(T-s)) over each piece, accumulated exactly
        weights = np.exp(-kappa * (period - edges[1:])) - np.exp(-kappa * (period - edges[:-1]))
        forced = float(np.sum(values * weights)) * scale / kappa
        self.initial_value = forced / (1.0 - math.exp(-kappa * period))
        self._edges = edges
        self._values = values
        # start-of-piece states for O(log B) evaluation anywhere in the period
        starts = np.empty(len(values))
        starts[0] = self.initial_value
        u = self.initial_value
        for j, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
            if j > 0:
                starts[j] = u
            decay = math.exp(-kappa * (b - a))
            u = u * decay + (scale * values[j] / kappa) * (1.0 - decay)

        self._piece_starts = starts

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tr = t - self.period * np.floor(t / self.period)
        if self._sine:
            arg = self._omega * tr
            out = self._sin_coeff * np.sin(arg) + self._cos_coeff * np.cos(arg)
        else:
            idx = np.clip(np.searchsorted(self._edges, tr, side="right") - 1, 0, len(self._values) - 1)
            tau = tr - self._edges[idx]
            decay = np.exp(-self.kappa * tau)
            level = self.scale * self._values[idx] / self.kappa
            out = self._piece_starts[idx] * decay + level * (1.0 - decay)
        return float(out) if scalar else out

    def at_times(self, times) -> np.ndarray:
        return np.asarray(self(np.asarray(times, dtype=float)))


def closed_form_periodic(kappa: float, forcing, scale: float) -> PeriodicSolution:
    """Unique periodic solution of the scalar linear problem, in closed form."""
    return PeriodicSolution(kappa=kappa, forcing=forcing, scale=scale)
