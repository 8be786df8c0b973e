"""Time-periodic excitation signals.

A pulse-width-modulated drive built by comparing a sawtooth carrier against
a rectified sine, plus the two smooth surrogate inputs (full-period sine and
half-period step) that reduced coarse propagators integrate instead of the
switching waveform.

All signal objects are immutable after construction and can be shared freely
between concurrent workers.  The switching-instant list of a PWM signal is
computed lazily and cached on first use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "SawtoothCarrier",
    "PwmSignal",
    "SmoothCoarseInput",
    "ConstantSignal",
    "eval_sawtooth",
    "eval_pwm",
    "eval_coarse_input",
    "pwm_breakpoints",
]


def _reduce_to_period(t, period):
    """Map times outside [0, period] into [0, period) by periodicity."""
    t = np.asarray(t, dtype=float)
    outside = (t < 0.0) | (t > period)
    if np.any(outside):
        t = np.where(outside, np.mod(t, period), t)
    return t


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class SawtoothCarrier:
    """Sawtooth comparison carrier: ``teeth`` linear ramps 0 -> 1 per period."""

    period: float
    teeth: int

    def __post_init__(self):
        if not (math.isfinite(self.period) and self.period > 0.0):
            raise ValueError(f"carrier period must be finite and positive, got {self.period}")
        if int(self.teeth) != self.teeth or self.teeth < 1:
            raise ValueError(f"tooth count must be a positive integer, got {self.teeth}")

    @property
    def tooth_width(self) -> float:
        return self.period / self.teeth

    def __call__(self, t):
        return eval_sawtooth(t, self)


def eval_sawtooth(t, carrier: SawtoothCarrier):
    """Fractional part of ``teeth * t / period``, in [0, 1).

    Computed on the reduced phase t/period so that exact multiples of the
    period land on 0.0 regardless of the tooth count.
    """
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("sawtooth evaluation requires finite times")
    phase = t / carrier.period
    phase = phase - np.floor(phase)
    x = carrier.teeth * phase
    return _scalar_or_array(x - np.floor(x))


@dataclass(frozen=True)
class PwmSignal:
    """Three-level switching waveform with values in {-1, 0, +1}.

    The signal is on (at the sign of the reference sine) wherever the carrier
    sits strictly below the rectified sine, and off otherwise.  Outside
    [0, period] it is extended periodically.
    """

    carrier: SawtoothCarrier

    @property
    def period(self) -> float:
        return self.carrier.period

    @property
    def piecewise_constant(self) -> bool:
        return True

    def __call__(self, t):
        return eval_pwm(t, self)

    @cached_property
    def _period_breakpoints(self) -> np.ndarray:
        # cached_property guarantees at-most-once computation per instance on
        # CPython 3.10/3.11; the value is pure so a racing recompute on newer
        # interpreters is harmless.
        return _locate_switching_instants(self)

    def breakpoints_between(self, t0: float, t1: float) -> np.ndarray:
        return pwm_breakpoints(self, t0, t1)


def eval_pwm(t, signal: PwmSignal):
    """Evaluate the switching waveform; ties of carrier vs. |sine| give 0."""
    period = signal.period
    t = _reduce_to_period(t, period)
    saw = np.asarray(eval_sawtooth(t, signal.carrier))
    ref = np.sin((2.0 * np.pi) * (t / period))
    on = (saw - np.abs(ref)) < 0.0
    return _scalar_or_array(np.where(on, np.sign(ref), 0.0))


def _bisect_crossing(gap, lo: float, hi: float, tol: float) -> float:
    """Root of the sign change of ``gap`` inside (lo, hi) by plain bisection."""
    glo = gap(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break  # interval below float resolution
        if (gap(mid) < 0.0) == (glo < 0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _locate_switching_instants(signal: PwmSignal) -> np.ndarray:
    """All instants in (0, T) where the PWM value changes.

    Within one tooth the carrier ramps 0 -> 1 much faster than the rectified
    sine varies, so crossings are bracketed on a per-tooth subgrid and then
    bisected.  Tooth boundaries (carrier resets) and the sign flip of the
    reference sine are taken as additional candidates; every candidate is kept
    only if the signal value actually differs on its two sides.
    """
    period = signal.period
    teeth = signal.carrier.teeth
    tooth = signal.carrier.tooth_width
    loc_tol = 1e-14 * period
    probe = 1e-13 * period

    two_pi = 2.0 * math.pi

    def gap(t: float) -> float:
        phase = t / period
        phase -= math.floor(phase)
        x = teeth * phase
        saw = x - math.floor(x)
        return saw - abs(math.sin(two_pi * phase))

    candidates: list[float] = []
    inset = 1e-9 * tooth  # sample strictly inside; the carrier resets at each boundary
    for k in range(teeth):
        lo = k * tooth + inset
        hi = (k + 1) * tooth - inset
        ts = np.linspace(lo, hi, 17)
        gs = [gap(float(t)) for t in ts]
        for i in range(len(ts) - 1):
            if (gs[i] < 0.0) != (gs[i + 1] < 0.0):
                candidates.append(_bisect_crossing(gap, float(ts[i]), float(ts[i + 1]), loc_tol))

    candidates.extend(k * tooth for k in range(1, teeth))
    candidates.append(0.5 * period)

    accepted: list[float] = []
    for t in sorted(candidates):
        if not (probe < t < period - probe):
            continue
        if accepted and t - accepted[-1] < 4.0 * probe:
            continue
        if eval_pwm(t - probe, signal) != eval_pwm(t + probe, signal):
            accepted.append(t)
    return np.asarray(accepted)


def pwm_breakpoints(signal: PwmSignal, t0: float, t1: float) -> np.ndarray:
    """Switching instants of ``signal`` strictly inside (t0, t1).

    Bounds must satisfy 0 <= t0 < t1 <= period.  The full-period list is
    cached on the signal, so repeated queries over the same grid are cheap.
    """
    if not (t0 < t1):
        raise ValueError(f"need t0 < t1, got t0={t0}, t1={t1}")
    if t0 < 0.0 or t1 > signal.period:
        raise ValueError(f"interval [{t0}, {t1}] must lie within one period [0, {signal.period}]")
    all_bps = signal._period_breakpoints
    lo = np.searchsorted(all_bps, t0, side="right")
    hi = np.searchsorted(all_bps, t1, side="left")
    return all_bps[lo:hi].copy()


_COARSE_KINDS = ("sine", "step")


@dataclass(frozen=True)
class SmoothCoarseInput:
    """Slowly varying surrogate input for the coarse propagator.

    ``sine`` is sin(2*pi*t/period); ``step`` is +1 on [0, period/2] and -1 on
    (period/2, period], its single interior discontinuity sitting exactly at
    the half period.
    """

    kind: str
    period: float

    def __post_init__(self):
        if self.kind not in _COARSE_KINDS:
            raise ValueError(f"coarse input kind must be one of {_COARSE_KINDS}, got {self.kind!r}")
        if not (math.isfinite(self.period) and self.period > 0.0):
            raise ValueError(f"period must be finite and positive, got {self.period}")

    @property
    def piecewise_constant(self) -> bool:
        return self.kind == "step"

    def breakpoints_between(self, t0: float, t1: float) -> np.ndarray:
        if self.kind != "step":
            raise TypeError("only the step input is piecewise constant")
        half = 0.5 * self.period
        return np.asarray([half]) if t0 < half < t1 else np.asarray([])

    def __call__(self, t):
        return eval_coarse_input(t, self)


def eval_coarse_input(t, signal: SmoothCoarseInput):
    """Evaluate a smooth coarse input; times outside [0, T] reduce modulo T."""
    t = _reduce_to_period(t, signal.period)
    if signal.kind == "sine":
        return _scalar_or_array(np.sin((2.0 * np.pi) * (t / signal.period)))
    return _scalar_or_array(np.where(t <= 0.5 * signal.period, 1.0, -1.0))


@dataclass(frozen=True)
class ConstantSignal:
    """Constant forcing, trivially periodic with any period."""

    value: float
    period: float

    @property
    def piecewise_constant(self) -> bool:
        return True

    def breakpoints_between(self, t0: float, t1: float) -> np.ndarray:
        return np.asarray([])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return _scalar_or_array(np.full_like(t, self.value))
