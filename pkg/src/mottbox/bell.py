"""Deterministic apparatus-internal-variable model of the two-spin singlet
experiment: every measurement outcome is a pure function of the measured
state, the apparatus orientation and the apparatus internal variable, yet the
ensemble statistics reproduce the quantum singlet correlation -a.b and
therefore violate the three-direction Bell inequality."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Union

import numpy as np

from .numerics import RngStream, require_unit

__all__ = [
    "HiddenVariable",
    "PolarizedState",
    "ApparatusSetting",
    "CorrelationEstimate",
    "BellTestResult",
    "response",
    "response_batch",
    "epr_trial",
    "correlation_mc",
    "correlation_quantum",
    "bell_test",
]


@dataclass(frozen=True)
class HiddenVariable:
    """Internal state of one measurement apparatus, a number in [0, 1)."""

    lam: float

    def __post_init__(self):
        if not (0.0 <= self.lam < 1.0):
            raise ValueError(f"hidden variable must lie in [0, 1), got {self.lam}")


@dataclass(frozen=True, eq=False)
class PolarizedState:
    """Spin-1/2 state fully polarized along ``axis`` with sign +1 or -1."""

    axis: np.ndarray
    sign: int

    def __post_init__(self):
        object.__setattr__(self, "axis", require_unit(self.axis))
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")


@dataclass(frozen=True, eq=False)
class ApparatusSetting:
    """Measurement orientation of one apparatus."""

    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "orientation", require_unit(self.orientation))


@dataclass(frozen=True)
class CorrelationEstimate:
    """Monte Carlo estimate of the outcome-product correlation."""

    mean: float
    std_error: float
    n_trials: int

    def __post_init__(self):
        if not (-1.0 <= self.mean <= 1.0):
            raise ValueError(f"correlation mean must lie in [-1, 1], got {self.mean}")
        if self.std_error < 0.0:
            raise ValueError(f"std_error must be non-negative, got {self.std_error}")


class BellTestResult(NamedTuple):
    lhs: float
    rhs: float
    violated: bool


def _clamped_dot(u: np.ndarray, v: np.ndarray) -> float:
    d = float(np.dot(u, v))
    return min(1.0, max(-1.0, d))


def _plus_threshold(axis: np.ndarray, orientation: np.ndarray) -> float:
    # cos^2(theta/2) = (1 + cos theta)/2 for theta between axis and orientation
    return 0.5 * (1.0 + _clamped_dot(axis, orientation))


def response(state: PolarizedState, setting: ApparatusSetting, hv: HiddenVariable) -> int:
    """Outcome (+1 or -1) of measuring ``state`` with one apparatus.

    Threshold realization: the apparatus returns ``state.sign`` when
    ``hv.lam < cos^2(theta/2)`` and the opposite value otherwise, with theta
    the angle between the state axis and the apparatus orientation.  This is
    deterministic in all three arguments and satisfies the three defining
    constraints: outcomes are only +1/-1; a state measured along its own
    polarization axis gives its sign for every internal state; and the
    average over a uniform internal variable equals
    ``sign * (axis . orientation)``.

    The tie ``hv.lam == cos^2(theta/2)`` goes to the opposite sign (strict
    ``<``), fixed so outcomes are bit-reproducible.
    """
    t = _plus_threshold(state.axis, setting.orientation)
    return state.sign if hv.lam < t else -state.sign


def response_batch(state: PolarizedState, setting: ApparatusSetting, lams) -> np.ndarray:
    """Vectorized :func:`response` over an array of internal variables.

    Element i equals ``response(state, setting, HiddenVariable(lams[i]))``;
    the threshold expression is shared with the scalar path.
    """
    lams = np.asarray(lams, dtype=float)
    t = _plus_threshold(state.axis, setting.orientation)
    return np.where(lams < t, float(state.sign), float(-state.sign))


def epr_trial(
    a: ApparatusSetting,
    b: ApparatusSetting,
    hv1: HiddenVariable,
    hv2: HiddenVariable,
) -> tuple[int, int]:
    """One singlet-pair measurement, fully determined by (hv1, hv2).

    Apparatus 1 measures first: writing the singlet in the basis of the first
    orientation makes the first outcome an even split over the internal
    variable, realized as +1 iff ``hv1.lam < 1/2``.  The partner particle is
    left polarized opposite to that outcome along the first orientation, and
    apparatus 2 measures it via :func:`response`.  Apparatus 1 never reads
    hv2 and apparatus 2 never reads hv1.
    """
    r1 = 1 if hv1.lam < 0.5 else -1
    collapsed = PolarizedState(axis=a.orientation, sign=-r1)
    r2 = response(collapsed, b, hv2)
    return r1, r2


def trial_products(a: ApparatusSetting, b: ApparatusSetting, lam1, lam2) -> np.ndarray:
    """Vectorized outcome products r1*r2 for arrays of internal variables.

    Bit-identical to looping :func:`epr_trial` over (lam1[i], lam2[i]); the
    threshold expressions are shared with the scalar path.
    """
    lam1 = np.asarray(lam1, dtype=float)
    lam2 = np.asarray(lam2, dtype=float)
    r1 = np.where(lam1 < 0.5, 1.0, -1.0)
    t = _plus_threshold(a.orientation, b.orientation)
    r2 = -r1 * np.where(lam2 < t, 1.0, -1.0)
    return r1 * r2


def correlation_mc(
    a: ApparatusSetting, b: ApparatusSetting, n: int, rng: RngStream
) -> CorrelationEstimate:
    """Sample mean of the outcome product over ``n`` singlet trials.

    Each trial draws a fresh pair of internal variables (two consecutive
    uniforms from ``rng``), so a fixed (seed, stream_id) reproduces the
    estimate bitwise.
    """
    if n < 1:
        raise ValueError(f"need at least one trial, got n={n}")
    u = rng.uniform(size=(n, 2))
    products = trial_products(a, b, u[:, 0], u[:, 1])
    mean = float(products.mean())
    std_error = float(products.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return CorrelationEstimate(mean=mean, std_error=std_error, n_trials=n)


def correlation_quantum(a: ApparatusSetting, b: ApparatusSetting) -> float:
    """Singlet correlation -a.b predicted by quantum mechanics."""
    return -_clamped_dot(a.orientation, b.orientation)


CorrelationFn = Callable[[ApparatusSetting, ApparatusSetting], Union[float, CorrelationEstimate]]


def _as_mean(value) -> float:
    return float(getattr(value, "mean", value))


def bell_test(
    a: ApparatusSetting,
    b: ApparatusSetting,
    c: ApparatusSetting,
    correlation: CorrelationFn,
) -> BellTestResult:
    """Evaluate the three-direction Bell inequality |E(a,b) - E(a,c)| <= 1 + E(b,c).

    ``correlation`` may return floats or :class:`CorrelationEstimate` values.
    ``violated`` is True when the left side strictly exceeds the right side,
    which no particle-attached hidden-variable model can achieve.
    """
    e_ab = _as_mean(correlation(a, b))
    e_ac = _as_mean(correlation(a, c))
    e_bc = _as_mean(correlation(b, c))
    lhs = abs(e_ab - e_ac)
    rhs = 1.0 + e_bc
    return BellTestResult(lhs=lhs, rhs=rhs, violated=lhs > rhs)
