"""Shiryaev's no-change posterior recursion and stopping rule.

The test statistic is the posterior probability that no change has happened
yet given the observations so far.  It obeys a scalar multiplicative
recursion; this module implements that recursion in a numerically hardened
form, the threshold stopping rule, and a direct Bayes-sum oracle used to
validate the recursion.

Numerical representation: the state carries both the linear posterior and a
running sum of log increments.  The linear recursion is the source of truth
down to 1e-300; below that the posterior reports 0 and the log accumulator
carries the statistic, so multi-thousand-step runs never silently underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .observation_models import GeometricPrior, ObservationModel

X1_LINEAR_FLOOR = 1e-300
_CLAMP_SLACK = 1e-12

DEFAULT_ORACLE_CAP = 25


class FilterError(RuntimeError):
    """The posterior update received values no valid model can produce."""


@dataclass(frozen=True)
class FilterState:
    """Posterior state after ``k`` observations.

    ``x1`` is the no-change posterior in [0, 1]; ``log_x1`` is the running sum
    of log increments (equal to log(x1) up to accumulated rounding);
    ``last_log_m`` is the most recent increment, None before the first step.
    """

    k: int
    x1: float
    log_x1: float
    last_log_m: float | None = None


@dataclass(frozen=True)
class StoppingRule:
    """Declare a change at the first step where the no-change posterior drops below 1 - h."""

    h: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.h) and 0.0 < self.h < 1.0):
            raise ValueError(f"threshold parameter h must be in (0, 1), got {self.h!r}")

    @property
    def threshold(self) -> float:
        return 1.0 - self.h

    def should_stop(self, x1: float) -> bool:
        return x1 < self.threshold


def initial_state() -> FilterState:
    """State before any observation: no-change posterior is exactly 1."""
    return FilterState(k=0, x1=1.0, log_x1=0.0, last_log_m=None)


def step(
    state: FilterState,
    y: float,
    model: ObservationModel,
    prior: GeometricPrior,
) -> FilterState:
    """Advance the posterior by one observation.

    The update is the two-state forward recursion

        x1' = (1-rho) * b_pre(y) * x1 / N,
        N   = b_post(y) + (1-rho) * (b_pre(y) - b_post(y)) * x1,

    evaluated relative to the larger of the two densities so that extreme
    observations (log-densities near the underflow limit) cannot zero the
    normalizer spuriously.
    """
    log_b1 = float(model.log_density("pre", y))
    log_b2 = float(model.log_density("post", y))
    if math.isnan(log_b1) or math.isnan(log_b2):
        raise FilterError(f"model returned NaN log-density at y={y!r}")
    lb_max = max(log_b1, log_b2)
    if lb_max == -math.inf:
        raise FilterError(f"both densities vanish at y={y!r}; observation is impossible")

    q = 1.0 - prior.rho
    log_q = prior.log_survival
    w1 = math.exp(log_b1 - lb_max)
    w2 = math.exp(log_b2 - lb_max)
    # normalizer divided by exp(lb_max); the scale cancels in the ratio below
    n_scaled = w2 + q * (w1 - w2) * state.x1
    if n_scaled <= 0.0:
        raise FilterError(
            "posterior normalizer is not positive; the model's densities are inconsistent"
        )

    x1 = q * w1 * state.x1 / n_scaled
    if x1 > 1.0:
        if x1 > 1.0 + _CLAMP_SLACK:
            raise FilterError(f"posterior left [0, 1] by more than rounding: {x1!r}")
        x1 = 1.0
    if x1 < X1_LINEAR_FLOOR:
        x1 = 0.0
    log_m = log_q + log_b1 - (lb_max + math.log(n_scaled))
    return FilterState(k=state.k + 1, x1=x1, log_x1=state.log_x1 + log_m, last_log_m=log_m)


@dataclass
class FilterRun:
    """Posterior path over an observation sequence, one entry per observation."""

    x1: np.ndarray
    log_x1: np.ndarray
    log_m: np.ndarray
    stop_time: int | None


def run(
    observations,
    model: ObservationModel,
    prior: GeometricPrior,
    rule: StoppingRule | None = None,
) -> FilterRun:
    """Filter a whole observation sequence.

    The stop time is the first (1-based) step at which the posterior is below
    the rule's threshold, or None if it never crosses within the sequence; the
    path always covers every observation.
    """
    obs = np.atleast_1d(np.asarray(observations, dtype=float))
    if obs.size == 0:
        raise ValueError("observation sequence must be nonempty")
    n = obs.size
    x1_path = np.empty(n)
    log_x1_path = np.empty(n)
    log_m_path = np.empty(n)
    stop_time: int | None = None
    state = initial_state()
    for i in range(n):
        state = step(state, obs[i], model, prior)
        x1_path[i] = state.x1
        log_x1_path[i] = state.log_x1
        log_m_path[i] = state.last_log_m
        if stop_time is None and rule is not None and rule.should_stop(state.x1):
            stop_time = state.k
    return FilterRun(x1=x1_path, log_x1=log_x1_path, log_m=log_m_path, stop_time=stop_time)


def _logsumexp(values: np.ndarray) -> float:
    hi = np.max(values)
    if hi == -math.inf:
        return -math.inf
    return float(hi + math.log(np.sum(np.exp(values - hi))))


def brute_force_posterior(
    observations,
    model: ObservationModel,
    prior: GeometricPrior,
    max_len: int = DEFAULT_ORACLE_CAP,
) -> float:
    """No-change posterior computed by direct summation over change hypotheses.

    For each candidate change time j in 1..k the joint log-density of the
    observations is accumulated explicitly and combined with the geometric
    prior mass via log-sum-exp; no recursion is involved, which makes this an
    independent (if slow) oracle for :func:`run`.  Sequences longer than
    ``max_len`` are rejected to keep the oracle cheap.
    """
    obs = np.atleast_1d(np.asarray(observations, dtype=float))
    k = obs.size
    if k < 1:
        raise ValueError("need at least one observation")
    if k > max_len:
        raise ValueError(f"oracle limited to sequences of length <= {max_len}, got {k}")

    log_b1 = np.asarray(model.log_density("pre", obs), dtype=float)
    log_b2 = np.asarray(model.log_density("post", obs), dtype=float)
    # prefix1[j] = sum of pre-change log densities of y_1..y_j
    prefix1 = np.concatenate(([0.0], np.cumsum(log_b1)))
    # suffix2[j] = sum of post-change log densities of y_(j+1)..y_k
    suffix2 = np.concatenate((np.cumsum(log_b2[::-1])[::-1], [0.0]))

    log_q = prior.log_survival
    log_rho = math.log(prior.rho)
    log_numerator = k * log_q + prefix1[k]
    terms = np.empty(k + 1)
    terms[0] = log_numerator
    for j in range(1, k + 1):
        # change at j: y_1..y_(j-1) pre-change, y_j..y_k post-change
        terms[j] = (j - 1) * log_q + log_rho + prefix1[j - 1] + suffix2[j - 1]
    return math.exp(log_numerator - _logsumexp(terms))
