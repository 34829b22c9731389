"""Pre/post-change observation distributions and their relative entropy.

A changepoint problem is specified by a pair of scalar densities: observations
follow the pre-change density until a random change time with a geometric
prior, and the post-change density afterwards.  This module defines the model
interface (log-density evaluation, sampling, KL divergence) together with the
unit-variance Gaussian mean-shift model used throughout the test harness.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

Regime = Literal["pre", "post"]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

DEFAULT_KL_SAMPLES = 1_000_000


class KlConvergenceError(RuntimeError):
    """Monte Carlo KL estimate did not reach the requested standard error."""


@dataclass(frozen=True)
class GeometricPrior:
    """Geometric change-time prior: P(change at k) = (1-rho)^(k-1) * rho, k >= 1.

    ``rho`` is the per-step change hazard and must lie strictly inside (0, 1).
    """

    rho: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rho) and 0.0 < self.rho < 1.0):
            raise ValueError(f"rho must be in the open interval (0, 1), got {self.rho!r}")

    @property
    def log_survival(self) -> float:
        """log(1 - rho), the per-step log-probability that no change occurs."""
        return math.log1p(-self.rho)

    @property
    def mean(self) -> float:
        return 1.0 / self.rho

    def pmf(self, k: int) -> float:
        if k < 1:
            return 0.0
        return (1.0 - self.rho) ** (k - 1) * self.rho

    def survival(self, k: int) -> float:
        """P(change time > k)."""
        if k < 0:
            return 1.0
        return (1.0 - self.rho) ** k


def _check_regime(regime: str) -> None:
    if regime not in ("pre", "post"):
        raise ValueError(f"regime must be 'pre' or 'post', got {regime!r}")


class ObservationModel(abc.ABC):
    """A pre/post-change density pair over scalar observations.

    Both densities must be bounded above by ``density_bound``.  Implementations
    are immutable after construction and safe to share across threads; random
    draws always come from a caller-supplied generator.
    """

    @property
    @abc.abstractmethod
    def density_bound(self) -> float:
        """A finite upper bound on both densities."""

    @abc.abstractmethod
    def log_density(self, regime: Regime, y):
        """Log-density of ``y`` under the given regime. Accepts scalars or arrays."""

    @abc.abstractmethod
    def sample(self, regime: Regime, rng: np.random.Generator, size=None):
        """Draw from the regime's density using ``rng``."""

    def closed_form_kl(self) -> float | None:
        """KL(pre || post) when known analytically, else None."""
        return None

    def kl_pre_post(
        self,
        *,
        num_samples: int = DEFAULT_KL_SAMPLES,
        seed: int = 0,
        se_tol: float | None = None,
    ) -> float:
        """Relative entropy between the pre- and post-change densities.

        Uses the closed form when the model provides one; otherwise falls back
        to a plain Monte Carlo estimate (see :func:`kl_monte_carlo`) and raises
        :class:`KlConvergenceError` if the standard error exceeds ``se_tol``.
        """
        closed = self.closed_form_kl()
        if closed is not None:
            return closed
        estimate = kl_monte_carlo(
            self, direction="forward", num_samples=num_samples, seed=seed, se_tol=se_tol
        )
        return estimate.value


@dataclass(frozen=True)
class GaussianShiftModel(ObservationModel):
    """Unit-variance Gaussian pair: pre-change mean 0, post-change mean ``m``.

    KL(pre || post) = m^2 / 2 in closed form.  ``m = 0`` is the degenerate
    case where both densities coincide.
    """

    m: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.m) and self.m >= 0.0):
            raise ValueError(f"mean shift m must be finite and >= 0, got {self.m!r}")

    @property
    def density_bound(self) -> float:
        return _INV_SQRT_2PI

    def log_density(self, regime: Regime, y):
        _check_regime(regime)
        mu = 0.0 if regime == "pre" else self.m
        d = np.asarray(y, dtype=float) - mu
        out = -0.5 * d * d - _LOG_SQRT_2PI
        if np.ndim(y) == 0:
            return float(out)
        return out

    def sample(self, regime: Regime, rng: np.random.Generator, size=None):
        _check_regime(regime)
        z = rng.standard_normal(size)
        if regime == "pre":
            return z
        return z + self.m

    def closed_form_kl(self) -> float:
        return 0.5 * self.m * self.m


@dataclass(frozen=True)
class KlEstimate:
    """A Monte Carlo KL estimate with its standard error."""

    value: float
    std_error: float
    num_samples: int


def kl_monte_carlo(
    model: ObservationModel,
    direction: Literal["forward", "reverse"] = "forward",
    num_samples: int = DEFAULT_KL_SAMPLES,
    seed: int = 0,
    se_tol: float | None = None,
) -> KlEstimate:
    """Estimate KL(pre || post) ("forward") or KL(post || pre) ("reverse").

    Plain Monte Carlo: draw from the first density, average the log ratio.
    Raises :class:`KlConvergenceError` when ``se_tol`` is given and the
    standard error at ``num_samples`` is still above it.
    """
    if direction not in ("forward", "reverse"):
        raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")
    if num_samples < 2:
        raise ValueError("num_samples must be at least 2")
    rng = np.random.default_rng(seed)
    if direction == "forward":
        y = model.sample("pre", rng, size=num_samples)
        diffs = np.asarray(model.log_density("pre", y)) - np.asarray(model.log_density("post", y))
    else:
        y = model.sample("post", rng, size=num_samples)
        diffs = np.asarray(model.log_density("post", y)) - np.asarray(model.log_density("pre", y))
    value = float(np.mean(diffs))
    std_error = float(np.std(diffs, ddof=1) / math.sqrt(num_samples))
    if se_tol is not None and not std_error <= se_tol:
        raise KlConvergenceError(
            f"KL standard error {std_error:.3e} exceeds tolerance {se_tol:.3e} "
            f"at the sample cap of {num_samples}"
        )
    return KlEstimate(value=value, std_error=std_error, num_samples=num_samples)


MODEL_REGISTRY = {
    "gaussian_shift": GaussianShiftModel,
}


def build_model(name: str, **params) -> ObservationModel:
    """Construct a registered model from its config name, e.g. ``gaussian_shift``.

    Hyphens are accepted in place of underscores so CLI spellings work too.
    """
    key = name.replace("-", "_")
    try:
        factory = MODEL_REGISTRY[key]
    except KeyError:
        known = ", ".join(sorted(MODEL_REGISTRY))
        raise ValueError(f"unknown model {name!r}; known models: {known}") from None
    return factory(**params)


def model_from_spec(spec: dict) -> ObservationModel:
    """Build a model from a run-config mapping like ``{"model": "gaussian_shift", "m": 0.4}``."""
    if "model" not in spec:
        raise ValueError("model spec must contain a 'model' key")
    params = {k: v for k, v in spec.items() if k != "model"}
    return build_model(spec["model"], **params)
