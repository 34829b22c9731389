"""Measurement-informativeness diagnosis for Bayesian quickest change detection.

Measurements are informative enough for the Shiryaev statistic when the
relative entropy between the pre- and post-change densities is at least
log(1/(1-rho)).  Below that threshold the geometric prior dominates the
evidence and the log posterior drifts downward even with no change, so the
statistic becomes increasingly (and possibly wrongly) confident that a change
occurred.  For the Gaussian mean-shift family the boundary has a closed form:
the critical shift is sqrt(2 log(1/(1-rho))).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .observation_models import (
    DEFAULT_KL_SAMPLES,
    GaussianShiftModel,
    GeometricPrior,
    ObservationModel,
)


@dataclass(frozen=True)
class InformativenessReport:
    """Outcome of comparing a model's KL divergence against the prior threshold.

    ``drift_bound`` is the asymptotic small-posterior drift of the log
    statistic under no change, log(1-rho) + kl; it is negative exactly when
    the measurements are not informative.  ``critical_parameter`` is the
    critical Gaussian mean shift when the model is a mean-shift Gaussian,
    None otherwise.
    """

    kl: float
    prior_threshold: float
    informative: bool
    drift_bound: float
    critical_parameter: float | None = None

    def to_dict(self) -> dict:
        return {
            "kl": self.kl,
            "prior_threshold": self.prior_threshold,
            "informative": self.informative,
            "drift_bound": self.drift_bound,
            "critical_parameter": self.critical_parameter,
        }


def prior_threshold(prior: GeometricPrior) -> float:
    """log(1/(1-rho)): the KL level measurements must reach to beat the prior."""
    return -prior.log_survival


def critical_mean(prior: GeometricPrior) -> float:
    """Critical Gaussian mean shift sqrt(2 log(1/(1-rho))).

    Shifts strictly below this value are insufficiently informative; the
    value grows monotonically with rho.
    """
    return math.sqrt(2.0 * prior_threshold(prior))


def membership(m: float, prior: GeometricPrior) -> bool:
    """Whether a Gaussian mean shift ``m`` falls in the insufficiently informative set.

    The set is {m : m^2/2 < log(1/(1-rho))} = the open interval
    (0, critical_mean); the interval form is used so the boundary is excluded
    exactly even when m^2/2 rounds below the threshold.
    """
    if not (math.isfinite(m) and m > 0.0):
        raise ValueError(f"mean shift m must be finite and > 0, got {m!r}")
    return m < critical_mean(prior)


def diagnose(
    model: ObservationModel,
    prior: GeometricPrior,
    *,
    kl_num_samples: int = DEFAULT_KL_SAMPLES,
    kl_seed: int = 0,
    kl_se_tol: float | None = None,
) -> InformativenessReport:
    """Diagnose whether a model's measurements can overcome the prior.

    ``informative`` is kl >= log(1/(1-rho)); at equality the downward-drift
    phenomenon is not asserted, so the boundary counts as informative.  For
    models without a closed-form KL the Monte Carlo estimator parameters are
    forwarded and estimation failures propagate.
    """
    kl = model.kl_pre_post(num_samples=kl_num_samples, seed=kl_seed, se_tol=kl_se_tol)
    threshold = prior_threshold(prior)
    critical = critical_mean(prior) if isinstance(model, GaussianShiftModel) else None
    return InformativenessReport(
        kl=kl,
        prior_threshold=threshold,
        informative=kl >= threshold,
        drift_bound=prior.log_survival + kl,
        critical_parameter=critical,
    )
