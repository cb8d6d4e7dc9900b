"""Converting cosine sample sets into epsilon estimates and lower bounds.

Two kinds of output are produced from a labeled set of canary cosines:

* Point estimates: fit a Gaussian to the observed statistics and compare
  it to a null model through the exact two-Gaussian trade-off. For the
  final-model statistic the null is the closed-form N(0, 1/d) sphere
  cosine law; for the max-over-rounds statistic no closed form exists and
  the null is fitted to unobserved-canary samples instead.

* A high-confidence lower bound: a thresholding membership attack whose
  false negative rate is bounded by a one-sided Jeffreys interval and
  whose false positive rate comes from the exact null CDF (or a Jeffreys
  bound on unobserved samples when only an empirical null is available).
  With n observed samples at confidence 1 - alpha the bound can never
  exceed log((1 - delta) / jeffreys_upper_bound(0, n, 1 - alpha)), its
  perfect-separation ceiling; the reported value is clipped there.

Estimates are reported as evidence about a specific strong attack, not as
certified worst-case bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import log_ndtr

from .errors import DegenerateInputError
from .mechanism import CosineSampleSet, fit_gaussian_moments
from .sphere import GAUSSIAN_NULL_SWITCHOVER, NullCosineDistribution, gaussian_null_approximation
from .tradeoff import GaussianHypothesis, epsilon_for_delta

# Anderson-Darling thresholds for the normality test with both parameters
# estimated, applied to the corrected statistic A^2 (1 + 4/n - 25/n^2).
AD_REJECT_1PCT = 1.088
AD_REJECT_15PCT = 0.574


@dataclass(frozen=True)
class AttackRates:
    """Error rates of the thresholding attack at one candidate threshold.

    ``fpr`` is exact under a closed-form null and a confidence upper bound
    under an empirical null; ``fnr_upper`` is always a one-sided Jeffreys
    upper bound, never a point estimate.
    """

    fpr: float
    fnr_upper: float
    threshold: float


@dataclass(frozen=True)
class EpsilonLowerBound:
    value: float
    confidence: float
    threshold_used: float


@dataclass(frozen=True)
class NormalityDiagnostic:
    ad_statistic: float
    reject_1pct: bool
    reject_15pct: bool


@dataclass(frozen=True)
class ExactNull:
    """Closed-form null cosine model for a given dimension.

    Uses the N(0, 1/dim) limit at and above the switch-over dimension and
    the exact beta-based CDF below it.
    """

    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"dim must be at least 2, got {self.dim}")

    def log_sf(self, thresholds: np.ndarray) -> np.ndarray:
        """log P(null cosine > a), elementwise; thresholds may be infinite."""
        t = np.asarray(thresholds, dtype=np.float64)
        out = np.empty_like(t)
        below, above = t <= -1.0, t >= 1.0
        inside = ~(below | above)
        out[below] = 0.0
        out[above] = -np.inf
        if self.dim >= GAUSSIAN_NULL_SWITCHOVER:
            out[inside] = log_ndtr(-t[inside] * math.sqrt(self.dim))
        else:
            out[inside] = NullCosineDistribution(self.dim).logsf(t[inside])
        return out

    def describe(self) -> str:
        form = "gaussian" if self.dim >= GAUSSIAN_NULL_SWITCHOVER else "exact-beta"
        return f"{form}(dim={self.dim})"


@dataclass(frozen=True)
class EmpiricalNull:
    """Null model backed by unobserved-canary samples."""

    samples: np.ndarray

    def __post_init__(self):
        values = np.asarray(getattr(self.samples, "values", self.samples), dtype=np.float64)
        if values.size < 1:
            raise ValueError("empirical null needs at least one sample")
        object.__setattr__(self, "samples", np.sort(values))

    def log_fpr_upper(self, thresholds: np.ndarray, confidence: float) -> np.ndarray:
        """log Jeffreys upper bound on P(null sample > a), elementwise."""
        t = np.asarray(thresholds, dtype=np.float64)
        n = self.samples.size
        above = n - np.searchsorted(self.samples, t, side="right")
        return np.log(jeffreys_upper_bound(above, n, confidence))

    def describe(self) -> str:
        return f"empirical(n={self.samples.size})"


def jeffreys_upper_bound(failures, n: int, confidence: float):
    """One-sided Jeffreys upper confidence bound on a binomial proportion.

    Returns the ``confidence`` quantile of Beta(failures + 1/2,
    n - failures + 1/2), capped at 1. Accepts scalar or array ``failures``.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if not (0.0 < confidence < 1.0):
        raise ValueError(f"confidence must lie strictly in (0, 1), got {confidence}")
    k = np.asarray(failures)
    if np.any((k < 0) | (k > n)):
        raise ValueError("failures must lie in [0, n]")
    out = np.minimum(stats.beta.ppf(confidence, k + 0.5, n - k + 0.5), 1.0)
    return out if out.ndim else float(out)


def estimate_epsilon_final(
    samples: CosineSampleSet | np.ndarray, dim: int, delta: float
) -> float:
    """Epsilon estimate from final-model cosines against the N(0, 1/d) null.

    Returns math.inf when the fitted standard deviation is zero.
    """
    fitted = fit_gaussian_moments(samples)
    if fitted.std == 0.0:
        return math.inf
    return epsilon_for_delta(gaussian_null_approximation(dim), fitted, delta)


def estimate_epsilon_all_iterates(
    observed_max: CosineSampleSet | np.ndarray,
    unobserved_max: CosineSampleSet | np.ndarray,
    delta: float,
) -> float:
    """Epsilon estimate from max-over-rounds cosines.

    The null here is fitted to the unobserved-canary maxima rather than
    taken in closed form: the distribution of the max depends on the
    trajectory of partially trained models.
    """
    fitted_null = fit_gaussian_moments(unobserved_max)
    fitted_alt = fit_gaussian_moments(observed_max)
    if fitted_null.std == 0.0 or fitted_alt.std == 0.0:
        return math.inf
    return epsilon_for_delta(fitted_null, fitted_alt, delta)


def lower_bound_ceiling(n: int, delta: float, confidence: float) -> float:
    """Largest value the lower bound can report with n observed samples."""
    return float(np.log1p(-delta) - np.log(jeffreys_upper_bound(0, n, confidence)))


def epsilon_lower_bound(
    observed: CosineSampleSet | np.ndarray,
    null_model: ExactNull | EmpiricalNull,
    delta: float,
    confidence: float = 0.95,
) -> EpsilonLowerBound:
    """High-confidence epsilon lower bound from a thresholding attack.

    Scans every midpoint between sorted observed samples (plus +-infinity
    guards) as the attack threshold. At each threshold both directions of
    the (FPR, FNR) epsilon identity are evaluated with the false negative
    rate replaced by its one-sided Jeffreys upper bound; the best value is
    floored at 0 and clipped to the perfect-separation ceiling. The result
    is optimistic across thresholds in the usual multiple-testing sense.

    Args:
      observed: Cosine statistics of canaries that participated.
      null_model: ExactNull(dim) for closed-form false positive rates, or
        EmpiricalNull(samples) to bound them from unobserved canaries.
      delta: The delta at which epsilon is being bounded.
      confidence: One minus the allowed failure probability.

    Returns:
      The bound, its confidence level, and the threshold attaining it.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie strictly in (0, 1), got {delta}")
    if not (0.0 < confidence < 1.0):
        raise ValueError(f"confidence must lie strictly in (0, 1), got {confidence}")
    values = np.sort(np.asarray(getattr(observed, "values", observed), dtype=np.float64))
    n = values.size
    if n < 1:
        raise ValueError("need at least one observed sample")

    thresholds = np.concatenate(
        [[-np.inf], (values[:-1] + values[1:]) / 2.0, [np.inf]]
    )
    failures = np.searchsorted(values, thresholds, side="right")
    fnr_upper = np.atleast_1d(jeffreys_upper_bound(failures, n, confidence))

    if isinstance(null_model, EmpiricalNull):
        log_fpr = null_model.log_fpr_upper(thresholds, confidence)
    else:
        log_fpr = null_model.log_sf(thresholds)
    fpr = np.exp(log_fpr)

    with np.errstate(divide="ignore", invalid="ignore"):
        fnr_branch = np.log(1.0 - delta - fpr) - np.log(fnr_upper)
        fpr_branch = np.log(1.0 - delta - fnr_upper) - log_fpr
    # A nan branch means its numerator was nonpositive: that direction is
    # invalid at this threshold and contributes nothing.
    fnr_branch = np.where(np.isnan(fnr_branch), -np.inf, fnr_branch)
    fpr_branch = np.where(np.isnan(fpr_branch), -np.inf, fpr_branch)
    best = np.maximum(fnr_branch, fpr_branch)

    index = int(np.argmax(best))
    ceiling = lower_bound_ceiling(n, delta, confidence)
    value = float(np.clip(best[index], 0.0, ceiling))
    return EpsilonLowerBound(
        value=value, confidence=confidence, threshold_used=float(thresholds[index])
    )


def attack_rates(
    observed: CosineSampleSet | np.ndarray,
    null_model: ExactNull | EmpiricalNull,
    threshold: float,
    confidence: float = 0.95,
) -> AttackRates:
    """Error rates of the thresholding attack at one given threshold."""
    values = np.sort(np.asarray(getattr(observed, "values", observed), dtype=np.float64))
    n = values.size
    if n < 1:
        raise ValueError("need at least one observed sample")
    failures = int(np.searchsorted(values, threshold, side="right"))
    fnr_upper = float(jeffreys_upper_bound(failures, n, confidence))
    t = np.asarray([threshold])
    if isinstance(null_model, EmpiricalNull):
        fpr = float(np.exp(null_model.log_fpr_upper(t, confidence))[0])
    else:
        fpr = float(np.exp(null_model.log_sf(t))[0])
    return AttackRates(fpr=fpr, fnr_upper=fnr_upper, threshold=threshold)


def anderson_darling(samples: Sequence[float] | np.ndarray) -> NormalityDiagnostic:
    """Anderson-Darling normality diagnostic with estimated parameters.

    Standardizes by the sample mean and (ddof=1) standard deviation,
    applies the small-sample correction (1 + 4/n - 25/n^2), and compares
    the corrected statistic against the 1% and 15% significance thresholds.

    Raises:
      ValueError: With fewer than 8 samples.
      DegenerateInputError: If the sample standard deviation is zero.
    """
    x = np.asarray(getattr(samples, "values", samples), dtype=np.float64)
    n = x.size
    if n < 8:
        raise ValueError(f"need at least 8 samples, got {n}")
    std = np.std(x, ddof=1)
    if std == 0.0:
        raise DegenerateInputError("samples have zero standard deviation")
    z = stats.norm.cdf((np.sort(x) - np.mean(x)) / std)
    z = np.clip(z, 1e-300, 1.0 - 1e-16)
    i = np.arange(1, n + 1)
    a_sq = -n - np.mean((2 * i - 1) * (np.log(z) + np.log1p(-z[::-1])))
    corrected = float(a_sq * (1.0 + 4.0 / n - 25.0 / n**2))
    return NormalityDiagnostic(
        ad_statistic=corrected,
        reject_1pct=corrected > AD_REJECT_1PCT,
        reject_15pct=corrected > AD_REJECT_15PCT,
    )


def pool_runs(sets: Sequence[CosineSampleSet]) -> CosineSampleSet:
    """Concatenates cosine sets from independent runs into one set.

    Downstream estimation treats pooled samples identically to single-run
    samples. All sets must share dimension and label.
    """
    if not sets:
        raise ValueError("need at least one sample set")
    first = sets[0]
    for s in sets[1:]:
        if s.dim != first.dim:
            raise ValueError(f"dimension mismatch: {s.dim} != {first.dim}")
        if s.label != first.label:
            raise ValueError(f"label mismatch: {s.label!r} != {first.label!r}")
    values = np.concatenate([s.values for s in sets])
    return CosineSampleSet(dim=first.dim, values=values, label=first.label)
