"""Exact (epsilon, delta) trade-off between two Gaussian hypotheses.

Given test-statistic distributions P1 = N(mu1, sigma1^2) under one
hypothesis and P2 = N(mu2, sigma2^2) under the other, the log-likelihood
ratio log(p1(x)/p2(x)) is the quadratic a x^2 + b x + c with

    a = (1/sigma2^2 - 1/sigma1^2) / 2
    b = mu1/sigma1^2 - mu2/sigma2^2
    c = ((mu2/sigma2)^2 - (mu1/sigma1)^2) / 2 + log sigma2 - log sigma1.

The smallest delta at a given epsilon is the larger of the two directional
requirements  Pr[Z1 > eps] - e^eps Pr[-Z2 > eps]  (and the same with the
hypotheses swapped), where Z1, Z2 are the privacy loss variables. Each
event is a superlevel set of the quadratic, so its probability is a sum of
Gaussian tail masses over the intervals cut out by the quadratic's real
roots. All tail arithmetic is done in the log domain; the tail of
N(mu, sigma^2) beyond t is evaluated as Pr(X < mu; t, sigma^2), which keeps
the argument of log_ndtr negative where it is accurate.

epsilon at a given delta is recovered by a doubling bracket from [0, 1]
followed by bisection (delta is nonincreasing in epsilon).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from .errors import NoConvergenceError

# epsilon values are searched up to this cap; a run that cannot satisfy its
# delta target below the cap reports the +infinity sentinel instead of a
# silently clamped number.
EPSILON_CAP = 1e6

_BISECTION_STEPS = 200
_EPSILON_TOL = 1e-9


@dataclass(frozen=True)
class GaussianHypothesis:
    """A (mean, std) pair modeling a test statistic under one hypothesis.

    ``std`` may be zero only for fitted sample moments of constant data;
    such degenerate hypotheses are rejected by the trade-off computations
    and mapped to the saturated +infinity sentinel by callers.
    """

    mean: float
    std: float

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ValueError(f"mean must be finite, got {self.mean}")
        if not (math.isfinite(self.std) and self.std >= 0):
            raise ValueError(f"std must be finite and nonnegative, got {self.std}")


@dataclass(frozen=True)
class LogRatioQuadratic:
    """Coefficients of log(p1/p2) as a quadratic in the test statistic."""

    a: float
    b: float
    c: float

    @classmethod
    def from_hypotheses(
        cls, p1: GaussianHypothesis, p2: GaussianHypothesis
    ) -> "LogRatioQuadratic":
        v1 = p1.std**2
        v2 = p2.std**2
        a = 0.5 * (1.0 / v2 - 1.0 / v1)
        b = p1.mean / v1 - p2.mean / v2
        c = (
            0.5 * ((p2.mean / p2.std) ** 2 - (p1.mean / p1.std) ** 2)
            + math.log(p2.std)
            - math.log(p1.std)
        )
        return cls(a=a, b=b, c=c)

    def __call__(self, x: float) -> float:
        return (self.a * x + self.b) * x + self.c


@dataclass(frozen=True)
class PrivacyParams:
    """An (epsilon, delta) pair; epsilon may be the +infinity sentinel."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if not (self.epsilon >= 0):
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie strictly in (0, 1), got {self.delta}")

    @property
    def saturated(self) -> bool:
        return math.isinf(self.epsilon)


def _require_valid(p: GaussianHypothesis, name: str) -> None:
    if p.std <= 0:
        raise ValueError(f"{name} must have positive std, got {p.std}")


def _log1mexp(y: float) -> float:
    """log(1 - exp(y)) for y <= 0, stable over the whole range."""
    if y >= 0.0:
        if y == 0.0:
            return -math.inf
        raise ValueError(f"argument must be nonpositive, got {y}")
    if y > -math.log(2.0):
        return math.log(-math.expm1(y))
    return math.log1p(-math.exp(y))


def _log_diff(la: float, lb: float) -> float:
    """log(exp(la) - exp(lb)) for la >= lb."""
    if lb == -math.inf:
        return la
    if lb >= la:
        return -math.inf
    return la + _log1mexp(lb - la)


def _log_tail_above(t: float, mean: float, std: float) -> float:
    """log Pr[X > t] for X ~ N(mean, std^2)."""
    return log_ndtr((mean - t) / std)


def _log_tail_below(t: float, mean: float, std: float) -> float:
    """log Pr[X < t] for X ~ N(mean, std^2)."""
    return log_ndtr((t - mean) / std)


def _quadratic_roots(a: float, b: float, k: float, disc: float) -> tuple[float, float]:
    # Stable form: the root nearer the vertex comes from k/q rather than
    # from the cancellation-prone (-b + sqrt(disc)) / (2a).
    sq = math.sqrt(disc)
    if b >= 0.0:
        q = -0.5 * (b + sq)
    else:
        q = -0.5 * (b - sq)
    if q == 0.0:
        # Only reachable with b == 0 and k == 0: roots at the origin.
        return 0.0, 0.0
    r1 = q / a
    r2 = k / q
    return (r1, r2) if r1 <= r2 else (r2, r1)


def _log_prob_positive(a: float, b: float, k: float, mean: float, std: float) -> float:
    """log Pr[a X^2 + b X + k > 0] for X ~ N(mean, std^2).

    Enumerates every sign case of the leading coefficient and of the
    discriminant, including the degenerate linear case a == 0 that arises
    whenever the two hypotheses have equal variances.
    """
    if a == 0.0:
        if b == 0.0:
            return 0.0 if k > 0.0 else -math.inf
        t = -k / b
        if b > 0.0:
            return _log_tail_above(t, mean, std)
        return _log_tail_below(t, mean, std)

    disc = b * b - 4.0 * a * k
    if disc <= 0.0:
        # No sign change: the parabola keeps the sign of its leading
        # coefficient (up to a measure-zero touching point).
        return 0.0 if a > 0.0 else -math.inf

    lo, hi = _quadratic_roots(a, b, k, disc)
    z_lo = (lo - mean) / std
    z_hi = (hi - mean) / std
    if a > 0.0:
        # Mass outside the roots.
        return np.logaddexp(log_ndtr(z_lo), log_ndtr(-z_hi))
    # Mass between the roots; difference the smaller pair of tails.
    if z_lo + z_hi > 0.0:
        return _log_diff(log_ndtr(-z_lo), log_ndtr(-z_hi))
    return _log_diff(log_ndtr(z_hi), log_ndtr(z_lo))


def _log_delta_one_direction(
    p1: GaussianHypothesis, p2: GaussianHypothesis, epsilon: float
) -> float:
    """log of max(0, Pr[Z1 > eps] - e^eps Pr[-Z2 > eps]) for one direction.

    Both probabilities concern the same superlevel event of the log ratio,
    evaluated under P1 and P2 respectively.
    """
    quad = LogRatioQuadratic.from_hypotheses(p1, p2)
    k = quad.c - epsilon
    lp1 = _log_prob_positive(quad.a, quad.b, k, p1.mean, p1.std)
    if lp1 == -math.inf:
        return -math.inf
    lp2 = _log_prob_positive(quad.a, quad.b, k, p2.mean, p2.std)
    gap = epsilon + lp2 - lp1
    if gap >= 0.0:
        # e^eps Pr[-Z2 > eps] >= Pr[Z1 > eps]: this direction is vacuous.
        return -math.inf
    return lp1 + _log1mexp(gap)


def delta_for_epsilon(
    p1: GaussianHypothesis, p2: GaussianHypothesis, epsilon: float
) -> float:
    """Smallest delta such that (epsilon, delta)-indistinguishability holds.

    Args:
      p1: Gaussian test-statistic distribution under the first hypothesis.
      p2: Gaussian test-statistic distribution under the second hypothesis.
      epsilon: Nonnegative privacy parameter.

    Returns:
      The exact delta in [0, 1], maximized over both hypothesis orderings.

    Raises:
      ValueError: If either hypothesis is degenerate or epsilon < 0.
    """
    _require_valid(p1, "p1")
    _require_valid(p2, "p2")
    if not (math.isfinite(epsilon) and epsilon >= 0.0):
        raise ValueError(f"epsilon must be finite and nonnegative, got {epsilon}")
    log_delta = max(
        _log_delta_one_direction(p1, p2, epsilon),
        _log_delta_one_direction(p2, p1, epsilon),
    )
    return float(np.exp(log_delta))


def epsilon_for_delta(
    p1: GaussianHypothesis,
    p2: GaussianHypothesis,
    delta: float,
    cap: float = EPSILON_CAP,
) -> float:
    """Smallest epsilon >= 0 with delta_for_epsilon(p1, p2, eps) <= delta.

    Brackets by doubling from [0, 1], then bisects; delta_for_epsilon is
    nonincreasing in epsilon. Returns math.inf when no epsilon up to ``cap``
    satisfies the target.

    Args:
      p1: Gaussian test-statistic distribution under the first hypothesis.
      p2: Gaussian test-statistic distribution under the second hypothesis.
      delta: Target delta, strictly inside (0, 1).
      cap: Largest epsilon considered before reporting saturation.

    Returns:
      The epsilon value, or math.inf when the cap is exceeded.
    """
    _require_valid(p1, "p1")
    _require_valid(p2, "p2")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie strictly in (0, 1), got {delta}")

    if delta_for_epsilon(p1, p2, 0.0) <= delta:
        return 0.0

    lo = 0.0
    hi = 1.0
    while delta_for_epsilon(p1, p2, hi) > delta:
        if hi >= cap:
            return math.inf
        lo = hi
        hi = min(2.0 * hi, cap)

    for _ in range(_BISECTION_STEPS):
        if hi - lo <= _EPSILON_TOL:
            break
        mid = 0.5 * (lo + hi)
        if delta_for_epsilon(p1, p2, mid) <= delta:
            hi = mid
        else:
            lo = mid
    return hi


def calibrate_gaussian_sigma(
    epsilon: float, delta: float, tol: float = 1e-4, max_iter: int = 200
) -> float:
    """Noise scale of the unit-sensitivity Gaussian mechanism for (eps, delta).

    Finds sigma such that epsilon_for_delta(N(0, sigma^2), N(1, sigma^2),
    delta) equals ``epsilon`` to within ``tol``, by bisection on sigma.

    Raises:
      NoConvergenceError: If the target is not bracketed or matched within
        the iteration budget.
    """
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise ValueError(f"epsilon must be positive and finite, got {epsilon}")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie strictly in (0, 1), got {delta}")

    def eps_at(sigma: float) -> float:
        return epsilon_for_delta(
            GaussianHypothesis(0.0, sigma), GaussianHypothesis(1.0, sigma), delta
        )

    # epsilon is decreasing in sigma: expand until the target is bracketed.
    lo, hi = 0.5, 1.0
    for _ in range(max_iter):
        if eps_at(lo) >= epsilon:
            break
        lo /= 2.0
    else:
        raise NoConvergenceError(f"could not bracket sigma for epsilon={epsilon}")
    for _ in range(max_iter):
        if eps_at(hi) <= epsilon:
            break
        hi *= 2.0
    else:
        raise NoConvergenceError(f"could not bracket sigma for epsilon={epsilon}")

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        value = eps_at(mid)
        if abs(value - epsilon) <= tol:
            return mid
        if value > epsilon:
            lo = mid
        else:
            hi = mid
    raise NoConvergenceError(
        f"sigma calibration did not converge for epsilon={epsilon}, delta={delta}"
    )
