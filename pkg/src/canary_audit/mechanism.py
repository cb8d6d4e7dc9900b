"""One-shot privacy estimation for a single Gaussian vector-sum release.

The mechanism releases rho = sum_j x_j + sum_i c_i + sigma Z once, where
the c_i are k unit-sphere canaries. The cosine of each canary with the
release is a test statistic whose distribution under non-participation is
the exact sphere-cosine null, approximately N(0, 1/d). Fitting a Gaussian
to the k observed cosines by 1/k-normalized moments and comparing it to
the null through the exact two-Gaussian trade-off yields the epsilon
estimate.

Canaries are regenerated on demand from per-canary substreams, so the
audit needs O(d) live memory rather than O(k d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng
from .errors import DegenerateReleaseError
from .sphere import gaussian_null_approximation
from .tradeoff import GaussianHypothesis, epsilon_for_delta

_NORM_TOL = 1e-9


@dataclass(frozen=True)
class CosineSampleSet:
    """Labeled collection of canary cosine statistics."""

    dim: int
    values: np.ndarray
    label: str

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"dim must be at least 2, got {self.dim}")
        if self.label not in ("observed", "unobserved"):
            raise ValueError(f"label must be 'observed' or 'unobserved', got {self.label!r}")
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if values.size and np.max(np.abs(values)) > 1.0 + _NORM_TOL:
            raise ValueError("cosine values must lie in [-1, 1]")
        object.__setattr__(self, "values", np.clip(values, -1.0, 1.0))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class GaussianSumInstance:
    """Full description of one Gaussian vector-sum audit.

    Attributes:
      dim: Dimension of the released vector, at least 2.
      noise_std: Standard deviation of the added spherical Gaussian noise;
        zero selects the clipping-only regime.
      canary_count: Number of unit-sphere canaries added to the sum.
      delta: Target delta for the epsilon estimate.
      seed: Master seed; all randomness is derived from it.
      data_vectors: Optional non-canary data, each with norm at most 1.
    """

    dim: int
    noise_std: float
    canary_count: int
    delta: float
    seed: int
    data_vectors: Sequence[np.ndarray] = field(default_factory=tuple)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"dim must be at least 2, got {self.dim}")
        if not (self.noise_std >= 0.0 and math.isfinite(self.noise_std)):
            raise ValueError(f"noise_std must be finite and nonnegative, got {self.noise_std}")
        if self.canary_count < 2:
            raise ValueError(
                f"canary_count must be at least 2 for a sample variance, got {self.canary_count}"
            )
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie strictly in (0, 1), got {self.delta}")
        vectors = tuple(np.asarray(v, dtype=np.float64) for v in self.data_vectors)
        for j, v in enumerate(vectors):
            if v.shape != (self.dim,):
                raise ValueError(f"data vector {j} has shape {v.shape}, expected ({self.dim},)")
            if np.linalg.norm(v) > 1.0 + _NORM_TOL:
                raise ValueError(f"data vector {j} has norm above 1")
        object.__setattr__(self, "data_vectors", vectors)


@dataclass(frozen=True)
class MechanismAuditResult:
    epsilon_estimate: float
    samples: CosineSampleSet
    fitted: GaussianHypothesis

    @property
    def saturated(self) -> bool:
        return math.isinf(self.epsilon_estimate)


def fit_gaussian_moments(samples: CosineSampleSet | np.ndarray) -> GaussianHypothesis:
    """Fits (mean, std) by 1/k-normalized sample moments.

    The second moment is normalized by the sample count k, not k - 1, to
    match the estimator the fitted-Gaussian epsilon is defined against.

    Raises:
      ValueError: With fewer than 2 samples.
    """
    values = np.asarray(getattr(samples, "values", samples), dtype=np.float64)
    if values.size < 2:
        raise ValueError(f"need at least 2 samples, got {values.size}")
    mean = float(np.mean(values))
    var = float(np.mean((values - mean) ** 2))
    return GaussianHypothesis(mean=mean, std=math.sqrt(var))


def _release_base(instance: GaussianSumInstance) -> np.ndarray:
    """Accumulates data plus canaries in one O(dim)-memory pass."""
    base = np.zeros(instance.dim)
    for v in instance.data_vectors:
        base += v
    for i in range(instance.canary_count):
        base += rng.canary_vector(instance.seed, instance.dim, i)
    return base


def _canary_cosines(instance: GaussianSumInstance, released: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(released)
    if norm == 0.0:
        raise DegenerateReleaseError("released vector is exactly zero")
    g = np.empty(instance.canary_count)
    for i in range(instance.canary_count):
        g[i] = rng.canary_vector(instance.seed, instance.dim, i) @ released / norm
    return g


def _estimate(instance: GaussianSumInstance, cosines: np.ndarray) -> MechanismAuditResult:
    samples = CosineSampleSet(dim=instance.dim, values=cosines, label="observed")
    fitted = fit_gaussian_moments(samples)
    if fitted.std == 0.0:
        epsilon = math.inf
    else:
        epsilon = epsilon_for_delta(
            gaussian_null_approximation(instance.dim), fitted, instance.delta
        )
    return MechanismAuditResult(epsilon_estimate=epsilon, samples=samples, fitted=fitted)


def run_gaussian_mechanism_audit(instance: GaussianSumInstance) -> MechanismAuditResult:
    """Runs the one-shot audit of a single Gaussian vector-sum release.

    Returns:
      The epsilon estimate (math.inf with a zero fitted variance), the
      observed cosine samples, and the fitted Gaussian.

    Raises:
      DegenerateReleaseError: If the released vector is exactly zero.
    """
    noise = rng.substream(instance.seed, rng.MECHANISM_NOISE).standard_normal(instance.dim)
    released = _release_base(instance) + instance.noise_std * noise
    return _estimate(instance, _canary_cosines(instance, released))


def noise_sweep_audit(
    instance: GaussianSumInstance, noise_stds: Sequence[float]
) -> list[MechanismAuditResult]:
    """Audits the same release randomness at several hypothetical noise scales.

    All results share the canary draws and the standard noise draws of
    ``instance.seed`` (``instance.noise_std`` itself is ignored), which makes
    them a paired sample across noise levels: useful for monotonicity
    studies and for sweeping a calibration table in one pass. Statistically
    each entry is distributed exactly like an independent
    run_gaussian_mechanism_audit at that noise scale.
    """
    stds = [float(s) for s in noise_stds]
    if any(not (s >= 0.0 and math.isfinite(s)) for s in stds):
        raise ValueError("noise levels must be finite and nonnegative")
    base = _release_base(instance)
    noise = rng.substream(instance.seed, rng.MECHANISM_NOISE).standard_normal(instance.dim)

    u = np.empty(instance.canary_count)
    v = np.empty(instance.canary_count)
    for i in range(instance.canary_count):
        c = rng.canary_vector(instance.seed, instance.dim, i)
        u[i] = c @ base
        v[i] = c @ noise
    base_sq = base @ base
    cross = base @ noise
    noise_sq = noise @ noise

    results = []
    for s in stds:
        norm_sq = base_sq + 2.0 * s * cross + s * s * noise_sq
        if norm_sq <= 0.0:
            raise DegenerateReleaseError("released vector is exactly zero")
        cosines = (u + s * v) / math.sqrt(norm_sq)
        results.append(_estimate(instance, cosines))
    return results
