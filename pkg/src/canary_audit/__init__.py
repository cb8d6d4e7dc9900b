"""One-shot empirical privacy estimation with random sphere canaries.

The toolkit simulates DP federated averaging with canary client updates
sampled uniformly from the unit sphere, extracts canary/model cosine
statistics, and converts them into epsilon estimates and high-confidence
epsilon lower bounds through an exact two-Gaussian trade-off computation.
"""

from .errors import (
    AbortedRunError,
    AuditError,
    DegenerateInputError,
    DegenerateReleaseError,
    NoConvergenceError,
)
from .estimators import (
    AttackRates,
    EmpiricalNull,
    EpsilonLowerBound,
    ExactNull,
    NormalityDiagnostic,
    anderson_darling,
    attack_rates,
    epsilon_lower_bound,
    estimate_epsilon_all_iterates,
    estimate_epsilon_final,
    jeffreys_upper_bound,
    lower_bound_ceiling,
    pool_runs,
)
from .mechanism import (
    CosineSampleSet,
    GaussianSumInstance,
    MechanismAuditResult,
    fit_gaussian_moments,
    noise_sweep_audit,
    run_gaussian_mechanism_audit,
)
from .report import AuditReport, read_cosine_csv, read_report, write_cosine_csv, write_report
from .simulator import (
    FederatedConfig,
    ModelState,
    ParticipationSchedule,
    RoundTrace,
    TrainingResult,
    build_schedule,
    client_update,
    clip_update,
    final_cosines,
    max_over_rounds,
    mean_point_loss,
    run_training,
)
from .sphere import (
    NullCosineDistribution,
    gaussian_null_approximation,
    null_cosine_cdf,
    null_cosine_pdf,
    sample_unit_sphere,
)
from .tradeoff import (
    EPSILON_CAP,
    GaussianHypothesis,
    LogRatioQuadratic,
    PrivacyParams,
    calibrate_gaussian_sigma,
    delta_for_epsilon,
    epsilon_for_delta,
)

__version__ = "0.1.0"
