"""DP federated averaging simulation with canary client injection.

Each round, participating real clients contribute norm-clipped updates and
each scheduled observed canary contributes its fixed unit vector projected
exactly onto the clipping norm. The aggregate plus spherical Gaussian
noise (std = noise_multiplier * clip_norm) is averaged over the round's
participant count and applied through server momentum and learning rate.
Unobserved canaries never enter an aggregate, but their per-round cosines
with the noised average delta are recorded when all-round tracing is
enabled, providing an empirical null for the max-over-rounds statistic.

Real clients follow a single pass: each participates in exactly one round.
Observed canaries repeat ``repetitions`` times at evenly spaced rounds,
with offsets rotated round-robin so the per-round canary load stays
balanced. The synthetic "mean-point" client task gives every client a
fixed random target drawn N(0, I/dim) from its own substream; its update
is one unit-rate gradient step toward that target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

from . import rng
from .errors import AbortedRunError
from .mechanism import CosineSampleSet

MEAN_POINT_TASK = "mean-point"
_KNOWN_TASKS = (MEAN_POINT_TASK,)


@dataclass(frozen=True)
class FederatedConfig:
    """Full description of one simulated DP-FedAvg training run.

    ``delta`` defaults to total_clients ** -1.1 when left unset.
    """

    dim: int
    total_clients: int
    clients_per_round: int
    rounds: int
    noise_multiplier: float
    clip_norm: float
    server_lr: float
    server_momentum: float
    observed_canaries: int
    unobserved_canaries: int
    repetitions: int
    seed: int
    delta: float | None = None
    task: str = MEAN_POINT_TASK

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"dim must be at least 2, got {self.dim}")
        if self.total_clients < 0:
            raise ValueError("total_clients must be nonnegative")
        if self.clients_per_round < 0:
            raise ValueError("clients_per_round must be nonnegative")
        if self.clients_per_round > max(self.total_clients, 0) and self.total_clients > 0:
            raise ValueError("clients_per_round cannot exceed total_clients")
        if self.rounds < 1:
            raise ValueError("rounds must be positive")
        if not (self.noise_multiplier >= 0.0 and math.isfinite(self.noise_multiplier)):
            raise ValueError("noise_multiplier must be finite and nonnegative")
        if not (self.clip_norm > 0.0 and math.isfinite(self.clip_norm)):
            raise ValueError("clip_norm must be positive")
        if not (self.server_lr > 0.0 and math.isfinite(self.server_lr)):
            raise ValueError("server_lr must be positive")
        if not (0.0 <= self.server_momentum < 1.0):
            raise ValueError("server_momentum must lie in [0, 1)")
        if self.observed_canaries < 0 or self.unobserved_canaries < 0:
            raise ValueError("canary counts must be nonnegative")
        if self.repetitions < 1:
            raise ValueError("repetitions must be positive")
        if self.repetitions > self.rounds:
            raise ValueError(
                f"repetitions ({self.repetitions}) cannot exceed rounds ({self.rounds})"
            )
        if self.delta is not None and not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie strictly in (0, 1), got {self.delta}")
        if self.task not in _KNOWN_TASKS:
            raise ValueError(f"unknown task {self.task!r}; known: {_KNOWN_TASKS}")

    @property
    def resolved_delta(self) -> float:
        if self.delta is not None:
            return self.delta
        if self.total_clients < 2:
            raise ValueError("delta must be set explicitly with fewer than 2 clients")
        return float(self.total_clients) ** -1.1

    def resolved(self) -> "FederatedConfig":
        """A copy with the delta default materialized."""
        return replace(self, delta=self.resolved_delta)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class ParticipationSchedule:
    """Assignment of real clients and observed canaries to rounds."""

    clients_by_round: tuple[np.ndarray, ...]
    canaries_by_round: tuple[np.ndarray, ...]

    @property
    def rounds(self) -> int:
        return len(self.clients_by_round)


@dataclass
class ModelState:
    params: np.ndarray
    momentum_buffer: np.ndarray
    round: int


@dataclass(frozen=True)
class RoundTrace:
    """Per-round canary cosines with the noised average delta."""

    round: int
    observed_cosines: np.ndarray
    unobserved_cosines: np.ndarray
    dim: int
    degenerate: bool = False


@dataclass(frozen=True)
class TrainingResult:
    final_model: ModelState
    observed_final_cosines: CosineSampleSet
    round_traces: list[RoundTrace] = field(default_factory=list)


def build_schedule(config: FederatedConfig) -> ParticipationSchedule:
    """Deterministically assigns clients and canaries to rounds.

    Real clients are shuffled by the schedule substream and dealt into
    near-equal consecutive rounds (single pass). Observed canary i joins
    rounds offset + j * (rounds // repetitions) with offset = i mod the
    spacing, for j = 0..repetitions-1.

    Raises:
      ValueError: If clients_per_round * rounds cannot fit every client.
    """
    m, t = config.total_clients, config.rounds
    if m > 0 and config.clients_per_round * t < m:
        raise ValueError(
            f"single pass infeasible: {config.clients_per_round} clients/round "
            f"* {t} rounds < {m} clients"
        )
    if m > 0:
        order = rng.substream(config.seed, rng.SCHEDULE).permutation(m)
        clients = tuple(np.sort(chunk) for chunk in np.array_split(order, t))
    else:
        clients = tuple(np.empty(0, dtype=np.int64) for _ in range(t))

    spacing = t // config.repetitions
    per_round: list[list[int]] = [[] for _ in range(t)]
    for i in range(config.observed_canaries):
        offset = i % spacing
        for j in range(config.repetitions):
            per_round[offset + j * spacing].append(i)
    canaries = tuple(np.asarray(ids, dtype=np.int64) for ids in per_round)
    return ParticipationSchedule(clients_by_round=clients, canaries_by_round=canaries)


def client_update(
    task: str, seed: int, dim: int, client_id: int, model: np.ndarray
) -> np.ndarray:
    """Raw (pre-clipping) update of one client at the current model.

    The mean-point task takes one unit-rate gradient step on
    0.5 * ||model - w||^2 toward the client's fixed target w.
    """
    if task not in _KNOWN_TASKS:
        raise ValueError(f"unknown task {task!r}; known: {_KNOWN_TASKS}")
    if model.shape != (dim,):
        raise ValueError(f"model has shape {model.shape}, expected ({dim},)")
    return rng.client_target(seed, dim, client_id) - model


def clip_update(update: np.ndarray, clip_norm: float) -> np.ndarray:
    """Clip(x; S) = x * min(1, S / ||x||)."""
    norm = np.linalg.norm(update)
    if norm <= clip_norm:
        return update
    return update * (clip_norm / norm)


def _canary_matrix(config: FederatedConfig, observed: bool) -> np.ndarray:
    count = config.observed_canaries if observed else config.unobserved_canaries
    out = np.empty((count, config.dim))
    for i in range(count):
        out[i] = rng.canary_vector(config.seed, config.dim, i, observed=observed)
    return out


def mean_point_loss(config: FederatedConfig, params: np.ndarray) -> float:
    """Population training loss of the mean-point task at given parameters."""
    total = 0.0
    for j in range(config.total_clients):
        diff = params - rng.client_target(config.seed, config.dim, j)
        total += 0.5 * float(diff @ diff)
    return total / config.total_clients


def run_training(config: FederatedConfig, trace_all_rounds: bool = False) -> TrainingResult:
    """Simulates DP-FedAvg with canary injection.

    Canary vectors are cached in memory for the duration of the run
    (observed always; unobserved only when tracing), so peak memory is
    O((observed + unobserved) * dim) plus O(dim) for the model state.

    Raises:
      AbortedRunError: If model parameters become non-finite; carries the
        offending round index.
    """
    schedule = build_schedule(config)
    observed = _canary_matrix(config, observed=True)
    unobserved = _canary_matrix(config, observed=False) if trace_all_rounds else None

    params = np.zeros(config.dim)
    buffer = np.zeros(config.dim)
    noise_std = config.noise_multiplier * config.clip_norm
    s = config.clip_norm
    traces: list[RoundTrace] = []

    for t in range(config.rounds):
        clients = schedule.clients_by_round[t]
        canaries = schedule.canaries_by_round[t]
        n = clients.size + canaries.size
        if n == 0:
            # No participants: nothing is aggregated or released this round.
            if trace_all_rounds:
                traces.append(
                    RoundTrace(
                        round=t,
                        observed_cosines=np.zeros(config.observed_canaries),
                        unobserved_cosines=np.zeros(config.unobserved_canaries),
                        dim=config.dim,
                        degenerate=True,
                    )
                )
            continue

        rho = np.zeros(config.dim)
        for j in clients:
            rho += clip_update(
                client_update(config.task, config.seed, config.dim, int(j), params), s
            )
        if canaries.size:
            rho += s * observed[canaries].sum(axis=0)

        noise = rng.substream(config.seed, rng.ROUND_NOISE, t).standard_normal(config.dim)
        rho_bar = (rho + noise_std * noise) / n

        if trace_all_rounds:
            norm = np.linalg.norm(rho_bar)
            if norm == 0.0:
                traces.append(
                    RoundTrace(
                        round=t,
                        observed_cosines=np.zeros(config.observed_canaries),
                        unobserved_cosines=np.zeros(config.unobserved_canaries),
                        dim=config.dim,
                        degenerate=True,
                    )
                )
            else:
                traces.append(
                    RoundTrace(
                        round=t,
                        observed_cosines=observed @ rho_bar / norm,
                        unobserved_cosines=unobserved @ rho_bar / norm,
                        dim=config.dim,
                    )
                )

        buffer = config.server_momentum * buffer + rho_bar
        params = params + config.server_lr * buffer
        if not np.all(np.isfinite(params)):
            raise AbortedRunError(t)

    final_norm = np.linalg.norm(params)
    if final_norm == 0.0:
        cosines = np.zeros(config.observed_canaries)
    else:
        cosines = observed @ params / final_norm
    return TrainingResult(
        final_model=ModelState(params=params, momentum_buffer=buffer, round=config.rounds),
        observed_final_cosines=CosineSampleSet(
            dim=config.dim, values=cosines, label="observed"
        ),
        round_traces=traces,
    )


def final_cosines(
    config: FederatedConfig, params: np.ndarray, observed: bool
) -> CosineSampleSet:
    """Cosines of (regenerated) canaries with a final model, computed post hoc."""
    count = config.observed_canaries if observed else config.unobserved_canaries
    norm = np.linalg.norm(params)
    values = np.zeros(count)
    if norm > 0.0:
        for i in range(count):
            values[i] = (
                rng.canary_vector(config.seed, config.dim, i, observed=observed)
                @ params
                / norm
            )
    return CosineSampleSet(
        dim=config.dim, values=values, label="observed" if observed else "unobserved"
    )


def max_over_rounds(
    traces: Sequence[RoundTrace],
) -> tuple[CosineSampleSet, CosineSampleSet]:
    """Per-canary maximum of per-round cosines, observed and unobserved.

    Raises:
      ValueError: On empty traces or inconsistent per-round shapes.
    """
    if not traces:
        raise ValueError("need at least one round trace")
    obs_shape = traces[0].observed_cosines.shape
    unobs_shape = traces[0].unobserved_cosines.shape
    dim = traces[0].dim
    for tr in traces[1:]:
        if (
            tr.observed_cosines.shape != obs_shape
            or tr.unobserved_cosines.shape != unobs_shape
            or tr.dim != dim
        ):
            raise ValueError("round traces have inconsistent canary counts")
    observed_max = np.max([tr.observed_cosines for tr in traces], axis=0)
    unobserved_max = np.max([tr.unobserved_cosines for tr in traces], axis=0)
    return (
        CosineSampleSet(dim=dim, values=observed_max, label="observed"),
        CosineSampleSet(dim=dim, values=unobserved_max, label="unobserved"),
    )


def trace_rows(
    traces: Iterable[RoundTrace],
    final_observed: CosineSampleSet | None = None,
    final_unobserved: CosineSampleSet | None = None,
) -> Iterable[tuple[int, int, str, float]]:
    """Yields (round, canary_id, label, cosine) rows for the trace CSV.

    Final-model cosines are emitted with the round sentinel -1.
    """
    for tr in traces:
        for i, g in enumerate(tr.observed_cosines):
            yield tr.round, i, "observed", float(g)
        for i, g in enumerate(tr.unobserved_cosines):
            yield tr.round, i, "unobserved", float(g)
    if final_observed is not None:
        for i, g in enumerate(final_observed.values):
            yield -1, i, "observed", float(g)
    if final_unobserved is not None:
        for i, g in enumerate(final_unobserved.values):
            yield -1, i, "unobserved", float(g)
