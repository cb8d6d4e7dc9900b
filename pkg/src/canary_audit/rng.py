"""Reproducible random substreams derived from a single master seed.

Every source of randomness in the toolkit (canary vectors, client targets,
per-round noise, schedule shuffling) is drawn from an independent
counter-based Philox stream keyed by ``(master_seed, purpose, *indices)``.
Any individual object can therefore be regenerated on demand without
replaying the rest of the experiment, and changing e.g. the canary draws
cannot perturb the client or noise draws.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Purpose tags for substream derivation. Values are part of the
# reproducibility contract: changing them changes every derived stream.
CANARY_OBSERVED = 1
CANARY_UNOBSERVED = 2
CLIENT_TARGET = 3
ROUND_NOISE = 4
SCHEDULE = 5
MECHANISM_NOISE = 6


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Returns an independent generator keyed by (master_seed, *path)."""
    entropy = [int(master_seed) & _MASK64, *(int(p) & _MASK64 for p in path)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def unit_vector(gen: np.random.Generator, dim: int, fast: bool = False) -> np.ndarray:
    """Samples one point uniformly from the unit sphere in ``dim`` dimensions.

    With ``fast=True`` the underlying normal draws are generated in float32
    (roughly 1.4x faster); normalization always happens in float64 so the
    result has unit norm to full double precision either way.
    """
    while True:
        if fast:
            v = gen.standard_normal(dim, dtype=np.float32).astype(np.float64)
        else:
            v = gen.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm > 0.0:
            return v / norm


def unit_rows(
    gen: np.random.Generator, n: int, dim: int, fast: bool = False
) -> np.ndarray:
    """Samples ``n`` unit-sphere points as rows of an (n, dim) float64 array."""
    if fast:
        rows = gen.standard_normal((n, dim), dtype=np.float32).astype(np.float64)
    else:
        rows = gen.standard_normal((n, dim))
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    bad = np.flatnonzero(norms[:, 0] == 0.0)
    for i in bad:
        rows[i] = unit_vector(gen, dim, fast=fast)
        norms[i, 0] = 1.0
    return rows / norms


def canary_vector(master_seed: int, dim: int, index: int, observed: bool = True) -> np.ndarray:
    """Regenerates the fixed unit-sphere update of one canary client."""
    purpose = CANARY_OBSERVED if observed else CANARY_UNOBSERVED
    return unit_vector(substream(master_seed, purpose, index), dim, fast=True)


def client_target(master_seed: int, dim: int, client_id: int) -> np.ndarray:
    """Regenerates a client's fixed optimization target, drawn N(0, I/dim)."""
    gen = substream(master_seed, CLIENT_TARGET, client_id)
    draws = gen.standard_normal(dim, dtype=np.float32).astype(np.float64)
    return draws / np.sqrt(dim)
