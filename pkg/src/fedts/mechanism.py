"""Server-side subsampled Gaussian mechanism with per-region weighted averaging."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DpParams:
    """Subsampling probability ``q``, noise ratio ``z``, clip threshold ``S`` and region count ``P``.

    ``clip=math.inf`` disables clipping.
    """

    q: float = 1.0
    z: float = 0.0
    clip: float = math.inf
    n_regions: int = 1

    def __post_init__(self):
        if not 0 < self.q <= 1:
            raise ValueError(f"q must lie in (0, 1], got {self.q}")
        if self.z < 0:
            raise ValueError(f"z must be >= 0, got {self.z}")
        if not self.clip > 0:
            raise ValueError(f"clip threshold must be > 0, got {self.clip}")
        if self.z > 0 and math.isinf(self.clip):
            raise ValueError("noise needs a finite clip threshold")
        if self.n_regions < 1:
            raise ValueError("need at least one sub-region")

    @property
    def per_vector_bound(self) -> float:
        return self.clip / math.sqrt(self.n_regions)


@dataclass(frozen=True)
class Broadcast:
    per_region: np.ndarray
    round: int

    @property
    def n_regions(self) -> int:
        return self.per_region.shape[0]

    def to_dict(self) -> dict:
        p, m = self.per_region.shape
        return {"round": self.round, "P": p, "M": m, "data": self.per_region.ravel().tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Broadcast":
        return cls(np.asarray(d["data"], dtype=float).reshape(d["P"], d["M"]), d["round"])


@dataclass(frozen=True)
class ClipStats:
    clipped: np.ndarray
    n_received: int

    @property
    def fraction(self) -> float:
        return len(self.clipped) / self.n_received if self.n_received else 0.0


def subsample(n_agents: int, q: float, rng: np.random.Generator) -> np.ndarray:
    """Include each agent independently with probability ``q`` (sorted ids, maybe empty)."""
    if not 0 < q <= 1:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    if q == 1:
        return np.arange(n_agents)
    return np.flatnonzero(rng.random(n_agents) < q)


def clip(omega, clip_threshold: float, n_regions: int = 1) -> np.ndarray:
    """Scale ``omega`` down so that its norm is at most ``S / sqrt(P)``."""
    omega = np.asarray(omega, dtype=float)
    bound = clip_threshold / math.sqrt(n_regions)
    norm = np.linalg.norm(omega)
    return omega / max(1.0, norm / bound)


def noise_std(params: DpParams, phi_max: float) -> float:
    if params.q <= 0:
        raise ValueError("q must be positive")
    if params.z == 0:
        return 0.0
    return params.z * phi_max * params.clip / params.q


def clip_stats(vectors: np.ndarray, params: DpParams) -> ClipStats:
    norms = np.linalg.norm(vectors, axis=1)
    return ClipStats(np.flatnonzero(norms > params.per_vector_bound), len(vectors))


def aggregate(vectors: np.ndarray, selected: np.ndarray, weights: np.ndarray,
              params: DpParams, rng: np.random.Generator | None = None,
              round_index: int = 0) -> tuple[Broadcast, ClipStats]:
    """One invocation of the mechanism.

    Each region's output is ``(1/q) * sum_{n in selected} w[i, n] * clip(omega_n)``
    plus ``N(0, (z * max(w) * S / q)^2)`` per coordinate. Noise for region ``i``
    comes from the ``i``-th child stream spawned from ``rng``.
    """
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    n_agents, m = vectors.shape
    if weights.shape != (params.n_regions, n_agents):
        raise ValueError(
            f"weight matrix has shape {weights.shape}, expected {(params.n_regions, n_agents)}")
    selected = np.sort(np.asarray(selected, dtype=int))

    stats = clip_stats(vectors, params)
    picked = vectors[selected]
    if not math.isinf(params.clip):
        norms = np.linalg.norm(picked, axis=1)
        picked = picked / np.maximum(1.0, norms / params.per_vector_bound)[:, None]
    out = (weights[:, selected] @ picked) / params.q if len(selected) else np.zeros(
        (params.n_regions, m))

    std = noise_std(params, float(weights.max()))
    if std > 0:
        if rng is None:
            raise ValueError("noise requested but no random generator supplied")
        for i, child in enumerate(rng.spawn(params.n_regions)):
            out[i] += std * child.standard_normal(m)
    return Broadcast(out, round_index), stats
