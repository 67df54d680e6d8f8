"""Per-agent objective functions on a discrete grid."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .surrogate import JITTER, KernelSpec, stable_cholesky

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObjectiveSuite:
    """Objective values for every agent: ``values[n, grid_id]``."""

    values: np.ndarray
    base: np.ndarray | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_agents(self) -> int:
        return self.values.shape[0]

    @property
    def grid_size(self) -> int:
        return self.values.shape[1]

    def optimum(self, agent: int) -> float:
        return float(self.values[agent].max())


def _gp_sample(points: np.ndarray, lengthscale: float, rng: np.random.Generator) -> np.ndarray:
    kernel = KernelSpec(lengthscale, 1.0)
    chol = stable_cholesky(kernel(points, points), JITTER)
    return chol @ rng.standard_normal(points.shape[0])


def _normalize(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    return (values - lo) / (hi - lo)


def _check_grid(points) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] < 1:
        raise ValueError("empty grid")
    if points.shape[0] > 1 and np.all(points == points[0]):
        raise ValueError("degenerate grid: all points identical")
    return points


def gen_synthetic(points, n_agents: int = 200, lengthscale: float = 0.03, d: float = 0.02,
                  seed: int = 0) -> ObjectiveSuite:
    """One normalized GP sample shared by all agents, then +-d per agent and point."""
    points = _check_grid(points)
    rng = np.random.default_rng(seed)
    base = _normalize(_gp_sample(points, lengthscale, rng))
    signs = rng.choice(np.array([-1.0, 1.0]), size=(n_agents, points.shape[0]))
    values = base[None, :] + d * signs
    return ObjectiveSuite(values, base, seed,
                          {"kind": "synthetic", "lengthscale": lengthscale, "d": d})


def gen_heterogeneous(points, n_agents: int = 50, alpha: float = 0.7, lengthscale: float = 0.03,
                      seed: int = 0) -> ObjectiveSuite:
    """Agent ``i`` gets ``alpha * f_i + (1 - alpha) * f_base`` with independent normalized GP samples."""
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    points = _check_grid(points)
    rng = np.random.default_rng(seed)
    base = _normalize(_gp_sample(points, lengthscale, rng))
    kernel = KernelSpec(lengthscale, 1.0)
    chol = stable_cholesky(kernel(points, points), JITTER)
    indep = np.array([_normalize(chol @ rng.standard_normal(points.shape[0]))
                      for _ in range(n_agents)])
    values = alpha * indep + (1.0 - alpha) * base[None, :]
    return ObjectiveSuite(values, base, seed,
                          {"kind": "heterogeneous", "lengthscale": lengthscale, "alpha": alpha})


def evaluate(suite: ObjectiveSuite, agent: int, grid_id: int, noise_var: float,
             rng: np.random.Generator) -> tuple[float, float]:
    """Noisy observation ``y = f^n(x) + N(0, noise_var)`` and the noiseless value."""
    if not 0 <= agent < suite.n_agents:
        raise IndexError(f"agent {agent} out of range [0, {suite.n_agents})")
    if not 0 <= grid_id < suite.grid_size:
        raise IndexError(f"grid id {grid_id} out of range [0, {suite.grid_size})")
    f = float(suite.values[agent, grid_id])
    if noise_var == 0:
        return f, f
    return f + float(np.sqrt(noise_var) * rng.standard_normal()), f


def save_table(suite: ObjectiveSuite, path) -> None:
    """One JSON header line, then ``grid_id v_0 ... v_{N-1}`` per grid point."""
    header = {"grid_size": suite.grid_size, "n_agents": suite.n_agents, "seed": suite.seed,
              "d": suite.meta.get("d")}
    header.update({k: v for k, v in suite.meta.items() if k not in header})
    lines = [json.dumps(header, sort_keys=True)]
    for gid in range(suite.grid_size):
        lines.append(" ".join([str(gid)] + [repr(float(v)) for v in suite.values[:, gid]]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_table_objective(path) -> ObjectiveSuite:
    path = Path(path)
    with path.open() as fh:
        try:
            header = json.loads(fh.readline())
            grid_size, n_agents = int(header["grid_size"]), int(header["n_agents"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}: malformed header line") from exc
        values = np.full((n_agents, grid_size), np.nan)
        seen = np.zeros(grid_size, dtype=bool)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            try:
                gid = int(parts[0])
                row = [float(v) for v in parts[1:]]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed row") from exc
            if len(row) != n_agents or not 0 <= gid < grid_size:
                raise ValueError(f"{path}:{lineno}: expected grid id in range and {n_agents} values")
            values[:, gid] = row
            seen[gid] = True
    missing = np.flatnonzero(~seen)
    if len(missing):
        raise ValueError(f"{path}: missing grid id {int(missing[0])}"
                         + (f" (and {len(missing) - 1} more)" if len(missing) > 1 else ""))
    if values.min() < 0 or values.max() > 1:
        log.warning("%s: objective values outside [0, 1]; loaded without normalization", path)
    meta = {k: v for k, v in header.items() if k not in ("grid_size", "n_agents", "seed")}
    return ObjectiveSuite(values, None, header.get("seed"), meta)
