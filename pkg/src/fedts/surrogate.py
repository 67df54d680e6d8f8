"""GP surrogates: SE kernel, random Fourier features and Thompson samples."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

JITTER = 1e-10


def stable_cholesky(mat: np.ndarray, jitter: float = JITTER, max_tries: int = 6) -> np.ndarray:
    """Lower Cholesky factor of ``mat + jitter*I``, raising jitter x10 on failure."""
    eye = np.eye(mat.shape[0])
    for k in range(max_tries):
        try:
            return cholesky(mat + (jitter * 10**k) * eye, lower=True)
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError(
        f"matrix not positive definite even with jitter {jitter * 10 ** (max_tries - 1):g}")


@dataclass(frozen=True)
class KernelSpec:
    """Isotropic squared-exponential kernel."""

    lengthscale: float
    signal_variance: float = 1.0
    noise_var: float = 0.01

    def __post_init__(self):
        if self.lengthscale <= 0:
            raise ValueError("lengthscale must be positive")
        if not 0 < self.signal_variance <= 1:
            raise ValueError("signal variance must lie in (0, 1]")
        if self.noise_var < 0:
            raise ValueError("observation noise variance must be nonnegative")

    def __call__(self, a, b) -> np.ndarray:
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        sq = (np.sum(a**2, 1)[:, None] + np.sum(b**2, 1)[None, :] - 2.0 * a @ b.T)
        np.maximum(sq, 0.0, out=sq)
        return self.signal_variance * np.exp(-0.5 * sq / self.lengthscale**2)


@dataclass(frozen=True)
class RffMap:
    """Shared random Fourier feature basis.

    The paired variant uses ``[cos(Wx), sin(Wx)]`` so that ``|phi(x)|^2`` equals
    the signal variance exactly; the ``"cosine"`` variant uses ``cos(Wx + b)``.
    """

    frequencies: np.ndarray
    signal_variance: float
    seed: int
    lengthscale: float
    variant: str = "paired"
    phases: np.ndarray | None = None

    @property
    def n_features(self) -> int:
        rows = self.frequencies.shape[0]
        return 2 * rows if self.variant == "paired" else rows

    @property
    def dims(self) -> int:
        return self.frequencies.shape[1]

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        proj = x @ self.frequencies.T
        amp = math.sqrt(self.signal_variance)
        if self.variant == "paired":
            scale = amp * math.sqrt(1.0 / self.frequencies.shape[0])
            return scale * np.concatenate([np.cos(proj), np.sin(proj)], axis=1)
        scale = amp * math.sqrt(2.0 / self.frequencies.shape[0])
        return scale * np.cos(proj + self.phases)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "n_features": self.n_features, "dims": self.dims,
                "lengthscale": self.lengthscale, "signal_variance": self.signal_variance,
                "variant": self.variant}

    @classmethod
    def from_dict(cls, d: dict) -> "RffMap":
        kernel = KernelSpec(d["lengthscale"], d["signal_variance"])
        return sample_rff(kernel, d["n_features"], d["seed"], dims=d["dims"],
                          variant=d.get("variant", "paired"))


def sample_rff(kernel: KernelSpec, n_features: int, seed: int, dims: int = 1,
               variant: str = "paired") -> RffMap:
    """Draw an RFF basis from the SE spectral density ``N(0, I / lengthscale^2)``."""
    if variant not in ("paired", "cosine"):
        raise ValueError(f"unknown RFF variant {variant!r}")
    if n_features < 2 or (variant == "paired" and n_features % 2):
        raise ValueError(f"number of features must be even and >= 2, got {n_features}")
    rng = np.random.default_rng(seed)
    rows = n_features // 2 if variant == "paired" else n_features
    freqs = rng.standard_normal((rows, dims)) / kernel.lengthscale
    phases = rng.uniform(0.0, 2 * np.pi, rows) if variant == "cosine" else None
    return RffMap(freqs, kernel.signal_variance, seed, kernel.lengthscale, variant, phases)


@dataclass
class History:
    """Append-only record of one agent's queries and noisy observations."""

    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    def append(self, x, y: float) -> None:
        self.inputs.append(np.asarray(x, dtype=float).ravel())
        self.outputs.append(float(y))

    @property
    def t(self) -> int:
        return len(self.outputs)

    def arrays(self, dims: int) -> tuple[np.ndarray, np.ndarray]:
        if not self.inputs:
            return np.empty((0, dims)), np.empty(0)
        return np.vstack(self.inputs), np.asarray(self.outputs)


@dataclass(frozen=True)
class GpPosterior:
    """Exact GP posterior with regularizer ``lam`` on the Gram diagonal."""

    kernel: KernelSpec
    inputs: np.ndarray
    chol: np.ndarray | None
    alpha: np.ndarray
    lam: float

    def _cross(self, x):
        return self.kernel(x, self.inputs)

    def mean(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.chol is None:
            return np.zeros(x.shape[0])
        return self._cross(x) @ self.alpha

    def cov(self, x, x2=None) -> np.ndarray:
        x = np.atleast_2d(x)
        x2 = x if x2 is None else np.atleast_2d(x2)
        prior = self.kernel(x, x2)
        if self.chol is None:
            return prior
        v1 = solve_triangular(self.chol, self._cross(x).T, lower=True)
        v2 = v1 if x2 is x else solve_triangular(self.chol, self._cross(x2).T, lower=True)
        return prior - v1.T @ v2

    def var(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.chol is None:
            return np.full(x.shape[0], self.kernel.signal_variance)
        v = solve_triangular(self.chol, self._cross(x).T, lower=True)
        return np.clip(self.kernel.signal_variance - np.sum(v**2, 0), 0.0, None)


def exact_posterior(inputs, outputs, kernel: KernelSpec, lam: float) -> GpPosterior:
    if lam <= 0:
        raise ValueError("regularizer must be positive")
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    outputs = np.asarray(outputs, dtype=float)
    if outputs.size == 0:
        return GpPosterior(kernel, inputs, None, np.zeros(0), lam)
    gram = kernel(inputs, inputs) + lam * np.eye(len(outputs))
    chol = cholesky(gram + JITTER * kernel.signal_variance * np.eye(len(outputs)), lower=True)
    alpha = cho_solve((chol, True), outputs)
    return GpPosterior(kernel, inputs, chol, alpha, lam)


@dataclass(frozen=True)
class FeaturePosterior:
    """Bayesian linear model on RFF weights.

    ``Sigma = Phi^T Phi + lam*I`` (kept as its Cholesky factor) and
    ``nu = Sigma^{-1} Phi^T y``.
    """

    gram: np.ndarray
    proj: np.ndarray
    lam: float
    chol: np.ndarray
    nu: np.ndarray
    n_obs: int = 0

    @classmethod
    def prior(cls, n_features: int, lam: float) -> "FeaturePosterior":
        if lam <= 0:
            raise ValueError("regularizer must be positive")
        m = n_features
        return cls(np.zeros((m, m)), np.zeros(m), lam, math.sqrt(lam) * np.eye(m), np.zeros(m))

    @classmethod
    def from_stats(cls, gram, proj, lam, n_obs) -> "FeaturePosterior":
        chol = cholesky(gram + lam * np.eye(len(proj)), lower=True)
        nu = cho_solve((chol, True), proj)
        return cls(gram, proj, lam, chol, nu, n_obs)

    def update(self, features, y) -> "FeaturePosterior":
        """Posterior after appending rows ``features`` with targets ``y``."""
        features = np.atleast_2d(features)
        y = np.atleast_1d(np.asarray(y, dtype=float))
        gram = self.gram + features.T @ features
        proj = self.proj + features.T @ y
        return FeaturePosterior.from_stats(gram, proj, self.lam, self.n_obs + len(y))

    @property
    def sigma(self) -> np.ndarray:
        return self.chol @ self.chol.T

    def mean(self, features) -> np.ndarray:
        return np.atleast_2d(features) @ self.nu

    def var(self, features) -> np.ndarray:
        """``lam * phi^T Sigma^{-1} phi`` for every row."""
        v = solve_triangular(self.chol, np.atleast_2d(features).T, lower=True)
        return self.lam * np.sum(v**2, 0)

    def sample(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        """Draw ``omega ~ N(nu, scale^2 * lam * Sigma^{-1})``."""
        if scale == 0:
            return self.nu.copy()
        eps = rng.standard_normal(len(self.nu))
        return self.nu + scale * math.sqrt(self.lam) * solve_triangular(
            self.chol.T, eps, lower=False)


def feature_posterior(inputs, outputs, rff: RffMap, lam: float) -> FeaturePosterior:
    post = FeaturePosterior.prior(rff.n_features, lam)
    outputs = np.asarray(outputs, dtype=float)
    if outputs.size == 0:
        return post
    return post.update(rff(inputs), outputs)


def sample_omega(post: FeaturePosterior, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    return post.sample(rng, scale)


def sample_ts_function(rng: np.random.Generator, beta: float, *, mode: str = "rff",
                       posterior: FeaturePosterior | None = None,
                       grid_features: np.ndarray | None = None,
                       gp: GpPosterior | None = None, grid: np.ndarray | None = None,
                       max_exact_grid: int = 2000) -> np.ndarray:
    """Values on the grid of one Thompson sample with covariance inflated by ``beta^2``.

    ``mode="rff"`` needs ``posterior`` and ``grid_features``; ``mode="exact"``
    needs ``gp`` and ``grid`` and draws a dense joint Gaussian.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if mode == "rff":
        return grid_features @ posterior.sample(rng, scale=beta)
    if mode == "exact":
        grid = np.atleast_2d(grid)
        if grid.shape[0] > max_exact_grid:
            raise ValueError(
                f"exact sampling capped at {max_exact_grid} grid points, got {grid.shape[0]}")
        mean = gp.mean(grid)
        chol = stable_cholesky(beta**2 * gp.cov(grid), JITTER * gp.kernel.signal_variance)
        return mean + chol @ rng.standard_normal(grid.shape[0])
    raise ValueError(f"unknown sampling mode {mode!r}")


@dataclass(frozen=True)
class BetaSchedule:
    """Exploration multiplier; ``mode="theory"`` uses gamma_t ~ (log(t+1))^(D+1)."""

    mode: str = "constant"
    value: float = 1.0
    rkhs_bound: float = 1.0
    noise_std: float = 0.1
    delta: float = 0.1
    dims: int = 1

    def __call__(self, t: int) -> float:
        if t < 1:
            raise ValueError("t must be >= 1")
        if self.mode == "constant":
            return self.value
        if self.mode == "theory":
            gamma = math.log(t) ** (self.dims + 1)
            return self.rkhs_bound + self.noise_std * math.sqrt(
                2.0 * (gamma + 1.0 + math.log(4.0 / self.delta)))
        raise ValueError(f"unknown beta mode {self.mode!r}")


def beta_schedule(t: int, config: BetaSchedule) -> float:
    return config(t)
