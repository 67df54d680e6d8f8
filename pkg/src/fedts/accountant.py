"""Moments accountant for the Poisson-subsampled Gaussian mechanism.

Sensitivity is normalized to 1, so a single mechanism invocation is fully
described by the sampling probability ``q`` and the noise ratio ``z``. With
``mu0 = N(0, z^2)``, ``mu1 = N(1, z^2)`` and ``mu = (1-q) mu0 + q mu1`` the
order-``m`` log-moment is ``log max(E1, E2)`` where

    E1 = E_{x~mu0}[(mu0(x)/mu(x))^m],   E2 = E_{x~mu}[(mu(x)/mu0(x))^m].

Both are evaluated by adaptive quadrature on a log-scaled integrand.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

DEFAULT_MAX_ORDER = 64
_TAIL = 20.0


def _log_ratio(x, q, z):
    """``log(mu(x) / mu0(x)) = log(1 - q + q * exp((2x - 1) / (2 z^2)))``."""
    a = (2.0 * x - 1.0) / (2.0 * z * z)
    if q == 1:
        return a
    return np.logaddexp(math.log1p(-q), math.log(q) + a)


def _log_integral(log_f, lo, hi, panels, epsrel):
    """``log int_lo^hi exp(log_f)`` with the integrand rescaled by its grid maximum."""
    probe = np.linspace(lo, hi, 64 * panels + 1)
    peak = float(np.max(log_f(probe)))
    edges = np.linspace(lo, hi, panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        # the rescaled integrand peaks at 1, so this floor is far below the total;
        # it only stops quad from chasing denormals in panels that underflow
        val, _ = integrate.quad(lambda x: math.exp(log_f(x) - peak), a, b,
                                epsabs=1e-6 * epsrel, epsrel=epsrel, limit=200)
        total += val
    return peak + math.log(total)


@functools.lru_cache(maxsize=65536)
def log_moment(q: float, z: float, m: int, panels: int = 8, epsrel: float = 1e-10) -> float:
    """Order-``m`` log-moment of one subsampled Gaussian invocation."""
    if not 0 <= q <= 1:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    if z <= 0:
        raise ValueError(f"z must be positive, got {z}")
    if m < 1 or int(m) != m:
        raise ValueError(f"moment order must be a positive integer, got {m}")
    if q == 0:
        return 0.0
    log_norm = -0.5 * math.log(2 * math.pi) - math.log(z)

    def log_mu0(x):
        return log_norm - 0.5 * (x / z) ** 2

    # E2 integrand mu0 * (mu/mu0)^(m+1) is a binomial mixture of Gaussians
    # centred at 0..m+1; E1's mass lies between -m and 0.
    lo2, hi2 = -_TAIL * z, (m + 1) + _TAIL * z
    log_e2 = _log_integral(lambda x: log_mu0(x) + (m + 1) * _log_ratio(x, q, z),
                           lo2, hi2, panels, epsrel)
    lo1, hi1 = -m - _TAIL * z, _TAIL * z
    log_e1 = _log_integral(lambda x: log_mu0(x) - m * _log_ratio(x, q, z),
                           lo1, hi1, panels, epsrel)
    return max(log_e1, log_e2, 0.0)


def log_moments(q: float, z: float, max_order: int = DEFAULT_MAX_ORDER) -> np.ndarray:
    return np.array([log_moment(float(q), float(z), m) for m in range(1, max_order + 1)])


def epsilon_and_order(q: float, z: float, steps: int, delta: float,
                      max_order: int = DEFAULT_MAX_ORDER) -> tuple[float, int]:
    """Smallest tail bound ``(T * alpha(m) + log(1/delta)) / m`` over integer orders.

    Returns ``(epsilon, argmin order)``; the order is 0 when nothing was released.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if steps < 0:
        raise ValueError("number of rounds must be >= 0")
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    if steps == 0 or q == 0:
        return 0.0, 0
    alphas = log_moments(q, z, max_order)
    orders = np.arange(1, max_order + 1)
    bounds = (steps * alphas + math.log(1.0 / delta)) / orders
    k = int(np.argmin(bounds))
    return float(bounds[k]), int(orders[k])


def epsilon(q: float, z: float, steps: int, delta: float,
            max_order: int = DEFAULT_MAX_ORDER) -> float:
    return epsilon_and_order(q, z, steps, delta, max_order)[0]


def delta_default(n_agents: int) -> float:
    """``N^-1.1``; callers must still reject the degenerate ``N = 1`` (delta = 1)."""
    if n_agents < 1:
        raise ValueError("need at least one agent")
    return float(n_agents) ** -1.1


@dataclass(frozen=True)
class PrivacyLedger:
    """Composition of identical mechanism invocations."""

    q: float
    z: float
    delta: float
    rounds: int = 0
    max_order: int = DEFAULT_MAX_ORDER

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    def update(self) -> "PrivacyLedger":
        return replace(self, rounds=self.rounds + 1)

    @property
    def composed_log_moments(self) -> np.ndarray:
        if self.z == 0:
            return np.full(self.max_order, math.inf)
        return self.rounds * log_moments(self.q, self.z, self.max_order)

    @property
    def epsilon(self) -> float:
        if self.rounds == 0:
            return 0.0
        if self.z == 0:
            return math.inf
        return epsilon(self.q, self.z, self.rounds, self.delta, self.max_order)


def ledger_update(ledger: PrivacyLedger) -> PrivacyLedger:
    return ledger.update()


def current_epsilon(ledger: PrivacyLedger) -> float:
    return ledger.epsilon

