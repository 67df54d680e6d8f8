"""Per-region agent weights: softmax over assignment indicators with a temperature schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import Assignment

KINDS = ("adaptive", "fixed-temperature", "uniform", "proportional")


@dataclass(frozen=True)
class WeightSchedule:
    """Sharpness ``a`` plus a piecewise-linear profile for ``a_t``.

    ``a_t = a + 1`` for ``t <= hold``, then decays linearly to 1 at
    ``t = hold + decay`` and stays at 1. The temperature is ``a / (a_t - 1)``,
    which becomes infinite (uniform weights) once ``a_t`` reaches 1.

    Kinds:
      adaptive           softmax with the scheduled temperature
      fixed-temperature  softmax with temperature 1 at every round
      uniform            every weight 1/N (no region bias)
      proportional       assigned agents get weight ``c_t`` relative to 1 for the
                         others, with ``c_t`` following the same profile from ``a`` to 1
    """

    a: float = 15.0
    hold: int = 5
    decay: int = 5
    kind: str = "adaptive"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown weight schedule kind {self.kind!r}")
        if self.a <= 0:
            raise ValueError("sharpness a must be positive")
        if self.hold < 0 or self.decay < 1:
            raise ValueError("hold must be >= 0 and decay >= 1")

    @classmethod
    def preset(cls, name: str, **overrides) -> "WeightSchedule":
        presets = {"synthetic": dict(hold=5, decay=5), "real": dict(hold=10, decay=30)}
        if name not in presets:
            raise ValueError(f"unknown weight preset {name!r}")
        return cls(**{**presets[name], **overrides})

    def a_t(self, t: int) -> float:
        top = self.a + 1.0
        if t <= self.hold:
            return top
        if self.decay == 1:
            return 1.0
        frac = (t - self.hold - 1) / (self.decay - 1)
        if frac >= 1.0:
            return 1.0
        return max(1.0, top - self.a * frac)


def temperature(t: int, schedule: WeightSchedule) -> float:
    """Softmax temperature at round ``t``; ``math.inf`` means uniform weights."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if schedule.kind == "fixed-temperature":
        return 1.0
    if schedule.kind == "uniform":
        return math.inf
    a_t = schedule.a_t(t)
    if a_t <= 1.0:
        return math.inf
    return schedule.a / (a_t - 1.0)


@dataclass(frozen=True)
class WeightMatrix:
    values: np.ndarray  # (P, N), rows sum to one

    @property
    def phi_max(self) -> float:
        return float(self.values.max())


def softmax_weights(indicator: np.ndarray, a: float, temp: float) -> np.ndarray:
    n = indicator.shape[1]
    if math.isinf(temp):
        return np.full(indicator.shape, 1.0 / n)
    logits = (a * indicator + 1.0) / temp
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    return w / w.sum(axis=1, keepdims=True)


def weights(assignment: Assignment, t: int, schedule: WeightSchedule) -> WeightMatrix:
    indicator = assignment.indicator()
    if schedule.kind == "proportional":
        # a_t - 1 runs from a down to 0; relative weight c_t runs from a down to 1
        ratio = max(1.0, schedule.a_t(t) - 1.0)
        raw = np.where(indicator > 0, ratio, 1.0)
        return WeightMatrix(raw / raw.sum(axis=1, keepdims=True))
    return WeightMatrix(softmax_weights(indicator, schedule.a, temperature(t, schedule)))
