"""Discrete search domains, equal-volume sub-regions and agent assignment."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Domain:
    """A finite candidate set inside a hyper-rectangle.

    ``points`` has shape ``(n_points, dims)``; the row index is the grid id.
    """

    points: np.ndarray
    bounds: np.ndarray

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        if points.shape[0] < 1:
            raise ValueError("domain needs at least one point")
        if points.shape[1] != bounds.shape[0]:
            raise ValueError(
                f"points have {points.shape[1]} dims but bounds have {bounds.shape[0]}")
        if np.any(bounds[:, 0] > bounds[:, 1]):
            raise ValueError(f"inverted bounds: {bounds.tolist()}")
        if np.any(points < bounds[:, 0]) or np.any(points > bounds[:, 1]):
            raise ValueError("grid point outside bounds")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "bounds", bounds)

    @property
    def dims(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def __len__(self):
        return self.size


def build_grid(dims: int, bounds=None, points: int | Sequence[int] | np.ndarray = 1000) -> Domain:
    """Build an equally spaced grid (tensor grid for ``dims > 1``).

    ``points`` is either a count per dimension (an int is broadcast), or an
    explicit ``(n, dims)`` array of points. Grid ids follow C order, so the
    lower corner has id 0.
    """
    if dims < 1:
        raise ValueError("dims must be positive")
    if bounds is None:
        bounds = [(0.0, 1.0)] * dims
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    if bounds.shape[0] == 1 and dims > 1:
        bounds = np.repeat(bounds, dims, axis=0)
    if bounds.shape[0] != dims:
        raise ValueError(f"expected {dims} bound pairs, got {bounds.shape[0]}")
    if np.any(bounds[:, 0] > bounds[:, 1]):
        raise ValueError(f"inverted bounds: {bounds.tolist()}")

    arr = np.asarray(points)
    if arr.ndim == 2:
        return Domain(arr, bounds)
    counts = [int(arr)] * dims if arr.ndim == 0 else [int(c) for c in arr]
    if len(counts) != dims:
        raise ValueError(f"expected {dims} per-dim counts, got {len(counts)}")
    if any(c < 1 for c in counts):
        raise ValueError("number of grid points must be >= 1")
    axes = [np.linspace(lo, hi, c) if c > 1 else np.array([lo])
            for (lo, hi), c in zip(bounds, counts)]
    grid = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, dims)
    return Domain(grid, bounds)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; each dim is ``[lo, hi)`` unless ``closed[d]``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    closed: tuple[bool, ...]

    @property
    def volume(self) -> float:
        return math.prod(h - l for l, h in zip(self.lo, self.hi))

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        upper = np.where(self.closed, x <= hi, x < hi)
        return np.all((x >= lo) & upper, axis=1)

    def intervals(self) -> list[list[float]]:
        return [[l, h] for l, h in zip(self.lo, self.hi)]


@dataclass(frozen=True)
class Partition:
    regions: tuple[Box, ...]
    region_of_point: np.ndarray = field(repr=False)
    bounds: np.ndarray = field(repr=False)

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    def grid_ids(self, region: int) -> np.ndarray:
        return np.flatnonzero(self.region_of_point == region)

    def to_json(self) -> str:
        return json.dumps({str(i): box.intervals() for i, box in enumerate(self.regions)})


def _split(box: Box, dim: int, cuts: Sequence[float]) -> list[Box]:
    edges = [box.lo[dim], *cuts, box.hi[dim]]
    out = []
    for k in range(len(edges) - 1):
        lo = list(box.lo)
        hi = list(box.hi)
        closed = list(box.closed)
        lo[dim], hi[dim] = edges[k], edges[k + 1]
        # only the last piece keeps the parent's upper face
        closed[dim] = box.closed[dim] if k == len(edges) - 2 else False
        out.append(Box(tuple(lo), tuple(hi), tuple(closed)))
    return out


def partition(domain: Domain, n_regions: int) -> Partition:
    """Split the domain's bounding box into ``n_regions`` equal-volume boxes.

    Powers of two are realized by halving along dims 0, 1, ..., D-1, 0, ...;
    the first split is the most significant digit of the region index. For
    one-dimensional domains any count is allowed (equal intervals).
    """
    if n_regions < 1:
        raise ValueError("number of sub-regions must be >= 1")
    bounds = domain.bounds
    root = Box(tuple(bounds[:, 0]), tuple(bounds[:, 1]), (True,) * domain.dims)
    is_pow2 = n_regions & (n_regions - 1) == 0
    if domain.dims == 1 and not is_pow2:
        lo, hi = bounds[0]
        cuts = [lo + (hi - lo) * k / n_regions for k in range(1, n_regions)]
        boxes = _split(root, 0, cuts)
    elif not is_pow2:
        raise ValueError(
            f"number of sub-regions must be a power of two for D > 1, got {n_regions}")
    else:
        boxes = [root]
        for level in range(n_regions.bit_length() - 1):
            dim = level % domain.dims
            boxes = [piece for b in boxes
                     for piece in _split(b, dim, [0.5 * (b.lo[dim] + b.hi[dim])])]
    owner = np.full(domain.size, -1, dtype=int)
    for i, box in enumerate(boxes):
        owner[box.contains(domain.points) & (owner < 0)] = i
    if np.any(owner < 0):
        raise ValueError("partition does not cover every grid point")
    return Partition(tuple(boxes), owner, bounds)


def region_of(part: Partition, x) -> int:
    """Index of the sub-region containing point ``x``."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    for i, box in enumerate(part.regions):
        if box.contains(x)[0]:
            return i
    raise ValueError(f"point {x.ravel().tolist()} lies outside the domain")


@dataclass(frozen=True)
class Assignment:
    region_of_agent: np.ndarray
    n_regions: int

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.region_of_agent, minlength=self.n_regions)

    @property
    def n_agents(self) -> int:
        return len(self.region_of_agent)

    def indicator(self) -> np.ndarray:
        """``(P, N)`` 0/1 matrix: agent n is assigned to region i."""
        return (self.region_of_agent[None, :] == np.arange(self.n_regions)[:, None]).astype(float)


def assign_agents(n_agents: int, n_regions: int, rng: np.random.Generator) -> Assignment:
    """Deal a random permutation of agents round-robin into regions."""
    if n_agents < 1 or n_regions < 1:
        raise ValueError("need at least one agent and one region")
    order = rng.permutation(n_agents)
    region = np.empty(n_agents, dtype=int)
    region[order] = np.arange(n_agents) % n_regions
    return Assignment(region, n_regions)
