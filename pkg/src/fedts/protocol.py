"""Round-by-round simulation of the federated Thompson sampling protocol.

Round 0 is local initialization only. In every round ``t >= 1`` each agent
picks a query (local Thompson sample with probability ``p_t``, otherwise the
argmax of the previous round's broadcast), observes it, refreshes its
posterior and sends a fresh weight sample; the server then runs the
subsampled Gaussian mechanism and charges the privacy ledger once.

All randomness comes from streams keyed by ``(seed, purpose, agent, round)``
so results do not depend on how agent steps are scheduled.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import mechanism
from .accountant import PrivacyLedger
from .domain import Assignment, Domain, Partition, assign_agents
from .mechanism import Broadcast, ClipStats, DpParams
from .objectives import ObjectiveSuite, evaluate
from .surrogate import (BetaSchedule, FeaturePosterior, History, KernelSpec, RffMap,
                        exact_posterior, sample_rff, sample_ts_function)
from .weights import WeightSchedule, weights

P_MIN = 1e-6
P_KINDS = ("inv_sqrt", "inv", "inv_sq", "constant", "table")

LOCAL, BROADCAST, POST_CUTOFF, INIT = "local-TS", "broadcast", "post-cutoff", "init"

# stream purposes
_RFF, _ASSIGN, _INIT, _AGENT, _SERVER, _OBJECTIVE = range(6)
_BRANCH, _TS, _OBS, _OMEGA = range(4)


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def derived_seed(seed: int, purpose: int) -> int:
    """A 32-bit integer seed for components that take a plain int."""
    return int(np.random.SeedSequence(seed, spawn_key=(purpose,)).generate_state(1)[0])


def objective_seed_for(seed: int) -> int:
    return derived_seed(seed, _OBJECTIVE)


def raw_p(t: int, kind: str, value: float = 1.0, table=()) -> float:
    if t < 1:
        raise ValueError("t must be >= 1")
    if kind == "inv_sqrt":
        return 1.0 - 1.0 / math.sqrt(t)
    if kind == "inv":
        return 1.0 - 1.0 / t
    if kind == "inv_sq":
        return 1.0 - 1.0 / t**2
    if kind == "constant":
        return float(value)
    if kind == "table":
        return float(table[min(t, len(table)) - 1])
    raise ValueError(f"unknown p_t schedule kind {kind!r}")


def p_schedule(t: int, kind: str, value: float = 1.0, table=()) -> float:
    """Probability of the local Thompson-sampling branch, clamped to ``[P_MIN, 1]``."""
    return min(1.0, max(P_MIN, raw_p(t, kind, value, table)))


@dataclass(frozen=True)
class RoundConfig:
    p_kind: str = "inv_sqrt"
    p_value: float = 1.0
    p_table: tuple = ()
    cutoff: float = math.inf
    horizon: int = 40

    def __post_init__(self):
        if self.p_kind not in P_KINDS:
            raise ValueError(f"unknown p_t schedule kind {self.p_kind!r}")
        if self.p_kind == "constant" and not 0 < self.p_value <= 1:
            raise ValueError("constant p_t must lie in (0, 1]")
        if self.p_kind == "table" and not self.p_table:
            raise ValueError("table p_t schedule needs at least one entry")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")

    def p(self, t: int) -> tuple[float, bool]:
        """``(p_t, clamped)``."""
        raw = raw_p(t, self.p_kind, self.p_value, self.p_table)
        p = p_schedule(t, self.p_kind, self.p_value, self.p_table)
        return p, p != raw


@dataclass(frozen=True)
class ProtocolSetup:
    """Everything a run needs except the master seed.

    ``dp=None`` means no server at all (independent Thompson sampling).
    """

    domain: Domain
    suite: ObjectiveSuite
    kernel: KernelSpec
    n_features: int = 50
    n_regions: int = 1
    n_init: int = 10
    dp: DpParams | None = None
    delta: float | None = None
    weight_schedule: WeightSchedule = WeightSchedule()
    rounds: RoundConfig = RoundConfig()
    beta: BetaSchedule = BetaSchedule()
    lam: float = 0.01
    ts_mode: str = "rff"
    max_exact_grid: int = 2000
    full_domain_init: bool = False
    rff_variant: str = "paired"
    max_order: int = 64

    @property
    def n_agents(self) -> int:
        return self.suite.n_agents


@dataclass
class Context:
    """Per-run shared, read-only state."""

    setup: ProtocolSetup
    seed: int
    partition: Partition
    assignment: Assignment
    rff: RffMap
    grid_features: np.ndarray
    region_of_grid: np.ndarray


@dataclass
class AgentState:
    agent_id: int
    region: int
    history: History
    posterior: FeaturePosterior
    grid_ids: list = field(default_factory=list)
    f_values: list = field(default_factory=list)


@dataclass(frozen=True)
class StepResult:
    grid_id: int
    f_value: float
    y: float
    branch: str
    omega: np.ndarray | None


def make_context(setup: ProtocolSetup, seed: int) -> Context:
    from .domain import partition as make_partition
    part = make_partition(setup.domain, setup.n_regions)
    assignment = assign_agents(setup.n_agents, setup.n_regions, stream(seed, _ASSIGN))
    rff = sample_rff(setup.kernel, setup.n_features, derived_seed(seed, _RFF), setup.domain.dims,
                     setup.rff_variant)
    return Context(setup, seed, part, assignment, rff, rff(setup.domain.points),
                   part.region_of_point)


def _observe(ctx: Context, state: AgentState, gid: int, rng) -> tuple[float, float]:
    y, f = evaluate(ctx.setup.suite, state.agent_id, gid, ctx.setup.kernel.noise_var, rng)
    state.history.append(ctx.setup.domain.points[gid], y)
    state.posterior = state.posterior.update(ctx.grid_features[gid], y)
    state.grid_ids.append(gid)
    state.f_values.append(f)
    return y, f


def agent_init(ctx: Context, agent_id: int, n_init: int | None = None,
               full_domain: bool | None = None) -> AgentState:
    """Query ``n_init`` distinct random grid points inside the agent's region."""
    setup = ctx.setup
    n_init = setup.n_init if n_init is None else n_init
    full_domain = setup.full_domain_init if full_domain is None else full_domain
    region = int(ctx.assignment.region_of_agent[agent_id])
    state = AgentState(agent_id, region, History(),
                       FeaturePosterior.prior(ctx.rff.n_features, setup.lam))
    if n_init == 0:
        return state
    candidates = (np.arange(setup.domain.size) if full_domain
                  else ctx.partition.grid_ids(region))
    if len(candidates) < n_init:
        raise ValueError(f"region {region} has {len(candidates)} grid points, "
                         f"fewer than n_init={n_init}")
    rng = stream(ctx.seed, _INIT, agent_id)
    ids = rng.choice(candidates, size=n_init, replace=False)
    ys = []
    for gid in ids:
        y, f = evaluate(setup.suite, agent_id, int(gid), setup.kernel.noise_var, rng)
        state.history.append(setup.domain.points[gid], y)
        state.grid_ids.append(int(gid))
        state.f_values.append(f)
        ys.append(y)
    state.posterior = state.posterior.update(ctx.grid_features[ids], np.asarray(ys))
    return state


def broadcast_scores(grid_features: np.ndarray, region_of_grid: np.ndarray,
                     per_region: np.ndarray) -> np.ndarray:
    """``phi(x)^T omega^(region(x))`` for every grid point."""
    return np.einsum("xm,xm->x", grid_features, per_region[region_of_grid])


def choose_branch(t: int, p_t: float, rng: np.random.Generator, has_broadcast: bool = True,
                  cutoff: float = math.inf) -> str:
    if t > cutoff:
        return POST_CUTOFF
    r = rng.uniform()
    if r <= p_t or not has_broadcast:
        return LOCAL
    return BROADCAST


def _local_ts(ctx: Context, state: AgentState, t: int, rng) -> np.ndarray:
    setup = ctx.setup
    beta = setup.beta(t + 1)
    if setup.ts_mode == "exact":
        x, y = state.history.arrays(setup.domain.dims)
        gp = exact_posterior(x, y, setup.kernel, setup.lam)
        return sample_ts_function(rng, beta, mode="exact", gp=gp, grid=setup.domain.points,
                                  max_exact_grid=setup.max_exact_grid)
    return sample_ts_function(rng, beta, mode="rff", posterior=state.posterior,
                              grid_features=ctx.grid_features)


def agent_step(ctx: Context, state: AgentState, t: int, broadcast_prev: Broadcast | None,
               p_t: float, send: bool = True) -> StepResult:
    """One agent's round ``t >= 1``; mutates ``state``."""
    setup = ctx.setup
    streams = [stream(ctx.seed, _AGENT, state.agent_id, t, k) for k in range(4)]
    branch = choose_branch(t, p_t, streams[_BRANCH], broadcast_prev is not None,
                           setup.rounds.cutoff)
    if branch == BROADCAST:
        if broadcast_prev is None:
            raise ValueError("broadcast branch taken without a broadcast")
        scores = broadcast_scores(ctx.grid_features, ctx.region_of_grid,
                                  broadcast_prev.per_region)
    else:
        scores = _local_ts(ctx, state, t, streams[_TS])
    gid = int(np.argmax(scores))  # lowest id wins ties
    y, f = _observe(ctx, state, gid, streams[_OBS])
    omega = state.posterior.sample(streams[_OMEGA]) if send else None
    return StepResult(gid, f, y, branch, omega)


def server_round(omegas: np.ndarray, t: int, weight_values: np.ndarray, params: DpParams,
                 ledger: PrivacyLedger | None, seed: int
                 ) -> tuple[Broadcast, ClipStats, PrivacyLedger | None]:
    selected = mechanism.subsample(len(omegas), params.q, stream(seed, _SERVER, t, 0))
    bc, stats = mechanism.aggregate(omegas, selected, weight_values, params,
                                    stream(seed, _SERVER, t, 1), round_index=t)
    return bc, stats, (ledger.update() if ledger is not None else None)


@dataclass
class RunTrace:
    """Per-(round, agent) arrays with round 0 the initialization."""

    seed: int
    grid_id: np.ndarray       # (T+1, N); round 0 holds the best initial point
    f_value: np.ndarray       # (T+1, N)
    y: np.ndarray             # (T+1, N)
    branch: np.ndarray        # (T+1, N) of str
    best_f: np.ndarray        # (T+1, N) best noiseless value queried so far
    optimum: np.ndarray       # (N,)
    p: np.ndarray             # (T+1,), nan at round 0
    p_clamped: np.ndarray     # (T+1,)
    clip_fraction: np.ndarray  # (T+1,), nan when no aggregation happened
    epsilon: np.ndarray       # (T+1,)
    broadcast_used: np.ndarray  # (T+1,) round index of the broadcast available, -1 if none
    broadcasts: list = field(default_factory=list)
    partition: Partition | None = None
    assignment: Assignment | None = None

    @property
    def horizon(self) -> int:
        return self.grid_id.shape[0] - 1

    @property
    def n_agents(self) -> int:
        return self.grid_id.shape[1]

    def simple_regret(self) -> np.ndarray:
        return self.optimum[None, :] - self.best_f

    def cumulative_regret(self) -> np.ndarray:
        inst = self.optimum[None, :] - self.f_value
        inst[0] = 0.0
        return np.cumsum(inst, axis=0)


def _workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("FEDTS_WORKERS", "1"))
    return max(1, workers)


def run(setup: ProtocolSetup, seed: int, workers: int | None = None) -> RunTrace:
    """Initialization round plus ``horizon`` synchronous rounds."""
    ctx = make_context(setup, seed)
    n, horizon = setup.n_agents, setup.rounds.horizon
    if setup.dp is not None and setup.dp.n_regions != setup.n_regions:
        raise ValueError("DP parameters and setup disagree on the number of sub-regions")
    ledger = None
    if setup.dp is not None and setup.dp.z > 0:
        delta = setup.delta if setup.delta is not None else n ** -1.1
        ledger = PrivacyLedger(setup.dp.q, setup.dp.z, delta, max_order=setup.max_order)

    shape = (horizon + 1, n)
    trace = RunTrace(
        seed=seed, grid_id=np.zeros(shape, dtype=int), f_value=np.full(shape, np.nan),
        y=np.full(shape, np.nan), branch=np.empty(shape, dtype=object),
        best_f=np.full(shape, np.nan), optimum=np.array([setup.suite.optimum(k) for k in range(n)]),
        p=np.full(horizon + 1, np.nan), p_clamped=np.zeros(horizon + 1, dtype=bool),
        clip_fraction=np.full(horizon + 1, np.nan), epsilon=np.zeros(horizon + 1),
        broadcast_used=np.full(horizon + 1, -1), partition=ctx.partition,
        assignment=ctx.assignment)

    pool = ThreadPoolExecutor(_workers(workers)) if _workers(workers) > 1 else None
    mapper = pool.map if pool else map
    try:
        states = list(mapper(lambda k: agent_init(ctx, k), range(n)))
        for k, st in enumerate(states):
            trace.branch[0, k] = INIT
            if st.f_values:
                j = int(np.argmax(st.f_values))
                trace.grid_id[0, k] = st.grid_ids[j]
                trace.f_value[0, k] = st.f_values[j]
                trace.y[0, k] = st.history.outputs[j]
                trace.best_f[0, k] = st.f_values[j]
            else:
                trace.grid_id[0, k] = -1

        latest: Broadcast | None = None
        for t in range(1, horizon + 1):
            p_t, clamped = setup.rounds.p(t)
            trace.p[t], trace.p_clamped[t] = p_t, clamped
            active = setup.dp is not None and t <= setup.rounds.cutoff
            trace.broadcast_used[t] = latest.round if latest is not None else -1
            results = list(mapper(
                lambda st: agent_step(ctx, st, t, latest, p_t, send=active), states))
            for k, res in enumerate(results):
                trace.grid_id[t, k] = res.grid_id
                trace.f_value[t, k] = res.f_value
                trace.y[t, k] = res.y
                trace.branch[t, k] = res.branch
                prev = trace.best_f[t - 1, k]
                trace.best_f[t, k] = res.f_value if np.isnan(prev) else max(prev, res.f_value)
            if active:
                omegas = np.vstack([r.omega for r in results])
                wm = weights(ctx.assignment, t, setup.weight_schedule)
                latest, stats, ledger = server_round(omegas, t, wm.values, setup.dp, ledger, seed)
                trace.clip_fraction[t] = stats.fraction
                trace.broadcasts.append(latest)
            if ledger is not None:
                trace.epsilon[t] = ledger.epsilon
            elif trace.broadcasts:
                trace.epsilon[t] = math.inf  # noiseless releases

    finally:
        if pool:
            pool.shutdown()
    return trace
