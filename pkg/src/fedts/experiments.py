"""Experiment configuration, algorithm presets, regret metrics and output files."""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .accountant import delta_default
from .domain import build_grid
from .mechanism import DpParams
from .objectives import ObjectiveSuite, gen_heterogeneous, gen_synthetic, load_table_objective
from .protocol import ProtocolSetup, RoundConfig, RunTrace, objective_seed_for, run
from .surrogate import BetaSchedule, KernelSpec
from .weights import WeightSchedule

ALGOS = ("ts", "fts", "fts-de", "dp-fts", "dp-fts-de")
ABLATIONS = ("uniform-weights", "full-domain-init", "fixed-temperature")
CSV_COLUMNS = ("algo", "seed", "agent", "round", "branch", "grid_id", "f_value", "y",
               "simple_regret", "cum_regret", "clip_fraction", "epsilon")


class ConfigError(ValueError):
    """Invalid experiment configuration; carries every problem found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class ExperimentConfig:
    algo: str = "dp-fts-de"
    name: str = ""
    n_agents: int = 200
    n_regions: int = 2
    n_features: int = 50
    horizon: int = 40
    n_init: int = 10
    grid_size: int = 1000
    dims: int = 1
    # objective
    objective: str = "synthetic"
    objective_seed: int | None = None   # None: drawn from each replicate's master seed
    gen_lengthscale: float = 0.03
    perturbation: float = 0.02
    hetero_alpha: float = 0.7
    table_path: str | None = None
    # surrogate
    lengthscale: float = 0.03
    signal_variance: float = 1.0
    noise_var: float = 0.01
    lam_mode: str = "noise"
    lam: float | None = None
    rff_variant: str = "paired"
    ts_mode: str = "rff"
    max_exact_grid: int = 2000
    beta_mode: str = "constant"
    beta_value: float = 1.0
    beta_bound: float = 1.0
    beta_delta: float = 0.1
    # mechanism
    q: float = 0.25
    z: float = 1.0
    clip: float = 11.0
    delta: float | None = None
    max_order: int = 64
    # schedules
    p_kind: str = "inv_sqrt"
    p_value: float = 1.0
    p_table: list = field(default_factory=list)
    cutoff: float = math.inf
    weight_kind: str = "adaptive"
    weight_preset: str = "synthetic"
    weight_a: float = 15.0
    weight_hold: int | None = None
    weight_decay: int | None = None
    ablation: str | None = None
    # runs
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    output_dir: str | None = None

    # -- validation -------------------------------------------------------
    def problems(self) -> list[str]:
        out = []
        if self.algo not in ALGOS:
            out.append(f"algo must be one of {ALGOS}, got {self.algo!r}")
        for name in ("n_agents", "n_regions", "n_features", "grid_size", "dims"):
            if getattr(self, name) < 1:
                out.append(f"{name} must be >= 1")
        if self.n_features % 2 and self.rff_variant == "paired":
            out.append("n_features must be even for paired random features")
        if self.horizon < 0 or self.n_init < 0:
            out.append("horizon and n_init must be >= 0")
        if self.objective not in ("synthetic", "heterogeneous", "table"):
            out.append(f"unknown objective {self.objective!r}")
        if self.objective == "table" and not self.table_path:
            out.append("table objective needs table_path")
        if not 0 < self.q <= 1:
            out.append("q must lie in (0, 1]")
        if self.z < 0:
            out.append("z must be >= 0")
        if not self.clip > 0:
            out.append("clip must be > 0")
        if self.z > 0 and math.isinf(self.clip):
            out.append("z > 0 needs a finite clip threshold")
        if self.lam_mode not in ("noise", "theory", "fixed"):
            out.append(f"unknown lam_mode {self.lam_mode!r}")
        if self.lam_mode == "fixed" and not (self.lam and self.lam > 0):
            out.append("lam_mode 'fixed' needs lam > 0")
        if self.lam_mode == "noise" and self.noise_var <= 0:
            out.append("lam_mode 'noise' needs noise_var > 0")
        if self.ablation is not None and self.ablation not in ABLATIONS:
            out.append(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.weight_preset not in ("synthetic", "real"):
            out.append(f"unknown weight_preset {self.weight_preset!r}")
        if self.weight_hold is not None and self.weight_hold < 0:
            out.append("weight_hold must be >= 0")
        if self.weight_decay is not None and self.weight_decay < 1:
            out.append("weight_decay must be >= 1")
        if not self.seeds:
            out.append("at least one seed is required")
        if self.n_regions > 1 and self.dims > 1 and self.n_regions & (self.n_regions - 1):
            out.append("n_regions must be a power of two when dims > 1")
        # preset constraints
        if self.algo == "ts" and not (self.p_kind == "constant" and self.p_value == 1):
            out.append("ts preset requires p_t == 1")
        if self.algo in ("fts", "dp-fts") and self.n_regions != 1:
            out.append(f"{self.algo} preset requires n_regions == 1")
        if self.algo in ("fts", "fts-de") and not (
                self.z == 0 and self.q == 1 and math.isinf(self.clip)):
            out.append(f"{self.algo} preset requires z=0, q=1, clip=inf")
        delta = self.delta if self.delta is not None else (
            delta_default(self.n_agents) if self.n_agents >= 1 else 1.0)
        if self.z > 0 and self.algo != "ts" and not 0 < delta < 1:
            out.append(f"delta must lie in (0, 1), got {delta}")
        return out

    def validate(self) -> "ExperimentConfig":
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError([f"unknown config key {k!r}" for k in unknown])
        clean = {k: (math.inf if v in ("inf", "Infinity") else v) for k, v in d.items()}
        return cls(**clean)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
        if not isinstance(data, dict):
            raise ConfigError(["config must be a JSON object"])
        if "preset" in data:
            return preset(data.pop("preset"), **data)
        return cls.from_dict(data)


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_json(Path(path).read_text())


def preset(algo: str, **overrides) -> ExperimentConfig:
    """Synthetic-experiment defaults with the algorithm's structural constraints applied."""
    base = {
        "ts": dict(n_regions=1, p_kind="constant", p_value=1.0, q=1.0, z=0.0, clip=math.inf),
        "fts": dict(n_regions=1, q=1.0, z=0.0, clip=math.inf),
        "fts-de": dict(n_regions=2, q=1.0, z=0.0, clip=math.inf),
        "dp-fts": dict(n_regions=1, q=0.25, z=1.0, clip=8.0),
        "dp-fts-de": dict(n_regions=2, q=0.25, z=1.0, clip=11.0),
    }
    if algo not in base:
        raise ConfigError([f"unknown preset {algo!r}"])
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise ConfigError([f"unknown config key {k!r}" for k in unknown])
    clean = {k: (math.inf if v in ("inf", "Infinity") else v) for k, v in overrides.items()}
    return ExperimentConfig(algo=algo, **{**base[algo], **clean})


def apply_ablation(config: ExperimentConfig, kind: str | None) -> ExperimentConfig:
    if kind is None:
        return config
    if kind not in ABLATIONS:
        raise ConfigError([f"ablation must be one of {ABLATIONS}, got {kind!r}"])
    return dataclasses.replace(config, ablation=kind)


# -- building blocks ------------------------------------------------------

def build_suite(config: ExperimentConfig, seed: int | None = None
                ) -> tuple[np.ndarray, ObjectiveSuite]:
    """Grid and objectives; generated suites use ``objective_seed`` or, if unset, ``seed``."""
    domain = build_grid(config.dims, None, _per_dim(config))
    if config.objective == "table":
        suite = load_table_objective(config.table_path)
        if suite.grid_size != domain.size or suite.n_agents != config.n_agents:
            raise ConfigError([f"table has {suite.n_agents} agents x {suite.grid_size} points, "
                               f"config expects {config.n_agents} x {domain.size}"])
        return domain, suite
    if config.objective_seed is not None:
        gen_seed = config.objective_seed
    elif seed is not None:
        gen_seed = objective_seed_for(seed)
    else:
        raise ConfigError(["objective_seed is unset and no master seed was given"])
    if config.objective == "synthetic":
        suite = gen_synthetic(domain.points, config.n_agents, config.gen_lengthscale,
                              config.perturbation, gen_seed)
    else:
        suite = gen_heterogeneous(domain.points, config.n_agents, config.hetero_alpha,
                                  config.gen_lengthscale, gen_seed)
    return domain, suite


def shared_suite(config: ExperimentConfig) -> bool:
    """Whether every replicate sees the same objectives."""
    return config.objective == "table" or config.objective_seed is not None


def _per_dim(config: ExperimentConfig) -> int:
    if config.dims == 1:
        return config.grid_size
    per = round(config.grid_size ** (1.0 / config.dims))
    if per ** config.dims != config.grid_size:
        raise ConfigError([f"grid_size {config.grid_size} is not a perfect {config.dims}-th power"])
    return per


def to_setup(config: ExperimentConfig, domain, suite) -> ProtocolSetup:
    config.validate()
    lam = {"noise": config.noise_var, "theory": 1.0 + 2.0 / max(config.horizon, 1),
           "fixed": config.lam}[config.lam_mode]
    dp = None
    if config.algo != "ts":
        dp = DpParams(config.q, config.z, config.clip, config.n_regions)
    kind = config.weight_kind
    if config.ablation == "uniform-weights":
        kind = "uniform"
    elif config.ablation == "fixed-temperature":
        kind = "fixed-temperature"
    breakpoints = {k: v for k, v in (("hold", config.weight_hold), ("decay", config.weight_decay))
                   if v is not None}
    schedule = WeightSchedule.preset(config.weight_preset, a=config.weight_a, kind=kind,
                                     **breakpoints)
    return ProtocolSetup(
        domain=domain, suite=suite,
        kernel=KernelSpec(config.lengthscale, config.signal_variance, config.noise_var),
        n_features=config.n_features, n_regions=config.n_regions, n_init=config.n_init,
        dp=dp, delta=config.delta, weight_schedule=schedule,
        rounds=RoundConfig(config.p_kind, config.p_value, tuple(config.p_table), config.cutoff,
                           config.horizon),
        beta=BetaSchedule(config.beta_mode, config.beta_value, config.beta_bound,
                          math.sqrt(config.noise_var), config.beta_delta, config.dims),
        lam=lam, ts_mode=config.ts_mode, max_exact_grid=config.max_exact_grid,
        full_domain_init=config.ablation == "full-domain-init",
        rff_variant=config.rff_variant, max_order=config.max_order)


# -- results --------------------------------------------------------------

@dataclass
class ExperimentResult:
    config: ExperimentConfig
    traces: list[RunTrace]
    objective_seeds: list = field(default_factory=list)

    def simple_regret(self) -> np.ndarray:
        """``(seeds, T+1, N)``."""
        return np.stack([tr.simple_regret() for tr in self.traces])

    def cumulative_regret(self) -> np.ndarray:
        return np.stack([tr.cumulative_regret() for tr in self.traces])

    def curve(self, which: str = "simple") -> tuple[np.ndarray, np.ndarray]:
        """Per-round mean and standard error pooled over seeds and agents."""
        vals = self.simple_regret() if which == "simple" else self.cumulative_regret()
        flat = vals.transpose(1, 0, 2).reshape(vals.shape[1], -1)
        return flat.mean(axis=1), flat.std(axis=1, ddof=1) / math.sqrt(flat.shape[1])

    def final(self, which: str = "simple") -> tuple[float, float]:
        mean, se = self.curve(which)
        return float(mean[-1]), float(se[-1])

    def seed_finals(self) -> np.ndarray:
        return self.simple_regret()[:, -1, :].mean(axis=1)

    def mean_clip_fraction(self) -> float:
        vals = np.concatenate([tr.clip_fraction[1:] for tr in self.traces])
        vals = vals[~np.isnan(vals)]
        return float(vals.mean()) if len(vals) else 0.0

    @property
    def epsilon(self) -> float:
        return float(self.traces[0].epsilon[-1])

    def summary(self) -> dict:
        mean, se = self.final("simple")
        cmean, cse = self.final("cumulative")
        return {
            "algo": self.config.algo, "name": self.config.name,
            "seeds": list(self.config.seeds), "horizon": self.config.horizon,
            "objective_seeds": list(self.objective_seeds),
            "final_simple_regret": mean, "final_simple_regret_se": se,
            "final_cum_regret": cmean, "final_cum_regret_se": cse,
            "mean_clip_fraction": self.mean_clip_fraction(),
            "epsilon": _jsonable(self.epsilon),
            "delta": self.config.delta if self.config.delta is not None
            else delta_default(self.config.n_agents),
            "p_clamped_rounds": sorted({int(t) for tr in self.traces
                                        for t in np.flatnonzero(tr.p_clamped)}),
            "config": self.config.to_dict(),
        }


def _jsonable(v: float):
    return "inf" if math.isinf(v) else v


def run_experiment(config: ExperimentConfig, workers: int | None = None,
                   suite: ObjectiveSuite | None = None) -> ExperimentResult:
    """One trace per seed; a supplied ``suite`` overrides objective generation."""
    config.validate()
    traces, seeds = [], []
    shared = None
    if suite is not None:
        shared = (build_grid(config.dims, None, _per_dim(config)), suite)
    elif shared_suite(config):
        shared = build_suite(config)
    for seed in config.seeds:
        domain, run_suite = shared if shared is not None else build_suite(config, int(seed))
        traces.append(run(to_setup(config, domain, run_suite), int(seed), workers))
        seeds.append(run_suite.seed)
    return ExperimentResult(config, traces, seeds)


def ablations(config: ExperimentConfig, kind: str, **kw) -> ExperimentResult:
    return run_experiment(apply_ablation(config, kind), **kw)


def sweep(base: ExperimentConfig, grid: dict, **kw) -> list[tuple[dict, ExperimentResult]]:
    """Run every point of the cartesian product over ``grid`` (keys among q, z, clip, n_regions)."""
    allowed = {"q", "z", "clip", "n_regions"}
    bad = sorted(set(grid) - allowed)
    if bad:
        raise ConfigError([f"cannot sweep over {k!r}; allowed: {sorted(allowed)}" for k in bad])
    keys = sorted(grid)
    points = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        params = dict(zip(keys, (math.inf if v == "inf" else v for v in combo)))
        points.append((params, dataclasses.replace(base, **params)))
    # reject the whole grid before spending time on any point
    problems = [f"{params}: {p}" for params, cfg in points for p in cfg.problems()]
    if problems:
        raise ConfigError(problems)
    return [(params, run_experiment(cfg, **kw)) for params, cfg in points]


# -- emission -------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def trace_rows(result: ExperimentResult):
    algo = result.config.algo
    for tr in result.traces:
        simple = tr.simple_regret()
        cum = tr.cumulative_regret()
        for k in range(tr.n_agents):
            for t in range(tr.horizon + 1):
                yield (algo, tr.seed, k, t, tr.branch[t, k], int(tr.grid_id[t, k]),
                       tr.f_value[t, k], tr.y[t, k], simple[t, k], cum[t, k],
                       tr.clip_fraction[t], tr.epsilon[t])


def trace_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in trace_rows(result):
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def curve_csv(result: ExperimentResult) -> str:
    smean, sse = result.curve("simple")
    cmean, cse = result.curve("cumulative")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("round", "simple_mean", "simple_stderr", "cum_mean", "cum_stderr"))
    for t in range(len(smean)):
        writer.writerow([t, _fmt(smean[t]), _fmt(sse[t]), _fmt(cmean[t]), _fmt(cse[t])])
    return buf.getvalue()


def emit(result: ExperimentResult, outdir, prefix: str | None = None) -> dict[str, Path]:
    """Write ``<prefix>trace.csv``, ``<prefix>curve.csv`` and ``<prefix>summary.json``."""
    outdir = Path(outdir)
    prefix = prefix if prefix is not None else (
        f"{result.config.name}_" if result.config.name else f"{result.config.algo}_")
    paths = {"trace": outdir / f"{prefix}trace.csv", "curve": outdir / f"{prefix}curve.csv",
             "summary": outdir / f"{prefix}summary.json"}
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        paths["trace"].write_text(trace_csv(result))
        paths["curve"].write_text(curve_csv(result))
        paths["summary"].write_text(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"failed writing results under {outdir}: {exc}") from exc
    return paths


def sweep_csv(results: list[tuple[dict, ExperimentResult]]) -> str:
    keys = sorted({k for params, _ in results for k in params})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*keys, "final_simple_regret", "stderr", "final_cum_regret",
                     "mean_clip_fraction", "epsilon"])
    for params, res in results:
        mean, se = res.final("simple")
        cmean, _ = res.final("cumulative")
        writer.writerow([_fmt(params.get(k, "")) for k in keys]
                        + [_fmt(mean), _fmt(se), _fmt(cmean), _fmt(res.mean_clip_fraction()),
                           _fmt(res.epsilon)])
    return buf.getvalue()
