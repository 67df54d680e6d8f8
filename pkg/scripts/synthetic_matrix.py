"""Baseline matrix on the synthetic suite: TS, FTS, FTS-DE (P=2, 4), DP-FTS, DP-FTS-DE."""

from fedts.experiments import preset, run_experiment

from _common import base_parser, report

RUNS = {
    "ts": dict(algo="ts"),
    "fts": dict(algo="fts"),
    "fts-de-P2": dict(algo="fts-de", n_regions=2),
    "fts-de-P4": dict(algo="fts-de", n_regions=4),
    "dp-fts": dict(algo="dp-fts"),
    "dp-fts-de": dict(algo="dp-fts-de"),
}


def main():
    parser = base_parser(__doc__)
    parser.add_argument("--n-agents", type=int, default=200)
    parser.add_argument("--horizon", type=int, default=40)
    args = parser.parse_args()
    rows = []
    for name, spec in RUNS.items():
        spec = dict(spec)
        cfg = preset(spec.pop("algo"), seeds=args.seeds, n_agents=args.n_agents,
                     horizon=args.horizon, name=name, **spec)
        rows.append((name, run_experiment(cfg, workers=args.workers)))
    report(rows, args.out / "synthetic")


if __name__ == "__main__":
    main()
