"""Robustness to agent heterogeneity: mixtures of a shared and an independent GP sample."""

from fedts.experiments import preset, run_experiment

from _common import base_parser, report


def main():
    parser = base_parser(__doc__)
    parser.add_argument("--alphas", type=float, nargs="+", default=[0.0, 0.3, 0.7, 1.0])
    parser.add_argument("--n-agents", type=int, default=50)
    args = parser.parse_args()
    rows = []
    for alpha in args.alphas:
        for algo, extra in (("ts", {}), ("fts", {}), ("dp-fts-de", {})):
            name = f"{algo}-alpha{alpha:g}"
            cfg = preset(algo, objective="heterogeneous", hetero_alpha=alpha,
                         n_agents=args.n_agents, seeds=args.seeds, name=name, **extra)
            rows.append((name, run_experiment(cfg, workers=args.workers)))
    report(rows, args.out / "heterogeneity")


if __name__ == "__main__":
    main()
