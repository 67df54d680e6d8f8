"""Trade-off in the number of sub-regions P, with and without privacy noise."""

from fedts.experiments import preset, run_experiment

from _common import base_parser, report


def main():
    parser = base_parser(__doc__)
    parser.add_argument("--regions", type=int, nargs="+", default=[1, 2, 3, 4, 6, 8])
    args = parser.parse_args()
    rows = []
    for p in args.regions:
        for algo in ("fts-de", "dp-fts-de"):
            name = f"{algo}-P{p}"
            cfg = preset(algo, n_regions=p, seeds=args.seeds, name=name)
            rows.append((name, run_experiment(cfg, workers=args.workers)))
    report(rows, args.out / "regions")


if __name__ == "__main__":
    main()
