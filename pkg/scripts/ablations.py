"""Distributed-exploration ablations: uniform weights, full-domain init, fixed temperature."""

from fedts.experiments import ABLATIONS, ablations, preset, run_experiment

from _common import base_parser, report


def main():
    parser = base_parser(__doc__)
    parser.add_argument("--algo", default="dp-fts-de", choices=["fts-de", "dp-fts-de"])
    args = parser.parse_args()
    base = preset(args.algo, seeds=args.seeds, name=args.algo)
    rows = [(args.algo, run_experiment(base, workers=args.workers))]
    for kind in ABLATIONS:
        rows.append((f"{args.algo}-{kind}", ablations(base, kind, workers=args.workers)))
    report(rows, args.out / "ablations")


if __name__ == "__main__":
    main()
