import argparse
from pathlib import Path

from fedts.experiments import emit


def base_parser(description: str) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    parser.add_argument("--out", type=Path, default=Path("results"))
    parser.add_argument("--workers", type=int, default=None)
    return parser


def report(rows, outdir: Path, header=("run", "simple@T", "stderr", "cum@T", "clip%", "epsilon")):
    print(f"{header[0]:<26}" + "".join(f"{h:>12}" for h in header[1:]))
    for name, res in rows:
        emit(res, outdir, prefix=f"{name}_")
        mean, se = res.final("simple")
        cum, _ = res.final("cumulative")
        print(f"{name:<26}{mean:>12.5f}{se:>12.5f}{cum:>12.3f}"
              f"{100 * res.mean_clip_fraction():>12.2f}{res.epsilon:>12.3f}")
