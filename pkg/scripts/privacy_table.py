"""Privacy loss after T rounds over a grid of sampling rates and noise ratios."""

import argparse

from fedts.accountant import delta_default, epsilon_and_order


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--q", type=float, nargs="+", default=[0.15, 0.25, 0.5])
    parser.add_argument("--z", type=float, nargs="+", default=[1.0, 1.2, 1.5])
    parser.add_argument("--T", type=int, default=40)
    parser.add_argument("--n-agents", type=int, default=200)
    args = parser.parse_args()
    delta = delta_default(args.n_agents)
    print(f"T={args.T}, delta={delta:.4g}")
    print(f"{'q':>6}{'z':>6}{'epsilon':>10}{'order':>7}")
    for q in args.q:
        for z in args.z:
            eps, order = epsilon_and_order(q, z, args.T, delta)
            print(f"{q:>6g}{z:>6g}{eps:>10.3f}{order:>7d}")


if __name__ == "__main__":
    main()
