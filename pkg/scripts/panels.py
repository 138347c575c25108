"""Experiment 4: six against nine solar panels (charge current scaled by 6/9)."""

from _common import parser, report, run


def main():
    p = parser(__doc__)
    p.add_argument("--capacity", type=float, default=625.0)
    args = p.parse_args()
    rows = [{"panels": k, **run(args, capacity=args.capacity, charge_scale=k / 9)} for k in (9, 6)]
    report(rows, args.out)


if __name__ == "__main__":
    main()
