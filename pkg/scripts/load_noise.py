"""Experiment 3: fixed (Dirac) task loads against normally distributed ones."""

from _common import parser, report, run


def main():
    p = parser(__doc__)
    p.add_argument("--capacity", type=float, default=625.0)
    p.add_argument("--stds", default="0,5,10", help="comma-separated load standard deviations (mA); 0 = Dirac")
    args = p.parse_args()
    rows = []
    for std in (float(s) for s in args.stds.split(",")):
        row = run(args, capacity=args.capacity, load_std=std)
        rows.append({"load_std": std, **row})
    report(rows, args.out)


if __name__ == "__main__":
    main()
