"""Experiment 1: depletion bound against battery capacity."""

from _common import parser, report, run


def main():
    p = parser(__doc__)
    p.add_argument("--capacities", default="500,625,750,1000,1250", help="comma-separated mAh")
    args = p.parse_args()
    rows = []
    for cap in (float(x) for x in args.capacities.split(",")):
        rows.append(run(args, capacity=cap))
        print(f"done {cap:g} mAh", flush=True)
    report(rows, args.out)


if __name__ == "__main__":
    main()
