"""Experiment 2: KiBaM against an ideal linear battery under the same load process."""

from _common import parser, report, run


def main():
    p = parser(__doc__)
    p.add_argument("--capacities", default="625,1250", help="comma-separated mAh")
    args = p.parse_args()
    rows = [run(args, capacity=float(c), linear=True) for c in args.capacities.split(",")]
    for r in rows:
        r["kibam_ge_linear"] = r["depletion"] >= r["linear_depletion"]
    report(rows, args.out)


if __name__ == "__main__":
    main()
