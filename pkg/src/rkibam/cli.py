"""Command line front end.

::

    rkibam solve    --model satellite --capacity-mAh 625 --n-grid 150
    rkibam linear   --model satellite --capacity-mAh 625
    rkibam simulate --model example2 --runs 100000 --seed 7
    rkibam export   --model example2 --checkpoints 0,20,60 --out out/ex2

Exit status: 0 on success, 2 for invalid models or flags, 3 when the
solver runs out of resources or a quadrature does not converge.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from decimal import Decimal, localcontext
from pathlib import Path

from .analytic import QuadratureError
from .dist import init_distribution, linear_from_soc, marginals_and_export
from .exactsum import ExtendedSum, format_decimal
from .export import write_snapshot
from .modelfile import Model, ModelError, load_model
from .montecarlo import estimate
from .mtp import PropagationStats, propagate, propagate_linear

EXIT_OK, EXIT_INVALID, EXIT_RESOURCE = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _times(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated minutes, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, help="model file, or the name of a bundled model")
    common.add_argument("--capacity-mAh", dest="capacity", type=float, help="override battery capacity")
    common.add_argument("--horizon-min", dest="horizon", type=float, help="override horizon (minutes)")
    common.add_argument("--n-grid", type=int, help="cells per axis (default scales with capacity)")
    common.add_argument("--n-load-points", type=int, help="points per discretized load")
    common.add_argument("--charge-scale", type=float, help="multiply the charge currents, e.g. 6/9 panels = 0.667")
    common.add_argument("--workers", type=int, default=1, help="worker threads/processes (default 1)")
    common.add_argument("--out", type=Path, help="output directory for exports and reports")

    p = _Parser(prog="rkibam", description="Depletion bounds for the random kinetic battery model.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", parents=[common], help="grid bound on depletion probability")
    s.add_argument("--checkpoints", type=_times, help="also export snapshots at these minutes")
    sub.add_parser("linear", parents=[common], help="same load process on an ideal linear battery")
    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimate with the exact bounded model")
    s.add_argument("--runs", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s = sub.add_parser("export", parents=[common], help="write CSV/PGM snapshots at checkpoint times")
    s.add_argument("--checkpoints", type=_times, help="minutes (default: from the model file)")
    return p


def _model(args) -> Model:
    m = load_model(args.model)
    if args.workers < 1:
        raise ModelError("--workers must be at least 1")
    for flag, value in (("--n-grid", args.n_grid), ("--n-load-points", args.n_load_points)):
        if value is not None and value < 1:
            raise ModelError(f"{flag} must be at least 1")
    for flag, value in (("--capacity-mAh", args.capacity), ("--horizon-min", args.horizon)):
        if value is not None and not value > 0:
            raise ModelError(f"{flag} must be positive")
    return m.with_overrides(args.capacity, args.horizon, args.n_grid, args.n_load_points, args.charge_scale)


def _survival_text(depleted: ExtendedSum) -> str:
    """Exact ``1 - depleted``, cut 30 digits below the leading digit of ``depleted``."""
    dep = depleted.to_decimal()
    surv = depleted.complement_decimal()
    if dep == 0:
        return "1"
    with localcontext() as ctx:
        ctx.prec = 1200
        q = Decimal(1).scaleb(dep.adjusted() - 29)
        return str(surv.quantize(q) if surv.adjusted() - q.adjusted() < 1100 else surv)


def _header(m: Model) -> str:
    charge = "none" if m.charge is None else ", ".join(f"{d:g} min @ {i:g} mA" for d, i in m.charge.segments)
    return (f"model {m.name}: capacity {m.capacity_mah:g} mAh, c {m.params.c:g}, p {m.params.p:g}/min; "
            f"n_grid {m.solver.n_grid}, {m.solver.n_load_points} load points, horizon {m.solver.horizon:g} min; "
            f"charge: {charge}")


def _solve(m: Model, horizon: float, workers: int, stats: PropagationStats):
    init = init_distribution(m.params, m.solver.n_grid, m.init)
    return propagate(m.process(), init, horizon, m.solver.n_load_points, m.solver.coverage,
                     stats=stats, workers=workers)


def cmd_solve(args) -> int:
    m = _model(args)
    print(_header(m))
    proc = m.process()
    t0 = time.perf_counter()
    stats = PropagationStats()
    dist = _solve(m, m.solver.horizon, args.workers, stats)
    wall = time.perf_counter() - t0
    summary = marginals_and_export(dist)
    print(f"task states: {len(proc)}   DAG vertices: {stats.n_vertices}   transforms: {stats.transforms}   "
          f"max frontier: {stats.max_frontier}")
    print(f"inner mass:    {summary['inner_total']:.17g}")
    print(f"boundary mass: {summary['boundary_total']:.17g}")
    print(f"depleted:      {format_decimal(summary['depleted'])}")
    print(f"survival >=    {_survival_text(dist.depleted)}")
    print(f"wall time:     {wall:.2f} s")
    if args.out is not None:
        write_snapshot(dist, args.out, "final", m.solver.horizon, m.outputs.heatmap_floor)
        report = {
            "model": m.name,
            "capacity_mAh": m.capacity_mah,
            "n_grid": m.solver.n_grid,
            "n_load_points": m.solver.n_load_points,
            "horizon_min": m.solver.horizon,
            "task_states": len(proc),
            "dag_vertices": stats.n_vertices,
            "vertices": [[proc.states[s], t] for s, t in stats.vertices] if stats.n_vertices <= 1000 else None,
            "transforms": stats.transforms,
            "depleted": str(summary["depleted"]),
            "survival": str(summary["survival"]),
            "wall_time_s": wall,
        }
        (args.out / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        for t in args.checkpoints or ():
            _export_at(m, t, args.out, args.workers)
    return EXIT_OK


def cmd_linear(args) -> int:
    m = _model(args)
    print(_header(m))
    t0 = time.perf_counter()
    init = linear_from_soc(init_distribution(m.params, m.solver.n_grid, m.init))
    dist = propagate_linear(m.process(), init, m.solver.horizon, m.solver.n_load_points, m.solver.coverage,
                            workers=args.workers)
    print(f"linear battery, {dist.n_grid} cells")
    print(f"depleted:      {format_decimal(dist.depleted.to_decimal())}")
    print(f"survival >=    {_survival_text(dist.depleted)}")
    print(f"wall time:     {time.perf_counter() - t0:.2f} s")
    return EXIT_OK


def cmd_simulate(args) -> int:
    m = _model(args)
    if args.runs < 1:
        raise ModelError("--runs must be at least 1")
    print(_header(m))
    csv_path = None
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        csv_path = args.out / "runs.csv"
    t0 = time.perf_counter()
    est = estimate(m.params, m.process(), m.init, m.solver.horizon, args.runs, args.seed, csv_path, args.workers)
    print(f"seed {args.seed}: {est}")
    print(f"wall time: {time.perf_counter() - t0:.2f} s")
    return EXIT_OK


def _export_at(m: Model, t: float, out: Path, workers: int) -> Path:
    stem = f"t{t:g}"
    if t == 0:
        dist = init_distribution(m.params, m.solver.n_grid, m.init)
    else:
        dist = _solve(m, t, workers, PropagationStats())
    write_snapshot(dist, out, stem, t, m.outputs.heatmap_floor)
    return out / stem


def cmd_export(args) -> int:
    m = _model(args)
    times = args.checkpoints if args.checkpoints is not None else m.outputs.checkpoints
    if not times:
        raise ModelError("no checkpoints given (use --checkpoints or outputs.checkpoints)")
    if any(t < 0 for t in times):
        raise ModelError("checkpoints must be nonnegative")
    out = args.out if args.out is not None else Path(m.outputs.dir)
    for t in times:
        stem = _export_at(m, t, out, args.workers)
        print(f"wrote {stem}_inner.csv, {stem}_boundary.csv, {stem}.json, {stem}.pgm")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "linear": cmd_linear, "simulate": cmd_simulate, "export": cmd_export}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ModelError as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (MemoryError, QuadratureError) as exc:
        print(f"resource failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
