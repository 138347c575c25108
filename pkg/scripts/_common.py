"""Helpers shared by the experiment scripts."""

from __future__ import annotations

import argparse
import csv
import time
from pathlib import Path

from rkibam.dist import init_distribution, linear_from_soc
from rkibam.modelfile import load_model
from rkibam.mtp import propagate, propagate_linear

DAY = 24 * 60.0


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--model", default="satellite")
    p.add_argument("--days", type=float, default=28.0, help="horizon in days (default 28)")
    p.add_argument("--n-grid", type=int, help="cells per axis (default scales with capacity)")
    p.add_argument("--n-load-points", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, help="write the result table as CSV")
    return p


def run(args, capacity=None, charge_scale=None, load_std=None, linear=False) -> dict:
    """Grid depletion bound (and optionally the linear-battery one) for one setting."""
    m = load_model(args.model).with_overrides(capacity, args.days * DAY, args.n_grid, args.n_load_points, charge_scale)
    if load_std is not None:
        m = m.with_load_std(load_std)
    init = init_distribution(m.params, m.solver.n_grid, m.init)
    t0 = time.perf_counter()
    d = propagate(m.process(), init, m.solver.horizon, m.solver.n_load_points, m.solver.coverage,
                  workers=args.workers)
    row = {
        "capacity_mAh": m.capacity_mah,
        "n_grid": m.solver.n_grid,
        "days": args.days,
        "depletion": float(d.depleted),
        "wall_s": round(time.perf_counter() - t0, 1),
    }
    if linear:
        lin = propagate_linear(m.process(), linear_from_soc(init), m.solver.horizon, m.solver.n_load_points,
                               m.solver.coverage)
        row["linear_depletion"] = float(lin.depleted)
    return row


def report(rows: list[dict], out: Path | None) -> None:
    keys = list(rows[0])
    print("  ".join(f"{k:>16}" for k in keys))
    for r in rows:
        print("  ".join(f"{r[k]:>16.6g}" if isinstance(r[k], float) else f"{r[k]!s:>16}" for k in keys))
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            w.writerows(rows)
