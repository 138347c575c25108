"""Trajectory sampling with the exact bounded KiBaM.

Each run draws an initial state, then walks the MTP, drawing a load per
task and applying the exact capacity-bounded step (true hitting times).
The estimator brackets the grid solver from above: grid survival should
never exceed the sampled survival by more than sampling noise.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import BatteryParams, Soc, depletion_time, step_bounded, step_unbounded
from .dist import InitSpec
from .mtp import Mtp


class RunResult(NamedTuple):
    depleted: bool
    soc: Soc
    depletion_time: float | None


@dataclass(frozen=True)
class Estimate:
    survival: float
    std_error: float
    n_runs: int
    n_depleted: int

    def __str__(self) -> str:
        return f"survival {self.survival:.6f} +- {self.std_error:.6f} ({self.n_depleted}/{self.n_runs} depleted)"


def run_rng(seed: int, run: int) -> np.random.Generator:
    """Generator of run ``run`` derived deterministically from the master seed."""
    return np.random.default_rng([seed, run])


def _pick(cum: np.ndarray, rng: np.random.Generator) -> int:
    return min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), len(cum) - 1)


def sample_run(
    params: BatteryParams,
    m: Mtp,
    init: InitSpec,
    horizon: float,
    seed: int | np.random.Generator,
    _cum: tuple[np.ndarray, np.ndarray] | None = None,
) -> RunResult:
    """Simulate one trajectory up to ``horizon`` or depletion."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pi_cum, p_cum = _cum if _cum is not None else (np.cumsum(m.pi), np.cumsum(m.P, axis=1))
    soc = init.sample(params, rng)
    if soc.a <= 0.0:
        return RunResult(True, Soc(0.0, 0.0), 0.0)
    s = _pick(pi_cum, rng)
    t = 0.0
    while t < horizon:
        dt = min(m.duration[s], horizon - t)
        load = m.load[s].sample(rng)
        end = step_unbounded(params, dt, load, soc)
        if end.a <= 0.0:
            # the available charge cannot come back up from zero within one task
            hit = depletion_time(params, load, soc)
            return RunResult(True, Soc(0.0, 0.0), t + (hit if hit is not None and hit <= dt else dt))
        soc = step_bounded(params, dt, load, soc)
        t += dt
        s = _pick(p_cum[s], rng)
    return RunResult(False, soc, None)


def _count(args) -> tuple[int, list]:
    params, m, init, horizon, seed, runs, keep = args
    cum = (np.cumsum(m.pi), np.cumsum(m.P, axis=1))
    n_dep, rows = 0, []
    for r in runs:
        res = sample_run(params, m, init, horizon, run_rng(seed, r), cum)
        n_dep += res.depleted
        if keep:
            rows.append((r, res))
    return n_dep, rows


def estimate(
    params: BatteryParams,
    m: Mtp,
    init: InitSpec,
    horizon: float,
    n_runs: int,
    seed: int = 0,
    csv_path=None,
    workers: int = 1,
) -> Estimate:
    """Survival fraction over ``n_runs`` independent runs, with binomial standard error.

    Run ``r`` always uses the generator ``run_rng(seed, r)``, so the result
    does not depend on ``workers``.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    keep = csv_path is not None
    if workers > 1:
        chunks = [range(w, n_runs, workers) for w in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_count, [(params, m, init, horizon, seed, c, keep) for c in chunks]))
    else:
        parts = [_count((params, m, init, horizon, seed, range(n_runs), keep))]
    n_dep = sum(k for k, _ in parts)
    if keep:
        rows = sorted((row for _, rs in parts for row in rs), key=lambda x: x[0])
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["run", "depleted", "a", "b", "depletion_time"])
            for r, res in rows:
                writer.writerow([r, int(res.depleted), repr(res.soc.a), repr(res.soc.b),
                                 "" if res.depletion_time is None else repr(res.depletion_time)])
    surv = 1.0 - n_dep / n_runs
    return Estimate(surv, math.sqrt(surv * (1.0 - surv) / n_runs), n_runs, n_dep)
