"""Markov task processes and propagation of SoC distributions through them.

An MTP emits tasks: a state ``s`` runs for ``duration[s]`` integer minutes
under a load drawn from ``load[s]``, then moves to ``s'`` with probability
``P[s, s']``.  :func:`propagate` streams subdistributions through the graph
of (state, start time) vertices in time order, merging labels that meet at
the same vertex.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import BatteryParams
from .dist import (
    LinearDistribution,
    OperatorCache,
    SocDistribution,
    linear_transform,
    transform,
)
from .exactsum import ExtendedSum
from .loads import DEFAULT_COVERAGE, DiscreteLoad, LoadModel, discretize_load


@dataclass
class Mtp:
    """Markov task process ``(states, P, pi, duration, load)``."""

    states: tuple[str, ...]
    P: np.ndarray
    pi: np.ndarray
    duration: tuple[float, ...]
    load: tuple[LoadModel, ...]

    def __post_init__(self):
        n = len(self.states)
        self.P = np.asarray(self.P, dtype=float)
        self.pi = np.asarray(self.pi, dtype=float)
        if len(set(self.states)) != n:
            raise ValueError("state names must be unique")
        if self.P.shape != (n, n) or self.pi.shape != (n,):
            raise ValueError("P must be n x n and pi of length n")
        if len(self.duration) != n or len(self.load) != n:
            raise ValueError("need one duration and one load per state")
        if (self.P < 0).any() or (self.pi < 0).any():
            raise ValueError("probabilities must be nonnegative")
        for s, row in zip(self.states, self.P):
            if abs(math.fsum(row) - 1.0) > 1e-12:
                raise ValueError(f"row of state {s!r} sums to {math.fsum(row)}")
        if abs(math.fsum(self.pi) - 1.0) > 1e-12:
            raise ValueError("initial distribution must sum to 1")
        if any(d < 1 for d in self.duration):
            raise ValueError("durations must be at least 1 minute")

    def __len__(self) -> int:
        return len(self.states)

    def index(self, name: str) -> int:
        return self.states.index(name)

    def successors(self, s: int) -> list[tuple[int, float]]:
        return [(j, float(p)) for j, p in enumerate(self.P[s]) if p > 0]


@dataclass(frozen=True)
class PeriodicCharge:
    """Deterministic cyclic load: ``segments`` of ``(minutes, mA)`` repeated forever."""

    segments: tuple[tuple[float, float], ...]
    phase0: float = 0.0

    def __post_init__(self):
        if not self.segments:
            raise ValueError("charge pattern needs at least one segment")
        if any(d < 1 for d, _ in self.segments):
            raise ValueError("charge segment durations must be at least 1 minute")

    @property
    def period(self) -> float:
        return sum(d for d, _ in self.segments)

    def position(self, t: float) -> tuple[int, float]:
        """Segment index and remaining minutes in it at absolute time ``t``."""
        x = (t + self.phase0) % self.period
        for j, (d, _) in enumerate(self.segments):
            if x < d:
                return j, d - x
            x -= d
        raise AssertionError("unreachable")

    def scaled(self, factor: float) -> PeriodicCharge:
        return PeriodicCharge(tuple((d, i * factor) for d, i in self.segments), self.phase0)


@dataclass
class ComposedMtp(Mtp):
    """Product of an MTP with a periodic charge.

    ``origin[k]`` is ``(task, remaining task minutes, charge segment,
    remaining segment minutes)`` for composed state ``k``.
    """

    origin: tuple[tuple[int, float, int, float], ...] = field(default=())
    base: Mtp | None = None


def compose(m: Mtp, charge: PeriodicCharge) -> ComposedMtp:
    """Superpose a periodic charge on ``m``.

    Each composed state runs until the earlier of the task end and the
    charge segment end; its load is the task load shifted by the segment
    current.  Only states reachable from the initial distribution are built.
    """
    segs = charge.segments
    nseg = len(segs)
    j0, r0 = charge.position(0.0)
    index: dict[tuple, int] = {}
    origin: list[tuple] = []
    edges: list[list[tuple[int, float]]] = []
    queue: list[tuple] = []

    def intern(key) -> int:
        if key not in index:
            index[key] = len(origin)
            origin.append(key)
            edges.append([])
            queue.append(key)
        return index[key]

    initial = {intern((s, float(m.duration[s]), j0, float(r0))): float(p) for s, p in enumerate(m.pi) if p > 0}
    while queue:
        key = queue.pop()
        s, rs, j, rc = key
        k = index[key]
        if rs < rc:
            for s2, p in m.successors(s):
                edges[k].append((intern((s2, float(m.duration[s2]), j, rc - rs)), p))
        elif rc < rs:
            jn = (j + 1) % nseg
            edges[k].append((intern((s, rs - rc, jn, float(segs[jn][0]))), 1.0))
        else:
            jn = (j + 1) % nseg
            for s2, p in m.successors(s):
                edges[k].append((intern((s2, float(m.duration[s2]), jn, float(segs[jn][0]))), p))

    n = len(origin)
    P = np.zeros((n, n))
    for k, out in enumerate(edges):
        for k2, p in out:
            P[k, k2] += p
    pi = np.zeros(n)
    for k, p in initial.items():
        pi[k] = p
    names = tuple(f"{m.states[s]}@{j}:{rs:g}/{rc:g}" for s, rs, j, rc in origin)
    return ComposedMtp(
        states=names,
        P=P,
        pi=pi,
        duration=tuple(min(rs, rc) for _, rs, _, rc in origin),
        load=tuple(m.load[s].shifted(segs[j][1]) for s, _, j, _ in origin),
        origin=tuple(origin),
        base=m,
    )


@dataclass
class PropagationStats:
    vertices: list[tuple[int, float]] = field(default_factory=list)
    transforms: int = 0
    max_frontier: int = 0

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)


Label = SocDistribution | LinearDistribution
StepFn = Callable[[Label, int, float], Label]


def propagate_labels(
    m: Mtp,
    init: Label,
    horizon: float,
    step: StepFn,
    on_level: Callable[[float, dict[int, Label], dict[float, dict[int, Label]]], None] | None = None,
    stats: PropagationStats | None = None,
    workers: int = 1,
) -> Label:
    """Generic label propagation over the reachable (state, time) DAG.

    ``step(label, state, duration)`` transports a label through one task.
    Vertices are processed in increasing time; all in-edges of a vertex are
    merged before it is expanded, and only the pending frontier is kept.
    With ``workers > 1`` the transforms of one time level run in a thread
    pool; merging stays in state order, so results do not depend on it.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    stats = stats if stats is not None else PropagationStats()
    pending: dict[float, dict[int, Label]] = {0.0: {}}
    for s, p in enumerate(m.pi):
        if p > 0:
            pending[0.0][s] = init.scaled(float(p))
    times = [0.0]
    succ = [m.successors(s) for s in range(len(m))]
    final: Label | None = None
    pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def run(job):
        s, label, t2 = job
        return step(label, s, t2 - t)

    try:
        while times:
            t = heapq.heappop(times)
            level = pending.pop(t)
            stats.max_frontier = max(stats.max_frontier, sum(len(v) for v in pending.values()) + len(level))
            if on_level is not None:
                # the level plus the pending labels form the whole frontier
                on_level(t, level, pending)
            order = sorted(level)
            stats.vertices += [(s, t) for s in order]
            if t >= horizon:
                for s in order:
                    final = level[s] if final is None else final.add_(level[s])
                continue
            jobs = [(s, level[s], min(t + m.duration[s], horizon)) for s in order]
            outs = pool.map(run, jobs) if pool is not None else map(run, jobs)
            for (s, _, t2), out in zip(jobs, outs):
                _emit(pending, times, succ[s], out, t2)
                stats.transforms += 1
    finally:
        if pool is not None:
            pool.shutdown()
    assert final is not None
    return final


def _emit(pending, times, succ, out, t2) -> None:
    targets = pending.get(t2)
    if targets is None:
        targets = pending[t2] = {}
        heapq.heappush(times, t2)
    for s2, p in succ:
        piece = out if p == 1.0 else out.scaled(p)
        if s2 in targets:
            targets[s2].add_(piece)
        else:
            targets[s2] = piece


class _Discretizer:
    def __init__(self, m: Mtp, n_load_points: int, coverage: float):
        self._loads: list[DiscreteLoad | None] = [None] * len(m)
        self._m = m
        self._n = n_load_points
        self._coverage = coverage

    def __call__(self, s: int) -> DiscreteLoad:
        d = self._loads[s]
        if d is None:
            d = self._loads[s] = discretize_load(self._m.load[s], self._n, self._coverage)
        return d


def propagate(
    m: Mtp,
    init: SocDistribution,
    horizon: float,
    n_load_points: int = 11,
    coverage: float = DEFAULT_COVERAGE,
    cache: OperatorCache | None = None,
    on_level=None,
    stats: PropagationStats | None = None,
    workers: int = 1,
) -> SocDistribution:
    """SoC distribution at ``horizon`` under the conservative grid transformer."""
    params = init.params
    loads = _Discretizer(m, n_load_points, coverage)
    cache = OperatorCache() if cache is None else cache

    def step(label, s, dt):
        return transform(params, label, dt, loads(s), cache)

    return propagate_labels(m, init, horizon, step, on_level, stats, workers)


def propagate_linear(
    m: Mtp,
    init: LinearDistribution,
    horizon: float,
    n_load_points: int = 11,
    coverage: float = DEFAULT_COVERAGE,
    stats: PropagationStats | None = None,
    workers: int = 1,
) -> LinearDistribution:
    """Same propagation for the ideal linear battery."""
    loads = _Discretizer(m, n_load_points, coverage)

    def step(label, s, dt):
        return linear_transform(label, dt, loads(s))

    return propagate_labels(m, init, horizon, step, stats=stats, workers=workers)


def depletion_bound(
    m: Mtp,
    init: SocDistribution,
    horizon: float,
    n_load_points: int = 11,
    coverage: float = DEFAULT_COVERAGE,
    cache: OperatorCache | None = None,
) -> ExtendedSum:
    """Upper bound on the depletion probability by ``horizon``; survival >= 1 - result."""
    return propagate(m, init, horizon, n_load_points, coverage, cache).depleted


def default_n_grid(capacity_mah: float) -> int:
    """Grid size scaled with capacity for equal relative precision (1200 at 5000 mAh)."""
    return max(1, round(1200 * capacity_mah / 5000))


__all__ = [
    "Mtp",
    "PeriodicCharge",
    "ComposedMtp",
    "compose",
    "PropagationStats",
    "propagate_labels",
    "propagate",
    "propagate_linear",
    "depletion_bound",
    "default_n_grid",
    "BatteryParams",
]
