"""Discretized state-of-charge distributions and their conservative transformer.

A :class:`SocDistribution` holds three parts:

- ``inner``: an ``n x n`` grid of masses; cell ``(i, j)`` stands for the
  rectangle ``[i da, (i+1) da) x [j db, (j+1) db)`` and is transported via
  its lower-left corner,
- ``boundary``: ``n`` masses on the line ``a = amax``, cell ``j`` standing
  for ``{amax} x [j db, (j+1) db)``,
- ``depleted``: the probability of an empty battery, kept exactly in an
  :class:`~rkibam.exactsum.ExtendedSum`.

Every image point is floored to the cell below it, so charge is never
overstated and ``1 - depleted`` is a lower bound on survival.
"""

from __future__ import annotations

import math
import os
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from decimal import Decimal

import numpy as np
import scipy.sparse as sp

from .core import BatteryParams, Soc, boundary_evolve, boundary_threshold, coefficients
from .exactsum import ExtendedSum
from .loads import DiscreteLoad

INIT_KINDS = ("diagonal-uniform", "box-uniform", "dirac")


@dataclass(frozen=True)
class InitSpec:
    """Initial state-of-charge law.

    ``diagonal-uniform``: total charge uniform between ``low`` and ``high``
    (fractions of capacity), equilibrated wells (equal levels, so ``a = b``
    when ``c = 1/2``).  ``box-uniform``: uniform over ``a_range x b_range``.
    ``dirac``: the single state ``(a, b)``.
    """

    kind: str
    low: float = 0.0
    high: float = 0.0
    a_range: tuple[float, float] = (0.0, 0.0)
    b_range: tuple[float, float] = (0.0, 0.0)
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ValueError(f"unknown initial distribution kind {self.kind!r}")

    @classmethod
    def diagonal_uniform(cls, low: float, high: float) -> InitSpec:
        return cls("diagonal-uniform", low=low, high=high)

    @classmethod
    def box_uniform(cls, a_range, b_range) -> InitSpec:
        return cls("box-uniform", a_range=tuple(a_range), b_range=tuple(b_range))

    @classmethod
    def dirac(cls, a: float, b: float) -> InitSpec:
        return cls("dirac", a=a, b=b)

    def validate(self, params: BatteryParams) -> None:
        eps = params.eps
        if self.kind == "diagonal-uniform":
            ok = 0.0 <= self.low <= self.high <= 1.0
        elif self.kind == "box-uniform":
            (a0, a1), (b0, b1) = self.a_range, self.b_range
            ok = (-eps <= a0 <= a1 <= params.amax + eps) and (-eps <= b0 <= b1 <= params.bmax + eps)
        else:
            ok = (-eps <= self.a <= params.amax + eps) and (-eps <= self.b <= params.bmax + eps)
        if not ok:
            raise ValueError(f"initial support of {self} lies outside [0, amax] x [0, bmax]")

    def sample(self, params: BatteryParams, rng: np.random.Generator) -> Soc:
        if self.kind == "dirac":
            return Soc(self.a, self.b)
        if self.kind == "box-uniform":
            return Soc(float(rng.uniform(*self.a_range)), float(rng.uniform(*self.b_range)))
        f = float(rng.uniform(self.low, self.high))
        return Soc(params.amax * f, params.bmax * f)


@dataclass
class SocDistribution:
    """Discretized triple (inner grid, boundary strip, depleted mass).

    ``mass`` is the flat vector ``[inner.ravel(), boundary]`` of length
    ``n_grid**2 + n_grid``; ``inner`` and ``boundary`` are views into it.
    """

    params: BatteryParams
    n_grid: int
    mass: np.ndarray
    depleted: ExtendedSum = field(default_factory=ExtendedSum)

    def __post_init__(self):
        n = self.n_grid
        if self.mass.shape != (n * n + n,):
            raise ValueError(f"mass vector must have length {n * n + n}")

    @classmethod
    def empty(cls, params: BatteryParams, n_grid: int) -> SocDistribution:
        if n_grid < 1:
            raise ValueError("n_grid must be positive")
        return cls(params, n_grid, np.zeros(n_grid * n_grid + n_grid))

    @property
    def delta_a(self) -> float:
        return self.params.amax / self.n_grid

    @property
    def delta_b(self) -> float:
        return self.params.bmax / self.n_grid

    @property
    def inner(self) -> np.ndarray:
        n = self.n_grid
        return self.mass[: n * n].reshape(n, n)

    @property
    def boundary(self) -> np.ndarray:
        return self.mass[self.n_grid * self.n_grid :]

    def total(self) -> float:
        return math.fsum(self.mass) + float(self.depleted)

    def copy(self) -> SocDistribution:
        return SocDistribution(self.params, self.n_grid, self.mass.copy(), self.depleted.copy())

    def scaled(self, factor: float) -> SocDistribution:
        return SocDistribution(self.params, self.n_grid, self.mass * factor, self.depleted.scaled(factor))

    def add_(self, other: SocDistribution) -> SocDistribution:
        """In-place componentwise mass addition."""
        if other.n_grid != self.n_grid:
            raise ValueError("grid sizes differ")
        self.mass += other.mass
        self.depleted.add_sum(other.depleted)
        return self


def _cell(x: np.ndarray, delta: float, n: int, eps: float) -> np.ndarray:
    # eps absorbs rounding of representative points that sit on a cell edge
    return np.clip(np.floor((x + eps) / delta), 0, n - 1).astype(np.int64)


@dataclass(frozen=True)
class TransferOperator:
    """Linear map of one task on the flat mass vector, plus depletion weights."""

    matrix: sp.csr_matrix
    depletion: np.ndarray

    @property
    def nbytes(self) -> int:
        m = self.matrix
        return m.data.nbytes + m.indices.nbytes + m.indptr.nbytes + self.depletion.nbytes

    def apply(self, dist: SocDistribution) -> SocDistribution:
        new_mass = self.matrix @ dist.mass
        dep = dist.depleted.copy()
        contribution = float(self.depletion @ dist.mass)
        if contribution:
            dep.add(contribution)
        return SocDistribution(dist.params, dist.n_grid, new_mass, dep)


def build_operator(params: BatteryParams, n_grid: int, t: float, load: DiscreteLoad) -> TransferOperator:
    """Assemble the conservative transfer operator of task ``(t, load)``.

    Inner sources follow the approximate bounded step: overflowing images
    land on the boundary at the bound charge reached under the slower
    charging current.  Boundary sources either ride the boundary (load
    strong enough to keep the well full), stay put (the available charge
    dips but ends above capacity), or drop into the grid.
    """
    if t <= 0:
        raise ValueError("task duration must be positive")
    n = n_grid
    amax, eps = params.amax, params.eps
    da, db = amax / n, params.bmax / n
    co = coefficients(params, t)
    size = n * n + n
    rows, cols, vals = [], [], []
    depletion = np.zeros(size)

    ia, ib = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    a = (ia * da).ravel()
    b = (ib * db).ravel()
    src = np.arange(n * n)
    base_a = co.qa * a + co.ra * b
    base_b = co.qb * a + co.rb * b
    # landing bound charge under the slow-charge load; independent of the load
    slow_b = base_b + co.sb * (amax - base_a) / co.sa
    slow_target = n * n + _cell(slow_b, db, n, eps)
    empty_source = a <= 0.0

    for load_i, w in load.points:
        ea = base_a + co.sa * load_i
        eb = base_b + co.sb * load_i
        dead = empty_source | (ea <= 0.0) | (eb < -eps)
        over = ~dead & (ea > amax + eps)
        inside = ~dead & ~over
        depletion[src[dead]] += w
        rows.append(slow_target[over])
        cols.append(src[over])
        rows.append(_cell(ea[inside], da, n, eps) * n + _cell(eb[inside], db, n, eps))
        cols.append(src[inside])
        vals.append(np.full(int(over.sum()) + int(inside.sum()), w))

    bb = np.arange(n) * db
    bsrc = n * n + np.arange(n)
    ride_target = n * n + _cell(boundary_evolve(params, t, bb), db, n, eps)
    for load_i, w in load.points:
        ride = bb >= boundary_threshold(params, load_i) - eps
        ea = co.qa * amax + co.ra * bb + co.sa * load_i
        eb = co.qb * amax + co.rb * bb + co.sb * load_i
        dead = ~ride & ((ea <= 0.0) | (eb < -eps))
        stay = ~ride & ~dead & (ea > amax + eps)
        drop = ~ride & ~dead & ~stay
        depletion[bsrc[dead]] += w
        rows += [ride_target[ride], bsrc[stay], _cell(ea[drop], da, n, eps) * n + _cell(eb[drop], db, n, eps)]
        cols += [bsrc[ride], bsrc[stay], bsrc[drop]]
        vals.append(np.full(int(ride.sum()) + int(stay.sum()) + int(drop.sum()), w))

    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    matrix = sp.csr_matrix((v, (r, c)), shape=(size, size))
    matrix.sum_duplicates()
    return TransferOperator(matrix, depletion)


def _default_budget() -> int:
    try:
        phys = os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_PHYS_PAGES")
    except (ValueError, OSError, AttributeError):
        phys = 4 << 30
    return int(0.4 * phys)


class OperatorCache:
    """Cache of transfer operators bounded by total memory.

    Propagation revisits the same operators cyclically (one charge period
    after another), the worst case for LRU.  So once the budget is spent,
    cached operators stay and further ones are built on demand without
    being stored.
    """

    def __init__(self, max_bytes: int | None = None):
        self.max_bytes = _default_budget() if max_bytes is None else max_bytes
        self._store: dict = {}
        self._bytes = 0
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def get(self, params: BatteryParams, n_grid: int, t: float, load: DiscreteLoad) -> TransferOperator:
        key = (params, n_grid, float(t), load)
        with self._lock:
            op = self._store.get(key)
            if op is not None:
                self.hits += 1
                return op
            self.misses += 1
            op = build_operator(params, n_grid, t, load)
            if self._bytes + op.nbytes <= self.max_bytes:
                self._store[key] = op
                self._bytes += op.nbytes
            return op

    @property
    def nbytes(self) -> int:
        return self._bytes

    def clear(self) -> None:
        with self._lock:
            self._store.clear()
            self._bytes = 0

    def __len__(self) -> int:
        return len(self._store)


default_cache = OperatorCache()


def transform(
    params: BatteryParams,
    dist: SocDistribution,
    t: float,
    load: DiscreteLoad,
    cache: OperatorCache | None = None,
) -> SocDistribution:
    """Conservatively transport ``dist`` through the task ``(t, load)``."""
    if dist.params != params:
        raise ValueError("distribution was built for different battery parameters")
    op = (default_cache if cache is None else cache).get(params, dist.n_grid, t, load)
    return op.apply(dist)


def _overlaps(lo: float, hi: float, delta: float, n: int) -> np.ndarray:
    edges = np.arange(n + 1) * delta
    w = np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo)
    # rounding in the edges leaves slivers of a few ulps next to the range
    w[w <= 1e-9 * delta] = 0.0
    return w


def init_distribution(params: BatteryParams, n_grid: int, spec: InitSpec) -> SocDistribution:
    """Grid distribution of an initial law; partial cells keep their exact overlap mass."""
    spec.validate(params)
    dist = SocDistribution.empty(params, n_grid)
    n, eps = n_grid, params.eps
    if spec.kind == "dirac" or (spec.kind == "diagonal-uniform" and spec.low == spec.high):
        if spec.kind == "dirac":
            a, b = spec.a, spec.b
        else:
            a, b = params.amax * spec.low, params.bmax * spec.low
        j = int(_cell(np.array([b]), dist.delta_b, n, eps)[0])
        if a >= params.amax - eps:
            dist.boundary[j] = 1.0
        else:
            i = int(_cell(np.array([a]), dist.delta_a, n, eps)[0])
            dist.inner[i, j] = 1.0
        return dist
    if spec.kind == "diagonal-uniform":
        # a/amax = b/bmax = f, so the segment only visits diagonal cells (j, j)
        w = _overlaps(spec.low, spec.high, 1.0 / n, n)
        np.fill_diagonal(dist.inner, w / w.sum())
        return dist
    (a0, a1), (b0, b1) = spec.a_range, spec.b_range
    if a0 == a1 or b0 == b1:
        raise ValueError("box-uniform needs a box of positive area; use dirac for points")
    wa = _overlaps(a0, a1, dist.delta_a, n)
    wb = _overlaps(b0, b1, dist.delta_b, n)
    dist.inner[:] = np.outer(wa / wa.sum(), wb / wb.sum())
    return dist


def survival_probability(dist: SocDistribution) -> Decimal:
    """``1 - depleted`` computed exactly."""
    return dist.depleted.complement_decimal()


def marginals_and_export(dist: SocDistribution) -> dict:
    """Scalar summaries plus copies of the grids for export."""
    return {
        "boundary_total": math.fsum(dist.boundary),
        "inner_total": math.fsum(dist.mass[: dist.n_grid**2]),
        "depleted": dist.depleted.to_decimal(),
        "survival": survival_probability(dist),
        "inner": dist.inner.copy(),
        "boundary": dist.boundary.copy(),
    }


@dataclass
class LinearDistribution:
    """Charge distribution of the ideal linear battery on ``n`` cells of ``[0, d]``."""

    d: float
    n_grid: int
    mass: np.ndarray
    depleted: ExtendedSum = field(default_factory=ExtendedSum)

    @property
    def delta(self) -> float:
        return self.d / self.n_grid

    def total(self) -> float:
        return math.fsum(self.mass) + float(self.depleted)

    def scaled(self, factor: float) -> LinearDistribution:
        return LinearDistribution(self.d, self.n_grid, self.mass * factor, self.depleted.scaled(factor))

    def add_(self, other: LinearDistribution) -> LinearDistribution:
        self.mass += other.mass
        self.depleted.add_sum(other.depleted)
        return self

    def copy(self) -> LinearDistribution:
        return LinearDistribution(self.d, self.n_grid, self.mass.copy(), self.depleted.copy())


def linear_from_soc(dist: SocDistribution, n_grid: int | None = None) -> LinearDistribution:
    """Linear-battery distribution with the same total-charge law as ``dist``.

    Each inner cell contributes its lower-corner total charge ``a + b``;
    boundary cells contribute ``amax + b``.
    """
    n_lin = n_grid or 2 * dist.n_grid
    p = dist.params
    delta = p.d / n_lin
    ia, ib = np.meshgrid(np.arange(dist.n_grid), np.arange(dist.n_grid), indexing="ij")
    q_inner = (ia * dist.delta_a + ib * dist.delta_b).ravel()
    q_bound = p.amax + np.arange(dist.n_grid) * dist.delta_b
    q = np.concatenate([q_inner, q_bound])
    cells = _cell(q, delta, n_lin, p.eps)
    mass = np.bincount(cells, weights=dist.mass, minlength=n_lin)
    return LinearDistribution(p.d, n_lin, mass, dist.depleted.copy())


def build_linear_operator(d: float, n_grid: int, t: float, load: DiscreteLoad) -> TransferOperator:
    """1-D analogue of :func:`build_operator` for the linear battery."""
    delta = d / n_grid
    eps = 1e-9 * d
    q = np.arange(n_grid) * delta
    src = np.arange(n_grid)
    rows, cols, vals = [], [], []
    depletion = np.zeros(n_grid)
    for load_i, w in load.points:
        end = q - load_i * t
        dead = (end <= 0.0) & (load_i > 0)
        alive = ~dead
        depletion[dead] += w
        rows.append(_cell(np.minimum(np.maximum(end[alive], 0.0), d), delta, n_grid, eps))
        cols.append(src[alive])
        vals.append(np.full(int(alive.sum()), w))
    matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n_grid, n_grid)
    )
    matrix.sum_duplicates()
    return TransferOperator(matrix, depletion)


_linear_cache: OrderedDict = OrderedDict()
_linear_lock = threading.Lock()


def linear_transform(dist: LinearDistribution, t: float, load: DiscreteLoad) -> LinearDistribution:
    """Conservatively transport a linear-battery distribution through ``(t, load)``."""
    key = (dist.d, dist.n_grid, float(t), load)
    with _linear_lock:
        op = _linear_cache.get(key)
        if op is None:
            op = _linear_cache[key] = build_linear_operator(dist.d, dist.n_grid, t, load)
            if len(_linear_cache) > 4096:
                _linear_cache.popitem(last=False)
    dep = dist.depleted.copy()
    contribution = float(op.depletion @ dist.mass)
    if contribution:
        dep.add(contribution)
    return LinearDistribution(dist.d, dist.n_grid, op.matrix @ dist.mass, dep)
