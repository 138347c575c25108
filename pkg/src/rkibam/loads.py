"""Random task loads and their conservative discretization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

DEFAULT_COVERAGE = 1.0 - 1e-12
KINDS = ("dirac", "uniform", "normal", "discrete")


@dataclass(frozen=True)
class LoadModel:
    """Distribution of a constant task load (mA).

    kinds and their parameters:

    - ``dirac``: ``mean``
    - ``uniform``: ``low``, ``high``
    - ``normal``: ``mean``, ``std``; optional truncation ``low``/``high``
    - ``discrete``: ``points``, a tuple of ``(load, weight)`` pairs
    """

    kind: str
    mean: float = 0.0
    std: float = 0.0
    low: float | None = None
    high: float | None = None
    points: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown load kind {self.kind!r}")
        if self.kind == "uniform":
            if self.low is None or self.high is None or not self.low < self.high:
                raise ValueError("uniform load needs low < high")
        elif self.kind == "normal":
            if not self.std > 0:
                raise ValueError("normal load needs std > 0")
            if self.low is not None and self.high is not None and not self.low < self.high:
                raise ValueError("truncation window is empty")
        elif self.kind == "discrete":
            if not self.points:
                raise ValueError("discrete load needs at least one point")
            total = math.fsum(w for _, w in self.points)
            if abs(total - 1.0) > 1e-12 or any(w < 0 for _, w in self.points):
                raise ValueError(f"discrete weights must be nonnegative and sum to 1, got {total}")

    @classmethod
    def dirac(cls, value: float) -> LoadModel:
        return cls("dirac", mean=float(value))

    @classmethod
    def uniform(cls, low: float, high: float) -> LoadModel:
        return cls("uniform", low=float(low), high=float(high))

    @classmethod
    def normal(cls, mean: float, std: float, low: float | None = None, high: float | None = None) -> LoadModel:
        return cls("normal", mean=float(mean), std=float(std), low=low, high=high)

    @classmethod
    def discrete(cls, points) -> LoadModel:
        return cls("discrete", points=tuple((float(i), float(w)) for i, w in points))

    def shifted(self, offset: float) -> LoadModel:
        """The same distribution translated by a constant current."""
        if offset == 0.0:
            return self
        sh = lambda x: None if x is None else x + offset  # noqa: E731
        return LoadModel(
            self.kind,
            mean=self.mean + offset,
            std=self.std,
            low=sh(self.low),
            high=sh(self.high),
            points=tuple((i + offset, w) for i, w in self.points),
        )

    def _normal_mass(self) -> float:
        lo = -math.inf if self.low is None else self.low
        hi = math.inf if self.high is None else self.high
        return float(ndtr((hi - self.mean) / self.std) - ndtr((lo - self.mean) / self.std))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "dirac":
            return (x >= self.mean).astype(float)
        if self.kind == "uniform":
            return np.clip((x - self.low) / (self.high - self.low), 0.0, 1.0)
        if self.kind == "normal":
            lo = -np.inf if self.low is None else self.low
            hi = np.inf if self.high is None else self.high
            z = (np.clip(x, lo, hi) - self.mean) / self.std
            z0 = (lo - self.mean) / self.std
            return (ndtr(z) - ndtr(z0)) / self._normal_mass()
        pts = np.array(self.points)
        return np.array([pts[pts[:, 0] <= xi, 1].sum() for xi in np.atleast_1d(x)]).reshape(x.shape)

    def pdf(self, x):
        """Density; only defined for the continuous kinds."""
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            inside = (x >= self.low) & (x <= self.high)
            return np.where(inside, 1.0 / (self.high - self.low), 0.0)
        if self.kind == "normal":
            z = (x - self.mean) / self.std
            dens = np.exp(-0.5 * z * z) / (self.std * math.sqrt(2.0 * math.pi)) / self._normal_mass()
            if self.low is not None:
                dens = np.where(x < self.low, 0.0, dens)
            if self.high is not None:
                dens = np.where(x > self.high, 0.0, dens)
            return dens
        raise ValueError(f"{self.kind} load has no density")

    def support(self) -> tuple[float, float]:
        if self.kind == "dirac":
            return self.mean, self.mean
        if self.kind == "uniform":
            return self.low, self.high
        if self.kind == "discrete":
            xs = [i for i, _ in self.points]
            return min(xs), max(xs)
        lo = -math.inf if self.low is None else self.low
        hi = math.inf if self.high is None else self.high
        return lo, hi

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "dirac":
            return self.mean
        if self.kind == "uniform":
            return float(rng.uniform(self.low, self.high))
        if self.kind == "discrete":
            xs, ws = zip(*self.points)
            return float(xs[rng.choice(len(xs), p=ws)])
        if self.low is None and self.high is None:
            return float(rng.normal(self.mean, self.std))
        # inverse-CDF sampling inside the truncation window
        lo = -math.inf if self.low is None else self.low
        hi = math.inf if self.high is None else self.high
        u = rng.uniform(ndtr((lo - self.mean) / self.std), ndtr((hi - self.mean) / self.std))
        return float(self.mean + self.std * ndtri(u))


@dataclass(frozen=True)
class DiscreteLoad:
    """Finite load distribution: ``(load, weight)`` pairs sorted by load."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError("empty discrete load")
        loads = [i for i, _ in self.points]
        if loads != sorted(loads):
            raise ValueError("load points must be sorted ascending")
        total = math.fsum(w for _, w in self.points)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total}, not 1")

    @property
    def loads(self) -> np.ndarray:
        return np.array([i for i, _ in self.points])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.points])

    def __len__(self) -> int:
        return len(self.points)


def _normalized(loads: np.ndarray, weights: np.ndarray) -> DiscreteLoad:
    keep = weights > 0
    loads, weights = loads[keep], weights[keep]
    weights = weights / math.fsum(weights)
    # fold duplicate loads so the points stay strictly sorted
    merged: dict[float, float] = {}
    for i, w in zip(loads.tolist(), weights.tolist()):
        merged[i] = merged.get(i, 0.0) + w
    return DiscreteLoad(tuple(sorted(merged.items())))


def discretize_load(g: LoadModel, n_points: int = 11, coverage: float = DEFAULT_COVERAGE) -> DiscreteLoad:
    """Over-approximating discrete version of ``g``.

    The support window is cut into ``n_points`` equal intervals; each
    interval's probability is placed on its right endpoint (more discharge),
    and any tail mass outside the window goes to the nearest extreme point.
    For unbounded normal loads the window is the central interval holding
    ``coverage`` probability.
    """
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    if not 0.0 < coverage <= 1.0:
        raise ValueError(f"coverage must lie in (0, 1], got {coverage}")

    if g.kind == "dirac":
        return DiscreteLoad(((g.mean, 1.0),))
    if g.kind == "discrete":
        pts = np.array(sorted(g.points))
        return _normalized(pts[:, 0], pts[:, 1])

    if g.kind == "uniform":
        lo, hi = g.low, g.high
    else:
        if coverage == 1.0 and (g.low is None or g.high is None):
            raise ValueError("an untruncated normal load needs coverage < 1")
        half = float(ndtri(0.5 + coverage / 2.0)) * g.std if coverage < 1.0 else math.inf
        lo = g.mean - half if g.low is None else max(g.low, g.mean - half)
        hi = g.mean + half if g.high is None else min(g.high, g.mean + half)

    edges = np.linspace(lo, hi, n_points + 1)
    cdf = g.cdf(edges)
    weights = np.diff(cdf)
    weights[0] += cdf[0]
    weights[-1] += 1.0 - cdf[-1]
    return _normalized(edges[1:], weights)
