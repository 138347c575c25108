"""Exact accumulation of nonnegative probability masses.

The depletion mass of a long run is a sum of ~10^6 contributions spanning
hundreds of orders of magnitude.  :class:`ExtendedSum` keeps it as a
Shewchuk expansion: a list of nonoverlapping doubles whose exact sum is the
represented value.  Addition is exact; scaling by a double is correct to
about ``53 * max_partials`` bits: the expansion is truncated afterwards so
repeated scaling cannot grow it without bound.
"""

from __future__ import annotations

import math
from decimal import Decimal, localcontext
from typing import Iterable

_SPLITTER = 134217729.0  # 2**27 + 1


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a: float) -> tuple[float, float]:
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def _two_product(a: float, b: float) -> tuple[float, float]:
    p = a * b
    if not math.isfinite(p) or p == 0.0:
        return p, 0.0
    if abs(a) > 1e290 or abs(b) > 1e290:
        return p, 0.0
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def _renormalized(acc: ExtendedSum, k: int) -> list[float]:
    # peel off correctly rounded leading parts; each is at most half an ulp
    # of the one before, so k of them carry about 53 k bits
    rest = acc.copy()
    parts: list[float] = []
    for _ in range(k):
        hi = math.fsum(rest._partials)
        if hi == 0.0:
            break
        parts.append(hi)
        rest.add(-hi)
    return parts[::-1]


class ExtendedSum:
    """Sum of doubles held exactly as nonoverlapping partials."""

    __slots__ = ("_partials",)

    def __init__(self, values: Iterable[float] = ()):
        self._partials: list[float] = []
        for v in values:
            self.add(v)

    def add(self, x: float) -> ExtendedSum:
        x = float(x)
        if x == 0.0:
            return self
        if not math.isfinite(x):
            raise ValueError(f"cannot accumulate {x!r}")
        partials = self._partials
        i = 0
        for y in partials:
            if abs(x) < abs(y):
                x, y = y, x
            hi, lo = _two_sum(x, y)
            if lo:
                partials[i] = lo
                i += 1
            x = hi
        partials[i:] = [x] if x else []
        return self

    def add_sum(self, other: ExtendedSum) -> ExtendedSum:
        for p in other._partials:
            self.add(p)
        return self

    def __iadd__(self, other):
        if isinstance(other, ExtendedSum):
            return self.add_sum(other)
        return self.add(other)

    def __add__(self, other):
        out = self.copy()
        out += other
        return out

    def scaled(self, factor: float, max_partials: int = 4) -> ExtendedSum:
        """``factor * self``, rounded to ``max_partials`` components once it grows past twice that."""
        out = ExtendedSum()
        for p in self._partials:
            hi, lo = _two_product(p, factor)
            out.add(hi)
            out.add(lo)
        # renormalize lazily; the slack keeps the cost amortized
        if len(out._partials) > 2 * max_partials:
            out._partials = _renormalized(out, max_partials)
        return out

    def copy(self) -> ExtendedSum:
        out = ExtendedSum()
        out._partials = list(self._partials)
        return out

    @property
    def partials(self) -> tuple[float, ...]:
        return tuple(self._partials)

    @classmethod
    def from_partials(cls, partials: Iterable[float]) -> ExtendedSum:
        """Rebuild from :attr:`partials` output (trusted to be an expansion)."""
        out = cls()
        out._partials = [float(p) for p in partials]
        return out

    def __float__(self) -> float:
        return math.fsum(self._partials)

    def to_decimal(self) -> Decimal:
        # every double is a finite binary fraction, so 1200 digits is exact
        with localcontext() as ctx:
            ctx.prec = 1200
            total = Decimal(0)
            for p in self._partials:
                total += Decimal(p)
            return total

    def complement_decimal(self) -> Decimal:
        """Exact ``1 - self``."""
        with localcontext() as ctx:
            ctx.prec = 1200
            return Decimal(1) - self.to_decimal()

    def __eq__(self, other) -> bool:
        if isinstance(other, ExtendedSum):
            return self.to_decimal() == other.to_decimal()
        return NotImplemented

    def __repr__(self) -> str:
        return f"ExtendedSum({format_decimal(self.to_decimal())})"


def format_decimal(value: Decimal, digits: int = 30) -> str:
    """Scientific notation with ``digits`` significant digits."""
    if value == 0:
        return "0"
    return f"{value:.{digits - 1}E}"
