"""Continuous single-task oracle for the unbounded random KiBaM.

For an initial density ``f0`` and a load density ``g``, the state after a
task of length ``T`` has density::

    f_T(x, y) = integral of f0(K^{-1}_{T,i}[x; y]) * exp(k T) * g(i) di

Used to validate the grid transformer away from the capacity bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core import BatteryParams, Soc, coefficients, inverse_jacobian, step_inverse
from .loads import LoadModel


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


@dataclass(frozen=True)
class UniformBox:
    """Uniform initial density on ``a_range x b_range``."""

    a_range: tuple[float, float]
    b_range: tuple[float, float]

    @property
    def support(self):
        return self.a_range, self.b_range

    def pdf(self, a: float, b: float) -> float:
        (a0, a1), (b0, b1) = self.a_range, self.b_range
        if a0 <= a <= a1 and b0 <= b <= b1:
            return 1.0 / ((a1 - a0) * (b1 - b0))
        return 0.0


@dataclass(frozen=True)
class IndependentNormal:
    """Product of two normal densities, truncated to +-``width`` sigma."""

    mean_a: float
    mean_b: float
    std_a: float
    std_b: float
    width: float = 9.0

    @property
    def support(self):
        w = self.width
        return (
            (self.mean_a - w * self.std_a, self.mean_a + w * self.std_a),
            (self.mean_b - w * self.std_b, self.mean_b + w * self.std_b),
        )

    def pdf(self, a: float, b: float) -> float:
        za = (a - self.mean_a) / self.std_a
        zb = (b - self.mean_b) / self.std_b
        if abs(za) > self.width or abs(zb) > self.width:
            return 0.0
        return math.exp(-0.5 * (za * za + zb * zb)) / (2.0 * math.pi * self.std_a * self.std_b)


def _load_window(g: LoadModel) -> tuple[float, float]:
    lo, hi = g.support()
    if g.kind == "normal":
        lo = max(lo, g.mean - 12.0 * g.std)
        hi = min(hi, g.mean + 12.0 * g.std)
    return lo, hi


def _quad(f, lo, hi, points=(), epsabs=1e-10, limit=200):
    pts = sorted(p for p in set(points) if lo < p < hi)
    with np.errstate(all="ignore"):
        val, err, *info = integrate.quad(f, lo, hi, points=pts or None, epsabs=epsabs, epsrel=1e-10, limit=limit, full_output=1)
    if len(info) >= 2 and err > max(100 * epsabs, 1e-8):
        raise QuadratureError(f"quadrature failed: {info[1]} (error estimate {err:.2e})")
    return val


def density_at(params: BatteryParams, f0, g: LoadModel, t: float, x: float, y: float) -> float:
    """Density of the state after task ``(t, g)`` at the point ``(x, y)``."""
    jac = inverse_jacobian(params, t)
    if g.kind == "dirac":
        a0, b0 = step_inverse(params, t, g.mean, Soc(x, y))
        return f0.pdf(a0, b0) * jac
    if g.kind == "discrete":
        return sum(w * f0.pdf(*step_inverse(params, t, i, Soc(x, y))) * jac for i, w in g.points)

    lo, hi = _load_window(g)
    # the preimage moves affinely in the load; find where it crosses the support box
    base = step_inverse(params, t, 0.0, Soc(x, y))
    unit = step_inverse(params, t, 1.0, Soc(x, y))
    slope = (unit.a - base.a, unit.b - base.b)
    points = [lo, hi]
    for (e0, e1), b0, s in zip(f0.support, base, slope):
        if s != 0.0:
            points += [(e0 - b0) / s, (e1 - b0) / s]

    def integrand(i: float) -> float:
        return f0.pdf(base.a + slope[0] * i, base.b + slope[1] * i) * float(g.pdf(i))

    return jac * _quad(integrand, lo, hi, points)


def power_probability(params: BatteryParams, f0, g: LoadModel, t: float) -> float:
    """Probability that the unbounded battery powers the task ``(t, g)``.

    Equal to the mass of the transported density on the open positive
    quadrant; evaluated in pulled-back coordinates, where that region is
    the set of initial states whose endpoint is positive.
    """
    co = coefficients(params, t)
    (a_lo, a_hi), (b_lo, b_hi) = f0.support

    def lower_b(a0: float, i: float) -> float:
        # endpoint a > 0 and b > 0 are half-planes in b0 (ra, rb > 0)
        return max(b_lo, (-co.sa * i - co.qa * a0) / co.ra, (-co.sb * i - co.qb * a0) / co.rb)

    def mass_given(i: float) -> float:
        def over_a(a0: float) -> float:
            lb = lower_b(a0, i)
            if lb >= b_hi:
                return 0.0
            return _quad(lambda b0: f0.pdf(a0, b0), lb, b_hi, epsabs=1e-12)

        # kinks where a limiting half-plane crosses the b-range edges
        pts = []
        for q, r, s in ((co.qa, co.ra, co.sa), (co.qb, co.rb, co.sb)):
            if q != 0.0:
                pts += [(-s * i - r * b_lo) / q, (-s * i - r * b_hi) / q]
        if co.ra > 0 and co.qa * co.rb - co.qb * co.ra != 0.0:
            # where the two half-plane limits swap
            pts.append((i * (co.sb * co.ra - co.sa * co.rb)) / (co.qa * co.rb - co.qb * co.ra))
        return _quad(over_a, a_lo, a_hi, pts, epsabs=1e-11)

    if t == 0.0 or co.ra == 0.0:
        raise ValueError("task duration must be positive")
    if g.kind == "dirac":
        return mass_given(g.mean)
    if g.kind == "discrete":
        return math.fsum(w * mass_given(i) for i, w in g.points)
    lo, hi = _load_window(g)
    return _quad(lambda i: mass_given(i) * float(g.pdf(i)), lo, hi, [lo, hi], epsabs=1e-9)


def boundary_inverse(params: BatteryParams, t: float, a: float, b: float) -> tuple[float, float]:
    """Bound charge and load that carry ``(amax, B)`` to ``(a, b)`` in time ``t``.

    Returns ``(B, I)``; the map's Jacobian is :func:`boundary_inverse_jacobian`.
    """
    co = coefficients(params, t)
    det = co.ra * co.sb - co.sa * co.rb
    ra_rhs = a - co.qa * params.amax
    rb_rhs = b - co.qb * params.amax
    bound = (co.sb * ra_rhs - co.sa * rb_rhs) / det
    load = (co.ra * rb_rhs - co.rb * ra_rhs) / det
    return bound, load


def boundary_inverse_jacobian(params: BatteryParams, t: float) -> float:
    co = coefficients(params, t)
    return 1.0 / abs(co.ra * co.sb - co.sa * co.rb)
