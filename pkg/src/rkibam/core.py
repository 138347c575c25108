"""Deterministic kinetic battery model (KiBaM).

Units: charge in mA*min, time in minutes, current in mA.  A positive load
discharges the battery, a negative load charges it.

The two wells evolve as::

    a' = -I + c k b - (1 - c) k a
    b' = (1 - c) k a - c k b,        k = p / (c (1 - c))

whose solution is affine in (a0, b0, I); :func:`coefficients` returns the
six time-dependent factors of that affine map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .lambertw import lambert_w, lambert_w_of_exp

MAH = 60.0  # mA*min per mAh
EPS_REL = 1e-9  # bound comparisons use EPS_REL * capacity


@dataclass(frozen=True)
class BatteryParams:
    """KiBaM parameters.

    c is the width of the available-charge well, p the diffusion rate
    (1/min) and d the total capacity in mA*min.
    """

    c: float
    p: float
    d: float

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise ValueError(f"c must lie in (0, 1), got {self.c}")
        if not (self.p > 0.0 and math.isfinite(self.p)):
            raise ValueError(f"p must be positive, got {self.p}")
        if not (self.d > 0.0 and math.isfinite(self.d)):
            raise ValueError(f"d must be positive, got {self.d}")

    @classmethod
    def from_mah(cls, c: float, p: float, capacity_mah: float) -> BatteryParams:
        return cls(c=c, p=p, d=capacity_mah * MAH)

    @classmethod
    def from_k(cls, c: float, k: float, d: float) -> BatteryParams:
        return cls(c=c, p=k * c * (1.0 - c), d=d)

    @property
    def k(self) -> float:
        return self.p / (self.c * (1.0 - self.c))

    @property
    def amax(self) -> float:
        return self.c * self.d

    @property
    def bmax(self) -> float:
        return self.d - self.amax

    @property
    def eps(self) -> float:
        return EPS_REL * self.d


class Soc(NamedTuple):
    """State of charge: available charge ``a`` and bound charge ``b``."""

    a: float
    b: float


class Coefficients(NamedTuple):
    qa: float
    ra: float
    sa: float
    qb: float
    rb: float
    sb: float
    t: float


def coefficients(params: BatteryParams, t: float) -> Coefficients:
    """Coefficients of a0, b0 and I in the closed-form solution at time t."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    c, k = params.c, params.k
    e = math.exp(-k * t)
    # 1 - e without cancellation for small k t
    one_minus_e = -math.expm1(-k * t)
    return Coefficients(
        qa=(1.0 - c) * e + c,
        ra=c * one_minus_e,
        sa=-(1.0 - c) * one_minus_e / k - t * c,
        qb=(1.0 - c) * one_minus_e,
        rb=c * e + (1.0 - c),
        sb=(1.0 - c) * one_minus_e / k - t * (1.0 - c),
        t=t,
    )


def step_unbounded(params: BatteryParams, t: float, load: float, s0: Soc) -> Soc:
    """Unbounded evolution of ``s0`` under constant ``load`` for ``t`` minutes."""
    co = coefficients(params, t)
    a0, b0 = s0
    return Soc(
        co.qa * a0 + co.ra * b0 + co.sa * load,
        co.qb * a0 + co.rb * b0 + co.sb * load,
    )


def step_inverse(params: BatteryParams, t: float, load: float, s: Soc) -> Soc:
    """Initial state that :func:`step_unbounded` maps onto ``s``.

    The inverse has Jacobian determinant ``exp(k t)``
    (see :func:`inverse_jacobian`).
    """
    co = coefficients(params, t)
    ekt = math.exp(params.k * t)
    a, b = s
    return Soc(
        ekt * (co.rb * a - co.ra * b + (co.ra * co.sb - co.rb * co.sa) * load),
        ekt * (-co.qb * a + co.qa * b + (co.qb * co.sa - co.qa * co.sb) * load),
    )


def inverse_jacobian(params: BatteryParams, t: float) -> float:
    return math.exp(params.k * t)


def boundary_threshold(params: BatteryParams, load: float) -> float:
    """Smallest bound charge at which ``load`` keeps a full available well full."""
    return params.bmax + load * (1.0 - params.c) / params.p


def boundary_evolve(params: BatteryParams, t: float, b0: float) -> float:
    """Bound charge after ``t`` minutes with the available well pinned at amax.

    Independent of the load, provided ``b0 >= boundary_threshold(load)``.
    """
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    e = math.exp(-params.c * params.k * t)
    return e * b0 + (1.0 - e) * params.bmax


def _level_roots(params: BatteryParams, load: float, s0: Soc, level: float) -> list[float]:
    """All real t solving a_{t,load}(s0) = level, Newton-polished."""
    c, k = params.c, params.k
    a0, b0 = s0
    # a_t - level = u e^{-kt} + v t + w
    u = (1.0 - c) * a0 - c * b0 + (1.0 - c) * load / k
    v = -c * load
    w = c * (a0 + b0) - (1.0 - c) * load / k - level

    def h(t: float) -> float:
        return u * math.exp(-k * t) + v * t + w

    def dh(t: float) -> float:
        return -k * u * math.exp(-k * t) + v

    roots: list[float] = []
    if v == 0.0:
        if u != 0.0 and 0.0 < -w / u:
            roots.append(-math.log(-w / u) / k)
    elif u == 0.0:
        roots.append(-w / v)
    else:
        # with tau = t + w/v:  k tau e^{k tau} = -(k u / v) e^{k w / v}
        ratio = -k * u / v
        sign = 1.0 if ratio > 0 else -1.0
        log_abs = math.log(abs(ratio)) + k * w / v
        for branch in ("principal", "minus-one"):
            wv = lambert_w_of_exp(branch, sign, log_abs)
            if wv is not None:
                roots.append(wv / k - w / v)

    polished = []
    scale = max(abs(level), params.d)
    for t in roots:
        if not math.isfinite(t):
            continue
        for _ in range(3):
            try:
                d = dh(t)
                if d == 0.0 or abs(h(t)) <= 1e-13 * scale:
                    break
                t -= h(t) / d
            except OverflowError:
                break
        polished.append(t)
    return polished


def hit_time_upper(params: BatteryParams, load: float, s0: Soc) -> float | None:
    """Largest positive time at which the available charge equals amax.

    ``None`` when no positive real solution exists.
    """
    if s0.a > params.amax + params.eps:
        raise ValueError("available charge above capacity")
    roots = [t for t in _level_roots(params, load, s0, params.amax) if t > 0.0]
    return max(roots) if roots else None


def depletion_time(params: BatteryParams, load: float, s0: Soc) -> float | None:
    """First positive time at which the available charge reaches zero."""
    roots = [t for t in _level_roots(params, load, s0, 0.0) if t > 0.0]
    return min(roots) if roots else None


def slow_charge_load(params: BatteryParams, t: float, s0: Soc) -> float:
    """Constant load under which the available charge ends exactly at amax after t."""
    if t <= 0:
        raise ValueError(f"duration must be positive, got {t}")
    co = coefficients(params, t)
    return (params.amax - co.qa * s0.a - co.ra * s0.b) / co.sa


def _check_box(params: BatteryParams, s0: Soc) -> None:
    eps = params.eps
    if not (-eps <= s0.a <= params.amax + eps and -eps <= s0.b <= params.bmax + eps):
        raise ValueError(f"state {tuple(s0)} outside [0, amax] x [0, bmax]")


_EMPTY = Soc(0.0, 0.0)


def step_bounded(params: BatteryParams, t: float, load: float, s0: Soc) -> Soc:
    """Capacity-bounded evolution with the exact hitting time."""
    _check_box(params, s0)
    if s0.a <= 0.0:
        return _EMPTY
    end = step_unbounded(params, t, load, s0)
    if end.a <= 0.0:
        return _EMPTY
    if end.a <= params.amax:
        return end

    on_boundary = s0.a >= params.amax - params.eps
    if on_boundary and s0.b >= boundary_threshold(params, load) - params.eps:
        t_hit = 0.0
    else:
        t_hit = hit_time_upper(params, load, Soc(min(s0.a, params.amax), s0.b))
        if t_hit is None or t_hit > t:
            # only reachable through rounding at the box face
            t_hit = 0.0 if on_boundary else t
    hit = step_unbounded(params, t_hit, load, s0)
    return Soc(params.amax, boundary_evolve(params, t - t_hit, hit.b))


def step_bounded_approx(params: BatteryParams, t: float, load: float, s0: Soc) -> Soc:
    """Conservative variant of :func:`step_bounded`.

    When the available charge would overflow, the load is replaced by the
    slower charging current that reaches amax exactly at the end of the task.
    The result never exceeds the exact bounded step componentwise.
    """
    _check_box(params, s0)
    if s0.a <= 0.0:
        return _EMPTY
    end = step_unbounded(params, t, load, s0)
    if end.a <= 0.0:
        return _EMPTY
    if end.a <= params.amax:
        return end
    slow = step_unbounded(params, t, slow_charge_load(params, t, s0), s0)
    return Soc(params.amax, slow.b)


def powers_task(params: BatteryParams, s0: Soc, t: float, load: float) -> bool:
    """Whether the battery stays strictly positive for the whole task.

    The endpoint check suffices because the available charge, once it
    crosses zero, never comes back under a constant load.
    """
    if not (s0.a > 0.0 and s0.b > 0.0):
        raise ValueError("powers_task needs a strictly positive state")
    end = step_unbounded(params, t, load, s0)
    return end.a > 0.0 and end.b > 0.0


def linear_step(d: float, t: float, load: float, q0: float) -> float:
    """Ideal linear battery: q' = clamp(q0 - load * t, 0, d)."""
    if not 0.0 <= q0 <= d:
        raise ValueError(f"charge {q0} outside [0, {d}]")
    return min(max(q0 - load * t, 0.0), d)


__all__ = [
    "MAH",
    "BatteryParams",
    "Soc",
    "Coefficients",
    "coefficients",
    "step_unbounded",
    "step_inverse",
    "inverse_jacobian",
    "boundary_threshold",
    "boundary_evolve",
    "lambert_w",
    "hit_time_upper",
    "depletion_time",
    "slow_charge_load",
    "step_bounded",
    "step_bounded_approx",
    "powers_task",
    "linear_step",
]
