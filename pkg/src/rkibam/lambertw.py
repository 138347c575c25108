"""Real branches of the Lambert W (product log) function.

Halley iteration from branch-appropriate starting points, following the
scheme of Corless et al. (1996).  Only the two real branches are provided:
``"principal"`` (W0, defined for x >= -1/e) and ``"minus-one"`` (W-1, defined
for -1/e <= x < 0).
"""

from __future__ import annotations

import math

INV_E = math.exp(-1.0)
BRANCHES = ("principal", "minus-one")

_TOL = 1e-15
_MAX_ITER = 50


class LambertDomainError(ValueError):
    """Raised when the argument lies outside the real domain of a branch."""


def _halley(w: float, x: float) -> float:
    for _ in range(_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if abs(dw) <= _TOL * (1.0 + abs(w)):
            break
    return w


def _branch_point_guess(x: float, sign: float) -> float:
    # series around -1/e in p = sqrt(2(e x + 1)); sign=+1 for W0, -1 for W-1
    p = sign * math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
    return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3


def lambert_w(branch: str, x: float) -> float:
    """Evaluate a real branch of W, the inverse of ``w -> w * exp(w)``.

    Parameters
    ----------
    branch : ``"principal"`` or ``"minus-one"``
    x : argument; ``x >= -1/e`` for the principal branch and
        ``-1/e <= x < 0`` for the minus-one branch.

    Raises
    ------
    LambertDomainError
        If ``x`` lies outside the branch's real domain.
    """
    if branch not in BRANCHES:
        raise ValueError(f"unknown branch {branch!r}")
    if math.isnan(x):
        raise LambertDomainError("W(nan) is undefined")
    # tolerate the representation error of -1/e itself
    if x < -INV_E:
        if x > -INV_E * (1.0 + 4e-16):
            x = -INV_E
        else:
            raise LambertDomainError(f"W is not real for x={x!r} < -1/e")
    if x == -INV_E:
        return -1.0

    if branch == "principal":
        if x == 0.0:
            return 0.0
        if math.isinf(x):
            return math.inf
        if x < -0.25:
            w = _branch_point_guess(x, 1.0)
        elif x < 3.0:
            w = math.log1p(x) if x > -0.25 else x
        else:
            lx = math.log(x)
            w = lx - math.log(lx)
        return _halley(w, x)

    if x >= 0.0:
        raise LambertDomainError(f"W-1 is not real for x={x!r} >= 0")
    if x < -0.25:
        w = _branch_point_guess(x, -1.0)
    else:
        l1 = math.log(-x)
        w = l1 - math.log(-l1)
    return _halley(w, x)


def lambert_w_of_exp(branch: str, sign: float, log_abs_x: float) -> float | None:
    """W(sign * exp(log_abs_x)) without forming the possibly overflowing argument.

    Returns ``None`` when the argument is outside the branch's real domain.
    Used by the hitting-time solver, whose arguments carry an exponential
    factor that routinely over- or underflows.
    """
    if sign > 0:
        if branch != "principal":
            return None
        if log_abs_x < 700.0:
            return lambert_w("principal", math.exp(log_abs_x))
        # w + ln w = L, Newton from the asymptotic start
        w = log_abs_x - math.log(log_abs_x)
        for _ in range(_MAX_ITER):
            dw = (w + math.log(w) - log_abs_x) / (1.0 + 1.0 / w)
            w -= dw
            if abs(dw) <= _TOL * abs(w):
                break
        return w

    if log_abs_x > -1.0 + 1e-15:
        if log_abs_x <= -1.0 + 1e-12:
            return -1.0
        return None
    if log_abs_x > -700.0:
        return lambert_w(branch, -math.exp(log_abs_x))
    if branch == "principal":
        # W0(x) ~ x for tiny |x|
        return -math.exp(log_abs_x)
    # W-1: w + ln(-w) = L with w < -1
    w = log_abs_x - math.log(-log_abs_x)
    for _ in range(_MAX_ITER):
        dw = (w + math.log(-w) - log_abs_x) / (1.0 + 1.0 / w)
        w -= dw
        if abs(dw) <= _TOL * abs(w):
            break
    return w
