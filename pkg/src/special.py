# src/special.py
"""
Distribution kernels for the two-sample tests.

Everything is built on the regularized incomplete beta function I_x(a, b),
evaluated with a modified-Lentz continued fraction. Callers that already
know both x and 1 - x pass them separately (``_inc_beta``) so that tiny
tail probabilities are not lost to cancellation.
"""
from __future__ import annotations

import math

from src.errors import DomainError, NumericalConvergenceError


MAX_ITERATIONS = 300
REL_TOLERANCE = 1e-12
_FPMIN = 1e-300


def _check_shape(name: str, value: float) -> None:
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0

    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d

    for m in range(1, MAX_ITERATIONS + 1):
        m2 = 2 * m

        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c

        # odd step
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta

        if abs(delta - 1.0) < REL_TOLERANCE:
            return h

    raise NumericalConvergenceError(a=a, b=b, x=x, iterations=MAX_ITERATIONS)


def _inc_beta(x: float, y: float, a: float, b: float) -> float:
    # y == 1 - x, supplied by the caller when it can be computed without cancellation
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    if a == b and x == y:
        return 0.5

    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(y)
    )
    front = math.exp(ln_front)

    if x < (a + 1.0) / (a + b + 2.0):
        value = front * _beta_continued_fraction(a, b, x) / a
    else:
        value = 1.0 - front * _beta_continued_fraction(b, a, y) / b
    return min(1.0, max(0.0, value))


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b) for 0 <= x <= 1 and a, b > 0."""
    if not math.isfinite(x) or x < 0.0 or x > 1.0:
        raise DomainError(f"x must be in [0, 1], got {x!r}")
    _check_shape("a", a)
    _check_shape("b", b)
    return _inc_beta(x, 1.0 - x, a, b)


# ----------------------------
# Student t
# ----------------------------

def _t_tail_pair(t: float, dof: float) -> float:
    # P(|T| >= |t|)
    if math.isinf(t):
        return 0.0
    t2 = t * t
    denom = dof + t2
    if math.isinf(denom):
        return 0.0
    return _inc_beta(dof / denom, t2 / denom, dof / 2.0, 0.5)


def _check_t_args(t: float, dof: float) -> None:
    if math.isnan(t):
        raise DomainError("t must not be NaN")
    if not math.isfinite(dof) or dof <= 0.0:
        raise DomainError(f"dof must be finite and > 0, got {dof!r}")


def student_t_cdf(t: float, dof: float) -> float:
    _check_t_args(t, dof)
    if t == 0.0:
        return 0.5
    tail = 0.5 * _t_tail_pair(t, dof)
    return 1.0 - tail if t > 0.0 else tail


def student_t_sf(t: float, dof: float) -> float:
    _check_t_args(t, dof)
    if t == 0.0:
        return 0.5
    tail = 0.5 * _t_tail_pair(t, dof)
    return tail if t > 0.0 else 1.0 - tail


def student_t_two_sided_p(t: float, dof: float) -> float:
    _check_t_args(t, dof)
    if t == 0.0:
        return 1.0
    return min(1.0, _t_tail_pair(t, dof))


def student_t_ppf(p: float, dof: float) -> float:
    """Quantile of Student's t by bracketing and bisection on the upper tail."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must be in (0, 1), got {p!r}")
    _check_t_args(0.0, dof)
    if p == 0.5:
        return 0.0

    upper = 1.0 - p if p > 0.5 else p
    lo, hi = 0.0, 1.0
    while 0.5 * _t_tail_pair(hi, dof) > upper:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            raise NumericalConvergenceError(a=dof / 2.0, b=0.5, x=p, iterations=0)

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if 0.5 * _t_tail_pair(mid, dof) > upper:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)
    return q if p > 0.5 else -q


# ----------------------------
# Fisher F
# ----------------------------

def _check_f_args(x: float, d1: float, d2: float) -> None:
    if math.isnan(x) or x < 0.0:
        raise DomainError(f"F ratio must be >= 0, got {x!r}")
    if not math.isfinite(d1) or d1 <= 0.0 or not math.isfinite(d2) or d2 <= 0.0:
        raise DomainError(f"degrees of freedom must be > 0, got ({d1!r}, {d2!r})")


def f_cdf(x: float, d1: float, d2: float) -> float:
    _check_f_args(x, d1, d2)
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    denom = d1 * x + d2
    return _inc_beta(d1 * x / denom, d2 / denom, d1 / 2.0, d2 / 2.0)


def f_sf(x: float, d1: float, d2: float) -> float:
    _check_f_args(x, d1, d2)
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    denom = d1 * x + d2
    return _inc_beta(d2 / denom, d1 * x / denom, d2 / 2.0, d1 / 2.0)
