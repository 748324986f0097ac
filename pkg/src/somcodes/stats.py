"""Welch's unequal-variance t-test with a self-contained Student-t CDF.

The two-sided p value is the regularized incomplete beta function
I_x(df/2, 1/2) at x = df/(df + t^2), evaluated with a modified Lentz
continued fraction, so no statistics dependency is needed.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidArgumentError, NumericError

_MAX_ITER = 300
_EPS = 3e-16
_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
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
        if abs(delta - 1.0) < _EPS:
            return h
    raise NumericError(f"incomplete beta did not converge for a={a} b={b} x={x}")


def reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise InvalidArgumentError(f"beta parameters must be positive, got {a}, {b}")
    if not (0.0 <= x <= 1.0):
        raise InvalidArgumentError(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # the continued fraction converges fast only below the distribution mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with df degrees of freedom."""
    if df <= 0:
        raise InvalidArgumentError(f"degrees of freedom must be > 0, got {df}")
    if t == 0.0:
        return 1.0
    return reg_inc_beta(0.5 * df, 0.5, df / (df + t * t))


def welch_t_test(sample_a, sample_b) -> tuple[float, float]:
    """Welch's two-sided t-test; returns (t statistic, p value).

    Uses sample variances (ddof=1) and the Welch-Satterthwaite degrees of
    freedom. Both samples need >= 2 elements and together must carry some
    variance.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.size < 2 or b.size < 2:
        raise InvalidArgumentError("each sample needs at least 2 values")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidArgumentError("samples contain non-finite values")
    na, nb = a.size, b.size
    va, vb = a.var(ddof=1), b.var(ddof=1)
    sa, sb = va / na, vb / nb
    denom = sa + sb
    if denom == 0.0:
        raise NumericError(
            "both samples have zero variance; the t statistic is undefined - "
            "compare the values for exact equality instead"
        )
    t = float((a.mean() - b.mean()) / math.sqrt(denom))
    df = denom * denom / (
        (sa * sa) / (na - 1) + (sb * sb) / (nb - 1)
    )
    return t, float(t_sf_two_sided(t, float(df)))
