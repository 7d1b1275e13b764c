"""Small statistics helpers: mean/std, paired t-test, log-log slope fits.

The t-distribution tail probability is evaluated through the regularized
incomplete beta function I_x(a, b), computed with the Lentz continued
fraction; no external statistics dependency is needed and the test suite
pins the values against direct numerical quadrature of the t density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpec


def mean_std(values) -> tuple:
    """Mean and sample standard deviation (n-1 denominator)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise InvalidSpec("empty sample")
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (Lentz's algorithm)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-14:
            return h
    return h


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, dof: int) -> float:
    """Two-sided tail probability of Student's t."""
    if dof < 1:
        raise InvalidSpec("dof must be >= 1")
    x = dof / (dof + t * t)
    return betainc_reg(dof / 2.0, 0.5, x)


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    pvalue: float
    dof: int
    mean_diff: float


def paired_t_test(a, b) -> TTestResult:
    """Two-sided paired t-test of a vs b (paired by position)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise InvalidSpec(f"need two equal-length 1-D samples of size >= 2, got {a.shape}, {b.shape}")
    diff = a - b
    n = diff.size
    mean = float(diff.mean())
    sd = float(diff.std(ddof=1))
    if sd == 0.0:
        stat = 0.0 if mean == 0.0 else math.inf * np.sign(mean)
        p = 1.0 if mean == 0.0 else 0.0
        return TTestResult(statistic=float(stat), pvalue=p, dof=n - 1, mean_diff=mean)
    stat = mean / (sd / math.sqrt(n))
    return TTestResult(statistic=stat, pvalue=t_sf_two_sided(stat, n - 1),
                       dof=n - 1, mean_diff=mean)


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size != ys.size or xs.size < 2:
        raise InvalidSpec("need two same-length samples of size >= 2")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise InvalidSpec("log-log fit needs positive values")
    lx, ly = np.log(xs), np.log(ys)
    lx = lx - lx.mean()
    return float(np.sum(lx * (ly - ly.mean())) / np.sum(lx * lx))
