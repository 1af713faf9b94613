"""Self-contained statistics kernel: Spearman rank correlation, one-way ANOVA,
mean/sd, and the F-distribution tail probability they depend on.

Pure Python on purpose: the data calibration and the acceptance checks both
lean on these numbers, so the kernel carries no numerical dependency and every
step is auditable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import DegenerateInput, InsufficientData, InsufficientGroups, LengthMismatch


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    n: int


@dataclass(frozen=True)
class AnovaResult:
    f_value: float
    p_value: float
    df_between: int
    df_within: int


def midranks(values: Sequence[float]) -> list[float]:
    """Ranks 1..n with ties assigned the average of the ranks they span."""
    n = len(values)
    order = sorted(range(n), key=lambda i: values[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _pearson(a: Sequence[float], b: Sequence[float]) -> float:
    n = len(a)
    mean_a = math.fsum(a) / n
    mean_b = math.fsum(b) / n
    saa = sbb = sab = 0.0
    for x, y in zip(a, b):
        dx = x - mean_a
        dy = y - mean_b
        saa += dx * dx
        sbb += dy * dy
        sab += dx * dy
    if saa == 0.0 or sbb == 0.0:
        raise DegenerateInput("zero variance input")
    return sab / math.sqrt(saa * sbb)


def spearman(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Spearman rank correlation: Pearson correlation of midranks."""
    if len(x) != len(y):
        raise LengthMismatch(f"lengths differ: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise InsufficientData("need at least 2 pairs")
    r = _pearson(midranks(x), midranks(y))
    return CorrelationResult(r=r, n=len(x))


def mean_sd(x: Sequence[float]) -> tuple[float, float]:
    """Arithmetic mean and Bessel-corrected (n-1) standard deviation."""
    n = len(x)
    if n < 2:
        raise InsufficientData("need at least 2 values")
    m = math.fsum(x) / n
    ss = math.fsum((v - m) ** 2 for v in x)
    return m, math.sqrt(ss / (n - 1))


def one_way_anova(groups: Sequence[Sequence[float]]) -> AnovaResult:
    """One-way fixed-effects ANOVA across k groups.

    F = MSB / MSW with the standard between/within sums of squares; the
    p-value is the upper tail of F(df_between, df_within).
    """
    k = len(groups)
    if k < 2:
        raise InsufficientGroups("need at least 2 groups")
    for g in groups:
        if len(g) < 2:
            raise InsufficientData("each group needs at least 2 values")
    counts = [len(g) for g in groups]
    total_n = sum(counts)
    group_means = [math.fsum(g) / len(g) for g in groups]
    grand_mean = math.fsum(math.fsum(g) for g in groups) / total_n

    ssb = math.fsum(c * (m - grand_mean) ** 2 for c, m in zip(counts, group_means))
    ssw = math.fsum(
        math.fsum((v - m) ** 2 for v in g) for g, m in zip(groups, group_means)
    )
    df_between = k - 1
    df_within = total_n - k
    msw = ssw / df_within
    if msw == 0.0:
        raise DegenerateInput("zero within-group variance")
    f = (ssb / df_between) / msw
    p = f_survival(f, df_between, df_within)
    return AnovaResult(f_value=f, p_value=p, df_between=df_between, df_within=df_within)


# --- F-distribution tail via the regularized incomplete beta function ---

_BETACF_MAX_ITER = 300
_BETACF_EPS = 3e-16
_BETACF_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETACF_FPMIN:
        d = _BETACF_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_FPMIN:
            d = _BETACF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETACF_FPMIN:
            c = _BETACF_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_FPMIN:
            d = _BETACF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETACF_FPMIN:
            c = _BETACF_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            break
    return h


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b) for a, b > 0, x in [0, 1]."""
    if x < 0.0 or x > 1.0:
        raise ValueError("x outside [0, 1]")
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
    # Use the continued fraction on whichever side converges fast.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_survival(f: float, df1: int, df2: int) -> float:
    """Upper-tail probability P(F > f) for the F(df1, df2) distribution."""
    if df1 < 1 or df2 < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if f <= 0.0:
        return 1.0
    x = df2 / (df2 + df1 * f)
    return betainc_regularized(df2 / 2.0, df1 / 2.0, x)
