"""Hypothesis tests and linear trend analysis."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import special
from scipy import stats as sps

EXACT_CUTOFF = 25
ALTERNATIVES = ("two_sided", "greater", "less")


class DegenerateSampleError(ValueError):
    pass


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    statistic: float
    p_value: float
    n: int
    method: str
    alternative: str

    def to_dict(self) -> dict:
        return asdict(self)


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def average_ranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


@lru_cache(maxsize=None)
def signed_rank_counts(n: int) -> tuple[int, ...]:
    """Number of sign patterns giving each positive-rank sum 0..n(n+1)/2 (ranks 1..n)."""
    top = n * (n + 1) // 2
    counts = [0] * (top + 1)
    counts[0] = 1
    reach = 0
    for r in range(1, n + 1):
        reach += r
        for s in range(reach, r - 1, -1):
            counts[s] += counts[s - r]
    return tuple(counts)


def wilcoxon_signed_rank(
    a: Sequence[float],
    b: Sequence[float] | None = None,
    alternative: str = "two_sided",
    exact_cutoff: int = EXACT_CUTOFF,
    method: str = "auto",
) -> TestResult:
    """Wilcoxon signed-rank test on paired samples (or on differences if ``b`` is None).

    Zero differences are dropped, ties get average ranks, and the statistic
    is the sum of ranks of positive differences. The exact null distribution
    is used for tie-free samples of at most ``exact_cutoff`` pairs; otherwise
    a tie-corrected normal approximation with continuity correction.
    ``greater`` tests whether a tends to exceed b.
    """
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}")
    diffs = list(a) if b is None else [x - y for x, y in zip(a, b, strict=True)]
    d = [x for x in diffs if x != 0]
    n = len(d)
    if n == 0:
        raise DegenerateSampleError("degenerate sample: every difference is zero")
    absd = [abs(x) for x in d]
    ranks = average_ranks(absd)
    w = sum(r for r, x in zip(ranks, d) if x > 0)
    ties = len(set(absd)) < n

    use_exact = method == "exact" or (method == "auto" and n <= exact_cutoff and not ties)
    if method == "exact" and ties:
        raise ValueError("exact distribution needs tie-free differences")
    if use_exact:
        counts = signed_rank_counts(n)
        total = 2**n
        wi = int(round(w))
        upper = sum(counts[wi:]) / total
        lower = sum(counts[: wi + 1]) / total
        if alternative == "greater":
            p = upper
        elif alternative == "less":
            p = lower
        else:
            p = min(1.0, 2 * min(upper, lower))
        return TestResult(w, p, n, "exact", alternative)

    mean = n * (n + 1) / 4
    tie_sizes: dict[float, int] = {}
    for x in absd:
        tie_sizes[x] = tie_sizes.get(x, 0) + 1
    var = n * (n + 1) * (2 * n + 1) / 24 - sum(t**3 - t for t in tie_sizes.values()) / 48
    sd = math.sqrt(var)
    if alternative == "greater":
        p = _norm_sf((w - mean - 0.5) / sd)
    elif alternative == "less":
        p = _norm_cdf((w - mean + 0.5) / sd)
    else:
        z = max(abs(w - mean) - 0.5, 0.0) / sd
        p = min(1.0, 2 * _norm_sf(z))
    return TestResult(w, p, n, "normal_approx", alternative)


def shapiro_wilk(sample: Sequence[float]) -> TestResult:
    x = np.asarray(sample, dtype=float)
    n = x.size
    if not 3 <= n <= 5000:
        raise ValueError(f"Shapiro-Wilk needs 3 <= n <= 5000, got {n}")
    if np.ptp(x) == 0:
        raise DegenerateSampleError("degenerate sample: zero variance")
    res = sps.shapiro(x)
    return TestResult(float(res.statistic), float(res.pvalue), n, "shapiro_wilk", "two_sided")


def t_sf_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student t, via the regularized incomplete beta."""
    if math.isinf(t):
        return 0.0
    return float(special.betainc(df / 2, 0.5, df / (df + t * t)))


@dataclass(frozen=True)
class TrendResult:
    slope: float
    intercept: float
    p_value: float
    r2: float
    n: int
    per_cycle: float

    def to_dict(self) -> dict:
        return asdict(self)


def linear_trend(
    observations: Iterable[tuple[float, float]], yearly_means: bool = False, cycle_length: int = 3
) -> TrendResult:
    """OLS of value on calendar year with a two-sided t-test on the slope.

    ``per_cycle`` is slope * cycle_length. Perfect fits report p = 0 and
    r2 = 1; constant values report slope 0, p = 1 and r2 = 0.
    """
    obs = [(float(y), float(v)) for y, v in observations if v is not None and not math.isnan(v)]
    if yearly_means:
        by_year: dict[float, list[float]] = {}
        for y, v in obs:
            by_year.setdefault(y, []).append(v)
        obs = [(y, sum(vs) / len(vs)) for y, vs in sorted(by_year.items())]
    years = np.array([y for y, _ in obs])
    values = np.array([v for _, v in obs])
    n = len(obs)
    if len(set(years.tolist())) < 2:
        raise ValueError("trend needs at least two distinct years")
    if n < 3:
        raise ValueError("trend needs at least three observations")
    center = years.mean()
    x = years - center
    sxx = float(x @ x)
    ybar = float(values.mean())
    yc = values - ybar
    slope = float(x @ yc) / sxx
    intercept = ybar - slope * center
    resid = yc - slope * x
    sse = float(resid @ resid)
    sst = float(yc @ yc)
    if sst == 0.0:
        return TrendResult(0.0, intercept, 1.0, 0.0, n, 0.0)
    r2 = 1.0 - sse / sst
    df = n - 2
    se = math.sqrt(sse / df / sxx) if df > 0 else 0.0
    if se == 0.0:
        p, r2 = (0.0, 1.0) if slope != 0 else (1.0, r2)
    else:
        p = t_sf_two_sided(slope / se, df)
    return TrendResult(slope, intercept, p, r2, n, slope * cycle_length)
