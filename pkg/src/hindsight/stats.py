"""Nonparametric statistics: Mann-Whitney U, Spearman rank correlation, summaries.

The Mann-Whitney test enumerates the exact permutation distribution for
small samples and falls back to a tie-corrected, continuity-corrected
normal approximation at scale; the method actually used is recorded on
the result. Spearman handles ties through average ranks.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from scipy.special import betainc

# largest pooled size for which the exact permutation distribution is enumerated
EXACT_LIMIT = 12
# largest n for which the exact permutation Spearman p is offered (test oracle)
SPEARMAN_EXACT_LIMIT = 8

JUDGE_DIMENSIONS = ("novelty", "feasibility", "impact", "overall")


class StatsError(ValueError):
    """Statistical precondition violated."""


class UndefinedCorrelationError(StatsError):
    """A rank vector has zero variance, so the correlation is undefined."""


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    n1: int
    n2: int | None = None


@dataclass(frozen=True)
class JudgeScores:
    """Subjective scores for one idea, each the mean of repeated evaluations."""

    idea_id: str
    novelty: float
    feasibility: float
    impact: float
    overall: float

    def __post_init__(self):
        for dim in JUDGE_DIMENSIONS:
            value = getattr(self, dim)
            if not 1.0 <= value <= 10.0:
                raise StatsError(f"judge {dim} score {value} outside [1, 10] for {self.idea_id}")

    def dimension(self, name: str) -> float:
        if name not in JUDGE_DIMENSIONS:
            raise StatsError(f"unknown judge dimension {name!r}")
        return getattr(self, name)


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks with ties assigned the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for pos in range(i, j + 1):
            ranks[order[pos]] = mean_rank
        i = j + 1
    return ranks


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _tie_term(values: Sequence[float]) -> float:
    counts: dict[float, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return float(sum(c ** 3 - c for c in counts.values()))


def _u_statistics(a: Sequence[float], b: Sequence[float]) -> tuple[float, float, list[float]]:
    n1 = len(a)
    pooled_ranks = average_ranks(list(a) + list(b))
    r1 = sum(pooled_ranks[:n1])
    u1 = r1 - n1 * (n1 + 1) / 2.0
    u2 = n1 * len(b) - u1
    return u1, u2, pooled_ranks


def _exact_two_sided_p(pooled_ranks: Sequence[float], n1: int, u1: float) -> float:
    """Enumerate all group assignments of the pooled ranks.

    Average ranks are multiples of 0.5, so the rank sums are exact in
    binary floating point and the comparisons below are exact.
    """
    n = len(pooled_ranks)
    offset = n1 * (n1 + 1) / 2.0
    count_le = 0
    count_ge = 0
    total = 0
    for subset in itertools.combinations(range(n), n1):
        u = sum(pooled_ranks[i] for i in subset) - offset
        if u <= u1:
            count_le += 1
        if u >= u1:
            count_ge += 1
        total += 1
    return min(1.0, 2.0 * min(count_le, count_ge) / total)


def _approx_two_sided_p(pooled: Sequence[float], n1: int, n2: int, u1: float) -> float:
    """Normal approximation with tie-corrected variance and continuity correction."""
    n = n1 + n2
    tie = _tie_term(pooled)
    variance = n1 * n2 / 12.0 * ((n + 1) - tie / (n * (n - 1)))
    if variance <= 0:
        return 1.0  # every pooled value identical
    u_big = max(u1, n1 * n2 - u1)
    z = (u_big - n1 * n2 / 2.0 - 0.5) / math.sqrt(variance)
    return min(1.0, 2.0 * _normal_sf(z))


def mann_whitney_u(
    a: Sequence[float],
    b: Sequence[float],
    method: str = "auto",
) -> TestResult:
    """Two-sided Mann-Whitney U test.

    U is computed from rank sums with average ranks for ties. With
    ``method="auto"`` the exact permutation distribution is enumerated when
    n1 + n2 <= 12, otherwise the normal approximation is used. The reported
    statistic is U for the first sample.
    """
    if len(a) == 0 or len(b) == 0:
        raise StatsError("both samples must be non-empty")
    if method not in ("auto", "exact", "approx"):
        raise StatsError(f"unknown method {method!r}")
    n1, n2 = len(a), len(b)
    if method == "exact" and n1 + n2 > EXACT_LIMIT:
        raise StatsError(
            f"exact enumeration limited to n1+n2 <= {EXACT_LIMIT}, got {n1 + n2}"
        )
    u1, _, pooled_ranks = _u_statistics(a, b)
    if method == "exact" or (method == "auto" and n1 + n2 <= EXACT_LIMIT):
        p = _exact_two_sided_p(pooled_ranks, n1, u1)
        used = "exact-permutation"
    else:
        p = _approx_two_sided_p(list(a) + list(b), n1, n2, u1)
        used = "normal-approximation"
    return TestResult(statistic=u1, p_value=p, method=used, n1=n1, n2=n2)


def _pearson(x: Sequence[float], y: Sequence[float]) -> float:
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("zero variance in a rank vector")
    return sxy / math.sqrt(sxx * syy)


def _t_sf_two_sided(t: float, df: int) -> float:
    # two-sided tail of Student's t via the regularized incomplete beta
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def spearman(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Spearman rank correlation with average ranks for ties.

    The p-value uses the t-distribution approximation with n - 2 degrees
    of freedom; |rho| = 1 yields p = 0.
    """
    if len(x) != len(y):
        raise StatsError(f"paired samples differ in length ({len(x)} vs {len(y)})")
    n = len(x)
    if n < 3:
        raise StatsError("spearman requires at least 3 pairs")
    rho = _pearson(average_ranks(x), average_ranks(y))
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) == 1.0:
        p = 0.0
    else:
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p = _t_sf_two_sided(abs(t), n - 2)
    return TestResult(statistic=rho, p_value=p, method="t-approximation", n1=n)


def spearman_exact_p(x: Sequence[float], y: Sequence[float]) -> float:
    """Exact permutation p for Spearman rho, feasible up to n = 8 (test oracle)."""
    n = len(x)
    if n > SPEARMAN_EXACT_LIMIT:
        raise StatsError(f"exact spearman limited to n <= {SPEARMAN_EXACT_LIMIT}")
    rx = average_ranks(x)
    ry = average_ranks(y)
    observed = abs(_pearson(rx, ry))
    hits = 0
    total = 0
    for perm in itertools.permutations(ry):
        if abs(_pearson(rx, perm)) >= observed - 1e-12:
            hits += 1
        total += 1
    return hits / total


@dataclass(frozen=True)
class Summary:
    mean: float
    median: float
    match_rate: float
    n: int
    avg_matches: float | None = None


def median(values: Sequence[float]) -> float:
    """Median with the midpoint of the two central order statistics for even n."""
    if not values:
        raise StatsError("median of an empty sample")
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2 == 1:
        return float(ordered[mid])
    return (ordered[mid - 1] + ordered[mid]) / 2.0


def summary(scores: Sequence[float], match_counts: Sequence[int] | None = None) -> Summary:
    """Mean, median and match rate (fraction of strictly positive scores)."""
    if len(scores) == 0:
        raise StatsError("summary of an empty sample")
    n = len(scores)
    avg_matches = None
    if match_counts is not None:
        if len(match_counts) != n:
            raise StatsError("match_counts length must equal scores length")
        avg_matches = sum(match_counts) / n
    return Summary(
        mean=sum(scores) / n,
        median=median(scores),
        match_rate=sum(1 for s in scores if s > 0) / n,
        n=n,
        avg_matches=avg_matches,
    )


# ---------------------------------------------------------------------------
# judge-score ingestion (plain line-delimited records, fixed dimension names)

def write_judge_scores(path: Path | str, scores: Iterable[JudgeScores]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in scores:
            rec = {"idea_id": s.idea_id, **{d: getattr(s, d) for d in JUDGE_DIMENSIONS}}
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False,
                                separators=(",", ":")) + "\n")


def read_judge_scores(path: Path | str) -> list[JudgeScores]:
    out = []
    seen: set[str] = set()
    with open(Path(path), encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            missing = [d for d in JUDGE_DIMENSIONS if d not in rec]
            if missing:
                raise StatsError(f"{path}: judge record {rec.get('idea_id')!r} missing {missing}")
            s = JudgeScores(
                idea_id=rec["idea_id"],
                novelty=float(rec["novelty"]),
                feasibility=float(rec["feasibility"]),
                impact=float(rec["impact"]),
                overall=float(rec["overall"]),
            )
            if s.idea_id in seen:
                raise StatsError(f"{path}: duplicate judge record for {s.idea_id!r}")
            seen.add(s.idea_id)
            out.append(s)
    return out
