"""Cross-lifetime aggregation and the statistical-reliability procedures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from ._special import normal_ppf, t_sf, t_two_sided
from .core import LLError
from .metrics import MetricResult, TransferMode


class StatsError(LLError):
    pass


def required_sample_size(k: float, alpha: float = 0.05, beta: float = 0.1) -> int:
    """Runs needed so the sample mean lands within ``k`` standard deviations of the true mean.

    Two-sided in ``alpha`` (type I), one-sided in ``beta`` (type II):
    ``n = ceil(((z_{1-alpha/2} + z_{1-beta}) / k) ** 2)``, at least 1.
    """
    if not k > 0:
        raise StatsError("E_BAD_ARG", "k must be positive")
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise StatsError("E_BAD_ARG", "alpha and beta must lie in (0, 1)")
    if math.isinf(k):
        return 1
    z = normal_ppf(1 - alpha / 2) + normal_ppf(1 - beta)
    return max(1, math.ceil((z / k) ** 2))


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int
    mean: float
    sd: float
    n: int

    def to_dict(self) -> dict[str, Any]:
        return {"t": self.t, "p": self.p, "df": self.df, "mean": self.mean, "sd": self.sd, "n": self.n}


def sample_sd(values: Sequence[float]) -> float:
    n = len(values)
    mean = math.fsum(values) / n
    return math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))


def one_tailed_t_test(values: Sequence[float], threshold: float) -> TTestResult:
    """One-sample t-test of H1: mean > threshold."""
    n = len(values)
    if n < 2:
        raise StatsError("E_DEGENERATE", "t-test needs at least two values")
    mean = math.fsum(values) / n
    sd = sample_sd(values)
    if sd == 0:
        raise StatsError("E_DEGENERATE", "zero standard deviation; t statistic undefined")
    t = (mean - threshold) / (sd / math.sqrt(n))
    return TTestResult(t, t_sf(t, n - 1), n - 1, mean, sd, n)


@dataclass(frozen=True)
class BinomialResult:
    successes: int
    n: int
    p: float
    significant: bool

    def to_dict(self) -> dict[str, Any]:
        return {"successes": self.successes, "n": self.n, "p": self.p, "significant": self.significant}


def binomial_upper_tail(successes: int, n: int) -> float:
    """P(X >= successes) for X ~ Binomial(n, 1/2), exact."""
    tail = sum(math.comb(n, k) for k in range(successes, n + 1))
    return float(Fraction(tail, 2**n))


def binarized_threshold_test(values: Sequence[float], threshold: float, alpha: float = 0.05) -> BinomialResult:
    """Count values above the threshold and test against a fair-coin null."""
    if not values:
        raise StatsError("E_DEGENERATE", "binarized test needs at least one value")
    successes = sum(1 for v in values if v > threshold)
    p = binomial_upper_tail(successes, len(values))
    return BinomialResult(successes, len(values), p, p < alpha)


def rankdata(values: Sequence[float]) -> list[float]:
    """1-based ranks, ties receiving the average of the ranks they span."""
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


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    n = len(xs)
    mx, my = math.fsum(xs) / n, math.fsum(ys) / n
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    syy = math.fsum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        raise StatsError("E_DEGENERATE", "correlation undefined for a constant series")
    return sxy / math.sqrt(sxx * syy)


def spearman_correlation(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Spearman's rho with a two-sided p-value from the t approximation.

    For |rho| == 1 the t statistic is infinite; the p-value is then reported as
    the two-sided permutation bound 2 / n!.
    """
    if len(xs) != len(ys):
        raise StatsError("E_LENGTH_MISMATCH", f"{len(xs)} != {len(ys)}")
    n = len(xs)
    if n < 3:
        raise StatsError("E_TOO_FEW", "Spearman correlation needs at least three pairs")
    rho = pearson(rankdata(xs), rankdata(ys))
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) == 1.0:
        return rho, min(1.0, 2.0 / math.factorial(n))
    df = n - 2
    t = rho * math.sqrt(df / ((1.0 - rho) * (1.0 + rho)))
    return rho, t_two_sided(t, df)


def cost_overhead(
    raw_multi_seconds: float, total_lx_multi: int, raw_single_seconds: float, total_lx_single: int
) -> float:
    """Per-LX wall-clock cost of the lifelong learner divided by that of the single-task expert."""
    args = (raw_multi_seconds, total_lx_multi, raw_single_seconds, total_lx_single)
    if any(not a > 0 for a in args):
        raise StatsError("E_NONPOSITIVE", "all cost-overhead inputs must be positive")
    return (raw_multi_seconds / total_lx_multi) / (raw_single_seconds / total_lx_single)


# -- aggregation across runs -------------------------------------------------


def metric_key(result: MetricResult) -> str:
    return f"{result.metric_name}({result.mode.value})" if result.mode else result.metric_name


@dataclass
class MetricAggregate:
    metric_name: str
    mode: TransferMode | None
    run_ids: list[str] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    excluded: list[str] = field(default_factory=list)

    @property
    def key(self) -> str:
        return f"{self.metric_name}({self.mode.value})" if self.mode else self.metric_name

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float | None:
        return math.fsum(self.values) / self.n if self.values else None

    @property
    def sd(self) -> float | None:
        return sample_sd(self.values) if self.n >= 2 else None

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric_name,
            "mode": self.mode.value if self.mode else None,
            "n": self.n,
            "mean": self.mean,
            "sd": self.sd,
            "values": dict(zip(self.run_ids, self.values)),
            "excluded_runs": list(self.excluded),
        }


@dataclass
class AggregateTable:
    rows: dict[str, MetricAggregate] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {key: row.to_dict() for key, row in self.rows.items()}

    def to_text(self) -> str:
        lines = [f"{'metric':<14}{'n':>4}  {'mean ± sd':<28}"]
        for key, row in self.rows.items():
            if row.mean is None:
                cell = "absent"
            elif row.sd is None:
                cell = f"{row.mean:.4g}"
            else:
                cell = f"{row.mean:.4g} ± {row.sd:.4g}"
            lines.append(f"{key:<14}{row.n:>4}  {cell:<28}")
        return "\n".join(lines)


_ORDER = {name: i for i, name in enumerate(("PM", "FT", "BT", "RP", "SE", "PR"))}


def aggregate_runs(runs: Mapping[str, Iterable[MetricResult]]) -> AggregateTable:
    """Mean and sample sd of each metric's per-run aggregate; runs with no aggregate are excluded."""
    rows: dict[str, MetricAggregate] = {}
    for run_id in sorted(runs):
        for res in runs[run_id]:
            key = metric_key(res)
            row = rows.setdefault(key, MetricAggregate(res.metric_name, res.mode))
            agg = res.aggregate
            if agg is None:
                row.excluded.append(run_id)
            else:
                row.run_ids.append(run_id)
                row.values.append(agg)
    ordered = sorted(rows.items(), key=lambda kv: (_ORDER.get(kv[1].metric_name, 99), kv[0]))
    return AggregateTable(dict(ordered))


@dataclass(frozen=True)
class CorrelationEntry:
    metric_a: str
    metric_b: str
    n: int
    rho: float | None
    p: float | None
    note: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"metric_a": self.metric_a, "metric_b": self.metric_b, "n": self.n, "rho": self.rho, "p": self.p, "note": self.note}


def correlation_matrix(table: AggregateTable) -> list[CorrelationEntry]:
    """Pairwise Spearman correlations between metrics over runs where both are defined."""
    keys = list(table.rows)
    out = []
    for i, ka in enumerate(keys):
        for kb in keys[i + 1 :]:
            a = dict(zip(table.rows[ka].run_ids, table.rows[ka].values))
            b = dict(zip(table.rows[kb].run_ids, table.rows[kb].values))
            common = sorted(set(a) & set(b))
            try:
                rho, p = spearman_correlation([a[r] for r in common], [b[r] for r in common])
                out.append(CorrelationEntry(ka, kb, len(common), rho, p))
            except StatsError as exc:
                out.append(CorrelationEntry(ka, kb, len(common), None, None, exc.code))
    return out
