"""Per-trial metrics (sum throughput, Jain fairness) and their aggregation."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

Rates = Union[Mapping[int, float], Sequence[float]]


class MetricError(ValueError):
    pass


def _values(rates: Rates) -> list[float]:
    vals = list(rates.values()) if isinstance(rates, Mapping) else list(rates)
    for v in vals:
        if v < 0 or math.isnan(v):
            raise MetricError(f"rates must be non-negative, got {v}")
    return vals


def system_throughput(rates: Rates) -> float:
    return math.fsum(_values(rates))


def jain_fairness(rates: Rates) -> float:
    """(sum R)^2 / (n sum R^2); 1 when all rates are equal, 1/n when one link has it all."""
    vals = _values(rates)
    if not vals:
        raise MetricError("fairness undefined for an empty rate vector")
    # normalise first so squares of multi-Gbit/s rates stay well scaled
    top = max(vals)
    if top == 0:
        raise MetricError("fairness undefined when every rate is zero")
    x = [v / top for v in vals]
    total = math.fsum(x)
    return total * total / (len(x) * math.fsum(v * v for v in x))


@dataclass(frozen=True)
class TrialResult:
    scheme: str
    seed: int
    throughput: float
    fairness: float
    switch_count: int
    stable: bool
    per_link_rates: Mapping[int, float] = field(default_factory=dict, repr=False)
    runtime: float = 0.0
    sweep_variable: str = ""
    sweep_value: object = ""
    trial: int = 0
    scenario_hash: str = ""


@dataclass(frozen=True)
class Summary:
    mean: float
    sd: float
    min: float
    max: float


@dataclass(frozen=True)
class AggregateStats:
    count: int
    throughput: Summary
    fairness: Summary
    switch_count: Summary
    stable_fraction: float


def summarize(values: Sequence[float]) -> Summary:
    """Order-insensitive mean / sample sd / min / max."""
    if not values:
        raise MetricError("cannot summarise an empty sample")
    lo, hi = min(values), max(values)
    if lo == hi:
        return Summary(float(lo), 0.0, float(lo), float(hi))
    n = len(values)
    mean = math.fsum(values) / n
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
    return Summary(mean, sd, float(lo), float(hi))


def aggregate(results: Iterable[TrialResult]) -> dict[str, AggregateStats]:
    by_scheme: dict[str, list[TrialResult]] = defaultdict(list)
    for r in results:
        by_scheme[r.scheme].append(r)
    if not by_scheme:
        raise MetricError("no trial results to aggregate")
    out = {}
    for scheme in sorted(by_scheme):
        rs = by_scheme[scheme]
        out[scheme] = AggregateStats(
            count=len(rs),
            throughput=summarize([r.throughput for r in rs]),
            fairness=summarize([r.fairness for r in rs]),
            switch_count=summarize([float(r.switch_count) for r in rs]),
            stable_fraction=sum(r.stable for r in rs) / len(rs),
        )
    return out
