"""Per-network statistics, 42-dim feature vectors and weekly aggregation."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, fields
from datetime import date, timedelta
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .netbuild import PATTERNS, CoordinationNetwork, PatternKind

STAT_NAMES = ("nodes", "edges", "largest_cc", "mean_cc", "std_dev_cc", "mean_deg", "std_dev_deg")
N_STATS = len(STAT_NAMES)
N_FEATURES = N_STATS * len(PATTERNS)
FEATURE_NAMES = tuple(f"{p.value}_{s}" for p in PATTERNS for s in STAT_NAMES)


class Aggregation(str, Enum):
    DAILY = "daily"
    WEEKLY = "weekly"


@dataclass(frozen=True)
class NetworkStats:
    nodes: int = 0
    edges: int = 0
    largest_cc: int = 0
    mean_cc: float = 0.0
    std_dev_cc: float = 0.0
    mean_deg: float = 0.0
    std_dev_deg: float = 0.0

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(float(getattr(self, f.name)) for f in fields(self))


EMPTY_STATS = NetworkStats()


@dataclass(frozen=True)
class FeatureVector:
    community_id: str
    date: date
    aggregation: Aggregation
    values: tuple[float, ...]
    label: int  # 1 = SIO, 0 = non-SIO
    replica: int = 0

    def __post_init__(self):
        if len(self.values) != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} values, got {len(self.values)}")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("feature values must be finite")

    def stats(self, pattern: PatternKind) -> NetworkStats:
        i = PATTERNS.index(PatternKind(pattern)) * N_STATS
        v = self.values[i:i + N_STATS]
        return NetworkStats(int(v[0]), int(v[1]), int(v[2]), *v[3:])


def _pop_std(counts: Sequence[int]) -> float:
    # integer moments keep the result independent of iteration order
    n = len(counts)
    total = sum(counts)
    return math.sqrt(n * sum(c * c for c in counts) - total * total) / n


def component_sizes(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> list[int]:
    """Connected-component sizes via union-find with path halving."""
    parent = {n: n for n in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        parent.setdefault(a, a)
        parent.setdefault(b, b)
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return list(Counter(find(n) for n in parent).values())


def compute_stats(network: CoordinationNetwork) -> NetworkStats:
    nodes = network.nodes
    if not nodes:
        return EMPTY_STATS
    n = len(nodes)
    sizes = component_sizes(nodes, network.edges)
    degree = Counter()
    for a, b in network.edges:
        degree[a] += 1
        degree[b] += 1
    degs = [degree[v] for v in nodes]
    mean_cc = n / len(sizes)
    mean_deg = 2 * len(network.edges) / n
    return NetworkStats(
        nodes=n,
        edges=len(network.edges),
        largest_cc=max(sizes),
        mean_cc=mean_cc,
        std_dev_cc=_pop_std(sizes),
        mean_deg=mean_deg,
        std_dev_deg=_pop_std(degs),
    )


def assemble_vector(stats_by_pattern: Mapping[PatternKind, NetworkStats], community_id: str,
                    day: date, label: int, aggregation: Aggregation = Aggregation.DAILY) -> FeatureVector:
    values: list[float] = []
    for p in PATTERNS:
        values.extend(stats_by_pattern.get(p, EMPTY_STATS).as_tuple())
    return FeatureVector(community_id, day, Aggregation(aggregation), tuple(values), int(label))


def weekly_union(daily_networks: Sequence[CoordinationNetwork], day: date | None = None) -> CoordinationNetwork:
    """Union of the nodes and edges of the daily networks for days t-6..t.

    The result is dated ``day`` if given, else the latest input date.
    """
    if not daily_networks:
        raise ValueError("need at least one daily network")
    first = daily_networks[0]
    if any(n.community_id != first.community_id or n.pattern != first.pattern for n in daily_networks):
        raise ValueError("daily networks must share community and pattern")
    nodes: set[str] = set()
    edges: set[tuple[str, str]] = set()
    for net in daily_networks:
        nodes |= net.nodes
        edges |= net.edges
    when = day if day is not None else max(n.date for n in daily_networks)
    return CoordinationNetwork(first.community_id, when, first.pattern, frozenset(nodes), frozenset(edges))


def week_days(day: date) -> list[date]:
    return [day - timedelta(days=k) for k in range(6, -1, -1)]


def activity_series(networks: Iterable[CoordinationNetwork]) -> dict[PatternKind, dict[date, int]]:
    """Daily node counts per pattern; every seen date appears in every series."""
    networks = list(networks)
    days = sorted({n.date for n in networks})
    series = {p: {d: 0 for d in days} for p in PATTERNS}
    for net in networks:
        series[net.pattern][net.date] = len(net.nodes)
    return series
