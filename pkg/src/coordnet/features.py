"""Events -> daily networks -> daily/weekly feature vectors, and the feature CSV."""

from __future__ import annotations

import csv
from datetime import date
from typing import IO, Iterable, Sequence

from .ingest import TweetEvent, date_range, partition_by_day
from .netbuild import PATTERNS, CoordinationNetwork, PatternKind, build_all
from .netstats import (
    FEATURE_NAMES,
    Aggregation,
    FeatureVector,
    assemble_vector,
    compute_stats,
    week_days,
    weekly_union,
)

CSV_HEADER = ("community_id", "date", "aggregation", "label", *FEATURE_NAMES)

DailyNetworks = dict[date, dict[PatternKind, CoordinationNetwork]]


def community_networks(events: Sequence[TweetEvent], community_id: str, threshold: float = 60,
                       coretweet_key: str = "tweet", members: Iterable[str] | None = None) -> DailyNetworks:
    """Six networks for every day between the first and last event.

    Silent days inside that span get empty networks. Community membership
    defaults to every account that authored an event.
    """
    members = frozenset(members) if members is not None else frozenset(ev.author_id for ev in events)
    slices = {s.date: s for s in partition_by_day(events, community_id)}
    if not slices:
        return {}
    out: DailyNetworks = {}
    for d in date_range(min(slices), max(slices)):
        if d in slices:
            out[d] = build_all(slices[d], threshold, members, coretweet_key)
        else:
            out[d] = {p: CoordinationNetwork.empty(community_id, d, p) for p in PATTERNS}
    return out


def daily_vectors(networks: DailyNetworks, community_id: str, label: int) -> list[FeatureVector]:
    return [
        assemble_vector({p: compute_stats(net) for p, net in nets.items()}, community_id, d, label)
        for d, nets in sorted(networks.items())
    ]


def weekly_networks(networks: DailyNetworks, community_id: str, day: date) -> dict[PatternKind, CoordinationNetwork]:
    out = {}
    for p in PATTERNS:
        days = [
            networks[d][p] if d in networks else CoordinationNetwork.empty(community_id, d, p)
            for d in week_days(day)
        ]
        out[p] = weekly_union(days, day)
    return out


def weekly_vectors(networks: DailyNetworks, community_id: str, label: int) -> list[FeatureVector]:
    """One vector per day t, built from the union of days t-6..t."""
    return [
        assemble_vector({p: compute_stats(net) for p, net in weekly_networks(networks, community_id, d).items()},
                        community_id, d, label, Aggregation.WEEKLY)
        for d in sorted(networks)
    ]


def build_features(events: Sequence[TweetEvent], community_id: str, label: int, threshold: float = 60,
                   aggregations: Iterable[Aggregation | str] = (Aggregation.DAILY,),
                   coretweet_key: str = "tweet") -> list[FeatureVector]:
    nets = community_networks(events, community_id, threshold, coretweet_key)
    out: list[FeatureVector] = []
    for agg in aggregations:
        if Aggregation(agg) is Aggregation.DAILY:
            out += daily_vectors(nets, community_id, label)
        else:
            out += weekly_vectors(nets, community_id, label)
    return out


def write_feature_csv(vectors: Iterable[FeatureVector], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for v in vectors:
        w.writerow([v.community_id, v.date.isoformat(), v.aggregation.value, v.label, *map(repr, v.values)])


def read_feature_csv(fh: IO[str]) -> list[FeatureVector]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise ValueError("not a feature CSV: unexpected header")
    out = []
    for line_no, row in enumerate(reader, start=2):
        if len(row) != len(CSV_HEADER):
            raise ValueError(f"feature CSV line {line_no}: expected {len(CSV_HEADER)} columns")
        try:
            label = int(row[3])
            if label not in (0, 1):
                raise ValueError("label must be 0 or 1")
            out.append(FeatureVector(row[0], date.fromisoformat(row[1]), Aggregation(row[2]),
                                     tuple(float(x) for x in row[4:]), label))
        except ValueError as exc:
            raise ValueError(f"feature CSV line {line_no}: {exc}") from None
    return out


def load_feature_csv(path) -> list[FeatureVector]:
    with open(path, encoding="utf-8", newline="") as fh:
        return read_feature_csv(fh)


def labeled_vectors(events_by_community: dict[str, Sequence[TweetEvent]], labels: dict[str, int],
                    threshold: float = 60, aggregations: Iterable[Aggregation | str] = (Aggregation.DAILY,),
                    coretweet_key: str = "tweet") -> list[FeatureVector]:
    """Feature vectors for several communities, in community-id order."""
    aggregations = tuple(aggregations)
    out: list[FeatureVector] = []
    for cid in sorted(events_by_community):
        out += build_features(events_by_community[cid], cid, labels[cid], threshold, aggregations, coretweet_key)
    return out
