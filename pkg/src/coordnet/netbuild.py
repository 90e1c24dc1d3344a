"""Coordination networks built from a community's daily activity."""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass
from datetime import date
from enum import Enum
from itertools import combinations
from typing import Iterable, Sequence

from .ingest import CommunitySlice, TweetEvent

URL_TOKEN = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
WHITESPACE = re.compile(r"\s+")

Edge = tuple[str, str]
Item = tuple[str, str, int]  # (key, account, time)


class PatternKind(str, Enum):
    RETWEET = "retweet"
    CO_TWEET = "co_tweet"
    CO_RETWEET = "co_retweet"
    CO_HASHTAG = "co_hashtag"
    CO_MENTION = "co_mention"
    CO_URL = "co_url"


# Canonical order; fixes the feature-vector layout.
PATTERNS: tuple[PatternKind, ...] = tuple(PatternKind)
TIMED_PATTERNS = PATTERNS[1:]


def edge(a: str, b: str) -> Edge:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class CoordinationNetwork:
    community_id: str
    date: date
    pattern: PatternKind
    nodes: frozenset[str]
    edges: frozenset[Edge]

    @classmethod
    def from_edges(cls, community_id: str, day: date, pattern: PatternKind,
                   edges: Iterable[Edge]) -> CoordinationNetwork:
        edges = frozenset(edge(a, b) for a, b in edges)
        nodes = frozenset(n for e in edges for n in e)
        return cls(community_id, day, pattern, nodes, edges)

    @classmethod
    def empty(cls, community_id: str, day: date, pattern: PatternKind) -> CoordinationNetwork:
        return cls(community_id, day, pattern, frozenset(), frozenset())

    def dump(self, threshold: int) -> str:
        """Tab-separated edge list with a ``# community date pattern threshold`` header."""
        lines = [f"# {self.community_id} {self.date.isoformat()} {self.pattern.value} {threshold}"]
        lines += [f"{a}\t{b}" for a, b in sorted(self.edges)]
        return "\n".join(lines) + "\n"


def normalize_text(text: str, urls: Sequence[str] = ()) -> str:
    for url in sorted(urls, key=len, reverse=True):
        if url:
            text = text.replace(url, " ")
    text = URL_TOKEN.sub(" ", text)
    return WHITESPACE.sub(" ", text).strip()


def extract_items(events: Iterable[TweetEvent], pattern: PatternKind,
                  coretweet_key: str = "tweet") -> list[Item]:
    """(key, account, time) items for one of the five timed patterns."""
    items: list[Item] = []
    for ev in events:
        if pattern is PatternKind.CO_TWEET:
            if not ev.is_retweet:
                key = normalize_text(ev.text, ev.urls)
                if key:
                    items.append((key, ev.author_id, ev.timestamp))
        elif pattern is PatternKind.CO_RETWEET:
            if ev.is_retweet:
                key = ev.retweeted_tweet_id if coretweet_key == "tweet" else ev.retweeted_author_id
                if key is not None:
                    items.append((key, ev.author_id, ev.timestamp))
        elif pattern is PatternKind.CO_HASHTAG:
            items.extend((h, ev.author_id, ev.timestamp) for h in ev.hashtags)
        elif pattern is PatternKind.CO_MENTION:
            items.extend((m, ev.author_id, ev.timestamp) for m in ev.mentions)
        elif pattern is PatternKind.CO_URL:
            items.extend((u, ev.author_id, ev.timestamp) for u in ev.urls)
        else:
            raise ValueError(f"{pattern} has no timed items")
    return items


def window_edges(items: Iterable[Item], threshold: float) -> set[Edge]:
    """Pairs of distinct accounts sharing a key at most ``threshold`` seconds apart.

    Items are grouped by key, sorted by time and swept with a window of
    width ``threshold`` (inclusive).
    """
    by_key: dict[str, list[tuple[int, str]]] = defaultdict(list)
    for key, account, t in items:
        by_key[key].append((t, account))
    out: set[Edge] = set()
    for group in by_key.values():
        group.sort()
        n = len(group)
        for i in range(n):
            ti, ai = group[i]
            j = i + 1
            while j < n and group[j][0] - ti <= threshold:
                aj = group[j][1]
                if aj != ai:
                    out.add(edge(ai, aj))
                j += 1
    return out


def oracle_edges(items: Sequence[Item], threshold: float) -> set[Edge]:
    """Exhaustive all-pairs reference for :func:`window_edges`."""
    out = set()
    for (k1, a1, t1), (k2, a2, t2) in combinations(items, 2):
        if k1 == k2 and a1 != a2 and abs(t1 - t2) <= threshold:
            out.add(edge(a1, a2))
    return out


def retweet_edges(events: Iterable[TweetEvent], community_members: set[str] | frozenset[str]) -> set[Edge]:
    return {
        edge(ev.author_id, ev.retweeted_author_id)
        for ev in events
        if ev.is_retweet
        and ev.retweeted_author_id in community_members
        and ev.retweeted_author_id != ev.author_id
    }


def build_network(slice_: CommunitySlice, pattern: PatternKind, threshold: float,
                  community_members: set[str] | frozenset[str],
                  coretweet_key: str = "tweet") -> CoordinationNetwork:
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    pattern = PatternKind(pattern)
    if pattern is PatternKind.RETWEET:
        edges = retweet_edges(slice_.events, community_members)
    else:
        edges = window_edges(extract_items(slice_.events, pattern, coretweet_key), threshold)
    return CoordinationNetwork.from_edges(slice_.community_id, slice_.date, pattern, edges)


def build_all(slice_: CommunitySlice, threshold: float,
              community_members: set[str] | frozenset[str],
              coretweet_key: str = "tweet") -> dict[PatternKind, CoordinationNetwork]:
    return {
        p: build_network(slice_, p, threshold, community_members, coretweet_key)
        for p in PATTERNS
    }
