"""Labeled synthetic community activity with scripted coordination.

Every scripted burst is recorded in a manifest keyed by community, date
and pattern, so the networks built from the generated events can be
checked against ground truth. Background noise uses a unique token per
tweet (text, hashtag, url, mention) and therefore never coordinates.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .ingest import TweetEvent, day_start, write_events

SCENARIO_VERSION = 1
DAY_SECONDS = 86400

BEHAVIOR_KINDS = (
    "cotweet_burst",
    "retweet_ring",
    "hashtag_push",
    "url_push",
    "mention_push",
    "background_noise",
    "event_spike",
)

# pattern each scripted kind is expected to light up
_MANIFEST_PATTERNS = {
    "cotweet_burst": ("co_tweet",),
    "retweet_ring": ("retweet", "co_retweet"),
    "hashtag_push": ("co_hashtag",),
    "url_push": ("co_url",),
    "mention_push": ("co_mention",),
    "event_spike": ("co_hashtag",),
}


@dataclass(frozen=True)
class BehaviorSpec:
    """One activity generator attached to a community.

    ``rate`` is the per-day firing probability for scripted kinds and the
    expected tweets per day for ``background_noise``. ``days`` pins the
    behavior to explicit day offsets (0 = community start) instead.
    """

    kind: str
    participant_count: int = 0
    intra_burst_spread: int = 10
    rate: float = 1.0
    bursts_per_day: int = 1
    days: tuple[int, ...] | None = None


@dataclass(frozen=True)
class CommunityConfig:
    community_id: str
    label: str  # "SIO" or "non-SIO"
    n_accounts: int
    start: date
    end: date
    behaviors: tuple[BehaviorSpec, ...] = ()

    @property
    def is_sio(self) -> bool:
        return self.label == "SIO"


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    communities: tuple[CommunityConfig, ...]
    seed: int = 0
    version: int = SCENARIO_VERSION

    def validate(self) -> None:
        ids = [c.community_id for c in self.communities]
        if len(set(ids)) != len(ids):
            raise ValueError("community ids must be unique")
        for c in self.communities:
            if c.label not in ("SIO", "non-SIO"):
                raise ValueError(f"{c.community_id}: label must be SIO or non-SIO, got {c.label!r}")
            if c.n_accounts < 1:
                raise ValueError(f"{c.community_id}: n_accounts must be >= 1")
            if c.end < c.start:
                raise ValueError(f"{c.community_id}: end precedes start")
            for b in c.behaviors:
                if b.kind not in BEHAVIOR_KINDS:
                    raise ValueError(f"{c.community_id}: unknown behavior kind {b.kind!r}")
                if b.participant_count > c.n_accounts:
                    raise ValueError(f"{c.community_id}: {b.kind} participant_count exceeds n_accounts")
                if b.intra_burst_spread < 0 or b.intra_burst_spread >= DAY_SECONDS:
                    raise ValueError(f"{c.community_id}: {b.kind} intra_burst_spread out of range")
                if b.rate < 0:
                    raise ValueError(f"{c.community_id}: {b.kind} rate must be >= 0")
                if b.kind != "background_noise" and b.rate > 1:
                    raise ValueError(f"{c.community_id}: {b.kind} rate is a daily probability")
                if b.kind != "background_noise" and b.participant_count < 2:
                    raise ValueError(f"{c.community_id}: {b.kind} needs at least 2 participants")

    def to_dict(self) -> dict:
        doc = asdict(self)
        for c in doc["communities"]:
            c["start"] = c["start"].isoformat()
            c["end"] = c["end"].isoformat()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> ScenarioConfig:
        try:
            communities = tuple(
                CommunityConfig(
                    community_id=str(c["community_id"]),
                    label=c["label"],
                    n_accounts=int(c["n_accounts"]),
                    start=date.fromisoformat(c["start"]),
                    end=date.fromisoformat(c["end"]),
                    behaviors=tuple(
                        BehaviorSpec(**{**b, "days": tuple(b["days"]) if b.get("days") is not None else None})
                        for b in c.get("behaviors", ())
                    ),
                )
                for c in doc["communities"]
            )
            cfg = cls(doc.get("name", "custom"), communities, int(doc.get("seed", 0)),
                      int(doc.get("version", SCENARIO_VERSION)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"invalid scenario config: {exc}") from None
        cfg.validate()
        return cfg


@dataclass
class SyntheticCorpus:
    config: ScenarioConfig
    events: dict[str, list[TweetEvent]]
    # community -> ISO date -> pattern -> list of participant groups
    manifest: dict[str, dict[str, dict[str, list[list[str]]]]] = field(default_factory=dict)

    def labels(self) -> dict[str, str]:
        return {c.community_id: c.label for c in self.config.communities}

    def write(self, out_dir) -> Path:
        """Write ``events/<id>.jsonl``, ``communities.json`` and ``manifest.json``."""
        out = Path(out_dir)
        (out / "events").mkdir(parents=True, exist_ok=True)
        index = []
        for c in self.config.communities:
            rel = f"events/{c.community_id}.jsonl"
            with open(out / rel, "w", encoding="utf-8") as fh:
                write_events(self.events[c.community_id], fh)
            index.append({"community_id": c.community_id, "label": c.label, "path": rel})
        with open(out / "communities.json", "w", encoding="utf-8") as fh:
            json.dump({"scenario": self.config.name, "seed": self.config.seed, "communities": index},
                      fh, indent=2, sort_keys=True)
        with open(out / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(self.manifest, fh, indent=2, sort_keys=True)
        with open(out / "scenario.json", "w", encoding="utf-8") as fh:
            json.dump(self.config.to_dict(), fh, indent=2, sort_keys=True)
        return out


def expected_edges(pattern: str, group: list[str]) -> set[tuple[str, str]]:
    """Edges a manifest group guarantees: a star from the author for retweets, else a clique."""
    if pattern == "retweet":
        hub = group[0]
        pairs = [(hub, g) for g in group[1:]]
    else:
        pairs = [(a, b) for i, a in enumerate(group) for b in group[i + 1:]]
    return {(a, b) if a < b else (b, a) for a, b in pairs if a != b}


def community_rng(seed: int, community_id: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(community_id.encode("utf-8"))])


class _Emitter:
    def __init__(self, cid: str):
        self.cid = cid
        self.events: list[TweetEvent] = []
        self.counter = 0

    def next_id(self) -> str:
        self.counter += 1
        return f"{self.cid}-{self.counter:08d}"

    def tweet(self, author: str, ts: int, text: str, hashtags=(), mentions=(), urls=(),
              retweet_of: TweetEvent | None = None) -> TweetEvent:
        ev = TweetEvent(
            tweet_id=self.next_id(),
            author_id=author,
            timestamp=int(ts),
            text=text,
            hashtags=tuple(hashtags),
            mentions=tuple(mentions),
            urls=tuple(urls),
            retweeted_tweet_id=None if retweet_of is None else retweet_of.tweet_id,
            retweeted_author_id=None if retweet_of is None else retweet_of.author_id,
        )
        self.events.append(ev)
        return ev


def _burst(em: _Emitter, rng, accounts, b: BehaviorSpec, day0: int, tag: str) -> list[str]:
    """Emit one scripted burst; returns the participant group for the manifest."""
    spread = b.intra_burst_spread
    start = day0 + int(rng.integers(0, DAY_SECONDS - spread))
    chosen = sorted(rng.choice(len(accounts), size=b.participant_count, replace=False))
    group = [accounts[i] for i in chosen]
    times = start + rng.integers(0, spread + 1, size=len(group))
    if b.kind == "cotweet_burst":
        text = f"{em.cid} talking point {tag}"
        for acct, t in zip(group, times):
            nonce = em.next_id()
            url = f"https://t.co/{nonce}"
            em.tweet(acct, t, f"{text} {url}", urls=[url])
    elif b.kind == "retweet_ring":
        author = group[0]
        original = em.tweet(author, start, f"{em.cid} original {tag}")
        for acct, t in zip(group[1:], times[1:]):
            em.tweet(acct, max(t, start), f"RT {original.text}", retweet_of=original)
    else:
        for acct, t in zip(group, times):
            nonce = em.next_id()
            if b.kind in ("hashtag_push", "event_spike"):
                em.tweet(acct, t, f"post {nonce}", hashtags=[f"{b.kind}{tag}".replace("-", "_")])
            elif b.kind == "url_push":
                em.tweet(acct, t, f"read {nonce}", urls=[f"https://news.example/{em.cid}/{tag}"])
            elif b.kind == "mention_push":
                em.tweet(acct, t, f"hey {nonce}", mentions=[f"target{tag}".replace("-", "_")])
    return group


def _noise(em: _Emitter, rng, accounts, rate: float, day0: int) -> None:
    if rate <= 0:
        return
    t = float(rng.exponential(DAY_SECONDS / rate))
    while t < DAY_SECONDS:
        acct = accounts[int(rng.integers(len(accounts)))]
        nonce = em.next_id()
        em.tweet(acct, day0 + int(t), f"status {nonce}", hashtags=[f"h{nonce}"],
                 mentions=[f"m{nonce}"], urls=[f"https://example.org/{nonce}"])
        t += float(rng.exponential(DAY_SECONDS / rate))


def generate_community(c: CommunityConfig, seed: int):
    rng = community_rng(seed, c.community_id)
    accounts = [f"{c.community_id}_u{k:04d}" for k in range(c.n_accounts)]
    em = _Emitter(c.community_id)
    manifest: dict[str, dict[str, list[list[str]]]] = {}
    n_days = (c.end - c.start).days + 1
    for offset in range(n_days):
        day = c.start + timedelta(days=offset)
        day0 = day_start(day)
        for bi, b in enumerate(c.behaviors):
            if b.kind == "background_noise":
                _noise(em, rng, accounts, b.rate, day0)
                continue
            if b.days is not None:
                fires = offset in b.days
            else:
                fires = rng.random() < b.rate
            if not fires:
                continue
            for k in range(b.bursts_per_day):
                group = _burst(em, rng, accounts, b, day0, f"{offset}-{bi}-{k}")
                by_pattern = manifest.setdefault(day.isoformat(), {})
                for pattern in _MANIFEST_PATTERNS[b.kind]:
                    members = group[1:] if pattern == "co_retweet" else group
                    if len(members) >= 2:
                        by_pattern.setdefault(pattern, []).append(list(members))
    events = sorted(em.events, key=lambda ev: (ev.timestamp, ev.tweet_id))
    return events, manifest


def generate(config: ScenarioConfig) -> SyntheticCorpus:
    config.validate()
    events, manifest = {}, {}
    for c in config.communities:
        events[c.community_id], manifest[c.community_id] = generate_community(c, config.seed)
    return SyntheticCorpus(config, events, manifest)


# ---------------------------------------------------------------------------
# scenario library

LIBRARY_START = date(2019, 1, 1)


def _span(days: int, start: date = LIBRARY_START) -> dict:
    return {"start": start, "end": start + timedelta(days=days - 1)}


def _baseline(cid: str, days: int, extra=()) -> CommunityConfig:
    return CommunityConfig(
        cid, "non-SIO", 150, **_span(days),
        behaviors=(
            BehaviorSpec("background_noise", rate=80),
            # organic, small-scale co-activity
            BehaviorSpec("hashtag_push", participant_count=3, intra_burst_spread=45, rate=0.5),
            BehaviorSpec("retweet_ring", participant_count=3, intra_burst_spread=50, rate=0.4),
            BehaviorSpec("mention_push", participant_count=2, intra_burst_spread=30, rate=0.3),
            *extra,
        ),
    )


def _campaign(cid: str, days: int, tactics) -> CommunityConfig:
    return CommunityConfig(cid, "SIO", 60, **_span(days),
                           behaviors=(BehaviorSpec("background_noise", rate=30), *tactics))


COTWEET = BehaviorSpec("cotweet_burst", participant_count=12, intra_burst_spread=20, rate=1.0, bursts_per_day=2)
RETWEET_RING = BehaviorSpec("retweet_ring", participant_count=8, intra_burst_spread=40, rate=0.7)
HASHTAG = BehaviorSpec("hashtag_push", participant_count=15, intra_burst_spread=30, rate=1.0, bursts_per_day=2)


def _scenario_a() -> ScenarioConfig:
    days = 180
    comms = [_campaign(f"sio_a{i}", days, (COTWEET, RETWEET_RING)) for i in (1, 2)]
    comms += [_baseline(f"base_a{i}", days) for i in range(1, 5)]
    return ScenarioConfig("A", tuple(comms), seed=101)


def _scenario_b() -> ScenarioConfig:
    days = 150
    comms = [_campaign(f"sio_b{i}", days, (COTWEET,)) for i in (1, 2, 3)]
    comms += [_baseline(f"base_b{i}", days) for i in range(1, 5)]
    return ScenarioConfig("B", tuple(comms), seed=202)


def _scenario_c() -> ScenarioConfig:
    days = 150
    comms = [_campaign(f"sio_c{i}", days, (COTWEET,)) for i in (1, 2)]
    # lexicographically last, so it is the held-out member of the triplet
    comms.append(_campaign("sio_c3", days, (HASHTAG,)))
    comms += [_baseline(f"base_c{i}", days) for i in range(1, 5)]
    return ScenarioConfig("C", tuple(comms), seed=303)


def _scenario_d() -> ScenarioConfig:
    days = 110
    seed = 404
    coin = np.random.default_rng([seed, 0])
    while True:
        labels = ["SIO" if coin.random() < 0.5 else "non-SIO" for _ in range(5)]
        if 2 <= labels.count("SIO") <= 3:
            break
    behaviors = (
        BehaviorSpec("background_noise", rate=60),
        BehaviorSpec("hashtag_push", participant_count=5, intra_burst_spread=40, rate=0.5),
        BehaviorSpec("cotweet_burst", participant_count=4, intra_burst_spread=30, rate=0.3),
        BehaviorSpec("retweet_ring", participant_count=4, intra_burst_spread=40, rate=0.4),
    )
    comms = [CommunityConfig(f"null_{i}", lab, 80, **_span(days), behaviors=behaviors)
             for i, lab in enumerate(labels, start=1)]
    return ScenarioConfig("D", tuple(comms), seed=seed)


EVENT_DAY_OFFSET = 55


def _scenario_e() -> ScenarioConfig:
    days = 60
    spike = BehaviorSpec("event_spike", participant_count=40, intra_burst_spread=40,
                         bursts_per_day=2, days=(EVENT_DAY_OFFSET,))
    comms = [_campaign(f"sio_e{i}", days, (HASHTAG,)) for i in range(1, 7)]
    comms += [_baseline(f"base_e{i}", days, extra=(spike,)) for i in range(1, 5)]
    return ScenarioConfig("E", tuple(comms), seed=505)


_LIBRARY = {"A": _scenario_a, "B": _scenario_b, "C": _scenario_c, "D": _scenario_d, "E": _scenario_e}


def scenario_library() -> dict[str, ScenarioConfig]:
    """Named, versioned scenarios:

    A separable (co-tweeting campaigns vs organic baselines), B shared-tactic
    transfer, C disjoint-tactic transfer, D null (identical communities with
    coin-flip labels), E a legitimate event spike that looks coordinated.
    """
    return {name: build() for name, build in _LIBRARY.items()}


def event_day(config: ScenarioConfig) -> date:
    return config.communities[0].start + timedelta(days=EVENT_DAY_OFFSET)
