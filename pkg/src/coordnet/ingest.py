"""Parse line-delimited tweet records and slice them into UTC days."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from itertools import groupby
from typing import IO, Iterable

logger = logging.getLogger(__name__)

REQUIRED_FIELDS = ("tweet_id", "author_id", "timestamp", "text")
LIST_FIELDS = ("hashtags", "mentions", "urls")


class RecordError(ValueError):
    """A malformed input line."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


@dataclass(frozen=True)
class TweetEvent:
    tweet_id: str
    author_id: str
    timestamp: int
    text: str
    hashtags: tuple[str, ...] = ()
    mentions: tuple[str, ...] = ()
    urls: tuple[str, ...] = ()
    retweeted_tweet_id: str | None = None
    retweeted_author_id: str | None = None

    @property
    def is_retweet(self) -> bool:
        return self.retweeted_tweet_id is not None

    @property
    def day(self) -> date:
        return utc_day(self.timestamp)

    def to_record(self) -> dict:
        """Encode in the input schema (``is_retweet`` is implied)."""
        rec = {
            "tweet_id": self.tweet_id,
            "author_id": self.author_id,
            "timestamp": self.timestamp,
            "text": self.text,
            "hashtags": list(self.hashtags),
            "mentions": list(self.mentions),
            "urls": list(self.urls),
        }
        if self.retweeted_tweet_id is not None:
            rec["retweeted_tweet_id"] = self.retweeted_tweet_id
            if self.retweeted_author_id is not None:
                rec["retweeted_author_id"] = self.retweeted_author_id
        return rec


@dataclass(frozen=True)
class CommunitySlice:
    community_id: str
    date: date
    events: tuple[TweetEvent, ...] = field(default_factory=tuple)


@dataclass
class ParseReport:
    events: list[TweetEvent]
    skipped: int = 0
    errors: list[RecordError] = field(default_factory=list)


def utc_day(ts: int) -> date:
    return datetime.fromtimestamp(ts, tz=timezone.utc).date()


def day_start(d: date) -> int:
    return int(datetime(d.year, d.month, d.day, tzinfo=timezone.utc).timestamp())


def _parse_timestamp(value) -> int:
    if isinstance(value, bool):
        raise ValueError("timestamp must be an integer or RFC3339 string")
    if isinstance(value, int):
        ts = value
    elif isinstance(value, float) and value.is_integer():
        ts = int(value)
    elif isinstance(value, str):
        s = value.strip()
        if s.lstrip("-").isdigit():
            ts = int(s)
        else:
            if s.endswith(("Z", "z")):
                s = s[:-1] + "+00:00"
            try:
                dt = datetime.fromisoformat(s)
            except ValueError:
                raise ValueError(f"unparseable timestamp {value!r}") from None
            if dt.tzinfo is None:
                dt = dt.replace(tzinfo=timezone.utc)
            ts = int(dt.timestamp())
    else:
        raise ValueError("timestamp must be an integer or RFC3339 string")
    if ts < 0:
        raise ValueError("negative timestamp")
    return ts


def _id(value, name: str) -> str:
    if value is None or isinstance(value, (bool, list, dict)):
        raise ValueError(f"invalid {name}")
    s = str(value)
    if not s:
        raise ValueError(f"empty {name}")
    return s


def _string_list(rec: dict, name: str, fold: bool) -> tuple[str, ...]:
    raw = rec.get(name)
    if raw is None:
        return ()
    if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
        raise ValueError(f"{name} must be a list of strings")
    out = []
    for item in raw:
        item = item.strip()
        if fold:
            item = item.lstrip("#@").lower()
        if item:
            out.append(item)
    return tuple(out)


def event_from_record(rec: dict) -> TweetEvent:
    """Validate one decoded record; raises ``ValueError`` with the reason."""
    if not isinstance(rec, dict):
        raise ValueError("record is not an object")
    for name in REQUIRED_FIELDS:
        if name not in rec or rec[name] is None:
            raise ValueError(f"missing required field {name}")
    text = rec["text"]
    if not isinstance(text, str):
        raise ValueError("text must be a string")
    rt_id = rec.get("retweeted_tweet_id")
    rt_author = rec.get("retweeted_author_id")
    if rt_id is None and rt_author is not None:
        raise ValueError("retweeted_author_id without retweeted_tweet_id")
    return TweetEvent(
        tweet_id=_id(rec["tweet_id"], "tweet_id"),
        author_id=_id(rec["author_id"], "author_id"),
        timestamp=_parse_timestamp(rec["timestamp"]),
        text=text,
        hashtags=_string_list(rec, "hashtags", fold=True),
        mentions=_string_list(rec, "mentions", fold=True),
        urls=_string_list(rec, "urls", fold=False),
        retweeted_tweet_id=None if rt_id is None else _id(rt_id, "retweeted_tweet_id"),
        retweeted_author_id=None if rt_author is None else _id(rt_author, "retweeted_author_id"),
    )


def parse_events(lines: Iterable[str], strict: bool = False) -> ParseReport:
    """Parse JSON-lines records.

    In strict mode the first malformed line raises :class:`RecordError`;
    otherwise it is skipped and counted in the returned report. Blank lines
    are ignored.
    """
    report = ParseReport(events=[])
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"invalid JSON ({exc.msg})") from None
            event = event_from_record(rec)
        except ValueError as exc:
            err = RecordError(line_no, str(exc))
            if strict:
                raise err from None
            logger.debug("skipping %s", err)
            report.skipped += 1
            report.errors.append(err)
            continue
        report.events.append(event)
    return report


def read_events(path, strict: bool = False) -> ParseReport:
    with open(path, encoding="utf-8") as fh:
        return parse_events(fh, strict=strict)


def write_events(events: Iterable[TweetEvent], fh: IO[str]) -> None:
    for ev in events:
        fh.write(json.dumps(ev.to_record(), sort_keys=True))
        fh.write("\n")


def sort_key(ev: TweetEvent) -> tuple[int, str]:
    return ev.timestamp, ev.tweet_id


def partition_by_day(events: Iterable[TweetEvent], community_id: str) -> list[CommunitySlice]:
    ordered = sorted(events, key=sort_key)
    return [
        CommunitySlice(community_id, d, tuple(group))
        for d, group in groupby(ordered, key=lambda ev: ev.day)
    ]


def date_range(start: date, end: date) -> list[date]:
    """Inclusive list of calendar days."""
    return [start + timedelta(days=i) for i in range((end - start).days + 1)]
