import random
from datetime import date

import pytest
from hypothesis import given, settings, strategies as st

from coordnet.ingest import CommunitySlice, TweetEvent
from coordnet.netbuild import (
    PATTERNS,
    TIMED_PATTERNS,
    CoordinationNetwork,
    PatternKind,
    build_all,
    build_network,
    extract_items,
    normalize_text,
    oracle_edges,
    window_edges,
)

D = date(2019, 1, 1)
T0 = 1546300800


def sl(*events):
    return CommunitySlice("c", D, tuple(sorted(events, key=lambda e: (e.timestamp, e.tweet_id))))


def tw(tid, author, t, text="", **kw):
    return TweetEvent(tid, author, T0 + t, text, **kw)


def rt(tid, author, t, of_tweet, of_author):
    return TweetEvent(tid, author, T0 + t, "RT", retweeted_tweet_id=of_tweet, retweeted_author_id=of_author)


def test_oracle_hand_enumerated():
    items = [("k", "A", 0), ("k", "B", 30), ("k", "C", 90)]
    # pairs: A-B 30 <= 60 yes; A-C 90 no; B-C 60 yes (inclusive)
    assert oracle_edges(items, 60) == {("A", "B"), ("B", "C")}


def test_oracle_degenerate():
    assert oracle_edges([("k", "A", 0)], 60) == set()
    assert oracle_edges([("k", "A", 0), ("k", "A", 0)], 60) == set()


def test_co_hashtag_window():
    s = sl(tw("1", "A", 0, hashtags=("x",)), tw("2", "B", 30, hashtags=("x",)), tw("3", "C", 90, hashtags=("x",)))
    net = build_network(s, PatternKind.CO_HASHTAG, 60, {"A", "B", "C"})
    assert net.edges == {("A", "B"), ("B", "C")}
    assert net.nodes == {"A", "B", "C"}


def test_retweet_members_only():
    s = sl(rt("1", "A", 0, "b1", "B"), rt("2", "A", 5000, "b2", "B"), rt("3", "C", 10, "d1", "D"))
    net = build_network(s, PatternKind.RETWEET, 60, {"A", "B", "C"})
    assert net.edges == {("A", "B")}
    assert net.nodes == {"A", "B"}


def test_self_retweet_no_edge():
    s = sl(rt("1", "A", 0, "a1", "A"))
    assert build_network(s, PatternKind.RETWEET, 60, {"A"}).edges == frozenset()


def test_co_tweet_url_excluded():
    s = sl(tw("1", "A", 0, "Vote now! https://t.co/xyz", urls=("https://t.co/xyz",)), tw("2", "B", 10, "Vote now!"))
    assert build_network(s, PatternKind.CO_TWEET, 60, {"A", "B"}).edges == {("A", "B")}


def test_co_tweet_ignores_retweets_and_empty_text():
    s = sl(tw("1", "A", 0, "https://x.io/a"), tw("2", "B", 1, "  https://x.io/b "),
           rt("3", "C", 2, "z", "Z"), rt("4", "D", 3, "z", "Z"))
    assert build_network(s, PatternKind.CO_TWEET, 60, {"A", "B", "C", "D"}).edges == frozenset()


def test_co_tweet_case_sensitive():
    s = sl(tw("1", "A", 0, "Vote now"), tw("2", "B", 10, "vote now"))
    assert build_network(s, PatternKind.CO_TWEET, 60, {"A", "B"}).edges == frozenset()


def test_normalize_text():
    assert normalize_text("a  b\t https://t.co/x   c www.foo.com/x", ()) == "a b c"
    assert normalize_text("see bit.ly/abc now", ("bit.ly/abc",)) == "see now"


def test_co_url_verbatim():
    s = sl(tw("1", "A", 0, urls=("bit.ly/abc",)), tw("2", "B", 30, urls=("bit.ly/abc",)),
           tw("3", "C", 31, urls=("https://bit.ly/abc",)))
    assert build_network(s, PatternKind.CO_URL, 60, {"A", "B", "C"}).edges == {("A", "B")}


def test_co_retweet_key_switch():
    s = sl(rt("1", "A", 0, "t1", "X"), rt("2", "B", 10, "t2", "X"))
    assert build_network(s, PatternKind.CO_RETWEET, 60, {"A", "B"}).edges == frozenset()
    assert build_network(s, PatternKind.CO_RETWEET, 60, {"A", "B"}, coretweet_key="author").edges == {("A", "B")}


def test_co_mention():
    s = sl(tw("1", "A", 0, mentions=("bob",)), tw("2", "B", 60, mentions=("bob",)))
    assert build_network(s, PatternKind.CO_MENTION, 60, {"A", "B"}).edges == {("A", "B")}
    assert build_network(s, PatternKind.CO_MENTION, 59, {"A", "B"}).edges == frozenset()


def test_threshold_must_be_positive():
    with pytest.raises(ValueError):
        build_network(sl(), PatternKind.CO_URL, 0, set())


def test_build_all_empty():
    nets = build_all(sl(), 60, set())
    assert list(nets) == list(PATTERNS)
    assert all(not n.nodes and not n.edges for n in nets.values())


def test_build_all_only_retweets():
    s = sl(rt("1", "A", 0, "t1", "B"), rt("2", "C", 10, "t1", "B"))
    nets = build_all(s, 60, {"A", "B", "C"})
    nonempty = {p for p, n in nets.items() if n.edges}
    assert nonempty == {PatternKind.RETWEET, PatternKind.CO_RETWEET}


def random_events(rng, n, n_accounts=15, span=600):
    accts = [f"u{i}" for i in range(n_accounts)]
    tags = [f"h{i}" for i in range(4)]
    texts = ["alpha", "beta", "gamma https://t.co/q", "alpha https://t.co/r"]
    out = []
    for i in range(n):
        a = rng.choice(accts)
        t = rng.randrange(span)
        if rng.random() < 0.3:
            out.append(rt(f"e{i}", a, t, f"o{rng.randrange(5)}", rng.choice(accts + ["ext"])))
        else:
            text = rng.choice(texts)
            urls = tuple(u for u in ("https://t.co/q", "https://t.co/r") if u in text)
            out.append(tw(f"e{i}", a, t, text, hashtags=tuple(rng.sample(tags, rng.randrange(3))),
                          mentions=tuple(rng.sample(["m1", "m2"], rng.randrange(2))), urls=urls))
    return out


def test_build_all_matches_oracle_on_random_slice():
    rng = random.Random(5)
    events = random_events(rng, 500)
    s = sl(*events)
    members = {e.author_id for e in events}
    nets = build_all(s, 60, members)
    for p in TIMED_PATTERNS:
        assert set(nets[p].edges) == oracle_edges(extract_items(s.events, p), 60), p
    expected_rt = {tuple(sorted((e.author_id, e.retweeted_author_id))) for e in events
                   if e.is_retweet and e.retweeted_author_id in members and e.retweeted_author_id != e.author_id}
    assert set(nets[PatternKind.RETWEET].edges) == expected_rt


item_lists = st.lists(
    st.tuples(st.sampled_from("abc"), st.sampled_from("ABCDE"), st.integers(0, 300)), max_size=60)


@given(item_lists, st.integers(1, 200))
def test_window_equals_oracle(items, thr):
    assert window_edges(items, thr) == oracle_edges(items, thr)


@given(item_lists, st.integers(1, 100), st.integers(0, 100))
def test_threshold_monotone(items, t1, extra):
    assert window_edges(items, t1) <= window_edges(items, t1 + extra)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 30, 60, 600]))
def test_permutation_invariance_and_retweet_threshold_free(seed, thr):
    rng = random.Random(seed)
    events = random_events(rng, 80)
    members = {e.author_id for e in events}
    shuffled = events[:]
    rng.shuffle(shuffled)
    a = build_all(sl(*events), thr, members)
    b = build_all(sl(*shuffled), thr, members)
    assert a == b
    assert a[PatternKind.RETWEET] == build_network(sl(*events), PatternKind.RETWEET, 1, members)
    for net in a.values():
        assert all(x != y for x, y in net.edges)
        assert net.nodes == {n for e in net.edges for n in e}


def test_dump_format():
    net = CoordinationNetwork.from_edges("c", D, PatternKind.CO_URL, [("b", "a")])
    assert net.dump(60) == "# c 2019-01-01 co_url 60\na\tb\n"
