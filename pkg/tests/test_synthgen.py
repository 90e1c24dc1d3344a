import hashlib
from datetime import date, timedelta

import pytest

from coordnet.features import community_networks
from coordnet.netbuild import PatternKind, extract_items, oracle_edges
from coordnet.netstats import activity_series
from coordnet.synthgen import (
    BehaviorSpec,
    CommunityConfig,
    ScenarioConfig,
    event_day,
    expected_edges,
    generate,
    scenario_library,
)

from conftest import scenario, scenario_networks

START = date(2020, 6, 1)


def one(behaviors, days=3, label="SIO", n=30, seed=1):
    c = CommunityConfig("x", label, n, START, START + timedelta(days=days - 1), tuple(behaviors))
    return ScenarioConfig("t", (c,), seed=seed)


def test_cotweet_burst_is_a_clique():
    corp = generate(one([BehaviorSpec("cotweet_burst", participant_count=5, intra_burst_spread=10)], days=1))
    events = corp.events["x"]
    (group,) = corp.manifest["x"][START.isoformat()]["co_tweet"]
    assert len(group) == 5
    edges = oracle_edges(extract_items(events, PatternKind.CO_TWEET), 60)
    assert len(edges) == 10
    assert edges == expected_edges("co_tweet", group)


def test_noise_never_coordinates():
    corp = generate(one([BehaviorSpec("background_noise", rate=300)], days=4, label="non-SIO"))
    assert len(corp.events["x"]) > 800
    assert not any(e.is_retweet for e in corp.events["x"])
    nets = community_networks(corp.events["x"], "x", 600)
    assert all(not n.edges for day in nets.values() for n in day.values())
    assert corp.manifest["x"] == {}


def test_event_spike_day():
    cfg = one([BehaviorSpec("background_noise", rate=100),
               BehaviorSpec("hashtag_push", participant_count=3, intra_burst_spread=30, rate=0.5),
               BehaviorSpec("event_spike", participant_count=25, intra_burst_spread=30, days=(6,))],
              days=10, label="non-SIO", n=100)
    corp = generate(cfg)
    series = activity_series(n for day in community_networks(corp.events["x"], "x", 60).values()
                             for n in day.values())[PatternKind.CO_HASHTAG]
    spike = START + timedelta(days=6)
    assert max(series, key=series.get) == spike
    assert series[spike] >= 25
    assert all(v <= 6 for d, v in series.items() if d != spike)


def test_activity_matches_scripted_participants():
    cfg = one([BehaviorSpec("background_noise", rate=50),
               BehaviorSpec("url_push", participant_count=7, intra_burst_spread=20)], days=3)
    corp = generate(cfg)
    series = activity_series(n for day in community_networks(corp.events["x"], "x", 60).values()
                             for n in day.values())
    for d, by_pattern in corp.manifest["x"].items():
        (group,) = by_pattern["co_url"]
        assert series[PatternKind.CO_URL][date.fromisoformat(d)] == len(group) == 7


def test_generation_deterministic(tmp_path):
    cfg = scenario_library()["E"]
    a = generate(cfg).write(tmp_path / "a")
    b = generate(cfg).write(tmp_path / "b")
    for rel in ["communities.json", "manifest.json", "events/sio_e1.jsonl", "events/base_e3.jsonl"]:
        assert hashlib.sha256((a / rel).read_bytes()).digest() == hashlib.sha256((b / rel).read_bytes()).digest()


def test_seed_changes_output():
    cfg = one([BehaviorSpec("background_noise", rate=50)])
    other = ScenarioConfig(cfg.name, cfg.communities, seed=2)
    assert generate(cfg).events != generate(other).events


@pytest.mark.parametrize("name", ["A", "E"])
def test_manifest_soundness(name):
    corp = scenario(name)
    for cid, by_day in corp.manifest.items():
        nets = scenario_networks(name, cid)
        for d, by_pattern in by_day.items():
            for pattern, groups in by_pattern.items():
                built = nets[date.fromisoformat(d)][PatternKind(pattern)].edges
                for g in groups:
                    assert expected_edges(pattern, g) <= built, (cid, d, pattern)


def test_library_definitions():
    lib = scenario_library()
    assert set(lib) == set("ABCDE")
    a = lib["A"]
    assert [c.label for c in a.communities].count("SIO") == 2
    assert [c.label for c in a.communities].count("non-SIO") == 4
    assert all((c.end - c.start).days + 1 >= 180 for c in a.communities)

    c = {cc.community_id: cc for cc in lib["C"].communities if cc.is_sio}
    held_out = max(c)
    for cid, cc in c.items():
        kinds = {b.kind for b in cc.behaviors} - {"background_noise"}
        assert kinds == ({"hashtag_push"} if cid == held_out else {"cotweet_burst"})

    b = [cc for cc in lib["B"].communities if cc.is_sio]
    assert len({cc.behaviors for cc in b}) == 1

    d = lib["D"].communities
    assert len({cc.behaviors for cc in d}) == 1 and len({cc.n_accounts for cc in d}) == 1
    labels = [cc.label for cc in d]
    assert labels.count("SIO") >= 2 and labels.count("non-SIO") >= 2
    assert lib["D"] == scenario_library()["D"]

    e = lib["E"]
    assert event_day(e) == e.communities[0].start + timedelta(days=55)


@pytest.mark.parametrize("bad", [
    dict(label="maybe"),
    dict(n_accounts=0),
    dict(behaviors=(BehaviorSpec("teleport"),)),
    dict(behaviors=(BehaviorSpec("hashtag_push", participant_count=50),)),
    dict(behaviors=(BehaviorSpec("hashtag_push", participant_count=3, intra_burst_spread=-1),)),
    dict(behaviors=(BehaviorSpec("hashtag_push", participant_count=1),)),
])
def test_invalid_configs(bad):
    kw = dict(community_id="x", label="SIO", n_accounts=10, start=START, end=START, behaviors=())
    kw.update(bad)
    with pytest.raises(ValueError):
        generate(ScenarioConfig("t", (CommunityConfig(**kw),)))


def test_duplicate_ids_rejected():
    c = CommunityConfig("x", "SIO", 10, START, START)
    with pytest.raises(ValueError, match="unique"):
        generate(ScenarioConfig("t", (c, c)))


def test_config_dict_round_trip():
    cfg = scenario_library()["E"]
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        ScenarioConfig.from_dict({"communities": [{"community_id": "x"}]})
