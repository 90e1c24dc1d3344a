import csv
import hashlib
import json
from datetime import date, timedelta

import pytest

from coordnet.cli import build_parser, main
from coordnet.features import load_feature_csv
from coordnet.synthgen import BehaviorSpec, CommunityConfig, ScenarioConfig, event_day, scenario_library

START = date(2021, 3, 1)


def small_config(days=20):
    end = START + timedelta(days=days - 1)
    noise = BehaviorSpec("background_noise", rate=40)
    camp = (noise, BehaviorSpec("cotweet_burst", participant_count=6, intra_burst_spread=20))
    base = (noise, BehaviorSpec("hashtag_push", participant_count=2, intra_burst_spread=30, rate=0.3))
    comms = [CommunityConfig(f"s{i}", "SIO", 20, START, end, camp) for i in range(3)]
    comms += [CommunityConfig(f"b{i}", "non-SIO", 20, START, end, base) for i in range(2)]
    return ScenarioConfig("small", tuple(comms), seed=9)


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "scenario.json"
    cfg.write_text(json.dumps(small_config().to_dict()))
    assert main(["simulate", "--config", str(cfg), "--out", str(root / "sim")]) == 0
    assert main(["build-features", "--input", str(root / "sim"), "--out", str(root / "f.csv"),
                 "--aggregation", "both"]) == 0
    return root


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_help_documents_defaults(capsys):
    parser = build_parser()
    for sub in ("simulate", "build-features", "train", "evaluate", "report", "oracle-check"):
        with pytest.raises(SystemExit):
            parser.parse_args([sub, "--help"])
        text = capsys.readouterr().out
        assert "--" in text and "default" in text
    args = parser.parse_args(["evaluate", "--out", "x"])
    assert (args.threshold_secs, args.window_n, args.aggregation, args.ratio) == (60, 60, "daily", "2:18")


def test_simulate_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["simulate", "--scenario", "A", "--seed", "7", "--out", str(tmp_path / name)]) == 0
    for rel in ("communities.json", "manifest.json", "events/sio_a1.jsonl", "events/base_a3.jsonl"):
        assert sha(tmp_path / "a" / rel) == sha(tmp_path / "b" / rel)
    assert json.loads((tmp_path / "a" / "communities.json").read_text())["seed"] == 7


def test_seed_env_override(tmp_path, monkeypatch, corpus_dir):
    cfg = str(corpus_dir / "scenario.json")
    monkeypatch.setenv("COORDNET_SEED", "31")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "env")]) == 0
    assert json.loads((tmp_path / "env" / "communities.json").read_text())["seed"] == 31
    monkeypatch.setenv("COORDNET_SEED", "zz")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "bad")]) == 1


def test_unknown_scenario(tmp_path, capsys):
    assert main(["simulate", "--scenario", "Z", "--out", str(tmp_path)]) != 0
    err = capsys.readouterr().err
    assert "'Z'" in err and "A, B, C, D, E" in err


def test_missing_inputs_named(tmp_path, capsys):
    missing = tmp_path / "nowhere" / "f.csv"
    assert main(["evaluate", "--features", str(missing), "--out", str(tmp_path / "o")]) != 0
    assert str(missing) in capsys.readouterr().err
    assert main(["build-features", "--input", str(tmp_path / "nope"), "--out", str(tmp_path / "x.csv")]) != 0
    assert "nope" in capsys.readouterr().err


def test_malformed_index(tmp_path, capsys):
    (tmp_path / "communities.json").write_text(json.dumps({"communities": [{"community_id": "x", "label": "?"}]}))
    assert main(["build-features", "--input", str(tmp_path), "--out", str(tmp_path / "f.csv")]) == 1
    assert "malformed" in capsys.readouterr().err


def test_build_features_schema_and_determinism(corpus_dir, tmp_path, capsys):
    rows = load_feature_csv(corpus_dir / "f.csv")
    assert len(rows) == 5 * 20 * 2
    header = (corpus_dir / "f.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 4 + 42
    again = tmp_path / "again.csv"
    main(["build-features", "--input", str(corpus_dir / "sim"), "--out", str(again), "--aggregation", "both"])
    assert sha(again) == sha(corpus_dir / "f.csv")
    assert "skipped records: 0" in capsys.readouterr().out


def test_lenient_and_strict_parse(corpus_dir, tmp_path, capsys):
    sim = tmp_path / "sim"
    sim.mkdir()
    (sim / "events").mkdir()
    src = corpus_dir / "sim"
    index = json.loads((src / "communities.json").read_text())
    (sim / "communities.json").write_text(json.dumps(index))
    for e in index["communities"]:
        text = (src / e["path"]).read_text()
        if e["community_id"] == "s0":
            text += "{not json\n" + json.dumps({"tweet_id": "z"}) + "\n"
        (sim / e["path"]).write_text(text)
    assert main(["build-features", "--input", str(sim), "--out", str(tmp_path / "f.csv")]) == 0
    out = capsys.readouterr().out
    assert "skipped records: 2" in out and "s0: 2 skipped" in out
    assert main(["build-features", "--input", str(sim), "--out", str(tmp_path / "g.csv"), "--strict"]) == 1


def test_train_and_report(corpus_dir, tmp_path):
    model = tmp_path / "m.json"
    assert main(["train", "--features", str(corpus_dir / "f.csv"), "--n-trees", "5", "--out", str(model)]) == 0
    assert main(["report", "--features", str(corpus_dir / "f.csv"), "--model", str(model),
                 "--out", str(tmp_path / "rep")]) == 0
    imp = read_csv(tmp_path / "rep" / "importance.csv")
    assert len(imp) == 42
    assert sum(float(r["importance"]) for r in imp) == pytest.approx(1.0, abs=1e-9)

    activity = read_csv(tmp_path / "rep" / "activity.csv")
    manifest = json.loads((corpus_dir / "sim" / "manifest.json").read_text())
    for r in activity:
        scripted = r["date"] in manifest.get(r["community_id"], {})
        if r["community_id"].startswith("s"):
            assert (int(r["co_tweet"]) > 0) == scripted
    assert main(["report", "--out", str(tmp_path / "none")]) == 1


def test_evaluate_outputs(corpus_dir, tmp_path):
    out = tmp_path / "ev"
    argv = ["evaluate", "--features", str(corpus_dir / "f.csv"), "--window-n", "7", "--n-trees", "5",
            "--seeds", "0", "--out", str(out)]
    assert main(argv) == 0
    doc = json.loads((out / "results.json").read_text())
    assert doc["task"] == 1 and len(doc["groups"]["0"]) == 3
    assert set(doc["summary"]) >= {"precision", "recall", "f1"}
    preds = read_csv(out / "predictions.csv")
    assert len(preds) == 3 * 13 * 20
    roc = read_csv(out / "roc.csv")
    assert (float(roc[0]["x"]), float(roc[0]["y"])) == (0.0, 0.0)
    assert (float(roc[-1]["x"]), float(roc[-1]["y"])) == (1.0, 1.0)
    assert read_csv(out / "errors.csv") is not None

    again = tmp_path / "ev2"
    assert main(argv[:-1] + [str(again)]) == 0
    for name in ("predictions.csv", "roc.csv", "pr.csv", "errors.csv"):
        assert sha(out / name) == sha(again / name)


def test_evaluate_config_and_mismatch(corpus_dir, tmp_path, capsys):
    cfg = tmp_path / "spec.json"
    cfg.write_text(json.dumps({"task": 2, "aggregation": "weekly", "window_N": 5, "n_trees": 3, "seeds": [1]}))
    assert main(["evaluate", "--features", str(corpus_dir / "f.csv"), "--config", str(cfg),
                 "--out", str(tmp_path / "ev")]) == 0
    doc = json.loads((tmp_path / "ev" / "results.json").read_text())
    assert doc["spec"]["aggregation"] == "weekly" and doc["task"] == 2
    # Task 2 with 3 campaigns and ratio 2:18 is a single triplet
    assert len(doc["groups"]["1"]) == 1

    cfg.write_text(json.dumps({"task": 3}))
    assert main(["evaluate", "--features", str(corpus_dir / "f.csv"), "--config", str(cfg),
                 "--out", str(tmp_path / "bad")]) == 1
    assert "task" in capsys.readouterr().err


def test_evaluate_from_events(corpus_dir, tmp_path):
    assert main(["evaluate", "--events", str(corpus_dir / "sim"), "--window-n", "7", "--n-trees", "3",
                 "--out", str(tmp_path / "ev")]) == 0


def test_oracle_check(capsys):
    assert main(["oracle-check", "--cases", "20", "--max-items", "300"]) == 0
    assert "20/20" in capsys.readouterr().out


def test_scenario_e_spike_in_activity(tmp_path):
    sim = tmp_path / "sim"
    assert main(["simulate", "--scenario", "E", "--out", str(sim)]) == 0
    assert main(["build-features", "--input", str(sim), "--out", str(tmp_path / "f.csv")]) == 0
    assert main(["report", "--features", str(tmp_path / "f.csv"), "--out", str(tmp_path / "rep")]) == 0
    spike = event_day(scenario_library()["E"]).isoformat()
    by_comm = {}
    for r in read_csv(tmp_path / "rep" / "activity.csv"):
        by_comm.setdefault(r["community_id"], {})[r["date"]] = int(r["co_hashtag"])
    for cid, series in by_comm.items():
        if cid.startswith("base"):
            assert max(series, key=series.get) == spike
