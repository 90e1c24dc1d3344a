"""Command-line entry point: ``coordnet <subcommand> [flags]``.

Subcommands
    simulate        write a synthetic scenario (events, communities.json, manifest)
    build-features  events -> feature CSV
    train           feature CSV -> serialized forest
    evaluate        run the Task 1 / Task 2 protocol, write results and curves
    report          activity series and feature-importance CSVs
    oracle-check    compare the sliding-window edge builder with the all-pairs oracle
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import random
import sys
import time
from dataclasses import replace
from datetime import date
from pathlib import Path
from typing import Sequence

from . import forest, harness, metrics, synthgen
from .features import labeled_vectors, load_feature_csv, write_feature_csv
from .ingest import read_events
from .netbuild import PATTERNS, oracle_edges, window_edges
from .netstats import FEATURE_NAMES, N_STATS, Aggregation, FeatureVector

log = logging.getLogger("coordnet")

SEED_ENV = "COORDNET_SEED"
LABELS = {"SIO": 1, "non-SIO": 0}


class CliError(Exception):
    """A user-facing failure; reported on stderr with exit status 1."""


def default_seed(fallback: int = 0) -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return fallback
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _seed_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _iso(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def _require_file(path: Path) -> Path:
    if not path.is_file():
        raise CliError(f"no such file: {path}")
    return path


# ---------------------------------------------------------------------------
# corpus loading

def load_community_index(path: Path) -> tuple[Path, list[dict]]:
    """Read ``communities.json`` (or a directory containing one)."""
    index_path = path / "communities.json" if path.is_dir() else path
    _require_file(index_path)
    try:
        doc = json.loads(index_path.read_text(encoding="utf-8"))
        entries = doc["communities"]
        for e in entries:
            missing = {"community_id", "label", "path"} - set(e)
            if missing:
                raise ValueError(f"entry lacks {', '.join(sorted(missing))}")
            if e["label"] not in LABELS:
                raise ValueError(f"community {e['community_id']!r}: label must be SIO or non-SIO")
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"malformed community index {index_path}: {exc}") from None
    return index_path.parent, entries


def load_corpus_events(path: Path, strict: bool):
    """Returns (events by community, labels, per-community skipped counts)."""
    root, entries = load_community_index(path)
    events, labels, skipped = {}, {}, {}
    for e in entries:
        cid = e["community_id"]
        ev_path = _require_file(root / e["path"])
        try:
            report = read_events(ev_path, strict=strict)
        except ValueError as exc:
            raise CliError(f"{ev_path}: {exc}") from None
        for err in report.errors[:5]:
            log.warning("%s:%d skipped: %s", ev_path, err.line_no, err.reason)
        events[cid] = report.events
        labels[cid] = LABELS[e["label"]]
        skipped[cid] = report.skipped
    return events, labels, skipped


def _aggregations(choice: str) -> tuple[Aggregation, ...]:
    return (Aggregation.DAILY, Aggregation.WEEKLY) if choice == "both" else (Aggregation(choice),)


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args) -> int:
    library = synthgen.scenario_library()
    if args.config:
        cfg_path = _require_file(Path(args.config))
        try:
            config = synthgen.ScenarioConfig.from_dict(json.loads(cfg_path.read_text(encoding="utf-8")))
        except (json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
            raise CliError(f"bad scenario config {cfg_path}: {exc}") from None
    elif args.scenario in library:
        config = library[args.scenario]
    else:
        raise CliError(f"unknown scenario {args.scenario!r}; available: {', '.join(sorted(library))}")
    seed = args.seed if args.seed is not None else default_seed(config.seed)
    config = replace(config, seed=seed)
    try:
        corpus = synthgen.generate(config)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    out = corpus.write(args.out)
    n_events = sum(len(v) for v in corpus.events.values())
    print(f"scenario {config.name}: {len(corpus.events)} communities, {n_events} events, seed {seed} -> {out}")
    return 0


def cmd_build_features(args) -> int:
    events, labels, skipped = load_corpus_events(Path(args.input), args.strict)
    vectors = labeled_vectors(events, labels, args.threshold_secs, _aggregations(args.aggregation),
                              args.coretweet_key)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        write_feature_csv(vectors, fh)
    n_days = len({(v.community_id, v.date) for v in vectors})
    print(f"communities: {len(events)}  community-days: {n_days}  rows: {len(vectors)}  "
          f"skipped records: {sum(skipped.values())}")
    for cid in sorted(skipped):
        if skipped[cid]:
            print(f"  {cid}: {skipped[cid]} skipped")
    print(f"wrote {out}")
    return 0


def _load_vectors(args) -> list[FeatureVector]:
    """Feature vectors from ``--features`` or, failing that, raw ``--events``."""
    if args.features:
        try:
            return load_feature_csv(_require_file(Path(args.features)))
        except ValueError as exc:
            raise CliError(f"{args.features}: {exc}") from None
    if args.events:
        events, labels, _ = load_corpus_events(Path(args.events), args.strict)
        return labeled_vectors(events, labels, args.threshold_secs, tuple(Aggregation), args.coretweet_key)
    raise CliError("need --features or --events")


def cmd_train(args) -> int:
    agg = Aggregation(args.aggregation)
    vectors = [v for v in _load_vectors(args) if v.aggregation is agg]
    if not vectors:
        raise CliError(f"no {agg.value} feature rows to train on")
    seed = args.seed if args.seed is not None else default_seed()
    model = forest.train([v.values for v in vectors], [v.label for v in vectors], n_trees=args.n_trees, seed=seed)
    model.training_meta.update(aggregation=agg.value, rows=len(vectors),
                               communities=sorted({v.community_id for v in vectors}))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    print(f"trained {model.n_trees} trees on {len(vectors)} rows (seed {seed}) -> {out}")
    return 0


def _spec_from_args(args) -> harness.ExperimentSpec:
    if args.config:
        cfg_path = _require_file(Path(args.config))
        try:
            doc = json.loads(cfg_path.read_text(encoding="utf-8"))
            return harness.ExperimentSpec.from_dict(doc)
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            raise CliError(f"bad experiment config {cfg_path}: {exc}") from None
    seeds = args.seeds if args.seeds else (default_seed(),)
    date_range = (args.start, args.end) if args.start and args.end else None
    try:
        return harness.ExperimentSpec(task=args.task, aggregation=args.aggregation, ratio=args.ratio,
                                      window_N=args.window_n, threshold=args.threshold_secs, seeds=seeds,
                                      date_range=date_range, n_trees=args.n_trees)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def write_predictions(preds: Sequence[harness.Prediction], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run_id", "seed", "group", "day", "test_date", "community_id", "replica",
                    "true_label", "predicted_label", "score"])
        for p in preds:
            w.writerow([p.run_id, p.seed, p.group, p.day.isoformat(), p.test_date.isoformat(), p.community_id,
                        p.replica, p.true_label, p.predicted_label, repr(p.score)])


def write_error_histogram(result: harness.ExperimentResult, path: Path) -> None:
    rows = result.error_rows()
    fp = metrics.error_histogram(rows, true_label=0)
    fn = metrics.error_histogram(rows, true_label=1)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "non_sio_errors", "sio_errors"])
        for d in sorted(set(fp) | set(fn)):
            w.writerow([d.isoformat(), fp.get(d, 0), fn.get(d, 0)])


def cmd_evaluate(args) -> int:
    spec = _spec_from_args(args)
    if args.events and not args.features:
        args.threshold_secs = spec.threshold
    vectors = _load_vectors(args)
    try:
        corpus = harness.CommunityCorpus.from_vectors(vectors, spec.aggregation)
        if args.tune_ns:
            best = harness.tune_window(spec, corpus, args.tune_ns, jobs=args.jobs)
            log.info("tuned window_N=%d", best)
            spec = replace(spec, window_N=best)
        started = time.perf_counter()
        result = harness.run(spec, corpus, jobs=args.jobs)
    except ValueError as exc:
        raise CliError(str(exc)) from None

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = result.to_dict()
    doc.pop("predictions")  # per-day rows go to predictions.csv
    doc["elapsed_secs"] = round(time.perf_counter() - started, 3)
    (out / "results.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_predictions(result.predictions, out / "predictions.csv")
    roc, pr = metrics.curves(result.scored())
    for name, points in (("roc.csv", roc), ("pr.csv", pr)):
        with open(out / name, "w", encoding="utf-8", newline="") as fh:
            metrics.write_curve(points, fh)
    write_error_histogram(result, out / "errors.csv")

    s = result.summary
    print(f"task {spec.task} {spec.aggregation.value} {spec.ratio} N={spec.window_N}: "
          f"P={s.precision.mean:.3f} R={s.recall.mean:.3f} F1={s.f1.mean:.3f} "
          f"({len(result.runs)} runs, {len(result.predictions)} predictions) -> {out}")
    return 0


def write_activity(vectors: Sequence[FeatureVector], path: Path) -> int:
    """Per-pattern daily node counts read off the feature rows."""
    daily = sorted((v for v in vectors if v.aggregation is Aggregation.DAILY),
                   key=lambda v: (v.community_id, v.date))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["community_id", "date", *(p.value for p in PATTERNS)])
        for v in daily:
            w.writerow([v.community_id, v.date.isoformat(),
                        *(int(v.values[i * N_STATS]) for i in range(len(PATTERNS)))])
    return len(daily)


def write_importance(model: forest.ForestModel, path: Path) -> None:
    imp = forest.feature_importance(model)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "importance"])
        for name, value in zip(FEATURE_NAMES, imp):
            w.writerow([name, repr(float(value))])


def cmd_report(args) -> int:
    if not (args.features or args.events or args.model):
        raise CliError("need --features/--events and/or --model")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.features or args.events:
        n = write_activity(_load_vectors(args), out / "activity.csv")
        print(f"activity series: {n} community-days -> {out / 'activity.csv'}")
    if args.model:
        try:
            model = forest.ForestModel.load(_require_file(Path(args.model)))
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise CliError(f"bad model file {args.model}: {exc}") from None
        write_importance(model, out / "importance.csv")
        print(f"feature importance: {len(FEATURE_NAMES)} rows -> {out / 'importance.csv'}")
    return 0


def random_items(rng: random.Random, max_items: int = 2000, max_keys: int = 20):
    n_keys = rng.randint(1, max_keys)
    n_accounts = rng.randint(2, 60)
    span = rng.choice([600, 3600, 86400])
    return [(f"k{rng.randrange(n_keys)}", f"u{rng.randrange(n_accounts)}", rng.randrange(span))
            for _ in range(rng.randint(0, max_items))]


def cmd_oracle_check(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    rng = random.Random(seed)
    failures = 0
    started = time.perf_counter()
    for case in range(args.cases):
        items = random_items(rng, args.max_items)
        threshold = rng.choice(args.thresholds)
        if window_edges(items, threshold) != oracle_edges(items, threshold):
            failures += 1
            print(f"case {case}: mismatch ({len(items)} items, threshold {threshold})")
    elapsed = time.perf_counter() - started
    print(f"oracle-check: {args.cases - failures}/{args.cases} cases agree (seed {seed}, {elapsed:.2f}s)")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# argument parsing

def _add_feature_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold-secs", type=float, default=60,
                   help="coordination time threshold in seconds (default: %(default)s)")
    p.add_argument("--coretweet-key", choices=("tweet", "author"), default="tweet",
                   help="co-retweet key: original tweet id or original author (default: %(default)s)")
    p.add_argument("--strict", action="store_true",
                   help="fail on the first malformed record instead of skipping it (default: lenient)")


def _add_vector_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--features", help="feature CSV written by build-features (default: none)")
    p.add_argument("--events", help="communities.json or its directory; features are built on the fly (default: none)")
    _add_feature_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coordnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging (default: off)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("simulate", help="write a synthetic scenario")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="library scenario name, one of A-E")
    src.add_argument("--config", help="scenario config JSON (default: none)")
    p.add_argument("--seed", type=int, default=None,
                   help=f"generator seed (default: ${SEED_ENV}, else the scenario's own seed)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("build-features", help="events -> feature CSV")
    p.add_argument("--input", required=True, help="communities.json or the directory holding it")
    p.add_argument("--out", required=True, help="feature CSV path")
    p.add_argument("--aggregation", choices=("daily", "weekly", "both"), default="daily",
                   help="which vectors to emit (default: %(default)s)")
    _add_feature_flags(p)
    p.set_defaults(func=cmd_build_features)

    p = sub.add_parser("train", help="train a forest on every row of one aggregation")
    _add_vector_inputs(p)
    p.add_argument("--aggregation", choices=("daily", "weekly"), default="daily", help="(default: %(default)s)")
    p.add_argument("--n-trees", type=int, default=100, help="(default: %(default)s)")
    p.add_argument("--seed", type=int, default=None, help=f"training seed (default: ${SEED_ENV}, else 0)")
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run the Task 1 / Task 2 protocol")
    _add_vector_inputs(p)
    p.add_argument("--config", help="experiment spec JSON; overrides the protocol flags below (default: none)")
    p.add_argument("--task", type=int, choices=(1, 2), default=1, help="(default: %(default)s)")
    p.add_argument("--aggregation", choices=("daily", "weekly"), default="daily", help="(default: %(default)s)")
    p.add_argument("--ratio", choices=sorted(harness.RATIOS), default="2:18",
                   help="SIO:non-SIO sources per training set (default: %(default)s)")
    p.add_argument("--window-n", type=int, default=60, help="training window in days (default: %(default)s)")
    p.add_argument("--seeds", type=_seed_list, default=None,
                   help=f"comma-separated seeds (default: ${SEED_ENV}, else 0)")
    p.add_argument("--n-trees", type=int, default=100, help="(default: %(default)s)")
    p.add_argument("--start", type=_iso, help="first day of the evaluated range (default: corpus start)")
    p.add_argument("--end", type=_iso, help="last day of the evaluated range (default: corpus end)")
    p.add_argument("--tune-ns", type=_seed_list, default=None,
                   help="candidate N values tuned on the config's tuning_range (default: no tuning)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default: %(default)s)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="activity-series and feature-importance CSVs")
    _add_vector_inputs(p)
    p.add_argument("--model", help="model JSON written by train (default: none)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("oracle-check", help="sliding-window edges vs all-pairs oracle on random inputs")
    p.add_argument("--cases", type=int, default=200, help="(default: %(default)s)")
    p.add_argument("--max-items", type=int, default=2000, help="(default: %(default)s)")
    p.add_argument("--thresholds", type=_seed_list, default=(1, 60, 300, 600), help="(default: 1,60,300,600)")
    p.add_argument("--seed", type=int, default=None, help=f"(default: ${SEED_ENV}, else 0)")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
