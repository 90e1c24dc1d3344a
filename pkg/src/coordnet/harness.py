"""Sliding-window train/test experiments over community feature streams.

Task 1 trains and tests on the same campaigns and communities; Task 2
holds out one campaign and one baseline and samples a single test source
per day with a biased coin.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import date, timedelta
from itertools import combinations
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import forest
from .metrics import Confusion, MetricSummary, prf, summarize
from .netstats import Aggregation, FeatureVector

logger = logging.getLogger(__name__)

RATIOS = {"2:18": (2, 18), "5:15": (5, 15)}
N_SAMPLED_GROUPS = 100


def seed_for(*keys: int) -> int:
    """Stable 32-bit seed derived from integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def parse_ratio(ratio: str) -> tuple[int, int]:
    if ratio not in RATIOS:
        raise ValueError(f"ratio must be one of {sorted(RATIOS)}, got {ratio!r}")
    return RATIOS[ratio]


def heads_probability(ratio: str) -> float:
    n_sio, n_non = parse_ratio(ratio)
    return n_sio / n_non


@dataclass(frozen=True)
class ExperimentSpec:
    task: int = 1
    aggregation: Aggregation = Aggregation.DAILY
    ratio: str = "2:18"
    window_N: int = 60
    threshold: int = 60
    seeds: tuple[int, ...] = (0,)
    date_range: tuple[date, date] | None = None
    tuning_range: tuple[date, date] | None = None
    n_trees: int = 100

    def __post_init__(self):
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.task not in (1, 2):
            raise ValueError("task must be 1 or 2")
        parse_ratio(self.ratio)
        if self.window_N < 1:
            raise ValueError("window_N must be >= 1")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if not self.seeds:
            raise ValueError("need at least one seed")
        for name in ("date_range", "tuning_range"):
            rng = getattr(self, name)
            if rng is not None and rng[1] < rng[0]:
                raise ValueError(f"{name} ends before it starts")
        if self.tuning_range is not None and self.date_range is not None:
            first_eval = self.date_range[0] + timedelta(days=self.window_N)
            if self.tuning_range[1] >= first_eval:
                raise ValueError("tuning_range must end before the first evaluated day")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["aggregation"] = self.aggregation.value
        doc["seeds"] = list(self.seeds)
        for name in ("date_range", "tuning_range"):
            if doc[name] is not None:
                doc[name] = [d.isoformat() for d in doc[name]]
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> ExperimentSpec:
        kw = {k: doc[k] for k in ("task", "aggregation", "ratio", "window_N", "threshold", "n_trees") if k in doc}
        if "seeds" in doc:
            kw["seeds"] = tuple(doc["seeds"])
        for name in ("date_range", "tuning_range"):
            if doc.get(name) is not None:
                a, b = doc[name]
                kw[name] = (date.fromisoformat(a), date.fromisoformat(b))
        return cls(**kw)


@dataclass(frozen=True)
class Stream:
    """One source's per-day vectors; replicas are copies with a higher index."""

    community_id: str
    label: int
    vectors: Mapping[date, FeatureVector]
    replica: int = 0


@dataclass
class CommunityCorpus:
    sio_campaigns: dict[str, Mapping[date, FeatureVector]]
    baselines: dict[str, Mapping[date, FeatureVector]]
    aggregation: Aggregation = Aggregation.DAILY

    @classmethod
    def from_vectors(cls, vectors: Iterable[FeatureVector], aggregation: Aggregation | str) -> CommunityCorpus:
        aggregation = Aggregation(aggregation)
        sio: dict[str, dict] = {}
        base: dict[str, dict] = {}
        labels: dict[str, int] = {}
        for v in vectors:
            if v.aggregation is not aggregation:
                continue
            if labels.setdefault(v.community_id, v.label) != v.label:
                raise ValueError(f"community {v.community_id} has mixed labels")
            (sio if v.label == 1 else base).setdefault(v.community_id, {})[v.date] = v
        sort = lambda m: {k: dict(sorted(m[k].items())) for k in sorted(m)}
        return cls(sort(sio), sort(base), aggregation)

    def span(self) -> tuple[date, date]:
        days = [d for m in (*self.sio_campaigns.values(), *self.baselines.values()) for d in m]
        if not days:
            raise ValueError("corpus is empty")
        return min(days), max(days)

    def restrict(self, campaign_ids: Sequence[str] | None = None,
                 baseline_ids: Sequence[str] | None = None) -> CommunityCorpus:
        sio = self.sio_campaigns if campaign_ids is None else {c: self.sio_campaigns[c] for c in campaign_ids}
        base = self.baselines if baseline_ids is None else {b: self.baselines[b] for b in baseline_ids}
        return CommunityCorpus(sio, base, self.aggregation)


# ---------------------------------------------------------------------------
# group enumeration and oversampling

def enumerate_task1_groups(campaign_ids: Sequence[str], ratio: str, seed: int = 0) -> list[tuple[str, ...]]:
    """All pairs for 2:18; 100 seeded 5-subsets for 5:15."""
    n_sio, _ = parse_ratio(ratio)
    ids = sorted(campaign_ids)
    if len(ids) < n_sio:
        raise ValueError(f"ratio {ratio} needs at least {n_sio} campaigns, got {len(ids)}")
    if ratio == "2:18":
        return list(combinations(ids, 2))
    rng = np.random.default_rng([seed, 1])
    return [tuple(sorted(ids[i] for i in rng.choice(len(ids), n_sio, replace=False)))
            for _ in range(N_SAMPLED_GROUPS)]


@dataclass(frozen=True)
class Task2Group:
    train_campaigns: tuple[str, ...]
    held_out_campaign: str
    train_baselines: tuple[str, ...]
    held_out_baseline: str


def enumerate_task2_groups(campaign_ids: Sequence[str], baseline_ids: Sequence[str], ratio: str,
                           seed: int = 0) -> list[Task2Group]:
    """Triplets (2:18) or 100 seeded 5+1 draws (5:15), each with a held-out baseline.

    For a triplet the lexicographically last member is held out. The train
    baselines are a seeded draw of all but one baseline; the remaining one
    is held out.
    """
    n_sio, _ = parse_ratio(ratio)
    camps = sorted(campaign_ids)
    bases = sorted(baseline_ids)
    if len(camps) < n_sio + 1:
        raise ValueError(f"ratio {ratio} needs at least {n_sio + 1} campaigns, got {len(camps)}")
    if len(bases) < 2:
        raise ValueError(f"need at least 2 baselines, got {len(bases)}")
    rng = np.random.default_rng([seed, 2])

    def split_baselines():
        held = int(rng.integers(len(bases)))
        return tuple(b for i, b in enumerate(bases) if i != held), bases[held]

    groups = []
    if ratio == "2:18":
        for triplet in combinations(camps, 3):
            train_b, held_b = split_baselines()
            groups.append(Task2Group(triplet[:2], triplet[2], train_b, held_b))
    else:
        for _ in range(N_SAMPLED_GROUPS):
            pick = rng.choice(len(camps), n_sio + 1, replace=False)
            train_c = tuple(sorted(camps[i] for i in pick[:n_sio]))
            train_b, held_b = split_baselines()
            groups.append(Task2Group(train_c, camps[pick[n_sio]], train_b, held_b))
    return groups


def oversample(streams: Sequence[Stream], target_count: int) -> list[Stream]:
    """Round-robin replication of ``streams`` up to ``target_count``."""
    if not streams:
        raise ValueError("need at least one stream")
    if target_count < len(streams):
        raise ValueError(f"target_count {target_count} is below the {len(streams)} input streams")
    k = len(streams)
    return [replace(streams[i % k], replica=i // k) for i in range(target_count)]


# ---------------------------------------------------------------------------
# experiment records

@dataclass(frozen=True)
class Prediction:
    run_id: str
    seed: int
    group: int
    day: date  # evaluation day t
    test_date: date  # date of the tested vector (t, or t+6 when weekly)
    community_id: str
    replica: int
    true_label: int
    predicted_label: int
    score: float


@dataclass(frozen=True)
class Assembly:
    """What went into one (train, test) pair, for leakage audits."""

    run_id: str
    day: date
    train_windows: tuple[tuple[date, date], ...]
    test_windows: tuple[tuple[date, date], ...]
    n_sio_sources: int
    n_non_sio_sources: int

    def leaks(self) -> bool:
        if not self.train_windows or not self.test_windows:
            return False
        return max(end for _, end in self.train_windows) >= min(start for start, _ in self.test_windows)


@dataclass
class RunResult:
    run_id: str
    seed: int
    precision: float
    recall: float
    f1: float
    n_days: int
    confusion: Confusion
    group: int | None = None


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    groups: dict[int, list]  # seed -> enumerated groups
    runs: list[RunResult]
    summary: MetricSummary
    predictions: list[Prediction]
    skipped_days: int = 0
    protocol: str = ""

    def to_dict(self) -> dict:
        def group_doc(g):
            return asdict(g) if isinstance(g, Task2Group) else list(g)

        return {
            "task": self.spec.task,
            "spec": self.spec.to_dict(),
            "protocol": self.protocol,
            "summary": self.summary.to_dict(),
            "skipped_days": self.skipped_days,
            "groups": {str(seed): [group_doc(g) for g in gs] for seed, gs in self.groups.items()},
            "runs": [
                {"run_id": r.run_id, "seed": r.seed, "group": r.group, "precision": r.precision,
                 "recall": r.recall, "f1": r.f1, "n_days": r.n_days, "confusion": asdict(r.confusion)}
                for r in self.runs
            ],
            "predictions": [
                {**asdict(p), "day": p.day.isoformat(), "test_date": p.test_date.isoformat()}
                for p in self.predictions
            ],
        }

    def scored(self) -> list[tuple[float, int]]:
        return [(p.score, p.true_label) for p in self.predictions]

    def error_rows(self) -> list[tuple[str, date, int, int]]:
        return [(p.run_id, p.test_date, p.true_label, p.predicted_label) for p in self.predictions]


# ---------------------------------------------------------------------------
# window assembly

def _vector_window(d: date, aggregation: Aggregation) -> tuple[date, date]:
    return (d - timedelta(days=6), d) if aggregation is Aggregation.WEEKLY else (d, d)


def _test_offset(aggregation: Aggregation) -> int:
    return 6 if aggregation is Aggregation.WEEKLY else 0


def evaluation_days(spec: ExperimentSpec, span: tuple[date, date], first: date | None = None) -> list[date]:
    """Days t that are scored: the first ``window_N`` days are held back for training."""
    start, end = spec.date_range or span
    first = first or start + timedelta(days=spec.window_N)
    last = end - timedelta(days=_test_offset(spec.aggregation))
    return [first + timedelta(days=i) for i in range((last - first).days + 1)]


def _training_rows(sources: Sequence[Stream], t: date, n: int):
    X, y, windows = [], [], []
    days = [t - timedelta(days=k) for k in range(n, 0, -1)]
    for src in sources:
        for d in days:
            v = src.vectors.get(d)
            if v is not None:
                X.append(v.values)
                y.append(src.label)
                windows.append(v.date)
    return X, y, windows


@dataclass
class _DayOutcome:
    predictions: list[Prediction] = field(default_factory=list)
    assembly: Assembly | None = None
    skipped: bool = False


def _run_day(run_id: str, seed: int, group: int, day_index: int, t: date, train_sources: Sequence[Stream],
             test_sources: Sequence[Stream], spec: ExperimentSpec, audit: bool) -> _DayOutcome:
    agg = spec.aggregation
    test_date = t + timedelta(days=_test_offset(agg))
    X, y, train_dates = _training_rows(train_sources, t, spec.window_N)
    tests = [(src, src.vectors[test_date]) for src in test_sources if test_date in src.vectors]
    if not X or not tests:
        return _DayOutcome(skipped=True)
    model = forest.train(X, y, n_trees=spec.n_trees, seed=seed_for(seed, group, day_index))
    labels, scores = model.predict_many([v.values for _, v in tests])
    out = _DayOutcome()
    for (src, v), yhat, s in zip(tests, labels, scores):
        out.predictions.append(Prediction(run_id, seed, group, t, test_date, src.community_id, src.replica,
                                          src.label, int(yhat), float(s)))
    if audit:
        out.assembly = Assembly(
            run_id, t,
            tuple(sorted({_vector_window(d, agg) for d in train_dates})),
            tuple(sorted({_vector_window(v.date, agg) for _, v in tests})),
            n_sio_sources=sum(1 for s in train_sources if s.label == 1),
            n_non_sio_sources=sum(1 for s in train_sources if s.label == 0),
        )
    return out


def _streams(corpus: CommunityCorpus, ids: Sequence[str], sio: bool) -> list[Stream]:
    pool = corpus.sio_campaigns if sio else corpus.baselines
    missing = [i for i in ids if i not in pool]
    if missing:
        raise ValueError(f"corpus lacks {'campaigns' if sio else 'baselines'}: {', '.join(missing)}")
    return [Stream(i, 1 if sio else 0, pool[i]) for i in ids]


def _check_corpus(spec: ExperimentSpec, corpus: CommunityCorpus) -> None:
    if corpus.aggregation is not spec.aggregation:
        raise ValueError(f"corpus holds {corpus.aggregation.value} vectors but spec asks for {spec.aggregation.value}")


def _task1_group(args) -> tuple[RunResult, list[Prediction], list[Assembly], int]:
    spec, corpus, gi, group, days, audit = args
    seed = spec.seeds[0]
    _, n_non = parse_ratio(spec.ratio)
    sources = _streams(corpus, group, sio=True) + oversample(_streams(corpus, sorted(corpus.baselines), sio=False), n_non)
    run_id = f"g{gi}"
    per_day, preds, assemblies, skipped = [], [], [], 0
    total = Confusion()
    for k, t in enumerate(days):
        out = _run_day(run_id, seed, gi, k, t, sources, sources, spec, audit)
        if out.skipped:
            skipped += 1
            continue
        c = Confusion.from_labels([p.true_label for p in out.predictions],
                                  [p.predicted_label for p in out.predictions])
        total = total + c
        per_day.append(prf(c))
        preds += out.predictions
        if out.assembly:
            assemblies.append(out.assembly)
    if per_day:
        p, r, f = (float(np.mean(col)) for col in zip(*per_day))
    else:
        p = r = f = math.nan
    return RunResult(run_id, seed, p, r, f, len(per_day), total, gi), preds, assemblies, skipped


def _task2_group(args) -> tuple[list[Prediction], list[Assembly], int]:
    spec, corpus, seed, gi, group, days, audit = args
    _, n_non = parse_ratio(spec.ratio)
    p_heads = heads_probability(spec.ratio)
    train = _streams(corpus, group.train_campaigns, sio=True) + oversample(
        _streams(corpus, group.train_baselines, sio=False), n_non)
    held_sio = _streams(corpus, [group.held_out_campaign], sio=True)
    held_non = _streams(corpus, [group.held_out_baseline], sio=False)
    run_id = f"s{seed}-g{gi}"
    preds, assemblies, skipped = [], [], 0
    for k, t in enumerate(days):
        heads = coin_flip(seed, gi, k, p_heads)
        out = _run_day(run_id, seed, gi, k, t, train, held_sio if heads else held_non, spec, audit)
        if out.skipped:
            skipped += 1
            continue
        preds += out.predictions
        if out.assembly:
            assemblies.append(out.assembly)
    return preds, assemblies, skipped


def coin_flip(seed: int, group: int, day_index: int, p_heads: float) -> bool:
    """Biased coin for Task 2; heads selects the held-out campaign."""
    return bool(np.random.default_rng([seed, group, day_index, 7]).random() < p_heads)


def _map(fn, work: list, jobs: int) -> list:
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, work))
    return [fn(w) for w in work]


def run_task1(spec: ExperimentSpec, corpus: CommunityCorpus, audit: Callable[[Assembly], None] | None = None,
              jobs: int = 1, first_eval: date | None = None) -> ExperimentResult:
    """Per-day P/R/F1 on all 20 sources, averaged over days; CIs across groups."""
    _check_corpus(spec, corpus)
    groups = enumerate_task1_groups(list(corpus.sio_campaigns), spec.ratio, spec.seeds[0])
    if not corpus.baselines:
        raise ValueError("Task 1 needs at least one baseline")
    days = evaluation_days(spec, corpus.span(), first_eval)
    outs = _map(_task1_group, [(spec, corpus, gi, g, days, audit is not None) for gi, g in enumerate(groups)], jobs)
    runs, preds, skipped = [], [], 0
    for run, p, assemblies, sk in outs:
        runs.append(run)
        preds += p
        skipped += sk
        for a in assemblies:
            audit(a)
    if skipped:
        logger.warning("task 1: skipped %d group-days with missing data", skipped)
    scored_runs = [r for r in runs if r.n_days]
    if not scored_runs:
        raise ValueError("no evaluable days in the date range")
    summary = summarize([(r.precision, r.recall, r.f1) for r in scored_runs])
    return ExperimentResult(spec, {spec.seeds[0]: groups}, runs, summary, preds, skipped,
                            "per-day metrics averaged over days; CIs across groups")


def run_task2(spec: ExperimentSpec, corpus: CommunityCorpus, audit: Callable[[Assembly], None] | None = None,
              jobs: int = 1) -> ExperimentResult:
    """One coin-selected test source per group-day; metrics pooled per seed; CIs across seeds."""
    _check_corpus(spec, corpus)
    days = evaluation_days(spec, corpus.span())
    work, all_groups = [], {}
    for seed in spec.seeds:
        groups = enumerate_task2_groups(list(corpus.sio_campaigns), list(corpus.baselines), spec.ratio, seed)
        all_groups[seed] = groups
        work += [(spec, corpus, seed, gi, g, days, audit is not None) for gi, g in enumerate(groups)]
    outs = _map(_task2_group, work, jobs)
    by_seed: dict[int, list[Prediction]] = {s: [] for s in spec.seeds}
    preds, skipped = [], 0
    for p, assemblies, sk in outs:
        preds += p
        skipped += sk
        for pred in p:
            by_seed[pred.seed].append(pred)
        for a in assemblies:
            audit(a)
    if skipped:
        logger.warning("task 2: skipped %d group-days with missing data", skipped)
    runs = []
    for seed, ps in by_seed.items():
        c = Confusion.from_labels([p.true_label for p in ps], [p.predicted_label for p in ps])
        pr, rc, f1 = prf(c)
        runs.append(RunResult(f"s{seed}", seed, pr, rc, f1, len({(p.group, p.day) for p in ps}), c))
    if not preds:
        raise ValueError("no evaluable days in the date range")
    summary = summarize([(r.precision, r.recall, r.f1) for r in runs])
    return ExperimentResult(spec, all_groups, runs, summary, preds, skipped,
                            "predictions pooled per seed; CIs across seeds")


def run(spec: ExperimentSpec, corpus: CommunityCorpus, **kw) -> ExperimentResult:
    return (run_task1 if spec.task == 1 else run_task2)(spec, corpus, **kw)


def tune_window(spec: ExperimentSpec, corpus: CommunityCorpus, candidate_Ns: Sequence[int],
                jobs: int = 1) -> int:
    """Best window length by mean Task 1 F1 on the tuning range; ties go to the larger N.

    Every candidate is scored on the same days: those after the first
    ``max(candidate_Ns)`` days of the tuning range.
    """
    if not candidate_Ns:
        raise ValueError("no candidate window sizes")
    if spec.tuning_range is None:
        raise ValueError("spec has no tuning_range")
    start, end = spec.tuning_range
    longest = max(candidate_Ns)
    first = start + timedelta(days=longest)
    if first + timedelta(days=_test_offset(spec.aggregation)) > end:
        raise ValueError(f"tuning range {start}..{end} is too short for N={longest}")
    if len(candidate_Ns) == 1:
        return candidate_Ns[0]
    best_n, best_f1 = None, -math.inf
    for n in sorted(set(candidate_Ns)):
        trial = replace(spec, task=1, window_N=n, date_range=spec.tuning_range, tuning_range=None)
        f1 = run_task1(trial, corpus, jobs=jobs, first_eval=first).summary.f1.mean
        logger.info("tune_window: N=%d mean F1 %.4f", n, f1)
        if f1 >= best_f1:
            best_n, best_f1 = n, f1
    return best_n
