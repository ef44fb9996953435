"""Simulated users, method variants and learning-curve experiments."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Collection, Mapping, Sequence

from . import metrics
from .corpus import DataTable, GroundTruth
from .protocol import InteractionRecord, Session, SessionConfig
from .retrieval import InvertedIndex, RankedList, build_index
from .strategy import Intent, LearnerConfig


def mrr(ranked: RankedList | Sequence[str], relevant: Collection[str]) -> float:
    ids = ranked.ids if isinstance(ranked, RankedList) else ranked
    return metrics.mrr(ids, relevant)


class SimulatedUser:
    """Judges returned entities against ground truth. Holds no state besides a call counter."""

    def __init__(self, truth: GroundTruth) -> None:
        self.truth = truth
        self.calls = 0

    def relevant(self, intent: Intent, source_id: str) -> frozenset[str]:
        return self.truth.partners(intent.entity_id, source_id)

    def judge(self, intent: Intent, ranked: RankedList, source_id: str) -> tuple[int, ...]:
        self.calls += 1
        return metrics.relevant_positions(ranked.ids, self.relevant(intent, source_id))

    def feedback(self, record: InteractionRecord) -> dict[tuple[Intent, str], frozenset[str]]:
        """Relevant returned entities per entry of ``record``."""
        out = {}
        for res in record.results:
            positions = self.judge(res.intent, res.ranked, res.source_id)
            out[(res.intent, res.source_id)] = frozenset(res.ranked.ids[p - 1] for p in positions)
        return out


def judge(user: SimulatedUser, intent: Intent, ranked: RankedList, source_id: str | None = None) -> tuple[int, ...]:
    if source_id is None:
        sources = {s for _, s, _ in user.truth.pairs}
        if len(sources) != 1:
            raise ValueError("source_id required when ground truth spans several sources")
        (source_id,) = sources
    return user.judge(intent, ranked, source_id)


@dataclass(frozen=True)
class MethodVariant:
    name: str
    policy: str
    external_policy: str
    auto: bool = False
    expansion: bool = False

    def learner(self, base: LearnerConfig) -> LearnerConfig:
        return replace(base, policy=self.policy, external_policy=self.external_policy)

    def session(self, base: SessionConfig) -> SessionConfig:
        return replace(base, auto_enabled=self.auto, expansion_enabled=self.expansion)

    @property
    def learns(self) -> bool:
        return self.policy != "deterministic-bm25" or self.external_policy != "bm25"


VARIANTS: dict[str, MethodVariant] = {
    v.name: v
    for v in (
        MethodVariant("baseline", "deterministic-bm25", "bm25"),
        MethodVariant("ucb1", "ucb1", "bm25"),
        MethodVariant("re-no-ext-learning", "roth-erev", "bm25"),
        MethodVariant("re-ext-learning", "roth-erev", "roth-erev"),
        MethodVariant("re-auto-expansion", "roth-erev", "roth-erev", auto=True, expansion=True),
    )
}


@dataclass(frozen=True)
class Datasets:
    local: DataTable
    externals: Mapping[str, DataTable]
    truth: GroundTruth
    indexes: dict[str, InvertedIndex] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.local.source_id in self.externals:
            raise ValueError("local and external source ids must differ")
        for local_id, src, ext_id in self.truth.pairs:
            ext = self.externals.get(src)
            if local_id not in self.local or ext is None or ext_id not in ext:
                raise ValueError(f"ground truth pair ({local_id}, {src}, {ext_id}) does not match the datasets")
        if not self.truth.pairs:
            raise ValueError("ground truth is empty")

    def index(self, source_id: str) -> InvertedIndex:
        if source_id not in self.indexes:
            table = self.local if source_id == self.local.source_id else self.externals[source_id]
            self.indexes[source_id] = build_index(table)
        return self.indexes[source_id]

    def all_indexes(self) -> dict[str, InvertedIndex]:
        for sid in [self.local.source_id, *self.externals]:
            self.index(sid)
        return self.indexes


@dataclass
class WorkloadConfig:
    min_query_terms: int = 1
    max_query_terms: int = 3
    max_local_matches: int = 5
    query_pool: int = 200  # 0: a fresh query every round

    def __post_init__(self) -> None:
        if not 1 <= self.min_query_terms <= self.max_query_terms or self.max_local_matches < 1:
            raise ValueError("invalid workload bounds")
        if self.query_pool < 0:
            raise ValueError("query_pool must be non-negative")


class QueryWorkload:
    """User queries: a few tokens of a local entity that has a known partner.

    If the drawn tokens match more than ``max_local_matches`` local entities,
    more of the target's tokens are added until the match set is small enough
    or the tokens run out.
    """

    def __init__(self, datasets: Datasets, rng: random.Random, config: WorkloadConfig | None = None) -> None:
        self.config = config or WorkloadConfig()
        self.rng = rng
        self.table = datasets.local
        self.index = datasets.index(datasets.local.source_id)
        partnered = datasets.truth.local_ids()
        self.targets = [r.entity_id for r in datasets.local.records if r.entity_id in partnered]
        self.pool = [self._draw() for _ in range(self.config.query_pool)]

    def _matches(self, terms: Sequence[str]) -> int:
        hits: set[str] | None = None
        for t in terms:
            ids = {e for e, _ in self.index.postings.get(t, ())}
            hits = ids if hits is None else hits & ids
        return len(hits or ())

    def next(self) -> tuple[str, str]:
        if self.pool:
            return self.rng.choice(self.pool)
        return self._draw()

    def _draw(self) -> tuple[str, str]:
        cfg = self.config
        target = self.rng.choice(self.targets)
        tokens = list(dict.fromkeys(self.table.get(target).tokens()))
        size = min(self.rng.randint(cfg.min_query_terms, cfg.max_query_terms), len(tokens))
        chosen = self.rng.sample(tokens, size)
        rest = [t for t in tokens if t not in chosen]
        while rest and self._matches(chosen) > cfg.max_local_matches:
            chosen.append(rest.pop(self.rng.randrange(len(rest))))
        return target, " ".join(chosen)


@dataclass(frozen=True)
class CurvePoint:
    round: int
    mrr_avg: float
    variant: str
    seed: int


@dataclass
class ExperimentResult:
    variant: str
    seed: int
    curve: list[CurvePoint]
    round_mrr: list[float]
    replays: list[int]
    session: Session


def round_mrr(record: InteractionRecord, user: SimulatedUser) -> float:
    """Mean MRR over entries whose local entity has a partner in that source."""
    vals = [r.mrr for r in record.results if user.relevant(r.intent, r.source_id)]
    return sum(vals) / len(vals) if vals else 0.0


def run_experiment(
    variant: MethodVariant | str,
    datasets: Datasets,
    rounds: int,
    seed: int,
    learner: LearnerConfig | None = None,
    session: SessionConfig | None = None,
    workload: WorkloadConfig | None = None,
    window: int = 100,
    on_round: Callable[[int, InteractionRecord, Session, int], None] | None = None,
) -> ExperimentResult:
    """Simulate ``rounds`` user interactions and return the smoothed MRR curve.

    The query workload depends on ``seed`` only, so every variant sees the
    same user queries for a given seed. ``on_round(round, record, session,
    replays)`` is called after each user round.
    """
    if isinstance(variant, str):
        variant = VARIANTS[variant]
    if rounds < 0 or window < 1:
        raise ValueError("rounds must be >= 0 and window >= 1")
    learner_cfg = variant.learner(replace(learner or LearnerConfig(), rng_seed=seed))
    session_cfg = variant.session(session or SessionConfig())
    sess = Session(
        datasets.local,
        datasets.externals,
        learner_cfg,
        session_cfg,
        indexes=datasets.all_indexes(),
        rng=random.Random(f"learner-{seed}"),
    )
    user = SimulatedUser(datasets.truth)
    queries = QueryWorkload(datasets, random.Random(f"workload-{seed}"), workload)

    curve: list[CurvePoint] = []
    per_round: list[float] = []
    replays: list[int] = []
    recent: deque[float] = deque(maxlen=window)
    for t in range(1, rounds + 1):
        _, text = queries.next()
        record = sess.run_interaction(text)
        feedback = user.feedback(record)
        sess.apply_feedback(record, feedback)
        value = round_mrr(record, user)
        n_replays = sess.autonomous_replay(record)
        recent.append(value)
        per_round.append(value)
        replays.append(n_replays)
        avg = sum(recent) / len(recent)
        curve.append(CurvePoint(t, min(1.0, max(0.0, avg)), variant.name, seed))
        if on_round is not None:
            on_round(t, record, sess, n_replays)
    return ExperimentResult(variant.name, seed, curve, per_round, replays, sess)
