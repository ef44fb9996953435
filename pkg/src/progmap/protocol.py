"""One local source talking to external sources, round by round.

A round: the user's keyword query selects local entities (intents); for each
intent and each external source the local strategy produces a keyword query
and the external source answers with a ranked list. User feedback then
reinforces both strategies. Autonomous replay re-runs a judged round against
the stored judgments without asking the user again.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import DataTable, tokenize
from .metrics import mrr, relevant_positions
from .retrieval import InvertedIndex, RankedList, answer_deterministic, build_index
from .strategy import (
    ExternalQuery,
    Intent,
    LearnerConfig,
    StrategyMatrix,
    UcbState,
    ensure_external_row,
    expand_row,
    init_local_row,
    sample_external_answers,
    sample_external_query,
    send_all_query,
    ucb1_query,
)

Relevance = Mapping[tuple[Intent, str], frozenset[str] | set[str]]


@dataclass
class SessionConfig:
    min_interactions_before_auto: int = 20
    auto_max_rounds: int = 10
    expansion_enabled: bool = False
    auto_enabled: bool = False

    def __post_init__(self) -> None:
        if self.min_interactions_before_auto < 0 or self.auto_max_rounds < 0:
            raise ValueError("session counters must be non-negative")


@dataclass
class IntentResult:
    intent: Intent
    source_id: str
    query: ExternalQuery
    ranked: RankedList
    relevant_positions: tuple[int, ...] = ()
    mrr: float = 0.0

    def to_dict(self) -> dict:
        return {
            "intent": str(self.intent),
            "source": self.source_id,
            "query": list(self.query.terms),
            "returned": self.ranked.ids,
            "relevant": list(self.relevant_positions),
            "mrr": self.mrr,
        }


@dataclass
class InteractionRecord:
    round: int
    user_query: str
    intents: list[Intent]
    results: list[IntentResult] = field(default_factory=list)
    replay: bool = False

    def mean_mrr(self, only: Relevance | None = None) -> float:
        """Average per-intent MRR, optionally over entries with known relevance."""
        vals = [
            r.mrr
            for r in self.results
            if only is None or only.get((r.intent, r.source_id))
        ]
        return sum(vals) / len(vals) if vals else 0.0

    def to_json(self, **extra) -> str:
        doc = {"round": self.round, "query": self.user_query, "replay": self.replay}
        doc.update(extra)
        doc["entries"] = [r.to_dict() for r in self.results]
        return json.dumps(doc, sort_keys=False, separators=(",", ":"))


@dataclass
class Channel:
    """Everything the local source keeps about one external source."""

    table: DataTable
    index: InvertedIndex
    local: StrategyMatrix
    external: StrategyMatrix | None
    ucb: UcbState = field(default_factory=UcbState)


def form_intents(user_query: str, local_table: DataTable, local_index: InvertedIndex | None = None) -> list[Intent]:
    """Conjunctive keyword match over the local table, one intent per hit.

    Intents follow table order.
    """
    terms = sorted(set(tokenize(user_query)))
    if not terms:
        return []
    if local_index is not None:
        hits: set[str] | None = None
        for t in terms:
            ids = {e for e, _ in local_index.postings.get(t, ())}
            hits = ids if hits is None else hits & ids
            if not hits:
                return []
        matched = [r for r in local_table.records if r.entity_id in hits]  # type: ignore[operator]
    else:
        want = set(terms)
        matched = [r for r in local_table.records if want <= set(r.tokens())]
    key = " ".join(terms)
    return [Intent(key, r.entity_id) for r in matched]


class Session:
    """Mutable learning state for one local source and its external sources.

    Not thread-safe; one session belongs to one thread of execution.
    """

    def __init__(
        self,
        local_table: DataTable,
        externals: Mapping[str, DataTable],
        learner: LearnerConfig | None = None,
        session: SessionConfig | None = None,
        indexes: Mapping[str, InvertedIndex] | None = None,
        rng: random.Random | None = None,
    ) -> None:
        self.learner = learner or LearnerConfig()
        self.config = session or SessionConfig()
        self.local_table = local_table
        indexes = dict(indexes or {})
        self.local_index = indexes.get(local_table.source_id) or build_index(local_table)
        self.channels: dict[str, Channel] = {}
        for sid in sorted(externals):
            table = externals[sid]
            self.channels[sid] = Channel(
                table=table,
                index=indexes.get(sid) or build_index(table),
                local=StrategyMatrix(f"local->{sid}"),
                external=StrategyMatrix(f"external:{sid}") if self.learner.external_policy == "roth-erev" else None,
            )
        self.rng = rng or random.Random(self.learner.rng_seed)
        self.rounds = 0
        self.replays = 0
        self._query_text: dict[Intent, str] = {}
        self._known: dict[tuple[Intent, str], set[str]] = {}

    # -- one round --------------------------------------------------------

    def form_intents(self, user_query: str) -> list[Intent]:
        return form_intents(user_query, self.local_table, self.local_index)

    def run_interaction(self, user_query: str, intents: Sequence[Intent] | None = None) -> InteractionRecord:
        replay = intents is not None
        if intents is None:
            intents = self.form_intents(user_query)
            self.rounds += 1
        record = InteractionRecord(self.rounds, user_query, list(intents), replay=replay)
        for intent in intents:
            self._query_text.setdefault(intent, user_query)
            for sid, ch in self.channels.items():
                query = self._external_query(ch, intent)
                ranked = self._answer(ch, query)
                record.results.append(IntentResult(intent, sid, query, ranked))
        return record

    def _external_query(self, ch: Channel, intent: Intent) -> ExternalQuery:
        cfg = self.learner
        entity = self.local_table.get(intent.entity_id)
        if cfg.policy == "deterministic-bm25":
            return send_all_query(intent, entity)
        if intent not in ch.local:
            init_local_row(ch.local, intent, entity, cfg, self._query_text.get(intent))
        if cfg.policy == "ucb1":
            return ucb1_query(ch.ucb, ch.local, intent, cfg.m_terms, cfg.ucb_c)
        return sample_external_query(ch.local, intent, cfg.m_terms, self.rng)

    def _answer(self, ch: Channel, query: ExternalQuery) -> RankedList:
        cfg = self.learner
        if ch.external is None:
            return answer_deterministic(ch.index, query.terms, cfg.k_results)
        ensure_external_row(
            ch.external, query.key, ch.index, cfg.k_results, self.rng, cfg.ext_seed, cfg.ext_seed_decay
        )
        return sample_external_answers(ch.external, query.key, cfg.k_results, self.rng)

    # -- learning ---------------------------------------------------------

    def apply_feedback(self, record: InteractionRecord, relevance: Relevance) -> None:
        """Score each entry and reinforce the strategies that produced it."""
        cfg = self.learner
        for res in record.results:
            rel = relevance.get((res.intent, res.source_id), frozenset())
            res.relevant_positions = relevant_positions(res.ranked.ids, rel)
            res.mrr = mrr(res.ranked.ids, rel)
            ch = self.channels[res.source_id]
            found = [res.ranked.ids[p - 1] for p in res.relevant_positions]
            if found:
                self._known.setdefault((res.intent, res.source_id), set()).update(found)
            if cfg.policy == "ucb1":
                for feat in res.query.features:
                    ch.ucb.update(res.intent, feat, res.mrr)
            if res.mrr <= 0:
                continue
            if cfg.policy == "roth-erev":
                for feat in res.query.features:
                    ch.local.reinforce(res.intent, feat, res.mrr, cfg.alpha)
            if ch.external is not None:
                for ent in found:
                    ch.external.reinforce(res.query.key, ent, res.mrr, cfg.alpha)
            if self.config.expansion_enabled and res.intent in ch.local:
                for ent in found:
                    expand_row(ch.local, res.intent, ch.table.get(ent), cfg)

    def known_relevance(self, record: InteractionRecord) -> dict[tuple[Intent, str], frozenset[str]]:
        """Judgments stored from earlier feedback for the entries of ``record``."""
        out = {}
        for res in record.results:
            key = (res.intent, res.source_id)
            if self._known.get(key):
                out[key] = frozenset(self._known[key])
        return out

    def autonomous_replay(self, record: InteractionRecord, trajectory: list[float] | None = None) -> int:
        """Re-run ``record``'s query against stored judgments until MRR stalls.

        Returns the number of replays executed. Stops when the mean MRR over
        entries with known relevant entities fails to beat the best seen so
        far, or after ``auto_max_rounds`` replays.
        """
        cfg = self.config
        if not cfg.auto_enabled or cfg.auto_max_rounds == 0:
            return 0
        if record.round < cfg.min_interactions_before_auto:
            return 0
        relevance = self.known_relevance(record)
        if not relevance:
            return 0
        best = record.mean_mrr(relevance)
        if trajectory is not None:
            trajectory.append(best)
        executed = 0
        for _ in range(cfg.auto_max_rounds):
            rerun = self.run_interaction(record.user_query, intents=record.intents)
            self.apply_feedback(rerun, relevance)
            executed += 1
            current = rerun.mean_mrr(relevance)
            if trajectory is not None:
                trajectory.append(current)
            if current <= best:
                break
            best = current
        self.replays += executed
        return executed

    # -- inspection -------------------------------------------------------

    def matrices(self) -> dict[str, StrategyMatrix]:
        out = {}
        for sid, ch in self.channels.items():
            out[f"local-{sid}"] = ch.local
            if ch.external is not None:
                out[f"external-{sid}"] = ch.external
        return out
