"""Stochastic querying/answering strategies and their learning rules.

A strategy is a sparse table of accumulated rewards ``S[context][action]``.
Action probabilities are ``S / row_total`` (Roth-Erev). The local side uses
intents as contexts and n-gram features as actions; an external side uses
canonical query keys as contexts and entity ids as actions.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Iterator, Mapping, Sequence

from .corpus import EntityRecord, Feature, extract_features, query_features, tokenize
from .retrieval import InvertedIndex, RankedList, answer_deterministic

POLICIES = ("roth-erev", "ucb1", "deterministic-bm25")
EXTERNAL_POLICIES = ("roth-erev", "bm25")
EXTERNAL_SEEDS = ("rank", "bm25")


class StrategyError(KeyError):
    """Unknown context or action; always a protocol bug."""


def canonical_query(text_or_terms: str | Iterable[str]) -> str:
    """Order-insensitive key: sorted distinct unigram tokens."""
    if isinstance(text_or_terms, str):
        terms = tokenize(text_or_terms)
    else:
        terms = [t for term in text_or_terms for t in tokenize(term)]
    return " ".join(sorted(set(terms)))


@dataclass(frozen=True, slots=True)
class Intent:
    query_key: str
    entity_id: str

    @classmethod
    def of(cls, user_query: str, entity_id: str) -> "Intent":
        return cls(canonical_query(user_query), entity_id)

    def __str__(self) -> str:
        return f"{self.entity_id}|{self.query_key}"


@dataclass
class LearnerConfig:
    alpha: float = 1.0
    k_results: int = 20
    m_terms: int = 5
    n_max: int = 2
    policy: str = "roth-erev"
    external_policy: str = "roth-erev"
    ucb_c: float = math.sqrt(2.0)
    init_boost: float = 2.0
    rng_seed: int = 0
    ext_seed: str = "rank"
    ext_seed_decay: float = 0.2

    def __post_init__(self) -> None:
        if self.ext_seed not in EXTERNAL_SEEDS:
            raise ValueError(f"unknown external seed {self.ext_seed!r}")
        if not 0 < self.ext_seed_decay <= 1:
            raise ValueError("ext_seed_decay must be in (0, 1]")
        for name in ("alpha", "k_results", "m_terms", "n_max", "ucb_c", "init_boost"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.external_policy not in EXTERNAL_POLICIES:
            raise ValueError(f"unknown external policy {self.external_policy!r}")


class StrategyMatrix:
    """Sparse accumulated-reward table with cached row totals."""

    def __init__(self, name: str = "") -> None:
        self.name = name
        self._rows: dict[Hashable, dict[Hashable, float]] = {}
        self._totals: dict[Hashable, float] = {}

    def __contains__(self, context: object) -> bool:
        return context in self._rows

    def __len__(self) -> int:
        return len(self._rows)

    def contexts(self) -> Iterator[Hashable]:
        return iter(self._rows)

    def row(self, context: Hashable) -> Mapping[Hashable, float]:
        try:
            return self._rows[context]
        except KeyError:
            raise StrategyError(f"unknown context {context}") from None

    def total(self, context: Hashable) -> float:
        return self._totals[context]

    def add_row(self, context: Hashable, weights: Mapping[Hashable, float]) -> None:
        if context in self._rows:
            raise StrategyError(f"row {context} already exists")
        if any(w < 0 for w in weights.values()):
            raise ValueError("strategy weights must be non-negative")
        total = math.fsum(weights.values())
        if not total > 0:
            raise ValueError(f"row {context} needs positive mass")
        self._rows[context] = dict(weights)
        self._totals[context] = total

    def add_action(self, context: Hashable, action: Hashable, weight: float) -> bool:
        """Add an action if absent. Returns whether the row changed."""
        row = self.row(context)
        if action in row:
            return False
        if weight < 0:
            raise ValueError("weight must be non-negative")
        row[action] = weight
        self._totals[context] += weight
        return True

    def probabilities(self, context: Hashable) -> dict[Hashable, float]:
        row = self.row(context)
        total = self._totals[context]
        return {a: s / total for a, s in row.items()}

    def probability(self, context: Hashable, action: Hashable) -> float:
        return self.row(context).get(action, 0.0) / self._totals[context]

    def reinforce(self, context: Hashable, action: Hashable, reward: float, alpha: float = 1.0) -> None:
        """Roth-Erev update: ``S[context][action] += alpha * reward``."""
        if reward < 0:
            raise ValueError("reward must be non-negative")
        row = self.row(context)
        if action not in row:
            raise StrategyError(f"unknown action {action} in row {context}")
        delta = alpha * reward
        if delta:
            row[action] += delta
            self._totals[context] += delta

    def sample(self, context: Hashable, count: int, rng: random.Random) -> list[Hashable]:
        """Draw up to ``count`` distinct actions proportionally to S.

        Each draw is categorical over the actions not yet drawn, which gives
        the same distribution as re-drawing on duplicates. Zero-mass actions
        are never returned; the result is shorter when support is smaller.
        """
        row = self.row(context)
        actions = [a for a, s in row.items() if s > 0]
        weights = [row[a] for a in actions]
        picked: list[Hashable] = []
        while actions and len(picked) < count:
            total = math.fsum(weights)
            x = rng.random() * total
            acc = 0.0
            i = 0
            for i, w in enumerate(weights):
                acc += w
                if x < acc:
                    break
            picked.append(actions.pop(i))
            weights.pop(i)
        return picked

    def snapshot_lines(self) -> list[str]:
        lines = []
        for ctx in sorted(self._rows, key=str):
            row = self._rows[ctx]
            for action in sorted(row, key=str):
                lines.append(f"{ctx}\t{action}\t{row[action]!r}")
        return lines

    def write_snapshot(self, path: str | Path) -> None:
        Path(path).write_text("".join(line + "\n" for line in self.snapshot_lines()), encoding="utf-8")

    def copy(self) -> "StrategyMatrix":
        other = StrategyMatrix(self.name)
        other._rows = {c: dict(r) for c, r in self._rows.items()}
        other._totals = dict(self._totals)
        return other

    def cells(self) -> dict[tuple[Hashable, Hashable], float]:
        return {(c, a): s for c, row in self._rows.items() for a, s in row.items()}


def read_snapshot(path: str | Path) -> dict[str, dict[str, float]]:
    """Parse a snapshot file back into ``{context: {action: S}}`` (string keys)."""
    rows: dict[str, dict[str, float]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
        ctx, action, value = parts
        rows.setdefault(ctx, {})[action] = float(value)
    return rows


# -- local side ---------------------------------------------------------------


def init_local_row(
    matrix: StrategyMatrix,
    intent: Intent,
    local_entity: EntityRecord,
    config: LearnerConfig,
    query_text: str | None = None,
) -> Mapping[Hashable, float]:
    """Seed an intent's row with its entity and query features at ``init_boost``.

    Query n-grams come from ``query_text`` when given (word order matters for
    n > 1), else from the intent's canonical key.
    """
    if intent in matrix:
        raise StrategyError(f"row for {intent} already exists")
    feats = list(extract_features(local_entity, config.n_max))
    feats += list(query_features(query_text if query_text is not None else intent.query_key, config.n_max))
    if not feats:
        raise ValueError(f"entity {local_entity.entity_id!r} has no features")
    matrix.add_row(intent, {f: config.init_boost for f in feats})
    return matrix.row(intent)


@dataclass(frozen=True)
class ExternalQuery:
    """A keyword query and the local-strategy actions that produced it."""

    terms: tuple[str, ...]
    features: tuple[Feature, ...] = ()

    @property
    def key(self) -> str:
        return " ".join(sorted(set(self.terms)))


def flatten(features: Sequence[Feature]) -> tuple[str, ...]:
    """Raw tokens of the features in draw order, duplicates removed."""
    seen: dict[str, None] = {}
    for f in features:
        for t in f.tokens:
            seen.setdefault(t, None)
    return tuple(seen)


def sample_external_query(
    matrix: StrategyMatrix, intent: Intent, m_terms: int, rng: random.Random
) -> ExternalQuery:
    feats = matrix.sample(intent, m_terms, rng)
    return ExternalQuery(flatten(feats), tuple(feats))  # type: ignore[arg-type]


def send_all_query(intent: Intent, local_entity: EntityRecord) -> ExternalQuery:
    """Every distinct keyword of the entity and the user query."""
    seen: dict[str, None] = {}
    for t in local_entity.tokens() + intent.query_key.split():
        seen.setdefault(t, None)
    return ExternalQuery(tuple(seen))


def expand_row(
    matrix: StrategyMatrix,
    intent: Intent,
    matched_external_entity: EntityRecord,
    config: LearnerConfig,
) -> int:
    """Add a confirmed match's features to the intent's row at weight 1.0.

    Returns the number of actions added; existing cells are untouched.
    """
    added = 0
    for feat in extract_features(matched_external_entity, config.n_max):
        added += matrix.add_action(intent, feat, 1.0)
    return added


# -- external side ------------------------------------------------------------


def ensure_external_row(
    matrix: StrategyMatrix,
    query_key: str,
    index: InvertedIndex,
    k_results: int,
    rng: random.Random,
    seed: str = "rank",
    decay: float = 0.2,
) -> Mapping[Hashable, float]:
    """Create the answering row for an unseen query from its BM25 top-k.

    ``seed="bm25"`` uses the raw scores as initial rewards. ``seed="rank"``
    gives the entity at BM25 rank r weight ``decay ** (r - 1)``, so sampled
    lists start close to the BM25 order and a reward of 1 is not swamped by
    the prior. Out-of-vocabulary queries get uniform weight over a random
    sample of ``min(k_results, doc_count)`` entities.
    """
    if query_key in matrix:
        return matrix.row(query_key)
    ranked = answer_deterministic(index, query_key.split(), k_results)
    if len(ranked):
        if seed == "bm25":
            weights = dict(ranked.entries)
        elif seed == "rank":
            weights = {e: decay**i for i, (e, _) in enumerate(ranked.entries)}
        else:
            raise ValueError(f"unknown seed mode {seed!r}")
        matrix.add_row(query_key, weights)
    elif index.doc_count:
        ids = sorted(index.entity_ids())
        chosen = rng.sample(ids, min(k_results, len(ids)))
        matrix.add_row(query_key, {e: 1.0 for e in chosen})
    else:
        return {}
    return matrix.row(query_key)


def sample_external_answers(
    matrix: StrategyMatrix, query_key: str, k_results: int, rng: random.Random
) -> RankedList:
    if query_key not in matrix:
        return RankedList()
    row = matrix.row(query_key)
    picked = matrix.sample(query_key, k_results, rng)
    return RankedList(tuple((e, row[e]) for e in picked))  # type: ignore[misc]


# -- UCB-1 --------------------------------------------------------------------


@dataclass
class UcbState:
    pulls: dict[tuple[Hashable, Hashable], int] = field(default_factory=dict)
    rewards: dict[tuple[Hashable, Hashable], float] = field(default_factory=dict)
    total_pulls: dict[Hashable, int] = field(default_factory=dict)

    def update(self, context: Hashable, action: Hashable, reward: float) -> None:
        key = (context, action)
        self.pulls[key] = self.pulls.get(key, 0) + 1
        self.rewards[key] = self.rewards.get(key, 0.0) + reward
        self.total_pulls[context] = self.total_pulls.get(context, 0) + 1

    def mean(self, context: Hashable, action: Hashable) -> float:
        n = self.pulls.get((context, action), 0)
        return self.rewards.get((context, action), 0.0) / n if n else 0.0


def ucb1_index(mean: float, pulls: int, total: int, c: float) -> float:
    return mean + c * math.sqrt(math.log(total) / pulls)


def ucb1_select(
    state: UcbState, context: Hashable, candidate_actions: Iterable[Hashable], c: float = math.sqrt(2.0)
) -> Hashable:
    """Unpulled actions first; otherwise the largest UCB-1 index.

    Ties go to the smallest action key (by ``str``).
    """
    candidates = sorted(candidate_actions, key=str)
    if not candidates:
        raise ValueError("no candidate actions")
    for a in candidates:
        if state.pulls.get((context, a), 0) == 0:
            return a
    total = state.total_pulls.get(context, 0)
    best, best_val = candidates[0], -math.inf
    for a in candidates:
        val = ucb1_index(state.mean(context, a), state.pulls[(context, a)], total, c)
        if val > best_val:
            best, best_val = a, val
    return best


def ucb1_query(state: UcbState, matrix: StrategyMatrix, intent: Intent, m_terms: int, c: float) -> ExternalQuery:
    """Choose ``m_terms`` distinct features by repeated UCB-1 selection."""
    remaining = list(matrix.row(intent))
    chosen: list[Feature] = []
    while remaining and len(chosen) < m_terms:
        a = ucb1_select(state, intent, remaining, c)
        chosen.append(a)  # type: ignore[arg-type]
        remaining.remove(a)
    return ExternalQuery(flatten(chosen), tuple(chosen))
