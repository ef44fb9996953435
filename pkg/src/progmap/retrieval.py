"""In-memory inverted index with Okapi BM25 scoring."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .corpus import DataTable

K1 = 1.2
B = 0.75


@dataclass(frozen=True)
class RankedList:
    """Entities in rank order (position 1 first).

    For lists produced by BM25 the scores are non-increasing. Lists sampled
    from a stochastic answering strategy carry the strategy weight of each
    entity at draw time, so their scores need not be sorted.
    """

    entries: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        ids = [e for e, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("ranked list contains duplicate entity ids")

    @property
    def ids(self) -> list[str]:
        return [e for e, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[tuple[str, float]]:
        return iter(self.entries)


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    doc_length: dict[str, int] = field(default_factory=dict)
    doc_count: int = 0
    avg_doc_length: float = 0.0
    k1: float = K1
    b: float = B
    _tf: dict[str, Counter[str]] = field(default_factory=dict, repr=False)
    _cache: dict[tuple[tuple[str, ...], int], RankedList] = field(default_factory=dict, repr=False)

    @property
    def doc_frequency(self) -> dict[str, int]:
        return {t: len(p) for t, p in self.postings.items()}

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def idf(self, term: str) -> float:
        df = self.df(term)
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def entity_ids(self) -> list[str]:
        return list(self.doc_length)

    def term_frequency(self, term: str, entity_id: str) -> int:
        return self._tf[entity_id][term]


def build_index(table: DataTable, k1: float = K1, b: float = B) -> InvertedIndex:
    """Index every unigram token of every attribute, whole record as one field."""
    index = InvertedIndex(k1=k1, b=b)
    for rec in table.records:
        toks = rec.tokens()
        tf = Counter(toks)
        index._tf[rec.entity_id] = tf
        index.doc_length[rec.entity_id] = len(toks)
        for term, count in tf.items():
            index.postings.setdefault(term, []).append((rec.entity_id, count))
    index.doc_count = len(index.doc_length)
    if index.doc_count:
        index.avg_doc_length = sum(index.doc_length.values()) / index.doc_count
    return index


def _term_weight(index: InvertedIndex, idf: float, tf: int, dl: int) -> float:
    norm = index.k1 * (1.0 - index.b + index.b * dl / index.avg_doc_length)
    return idf * tf * (index.k1 + 1.0) / (tf + norm)


def bm25_score(index: InvertedIndex, query_terms: Sequence[str], entity_id: str) -> float:
    """Okapi BM25 of one indexed entity. Repeated query terms count repeatedly."""
    tf_doc = index._tf[entity_id]
    dl = index.doc_length[entity_id]
    score = 0.0
    for term in query_terms:
        tf = tf_doc.get(term, 0)
        if tf:
            score += _term_weight(index, index.idf(term), tf, dl)
    return score


def score_all(index: InvertedIndex, query_terms: Iterable[str]) -> dict[str, float]:
    """Accumulate BM25 over postings; only entities sharing a term appear."""
    acc: dict[str, float] = {}
    for term in query_terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for entity_id, tf in plist:
            acc[entity_id] = acc.get(entity_id, 0.0) + _term_weight(
                index, idf, tf, index.doc_length[entity_id]
            )
    return acc


def answer_deterministic(index: InvertedIndex, query_terms: Sequence[str], k: int = 20) -> RankedList:
    """Top-k by BM25; ties by ascending entity id; zero scores dropped."""
    if k < 1:
        raise ValueError("k must be >= 1")
    key = (tuple(query_terms), k)
    hit = index._cache.get(key)
    if hit is not None:
        return hit
    scored = [(e, s) for e, s in score_all(index, query_terms).items() if s > 0.0]
    scored.sort(key=lambda es: (-es[1], es[0]))
    result = RankedList(tuple(scored[:k]))
    index._cache[key] = result
    return result
