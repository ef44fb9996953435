from __future__ import annotations

from typing import Collection, Iterable


def relevant_positions(ranked_ids: Iterable[str], relevant: Collection[str]) -> tuple[int, ...]:
    """1-based positions of relevant ids."""
    return tuple(i for i, e in enumerate(ranked_ids, start=1) if e in relevant)


def mrr(ranked_ids: Iterable[str], relevant: Collection[str]) -> float:
    """Reciprocal rank of the first relevant id; 0.0 when none is returned."""
    for i, e in enumerate(ranked_ids, start=1):
        if e in relevant:
            return 1.0 / i
    return 0.0
