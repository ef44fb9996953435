"""Single-table data sources: CSV loading, tokenization, n-gram features."""

from __future__ import annotations

import csv
import logging
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

log = logging.getLogger(__name__)

_SPLIT = re.compile(r"[\s" + re.escape(string.punctuation) + r"]+")


class CorpusError(ValueError):
    """Raised for unreadable or malformed data files."""


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace and ASCII punctuation.

    No stemming, no stopwords. Numbers stay as strings ("7/11" -> ["7", "11"]).
    """
    if not text:
        return []
    return [t for t in _SPLIT.split(text.lower()) if t]


@dataclass(frozen=True, slots=True)
class Feature:
    """An n-gram, optionally prefixed with the attribute it came from."""

    prefix: str | None
    tokens: tuple[str, ...]

    @property
    def key(self) -> str:
        body = " ".join(self.tokens)
        return body if self.prefix is None else f"{self.prefix}:{body}"

    def __str__(self) -> str:
        return self.key


@dataclass(frozen=True)
class EntityRecord:
    source_id: str
    entity_id: str
    attributes: tuple[tuple[str, str], ...]

    def value(self, name: str) -> str:
        for attr, val in self.attributes:
            if attr == name:
                return val
        raise KeyError(name)

    def tokens(self) -> list[str]:
        """Unigram token stream over all attribute values, in attribute order."""
        out: list[str] = []
        for _, val in self.attributes:
            out.extend(tokenize(val))
        return out

    @property
    def text(self) -> str:
        return " ".join(val for _, val in self.attributes)


@dataclass(frozen=True)
class DataTable:
    source_id: str
    schema: tuple[str, ...]
    records: tuple[EntityRecord, ...]
    _by_id: Mapping[str, EntityRecord] = field(default=None, repr=False, compare=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if not self.schema:
            raise CorpusError(f"table {self.source_id!r} has an empty schema")
        by_id: dict[str, EntityRecord] = {}
        allowed = set(self.schema)
        for rec in self.records:
            if rec.entity_id in by_id:
                raise CorpusError(f"duplicate entity_id {rec.entity_id!r} in {self.source_id!r}")
            extra = {a for a, _ in rec.attributes} - allowed
            if extra:
                raise CorpusError(f"record {rec.entity_id!r} has attributes outside schema: {sorted(extra)}")
            by_id[rec.entity_id] = rec
        object.__setattr__(self, "_by_id", by_id)

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, entity_id: object) -> bool:
        return entity_id in self._by_id

    def get(self, entity_id: str) -> EntityRecord:
        return self._by_id[entity_id]

    @classmethod
    def from_rows(
        cls,
        source_id: str,
        schema: Sequence[str],
        rows: Iterable[tuple[str, Sequence[str]]],
    ) -> "DataTable":
        """Build a table from (entity_id, values) pairs aligned with ``schema``."""
        schema = tuple(schema)
        records = []
        for entity_id, values in rows:
            if len(values) != len(schema):
                raise CorpusError(f"row {entity_id!r}: expected {len(schema)} values, got {len(values)}")
            records.append(EntityRecord(source_id, entity_id, tuple(zip(schema, values))))
        return cls(source_id, schema, tuple(records))


@dataclass(frozen=True)
class FormatSpec:
    """Column mapping for one CSV file."""

    id_column: str
    columns: tuple[str, ...] = ()  # empty means every non-id column
    encoding: str = "utf-8"


def load_table(path: str | Path, format_spec: FormatSpec, source_id: str | None = None) -> DataTable:
    path = Path(path)
    source_id = source_id or path.stem
    try:
        with path.open(newline="", encoding=format_spec.encoding, errors="replace") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise CorpusError(f"{path}: missing header row")
            header = [h.strip() for h in header]
            if format_spec.id_column not in header:
                raise CorpusError(f"{path}: id column {format_spec.id_column!r} not in header {header}")
            columns = format_spec.columns or tuple(h for h in header if h != format_spec.id_column)
            missing = [c for c in columns if c not in header]
            if missing:
                raise CorpusError(f"{path}: value columns not in header: {missing}")
            id_pos = header.index(format_spec.id_column)
            positions = [header.index(c) for c in columns]
            rows = []
            tokenless = 0
            for lineno, row in enumerate(reader, start=2):
                if not any(cell.strip() for cell in row):
                    continue
                if id_pos >= len(row) or not row[id_pos].strip():
                    raise CorpusError(f"{path}:{lineno}: empty id")
                values = [row[p].strip() if p < len(row) else "" for p in positions]
                if not any(tokenize(v) for v in values):
                    tokenless += 1
                    continue
                rows.append((row[id_pos].strip(), values))
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    table = DataTable.from_rows(source_id, columns, rows)
    if tokenless:
        log.warning("%s: skipped %d rows with no tokens", path, tokenless)
    log.info("loaded %d records from %s", len(table), path)
    return table


def _ngrams(tokens: Sequence[str], n_max: int) -> Iterable[tuple[str, ...]]:
    for n in range(1, n_max + 1):
        for i in range(len(tokens) - n + 1):
            yield tuple(tokens[i : i + n])


def extract_features(record: EntityRecord, n_max: int) -> Counter[Feature]:
    """All 1..n_max-grams per attribute, prefixed with the attribute name.

    N-grams never cross attribute boundaries.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    feats: Counter[Feature] = Counter()
    for attr, val in record.attributes:
        for gram in _ngrams(tokenize(val), n_max):
            feats[Feature(attr, gram)] += 1
    return feats


def query_features(query_text: str, n_max: int) -> Counter[Feature]:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    return Counter(Feature(None, gram) for gram in _ngrams(tokenize(query_text), n_max))


@dataclass(frozen=True)
class GroundTruth:
    pairs: frozenset[tuple[str, str, str]]
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.pairs)

    def partners(self, local_id: str, source_id: str) -> frozenset[str]:
        return self._index().get((local_id, source_id), frozenset())

    def local_ids(self) -> frozenset[str]:
        return frozenset(p[0] for p in self.pairs)

    def _index(self) -> dict[tuple[str, str], frozenset[str]]:
        idx = self.__dict__.get("_idx")
        if idx is None:
            tmp: dict[tuple[str, str], set[str]] = {}
            for local_id, src, ext_id in self.pairs:
                tmp.setdefault((local_id, src), set()).add(ext_id)
            idx = {k: frozenset(v) for k, v in tmp.items()}
            object.__setattr__(self, "_idx", idx)
        return idx


def load_ground_truth(
    path: str | Path,
    local_table: DataTable,
    external_tables: Mapping[str, DataTable],
    encoding: str = "utf-8",
) -> GroundTruth:
    """Read a match file and keep only pairs whose ids resolve.

    Two-column files (local id, external id) require exactly one external
    table. Three-column files are (local id, external source id, external id).
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding=encoding, errors="replace") as fh:
            rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    if not rows:
        return GroundTruth(frozenset())
    header, body = rows[0], rows[1:]
    pairs: set[tuple[str, str, str]] = set()
    dropped = 0
    if len(header) == 2:
        if len(external_tables) != 1:
            raise CorpusError(f"{path}: two-column mapping needs exactly one external table")
        (only,) = external_tables
        triples = [(r[0], only, r[1]) if len(r) >= 2 else None for r in body]
    else:
        triples = [(r[0], r[1], r[2]) if len(r) >= 3 else None for r in body]
    for t in triples:
        if t is None:
            dropped += 1
            continue
        local_id, src, ext_id = (x.strip() for x in t)
        ext = external_tables.get(src)
        if local_id not in local_table or ext is None or ext_id not in ext:
            dropped += 1
            continue
        pairs.add((local_id, src, ext_id))
    if dropped:
        log.warning("%s: dropped %d unresolvable pairs", path, dropped)
    return GroundTruth(frozenset(pairs), dropped)
