"""Loaders for the public matching benchmarks, plus consistent subsampling.

The product benchmark ships as three CSV files in latin-1::

    Amazon.csv                                 id,title,description,manufacturer,price
    GoogleProducts.csv                         id,name,description,manufacturer,price
    Amzon_GoogleProducts_perfectMapping.csv    idAmazon,idGoogleBase

Long free-text descriptions are left out by default; they dominate BM25
length normalization without helping short keyword queries.
"""

from __future__ import annotations

import random
from pathlib import Path

from .corpus import DataTable, FormatSpec, GroundTruth, load_ground_truth, load_table
from .evaluation import Datasets

AMAZON_FILE = "Amazon.csv"
GOOGLE_FILE = "GoogleProducts.csv"
MAPPING_FILE = "Amzon_GoogleProducts_perfectMapping.csv"


def find_amazon_google(directory: str | Path) -> Path | None:
    """Return ``directory`` if it holds all three product files, else None."""
    d = Path(directory)
    if all((d / name).is_file() for name in (AMAZON_FILE, GOOGLE_FILE, MAPPING_FILE)):
        return d
    return None


def load_amazon_google(directory: str | Path, with_description: bool = False) -> Datasets:
    d = Path(directory)
    extra = ("description",) if with_description else ()
    local = load_table(
        d / AMAZON_FILE, FormatSpec("id", ("title", *extra, "manufacturer", "price"), "latin-1"), "amazon"
    )
    google = load_table(
        d / GOOGLE_FILE, FormatSpec("id", ("name", *extra, "manufacturer", "price"), "latin-1"), "google"
    )
    truth = load_ground_truth(d / MAPPING_FILE, local, {"google": google}, "latin-1")
    return Datasets(local, {"google": google}, truth)


def _restrict(table: DataTable, keep: set[str]) -> DataTable:
    return DataTable(table.source_id, table.schema, tuple(r for r in table.records if r.entity_id in keep))


def subsample(datasets: Datasets, n: int, seed: int = 0) -> Datasets:
    """At most ``n`` tuples per table, keeping ground-truth pairs intact.

    Local entities are drawn uniformly. Each external table first keeps the
    partners of the drawn locals, then fills up with random non-partners.
    Pairs whose external side did not fit are dropped from the truth.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = random.Random(f"subsample-{seed}")
    local_ids = [r.entity_id for r in datasets.local.records]
    keep_local = set(rng.sample(local_ids, min(n, len(local_ids))))
    externals = {}
    pairs = set()
    for sid, table in datasets.externals.items():
        wanted = sorted({e for l, s, e in datasets.truth.pairs if s == sid and l in keep_local})
        keep = set(wanted[:n])
        others = [r.entity_id for r in table.records if r.entity_id not in keep]
        keep |= set(rng.sample(others, min(n - len(keep), len(others))))
        externals[sid] = _restrict(table, keep)
        pairs |= {(l, s, e) for l, s, e in datasets.truth.pairs if s == sid and l in keep_local and e in keep}
    return Datasets(_restrict(datasets.local, keep_local), externals, GroundTruth(frozenset(pairs)))
