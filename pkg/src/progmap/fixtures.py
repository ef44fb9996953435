"""Small built-in datasets: the running Products/Sellers example and a
seeded synthetic product catalog with two differently-worded sides."""

from __future__ import annotations

import csv
import random
from pathlib import Path

from .corpus import DataTable, GroundTruth


def products_table() -> DataTable:
    return DataTable.from_rows(
        "products",
        ("Name", "Category"),
        [("s1", ("Soda", "Drinks")), ("s2", ("Beef", "Meat"))],
    )


def sellers_table() -> DataTable:
    return DataTable.from_rows(
        "sellers",
        ("P_Name", "P_Category", "P_Seller", "P_Price"),
        [
            ("r1", ("Pop", "Drinks", "Kroger", "1")),
            ("r2", ("Hamburger", "Sandwich", "7/11", "4")),
        ],
    )


def seller_truth() -> GroundTruth:
    return GroundTruth(frozenset({("s1", "sellers", "r1"), ("s2", "sellers", "r2")}))


_BRANDS = [
    "acme", "zentek", "orbis", "lumina", "corvex", "nordio", "kestrel", "vantor", "helix", "quasar",
    "pinnacle", "solara", "trident", "nimbus", "aurex", "cobalt", "fathom", "gryphon", "ionix", "jovian",
    "kinetix", "lyra", "meridian", "novatek", "obsidian", "polaris", "radiant", "sierra", "tessera", "umbra",
]
# (local wording, external wording); the external side uses the second form
# with probability ``synonym_rate``.
_TYPES = [
    ("laptop", "notebook"), ("monitor", "display"), ("printer", "printer"), ("router", "router"),
    ("keyboard", "keyboard"), ("mouse", "mouse"), ("speaker", "speakers"), ("headphones", "headset"),
    ("camera", "camcorder"), ("tablet", "tablet"), ("scanner", "scanner"), ("software", "software"),
    ("antivirus", "security"), ("drive", "hdd"), ("memory", "ram"), ("charger", "adapter"),
    ("projector", "projector"), ("microphone", "mic"), ("webcam", "webcam"), ("cable", "cord"),
]
_DESCRIPTORS = [
    ("wireless", "cordless"), ("portable", "portable"), ("professional", "pro"), ("deluxe", "deluxe"),
    ("compact", "mini"), ("black", "blk"), ("silver", "silver"), ("edition", "ed"), ("premium", "premium"),
    ("ultra", "ultra"), ("digital", "digital"), ("home", "home"), ("office", "office"), ("gaming", "gaming"),
    ("studio", "studio"), ("travel", "travel"), ("smart", "smart"), ("classic", "classic"),
    ("standard", "std"), ("upgrade", "upgrade"), ("version", "ver"), ("bundle", "kit"),
]
_NOISE = ["new", "retail", "box", "oem", "pack", "value", "series", "model", "genuine", "item"]


def _model_number(rng: random.Random) -> str:
    letters = "".join(rng.choice("abcdefghjkmnpqrstuvwxyz") for _ in range(rng.randint(1, 3)))
    return f"{letters}{rng.randint(10, 9999)}"


def synthetic_catalog(
    n_matched: int = 500,
    n_local_only: int = 200,
    n_external_only: int = 200,
    seed: int = 0,
    synonym_rate: float = 0.5,
    drop_rate: float = 0.25,
    split_model_rate: float = 0.5,
) -> tuple[DataTable, DataTable, GroundTruth]:
    """Two product tables describing overlapping items in different words.

    Matched pairs share a brand and a model number but the external side
    swaps synonyms, drops words, splits model numbers ("xr200" -> "xr 200")
    and adds noise tokens, so exact-title search is unreliable.
    """
    rng = random.Random(seed)

    def item() -> dict:
        return {
            "brand": rng.choice(_BRANDS),
            "type": rng.choice(_TYPES),
            "desc": rng.sample(_DESCRIPTORS, rng.randint(1, 3)),
            "model": _model_number(rng),
            "price": round(rng.uniform(5, 1500), 2),
        }

    def local_row(it: dict) -> tuple[str, str, str]:
        words = [it["brand"]] + [d[0] for d in it["desc"]] + [it["type"][0], it["model"]]
        return " ".join(words), it["brand"].title(), f"{it['price']:.2f}"

    def external_row(it: dict) -> tuple[str, str, str]:
        words = [d[1] if rng.random() < synonym_rate else d[0] for d in it["desc"]]
        words = [w for w in words if rng.random() >= drop_rate] or words[:1]
        kind = it["type"][1] if rng.random() < synonym_rate else it["type"][0]
        model = it["model"]
        if rng.random() < split_model_rate:
            cut = next((i for i, ch in enumerate(model) if ch.isdigit()), 0)
            model = f"{model[:cut]}-{model[cut:]}"
        words = words + [kind, model]
        rng.shuffle(words)
        words += rng.sample(_NOISE, rng.randint(0, 2))
        brand = it["brand"] if rng.random() >= drop_rate else ""
        if brand and rng.random() < 0.5:
            words.insert(0, brand)
            brand = ""
        price = it["price"] * rng.uniform(0.9, 1.1)
        return " ".join(words), brand, f"{price:.2f}"

    matched = [item() for _ in range(n_matched)]
    local_items = [(it, True) for it in matched] + [(item(), False) for _ in range(n_local_only)]
    external_items = [(it, True) for it in matched] + [(item(), False) for _ in range(n_external_only)]
    rng.shuffle(local_items)
    rng.shuffle(external_items)

    local_ids = {id(it): f"a{i:05d}" for i, (it, _) in enumerate(local_items)}
    external_ids = {id(it): f"g{i:05d}" for i, (it, _) in enumerate(external_items)}
    local = DataTable.from_rows(
        "local",
        ("title", "manufacturer", "price"),
        [(local_ids[id(it)], local_row(it)) for it, _ in local_items],
    )
    external = DataTable.from_rows(
        "external",
        ("name", "manufacturer", "price"),
        [(external_ids[id(it)], external_row(it)) for it, _ in external_items],
    )
    truth = GroundTruth(frozenset((local_ids[id(it)], "external", external_ids[id(it)]) for it in matched))
    return local, external, truth


def write_table(table: DataTable, path: str | Path, id_column: str = "id") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([id_column, *table.schema])
        for rec in table.records:
            w.writerow([rec.entity_id, *(v for _, v in rec.attributes)])


def write_truth(truth: GroundTruth, path: str | Path, header: tuple[str, str] = ("local_id", "external_id")) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for local_id, _, ext_id in sorted(truth.pairs):
            w.writerow([local_id, ext_id])


def write_catalog(directory: str | Path, **kwargs) -> dict[str, Path]:
    """Write a synthetic catalog as local.csv, external.csv and truth.csv."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    local, external, truth = synthetic_catalog(**kwargs)
    paths = {"local": out / "local.csv", "external": out / "external.csv", "truth": out / "truth.csv"}
    write_table(local, paths["local"])
    write_table(external, paths["external"])
    write_truth(truth, paths["truth"])
    return paths
