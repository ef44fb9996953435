"""Experiment configuration: INI-style ``key = value`` files with sections.

Example::

    [local]
    path = Amazon.csv
    id_column = id
    columns = title, manufacturer, price

    [external:google]
    path = GoogleProducts.csv
    id_column = id
    columns = name, manufacturer, price

    [truth]
    path = Amzon_GoogleProducts_perfectMapping.csv

    [experiment]
    variants = baseline, re-auto-expansion
    rounds = 2000
    seeds = 0, 1, 2

Relative paths resolve against the config file's directory. Every key not
listed in ``SCHEMA`` is rejected.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable

from .corpus import FormatSpec
from .evaluation import VARIANTS, WorkloadConfig
from .protocol import SessionConfig
from .strategy import LearnerConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TableSpec:
    source_id: str
    path: Path
    format: FormatSpec


@dataclass
class ExperimentConfig:
    local: TableSpec
    externals: list[TableSpec]
    truth_path: Path
    truth_encoding: str = "utf-8"
    variants: list[str] = field(default_factory=lambda: list(VARIANTS))
    rounds: int = 2000
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    window: int = 100
    output_dir: Path = Path("out")
    snapshot_rounds: list[int] = field(default_factory=lambda: [100, 500, 1000, 2000])
    jobs: int = 1
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    session: SessionConfig = field(default_factory=SessionConfig)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    source: Path | None = None

    def echo(self) -> str:
        """Canonical ``key = value`` rendering of the fully-defaulted config."""
        lines = []

        def table(section: str, spec: TableSpec) -> None:
            lines.append(f"[{section}]")
            lines.append(f"path = {spec.path}")
            lines.append(f"source_id = {spec.source_id}")
            lines.append(f"id_column = {spec.format.id_column}")
            lines.append(f"columns = {', '.join(spec.format.columns)}")
            lines.append(f"encoding = {spec.format.encoding}")
            lines.append("")

        table("local", self.local)
        for ext in self.externals:
            table(f"external:{ext.source_id}", ext)
        lines += ["[truth]", f"path = {self.truth_path}", f"encoding = {self.truth_encoding}", ""]
        for section, obj in (("learner", self.learner), ("session", self.session), ("workload", self.workload)):
            lines.append(f"[{section}]")
            for key in SCHEMA[section]:
                lines.append(f"{key} = {_render(getattr(obj, key))}")
            lines.append("")
        lines.append("[experiment]")
        for key in SCHEMA["experiment"]:
            lines.append(f"{key} = {_render(getattr(self, key))}")
        return "\n".join(lines) + "\n"


def _render(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(str(v) for v in value)
    return str(value)


def _positive_int(key: str, raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if value <= 0:
        raise ConfigError(f"{key}: must be positive, got {value}")
    return value


def _nonneg_int(key: str, raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if value < 0:
        raise ConfigError(f"{key}: must be non-negative, got {value}")
    return value


def _positive_float(key: str, raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    if not value > 0:
        raise ConfigError(f"{key}: must be positive, got {value}")
    return value


def _int_list(key: str, raw: str, parse: Callable[[str, str], int] = _nonneg_int) -> list[int]:
    items = [x.strip() for x in raw.split(",") if x.strip()]
    return [parse(key, x) for x in items]


def _str_list(key: str, raw: str) -> list[str]:
    return [x.strip() for x in raw.split(",") if x.strip()]


def _choice(options: tuple[str, ...]) -> Callable[[str, str], str]:
    def parse(key: str, raw: str) -> str:
        if raw not in options:
            raise ConfigError(f"{key}: expected one of {', '.join(options)}, got {raw!r}")
        return raw

    return parse


_TABLE_KEYS = ("path", "id_column", "columns", "source_id", "encoding")

SCHEMA: dict[str, dict[str, Callable[[str, str], Any]]] = {
    "learner": {
        "alpha": _positive_float,
        "k_results": _positive_int,
        "m_terms": _positive_int,
        "n_max": _positive_int,
        "ucb_c": _positive_float,
        "init_boost": _positive_float,
        "ext_seed": _choice(("rank", "bm25")),
        "ext_seed_decay": _positive_float,
    },
    "session": {
        "min_interactions_before_auto": _nonneg_int,
        "auto_max_rounds": _nonneg_int,
    },
    "workload": {
        "min_query_terms": _positive_int,
        "max_query_terms": _positive_int,
        "max_local_matches": _positive_int,
        "query_pool": _nonneg_int,
    },
    "experiment": {
        "variants": _str_list,
        "rounds": _positive_int,
        "seeds": _int_list,
        "window": _positive_int,
        "output_dir": lambda k, v: Path(v),
        "snapshot_rounds": lambda k, v: _int_list(k, v, _positive_int),
        "jobs": _positive_int,
    },
}


def _table(section: configparser.SectionProxy, base: Path, default_id: str) -> TableSpec:
    unknown = set(section) - set(_TABLE_KEYS)
    if unknown:
        raise ConfigError(f"[{section.name}]: unknown key {sorted(unknown)[0]!r}")
    if "path" not in section:
        raise ConfigError(f"[{section.name}]: missing path")
    path = base / section["path"]
    if not path.is_file():
        raise ConfigError(f"[{section.name}]: file not found: {path}")
    fmt = FormatSpec(
        id_column=section.get("id_column", "id"),
        columns=tuple(_str_list("columns", section.get("columns", ""))),
        encoding=section.get("encoding", "utf-8"),
    )
    return TableSpec(section.get("source_id", default_id), path, fmt)


def validate_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base = path.parent

    if "local" not in parser:
        raise ConfigError("missing [local] section")
    local = _table(parser["local"], base, "local")
    externals = []
    for name in parser.sections():
        if name == "external" or name.startswith("external:"):
            default_id = name.partition(":")[2] or "external"
            externals.append(_table(parser[name], base, default_id))
        elif name not in SCHEMA and name not in ("local", "truth"):
            raise ConfigError(f"unknown section [{name}]")
    if not externals:
        raise ConfigError("need at least one [external] or [external:NAME] section")
    ids = [local.source_id] + [e.source_id for e in externals]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"source ids must be distinct: {ids}")

    if "truth" not in parser or "path" not in parser["truth"]:
        raise ConfigError("missing [truth] path")
    truth = parser["truth"]
    unknown = set(truth) - {"path", "encoding"}
    if unknown:
        raise ConfigError(f"[truth]: unknown key {sorted(unknown)[0]!r}")
    truth_path = base / truth["path"]
    if not truth_path.is_file():
        raise ConfigError(f"[truth]: file not found: {truth_path}")

    values: dict[str, dict[str, Any]] = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        if section not in parser:
            continue
        for key, raw in parser[section].items():
            if key not in keys:
                raise ConfigError(f"[{section}]: unknown key {key!r}")
            values[section][key] = keys[key](key, raw.strip())

    try:
        learner = LearnerConfig(**values["learner"])
        session = SessionConfig(**values["session"])
        workload = WorkloadConfig(**values["workload"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

    exp = values["experiment"]
    cfg = ExperimentConfig(
        local=local,
        externals=externals,
        truth_path=truth_path,
        truth_encoding=truth.get("encoding", "utf-8"),
        learner=learner,
        session=session,
        workload=workload,
        source=path,
        **exp,
    )
    if not cfg.variants:
        raise ConfigError("at least one variant required")
    bad = [v for v in cfg.variants if v not in VARIANTS]
    if bad:
        raise ConfigError(f"unknown variant {bad[0]!r}; choose from {', '.join(VARIANTS)}")
    if not cfg.seeds:
        raise ConfigError("at least one seed required")
    if len(set(cfg.seeds)) != len(cfg.seeds) or len(set(cfg.variants)) != len(cfg.variants):
        raise ConfigError("variants and seeds must not repeat")
    if not cfg.output_dir.is_absolute():
        cfg.output_dir = base / cfg.output_dir
    return cfg


def config_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    """JSON-friendly view used in the run manifest."""
    out: dict[str, Any] = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, (LearnerConfig, SessionConfig, WorkloadConfig)):
            value = asdict(value)
        elif isinstance(value, TableSpec):
            value = {"source_id": value.source_id, "path": str(value.path), **asdict(value.format)}
        elif isinstance(value, list) and value and isinstance(value[0], TableSpec):
            value = [{"source_id": v.source_id, "path": str(v.path), **asdict(v.format)} for v in value]
        elif isinstance(value, Path):
            value = str(value)
        out[f.name] = value
    return out
