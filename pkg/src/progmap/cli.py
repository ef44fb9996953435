"""Command-line entry point: ``progmap run|validate|inspect``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import ConfigError, ExperimentConfig, config_dict, validate_config
from .corpus import CorpusError, load_ground_truth, load_table
from .evaluation import Datasets, run_experiment
from .strategy import read_snapshot

log = logging.getLogger("progmap")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def load_datasets(cfg: ExperimentConfig) -> Datasets:
    local = load_table(cfg.local.path, cfg.local.format, cfg.local.source_id)
    externals = {e.source_id: load_table(e.path, e.format, e.source_id) for e in cfg.externals}
    truth = load_ground_truth(cfg.truth_path, local, externals, cfg.truth_encoding)
    return Datasets(local, externals, truth)


@dataclass
class CellOutput:
    variant: str
    seed: int
    curve_rows: list[tuple[str, int, int, float]]
    log_lines: list[str]
    snapshots: dict[str, str]
    seconds: float


_WORKER_DATA: Datasets | None = None


def _init_worker(datasets: Datasets) -> None:
    global _WORKER_DATA
    _WORKER_DATA = datasets


def run_cell(cfg: ExperimentConfig, variant: str, seed: int, datasets: Datasets | None = None) -> CellOutput:
    datasets = datasets or _WORKER_DATA
    assert datasets is not None
    log_lines: list[str] = []
    snapshots: dict[str, str] = {}
    checkpoints = set(cfg.snapshot_rounds)

    def on_round(t, record, session, replays):
        log_lines.append(record.to_json(variant=variant, seed=seed, replays=replays))
        if t in checkpoints:
            for name, matrix in session.matrices().items():
                text = "".join(line + "\n" for line in matrix.snapshot_lines())
                snapshots[f"{variant}_seed{seed}_round{t}_{name}.tsv"] = text

    start = time.perf_counter()
    result = run_experiment(
        variant,
        datasets,
        cfg.rounds,
        seed,
        learner=cfg.learner,
        session=cfg.session,
        workload=cfg.workload,
        window=cfg.window,
        on_round=on_round,
    )
    rows = [(p.variant, p.seed, p.round, p.mrr_avg) for p in result.curve]
    return CellOutput(variant, seed, rows, log_lines, snapshots, time.perf_counter() - start)


def _run_cell_job(args: tuple[ExperimentConfig, str, int]) -> CellOutput:
    return run_cell(*args)


def curves_csv(cells: Sequence[CellOutput]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "seed", "round", "mrr_avg"])
    for cell in cells:
        for variant, seed, rnd, value in cell.curve_rows:
            w.writerow([variant, seed, rnd, f"{value:.6f}"])
    return buf.getvalue()


def cmd_run(cfg: ExperimentConfig, jobs: int | None = None) -> int:
    """Run every (variant, seed) cell and write the output directory."""
    datasets = load_datasets(cfg)
    cells = [(v, s) for v in cfg.variants for s in cfg.seeds]
    jobs = jobs or cfg.jobs
    log.info("running %d cells with %d job(s)", len(cells), jobs)
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(datasets,)) as pool:
            outputs = list(pool.map(_run_cell_job, [(cfg, v, s) for v, s in cells]))
    else:
        outputs = [run_cell(cfg, v, s, datasets) for v, s in cells]

    out = cfg.output_dir
    (out / "strategies").mkdir(parents=True, exist_ok=True)
    (out / "curves.csv").write_text(curves_csv(outputs), encoding="utf-8", newline="\n")
    with (out / "interactions.log").open("w", encoding="utf-8", newline="\n") as fh:
        for cell in outputs:
            fh.writelines(line + "\n" for line in cell.log_lines)
    for cell in outputs:
        for name, text in cell.snapshots.items():
            (out / "strategies" / name).write_text(text, encoding="utf-8", newline="\n")
    manifest = {
        "config": config_dict(cfg),
        "config_echo": cfg.echo(),
        "datasets": {
            datasets.local.source_id: len(datasets.local),
            **{sid: len(t) for sid, t in datasets.externals.items()},
        },
        "truth_pairs": len(datasets.truth),
        "truth_dropped": datasets.truth.dropped,
        "versions": {"progmap": __version__, "python": platform.python_version()},
        "cells": [{"variant": c.variant, "seed": c.seed, "seconds": round(c.seconds, 3)} for c in outputs],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    for c in outputs:
        final = c.curve_rows[-1][3] if c.curve_rows else 0.0
        print(f"{c.variant:20s} seed={c.seed:<4d} final mrr_avg={final:.4f} ({c.seconds:.1f}s)")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_inspect(snapshot: str | Path, context: str, stream=None) -> int:
    """Print one row of a strategy snapshot, most probable action first."""
    stream = stream or sys.stdout
    rows = read_snapshot(snapshot)
    if context not in rows:
        raise KeyError(context)
    row = {a: s for a, s in rows[context].items() if s > 0}
    total = sum(row.values())
    ranked = sorted(row.items(), key=lambda kv: (-kv[1], kv[0]))
    for action, s in ranked:
        print(f"{action}\t{s:g}\t{s / total:.6f}", file=stream)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="progmap", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run all (variant, seed) cells of an experiment")
    run.add_argument("config")
    run.add_argument("--jobs", type=int, default=None, help="parallel cells (default: config value)")
    run.add_argument("--out", default=None, help="output directory (overrides config)")
    run.add_argument("--seed-override", type=int, default=None, help="run this single seed only")

    val = sub.add_parser("validate", help="check a config and print it fully defaulted")
    val.add_argument("config")

    ins = sub.add_parser("inspect", help="print one row of a strategy snapshot")
    ins.add_argument("snapshot")
    ins.add_argument("context")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "inspect":
            try:
                return cmd_inspect(args.snapshot, args.context)
            except KeyError:
                print(f"error: unknown context {args.context!r} in {args.snapshot}", file=sys.stderr)
                return EXIT_RUNTIME
            except (OSError, ValueError) as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_RUNTIME
        cfg = validate_config(args.config)
        if args.command == "validate":
            print(cfg.echo(), end="")
            return EXIT_OK
        if args.out:
            cfg = replace(cfg, output_dir=Path(args.out))
        if args.seed_override is not None:
            if args.seed_override < 0:
                raise ConfigError("--seed-override must be non-negative")
            cfg = replace(cfg, seeds=[args.seed_override])
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        return cmd_run(cfg, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any cell failure maps to exit 2
        if isinstance(exc, CorpusError):
            print(f"data error: {exc}", file=sys.stderr)
        else:
            log.exception("run failed")
            print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
