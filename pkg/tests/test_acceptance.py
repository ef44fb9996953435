"""Acceptance criteria C1-C7, one group per criterion.

Real-data criteria look for their inputs through environment variables and
skip with a reason when the files are absent:

    PROGMAP_PRODUCTS_DIR   directory with Amazon.csv, GoogleProducts.csv and
                           Amzon_GoogleProducts_perfectMapping.csv (C4, C5)
    PROGMAP_MOVIES_CONFIG  experiment config for the movie tables (C7)
"""

import math
import os
import random
import statistics
import time
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from progmap.benchmarks import find_amazon_google, load_amazon_google, subsample
from progmap.cli import cmd_run, load_datasets
from progmap.config import validate_config
from progmap.corpus import DataTable
from progmap.evaluation import VARIANTS, Datasets, mrr, run_experiment
from progmap.fixtures import products_table, seller_truth, sellers_table, write_catalog
from progmap.protocol import Session
from progmap.retrieval import answer_deterministic, bm25_score, build_index
from progmap.strategy import LearnerConfig, StrategyMatrix

MANY = settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
LEARNING = [v for v in VARIANTS if VARIANTS[v].learns]

# -- C1: invariants -------------------------------------------------------

C1 = pytest.mark.criterion("C1", "invariant suite (>=1000 randomized cases each)")

weights = st.floats(min_value=0.0, max_value=1e6, allow_nan=False, allow_infinity=False)


@st.composite
def rows(draw):
    n = draw(st.integers(1, 12))
    w = draw(st.lists(weights, min_size=n, max_size=n))
    if not any(x > 0 for x in w):
        w[draw(st.integers(0, n - 1))] = draw(st.floats(1e-6, 1e6))
    return {f"a{i}": x for i, x in enumerate(w)}


@st.composite
def reinforced(draw):
    row = draw(rows())
    steps = draw(
        st.lists(
            st.tuples(st.sampled_from(sorted(row)), st.floats(0.0, 1.0), st.sampled_from([0.1, 0.5, 1.0, 2.0])),
            max_size=30,
        )
    )
    return row, steps


@C1
@MANY
@given(reinforced())
def test_c1_row_normalization(case):
    row, steps = case
    m = StrategyMatrix()
    m.add_row("c", row)
    for action, r, alpha in steps:
        m.reinforce("c", action, r, alpha)
        assert abs(math.fsum(m.probabilities("c").values()) - 1.0) <= 1e-9
    assert abs(math.fsum(m.probabilities("c").values()) - 1.0) <= 1e-9


@C1
@MANY
@given(reinforced())
def test_c1_monotone_reinforcement(case):
    row, steps = case
    m = StrategyMatrix()
    m.add_row("c", row)
    for action, r, alpha in steps:
        before = dict(m.row("c"))
        m.reinforce("c", action, r, alpha)
        after = m.row("c")
        assert after[action] == before[action] + alpha * r
        assert all(after[a] == before[a] for a in before if a != action)
        assert all(after[a] >= before[a] for a in before)


@C1
@MANY
@given(rows(), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_c1_zero_mass_excluded(row, count, seed):
    m = StrategyMatrix()
    m.add_row("c", row)
    drawn = m.sample("c", count, random.Random(seed))
    assert all(row[a] > 0 for a in drawn)
    assert len(drawn) == len(set(drawn)) == min(count, sum(1 for v in row.values() if v > 0))


OTHER = DataTable.from_rows("other", ("n",), [("o1", ("soda drinks",)), ("o2", ("beef meat",))])


@C1
@MANY
@given(
    st.sampled_from(["soda", "drinks", "beef", "meat", "soda drinks"]),
    st.sampled_from(["sellers", "other"]),
    st.integers(0, 2**16),
)
def test_c1_separate_strategy_isolation(query, judged, seed):
    s = Session(
        products_table(),
        {"sellers": sellers_table(), "other": OTHER},
        LearnerConfig(),
        rng=random.Random(seed),
    )
    rec = s.run_interaction(query)
    untouched = "other" if judged == "sellers" else "sellers"
    before = {n: m.cells() for n, m in s.matrices().items() if n.endswith(untouched)}
    relevance = {(r.intent, r.source_id): frozenset(r.ranked.ids[:1]) for r in rec.results if r.source_id == judged}
    s.apply_feedback(rec, relevance)
    assert {n: m.cells() for n, m in s.matrices().items() if n.endswith(untouched)} == before
    assert any(r.mrr == 1.0 for r in rec.results if r.source_id == judged and r.ranked.ids)


@C1
@MANY
@given(st.lists(st.integers(0, 40), unique=True, max_size=25), st.sets(st.integers(0, 40)))
def test_c1_mrr_value_set(ids, relevant):
    value = mrr([str(i) for i in ids], {str(i) for i in relevant})
    allowed = {0.0} | {1.0 / k for k in range(1, len(ids) + 1)}
    assert value in allowed


# -- C2: oracle equivalences ----------------------------------------------

C2 = pytest.mark.criterion("C2", "oracle equivalences (BM25 brute force, replay log, MRR)")

VOCAB = ["pop", "soda", "drinks", "meat", "beef", "kroger", "cola", "1", "4", "hamburger"]


@st.composite
def corpora(draw):
    n = draw(st.integers(1, 50))
    docs = [
        (f"e{i:02d}", (" ".join(draw(st.lists(st.sampled_from(VOCAB), min_size=1, max_size=8))),))
        for i in range(n)
    ]
    query = draw(st.lists(st.sampled_from(VOCAB + ["zzz"]), min_size=1, max_size=4))
    return DataTable.from_rows("t", ("text",), docs), query, draw(st.integers(1, 60))


def full_scan(table, query, k, k1=1.2, b=0.75):
    docs = {r.entity_id: r.tokens() for r in table.records}
    n = len(docs)
    avg = sum(len(t) for t in docs.values()) / n
    scores = {}
    for eid, toks in docs.items():
        total = 0.0
        for term in query:
            df = sum(1 for t in docs.values() if term in t)
            tf = toks.count(term)
            if not tf:
                continue
            idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
            total += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(toks) / avg))
        if total > 0:
            scores[eid] = total
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]


@C2
@settings(max_examples=500, deadline=None)
@given(corpora())
def test_c2a_bm25_topk_equals_full_scan(case):
    table, query, k = case
    got = answer_deterministic(build_index(table), query, k)
    want = full_scan(table, query, k)
    assert got.ids == [e for e, _ in want]
    assert all(abs(a - b) <= 1e-9 for (_, a), (_, b) in zip(got.entries, want))


@C2
def test_c2a_bm25_fixed_fixture():
    table = DataTable.from_rows("t", ("text",), [("d1", ("Pop Drinks Kroger 1",)), ("d3", ("Cola Drinks, drinks!",))])
    idx = build_index(table)
    for e, s in full_scan(table, ["drinks"], 10):
        assert abs(bm25_score(idx, ["drinks"], e) - s) <= 1e-9


@C2
@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_c2b_roth_erev_equals_replay_log(seed):
    rng = random.Random(seed)
    m = StrategyMatrix()
    cells = {}
    for c in range(5):
        row = {a: rng.uniform(0.1, 5.0) for a in range(6)}
        m.add_row(c, row)
        cells.update({(c, a): w for a, w in row.items()})
    log = [(rng.randrange(5), rng.randrange(6), rng.random(), rng.choice([0.5, 1.0, 3.0])) for _ in range(300)]
    for c, a, r, alpha in log:
        m.reinforce(c, a, r, alpha)
    for c, a, r, alpha in log:
        cells[(c, a)] += alpha * r
    assert m.cells() == cells


def positional_mrr(ids, relevant):
    positions = [i + 1 for i in range(len(ids)) if ids[i] in relevant]
    return 1.0 / min(positions) if positions else 0.0


@C2
@settings(max_examples=1000, deadline=None)
@given(st.lists(st.integers(0, 30), unique=True, max_size=20), st.sets(st.integers(0, 30)))
def test_c2c_mrr_equals_positional_brute_force(ids, relevant):
    assert mrr(ids, relevant) == positional_mrr(ids, relevant)


# -- C3: two-table fixture ------------------------------------------------


@pytest.mark.criterion("C3", "table fixture: matching seller first within 50 rounds, >=95/100 seeds, <10 s")
def test_c3_fixture_learns_matching_seller(criterion_note):
    data = Datasets(products_table(), {"sellers": sellers_table()}, seller_truth())
    start = time.perf_counter()
    learned = 0
    for seed in range(100):
        per_entity: dict[str, list[float]] = {}

        def on_round(t, record, session, replays):
            for r in record.results:
                per_entity.setdefault(r.intent.entity_id, []).append(r.mrr)

        run_experiment("re-auto-expansion", data, 50, seed, on_round=on_round)
        # learned: both local entities are answered at rank 1 in their last 5 interactions
        if set(per_entity) == {"s1", "s2"} and all(len(v) >= 5 and set(v[-5:]) == {1.0} for v in per_entity.values()):
            learned += 1
    elapsed = time.perf_counter() - start
    criterion_note(f"{learned}/100 seeds learned, {elapsed:.1f}s")
    assert learned >= 95
    assert elapsed < 10


# -- C4 / C5: product benchmark -------------------------------------------


def _products_dir():
    env = os.environ.get("PROGMAP_PRODUCTS_DIR")
    candidates = [Path(env)] if env else []
    candidates.append(Path(__file__).resolve().parent.parent / "data" / "amazon-google")
    for c in candidates:
        if find_amazon_google(c):
            return c
    return None


_RUNS: dict = {}


@pytest.fixture(scope="module")
def products():
    d = _products_dir()
    if d is None:
        pytest.skip("product benchmark files not found (set PROGMAP_PRODUCTS_DIR)")
    return load_amazon_google(d)


def _run(data, variant, seed, rounds=2000):
    key = (id(data), variant, seed, rounds)
    if key not in _RUNS:
        start = time.perf_counter()
        res = run_experiment(variant, data, rounds, seed)
        _RUNS[key] = ([p.mrr_avg for p in res.curve], time.perf_counter() - start)
    return _RUNS[key]


def _mean_at(data, variant, seeds, t, rounds=2000):
    return statistics.fmean(_run(data, variant, s, rounds)[0][t - 1] for s in seeds)


@pytest.mark.criterion("C4", "product data: re-auto-expansion MRR at 2000 = 0.75 +- 0.15, <=15 min/seed")
def test_c4_product_learning_curve(products, criterion_note):
    seeds = [0, 1, 2]
    finals = []
    for s in seeds:
        curve, seconds = _run(products, "re-auto-expansion", s)
        finals.append(curve[-1])
        criterion_note(f"seed {s}: final {curve[-1]:.3f} in {seconds:.0f}s")
        assert seconds <= 15 * 60
    mean = statistics.fmean(finals)
    criterion_note(f"mean final MRR {mean:.3f}")
    assert abs(mean - 0.75) <= 0.15


C5 = pytest.mark.criterion("C5", "ordering over >=5 seeds: (a) learners > baseline @500, (b) auto >= ext @1000")
SEEDS5 = [0, 1, 2, 3, 4]


@C5
@pytest.mark.parametrize("variant", LEARNING)
def test_c5a_learners_beat_baseline_by_500(products, variant, criterion_note):
    ours, base = _mean_at(products, variant, SEEDS5, 500), _mean_at(products, "baseline", SEEDS5, 500)
    criterion_note(f"{variant} {ours:.3f} vs baseline {base:.3f}")
    assert ours > base


@C5
def test_c5b_auto_expansion_vs_ext_learning_at_1000(products, criterion_note):
    auto, ext = _mean_at(products, "re-auto-expansion", SEEDS5, 1000), _mean_at(products, "re-ext-learning", SEEDS5, 1000)
    criterion_note(f"re-auto-expansion {auto:.3f} vs re-ext-learning {ext:.3f}")
    assert auto >= ext


@C5
def test_c5c_ext_learning_catches_up_reported(products, criterion_note):
    no_ext = _mean_at(products, "re-no-ext-learning", SEEDS5, 2000)
    for v in ("re-ext-learning", "re-auto-expansion"):
        value = _mean_at(products, v, SEEDS5, 2000)
        verdict = "holds" if value >= no_ext else "VIOLATED (reported only)"
        criterion_note(f"(c) {v} {value:.3f} vs re-no-ext-learning {no_ext:.3f}: {verdict}")


# -- C6: determinism ------------------------------------------------------


@pytest.mark.criterion("C6", "two identical cmd_run calls give byte-identical curves.csv")
def test_c6_byte_identical_curves(tmp_path, capsys):
    write_catalog(tmp_path / "data", n_matched=60, n_local_only=20, n_external_only=30, seed=11)
    ini = tmp_path / "exp.ini"
    ini.write_text(
        "[local]\npath = data/local.csv\n[external]\npath = data/external.csv\n"
        "[truth]\npath = data/truth.csv\n"
        "[experiment]\nrounds = 150\nseeds = 0, 1\nwindow = 50\nsnapshot_rounds = 150\n"
    )
    cfg = validate_config(ini)
    outputs = []
    for name, jobs in (("first", 1), ("second", 2)):
        cfg.output_dir = tmp_path / name
        assert cmd_run(cfg, jobs) == 0
        outputs.append((tmp_path / name / "curves.csv").read_bytes())
    capsys.readouterr()
    assert outputs[0] == outputs[1]
    assert outputs[0].count(b"\n") == 1 + 5 * 2 * 150


# -- C7: movie subsample --------------------------------------------------


@pytest.mark.criterion("C7", "movie 5k subsample: 1000 rounds <=10 min and ordering (a)")
def test_c7_movie_subsample(criterion_note):
    path = os.environ.get("PROGMAP_MOVIES_CONFIG")
    if not path or not Path(path).is_file():
        pytest.skip("movie experiment config not found (set PROGMAP_MOVIES_CONFIG)")
    cfg = validate_config(path)
    data = subsample(load_datasets(cfg), 5000, seed=0)
    criterion_note(f"subsample: {len(data.local)} local, {len(data.truth)} pairs")
    for variant in VARIANTS:
        for seed in SEEDS5:
            _, seconds = _run(data, variant, seed, rounds=1000)
            assert seconds <= 10 * 60, f"{variant} seed {seed} took {seconds:.0f}s"
    base = _mean_at(data, "baseline", SEEDS5, 500, rounds=1000)
    for variant in LEARNING:
        ours = _mean_at(data, variant, SEEDS5, 500, rounds=1000)
        criterion_note(f"{variant} {ours:.3f} vs baseline {base:.3f} @500")
        assert ours > base
