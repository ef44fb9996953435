import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from progmap.corpus import DataTable
from progmap.fixtures import sellers_table
from progmap.retrieval import answer_deterministic, bm25_score, build_index

FIVE_DOCS = DataTable.from_rows(
    "five",
    ("text",),
    [
        ("d1", ("Pop Drinks Kroger 1",)),
        ("d2", ("Hamburger Sandwich 7/11 4",)),
        ("d3", ("Cola Drinks, drinks!",)),
        ("d4", ("Soda Drinks Cold",)),
        ("d5", ("Beef Meat",)),
    ],
)

# Okapi BM25 for [drinks], k1=1.2, b=0.75, evaluated separately at 40 digits
# from hand-counted tf / doc lengths (dl = 4, 5, 3, 3, 2; df = 3).
DRINKS_SCORES = {
    "d1": 0.50270496577063576,
    "d2": 0.0,
    "d3": 0.76648171587081726,
    "d4": 0.56624913279220489,
    "d5": 0.0,
}


def test_index_invariants():
    idx = build_index(FIVE_DOCS)
    assert idx.doc_count == 5
    assert idx.avg_doc_length == pytest.approx(17 / 5)
    assert idx.doc_frequency["drinks"] == 3 == len(idx.postings["drinks"])
    assert idx.term_frequency("drinks", "d3") == 2


def test_sellers_table_index():
    assert build_index(sellers_table()).doc_count == 2


def test_repeated_token_counted():
    table = DataTable.from_rows("t", ("n",), [("x", ("pop pop",))])
    assert build_index(table).term_frequency("pop", "x") == 2


def test_empty_table():
    idx = build_index(DataTable.from_rows("t", ("n",), []))
    assert idx.doc_count == 0
    assert len(answer_deterministic(idx, ["anything"], 20)) == 0


@pytest.mark.parametrize("doc", sorted(DRINKS_SCORES))
def test_bm25_matches_oracle(doc):
    idx = build_index(FIVE_DOCS, k1=1.2, b=0.75)
    assert abs(bm25_score(idx, ["drinks"], doc) - DRINKS_SCORES[doc]) < 1e-9


def test_absent_term_scores_zero():
    idx = build_index(FIVE_DOCS)
    assert all(bm25_score(idx, ["zebra"], d) == 0.0 for d in DRINKS_SCORES)
    assert len(answer_deterministic(idx, ["zebra"], 20)) == 0


def test_single_document_ranks_first():
    table = DataTable.from_rows("t", ("n",), [("only", ("pop drinks",))])
    assert answer_deterministic(build_index(table), ["pop"], 5).ids == ["only"]


def test_ranking_drops_zero_and_breaks_ties_by_id():
    idx = build_index(FIVE_DOCS)
    ranked = answer_deterministic(idx, ["drinks"], 20)
    assert ranked.ids == ["d3", "d4", "d1"]
    tie = DataTable.from_rows("t", ("n",), [("b", ("pop",)), ("a", ("pop",)), ("c", ("x",))])
    assert answer_deterministic(build_index(tie), ["pop"], 20).ids == ["a", "b"]


def test_k_limits_length():
    table = DataTable.from_rows("t", ("n",), [(f"e{i:02d}", ("pop",)) for i in range(30)])
    ranked = answer_deterministic(build_index(table), ["pop"], 20)
    assert len(ranked) == 20
    with pytest.raises(ValueError):
        answer_deterministic(build_index(table), ["pop"], 0)


def test_reindex_is_reproducible():
    a, b = build_index(FIVE_DOCS), build_index(FIVE_DOCS)
    assert a.postings == b.postings and a.doc_length == b.doc_length


VOCAB = ["pop", "soda", "drinks", "meat", "beef", "kroger", "cola", "1", "4"]


@st.composite
def corpora(draw):
    n = draw(st.integers(1, 50))
    docs = [
        (f"e{i:02d}", (" ".join(draw(st.lists(st.sampled_from(VOCAB), min_size=1, max_size=8))),))
        for i in range(n)
    ]
    table = DataTable.from_rows("t", ("text",), docs)
    query = draw(st.lists(st.sampled_from(VOCAB + ["zzz"]), min_size=1, max_size=4))
    k = draw(st.integers(1, 25))
    return table, query, k


def brute_force_topk(index, query, k):
    scored = [(e, bm25_score(index, query, e)) for e in index.doc_length]
    scored = [(e, s) for e, s in scored if s > 0]
    scored.sort(key=lambda es: (-es[1], es[0]))
    return scored[:k]


@settings(max_examples=300, deadline=None)
@given(corpora())
def test_topk_equals_brute_force(case):
    table, query, k = case
    idx = build_index(table)
    got = answer_deterministic(idx, query, k)
    want = brute_force_topk(idx, query, k)
    assert got.ids == [e for e, _ in want]
    for (_, s1), (_, s2) in zip(got.entries, want):
        assert abs(s1 - s2) <= 1e-9
    scores = [s for _, s in got.entries]
    assert scores == sorted(scores, reverse=True)
