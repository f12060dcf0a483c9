import json
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dhg_tbsa.corpus import Corpus, parse_dataset
from dhg_tbsa.decode import AspectPrediction, SentencePrediction
from dhg_tbsa.metrics import (evaluate_predictions, f_all, f_aspect, polarity_scores, prf,
                              sentence_acc_noop, sentiment_scores, subset_filter)

from conftest import make_sentence

FIXTURES = Path(__file__).parent / "fixtures"


def test_identical_spans_score_one():
    spans = [[(1, 2), (4, 4)], [(3, 3)]]
    assert f_aspect(spans, spans) == 1.0


def test_half_matched_spans():
    assert f_aspect([[(1, 1), (3, 3)]], [[(1, 1), (4, 5)]]) == 0.5


def test_nothing_predicted():
    assert f_aspect([[]], [[(1, 1)]]) == 0.0


def test_both_empty_scores_one():
    assert f_aspect([[], []], [[], []]) == 1.0
    assert prf(0, 0, 0) == (1.0, 1.0, 1.0)


def test_pairs_need_matching_polarity():
    gold = [[(1, 1, "POS"), (3, 3, "NEG")]]
    assert f_all([[(1, 1, "POS"), (3, 3, "POS")]], gold) == 0.5
    assert f_all(gold, gold) == 1.0


def test_polarity_scores_examples():
    assert polarity_scores(["POS", "POS"], ["POS", "NEG"])[0] == 0.5
    assert polarity_scores(["POS"], ["POS"]) == (1.0, 1.0)
    assert polarity_scores(["POS", "NEG", "NEU"], ["POS", "NEG", "NEU"]) == (1.0, 1.0)
    assert polarity_scores([], []) == (1.0, 1.0)


def test_sentiment_scores_use_span_means():
    # mean of (0.6,0.3,0.1) and (0.2,0.7,0.1) is (0.4,0.5,0.1): NEG
    dist = np.array([[0.6, 0.3, 0.1], [0.2, 0.7, 0.1]])
    assert sentiment_scores([[(1, 2, "NEG")]], [dist]) == (1.0, 1.0)
    assert sentiment_scores([[(1, 2, "POS")]], [dist])[0] == 0.0


def test_noop_accuracy():
    assert sentence_acc_noop([[], [], []], [[], [], []]) == 1.0
    assert sentence_acc_noop([[(1, 1)], [], [(2, 2)]], [[], [], [(2, 2)]]) == 0.5
    with pytest.raises(ValueError):
        sentence_acc_noop([[(1, 1)]], [[(1, 1)]])


def test_subsets():
    one = make_sentence(["a", "b"], ["B-POS", "O"], sid="one")
    two = make_sentence(["a", "b"], ["B-POS", "B-NEG"], sid="two")
    none = make_sentence(["a", "b"], sid="none")
    c = Corpus([one, two, none])
    assert [s.id for s in subset_filter(c, "multi")] == ["two"]
    assert [s.id for s in subset_filter(c, "noop")] == ["none"]
    assert subset_filter(c, "all") is c
    with pytest.raises(ValueError):
        subset_filter(c, "some")


def _load_fixture():
    corpus = parse_dataset(FIXTURES / "metrics_gold.tsv")
    raw = json.loads((FIXTURES / "metrics_pred.json").read_text())
    preds = []
    for s in corpus.sentences:
        p = raw["predictions"][s.id]
        aspects = [AspectPrediction(a, b, pol, 1.0) for a, b, pol in p["aspects"]]
        preds.append(SentencePrediction(s.id, [], aspects, np.array(p["token_dist"])))
    return corpus, preds, raw["expected"]


def test_frozen_fixture():
    corpus, preds, expected = _load_fixture()
    report = evaluate_predictions(corpus, preds)
    assert report.counts == expected["counts"]
    got = report.as_dict()
    for key in ("F-a", "F-all", "acc-s", "F-s", "noop-acc"):
        assert got[key] == pytest.approx(expected[key], abs=1e-15), key
    # the same numbers as exact fractions
    assert Fraction(report.f_s).limit_denominator(100) == Fraction(7, 9)
    assert (report.f_a, report.f_all, report.acc_s) == (0.5, 0.25, 0.75)


def test_report_formats():
    corpus, preds, _ = _load_fixture()
    report = evaluate_predictions(corpus, preds)
    kv = dict(line.split("=") for line in report.key_values().splitlines())
    assert float(kv["F-all"]) == report.f_all
    assert kv["pair_tp"] == "1"
    assert "F-all" in report.table() and "25.00%" in report.table()


def test_report_recomputable_from_counts():
    corpus, preds, _ = _load_fixture()
    r = evaluate_predictions(corpus, preds)
    c = r.counts
    assert r.f_a == prf(c["aspect_tp"], c["aspect_pred"], c["aspect_gold"])[2]
    assert r.f_all == prf(c["pair_tp"], c["pair_pred"], c["pair_gold"])[2]


def test_metrics_ignore_sentence_order():
    corpus, preds, _ = _load_fixture()
    a = evaluate_predictions(corpus, preds).as_dict()
    b = evaluate_predictions(Corpus(corpus.sentences[::-1]), preds[::-1]).as_dict()
    assert a == b


span = st.tuples(st.integers(1, 4), st.integers(0, 2)).map(lambda t: (t[0], t[0] + t[1]))
pair = st.tuples(span, st.sampled_from(["POS", "NEG", "NEU"])).map(lambda t: (*t[0], t[1]))
doc = st.lists(st.lists(pair, max_size=3, unique_by=lambda p: p[:2]), min_size=1, max_size=4)


@given(st.data())
def test_pair_score_never_beats_span_score(data):
    gold = data.draw(doc)
    pred = data.draw(st.lists(st.lists(pair, max_size=3, unique_by=lambda p: p[:2]),
                              min_size=len(gold), max_size=len(gold)))
    spans = lambda d: [[p[:2] for p in s] for s in d]  # noqa: E731
    assert f_all(pred, gold) <= f_aspect(spans(pred), spans(gold))


@given(st.lists(st.sampled_from(["POS", "NEG", "NEU"]), min_size=1, max_size=12), st.data())
def test_polarity_scores_bounded(gold, data):
    pred = data.draw(st.lists(st.sampled_from(["POS", "NEG", "NEU"]), min_size=len(gold), max_size=len(gold)))
    acc, f = polarity_scores(gold, pred)
    assert 0 <= acc <= 1 and 0 <= f <= 1
