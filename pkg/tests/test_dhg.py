import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dhg_tbsa.corpus import Corpus
from dhg_tbsa.dhg import (DhgConfig, IterationRecord, dump_trace, render_links, run_dhg, static_pass,
                          teacher_edges, teacher_forcing_gap, teacher_forcing_prob)
from dhg_tbsa.graph import EdgeType, NodeId, add_sentiment_edge, init_graph, sentiment_budgets
from dhg_tbsa.numcore import Tape
from dhg_tbsa.trainer import TrainConfig, build_tagger

from conftest import make_sentence

SENT = make_sentence(["the", "pizza", "was", "great", "but", "service", "slow"],
                     ["O", "B-POS", "O", "O", "O", "B-NEG", "O"], heads=[2, 3, 0, 3, 3, 7, 3])
DIST = (0.5, 0.3, 0.2)


@pytest.fixture(scope="module")
def tagger():
    cfg = TrainConfig(hidden_dim=8, embed_dim=8, embed_init=1.0, seed=3)
    return build_tagger(Corpus([SENT]), cfg)


def dhg(tagger, cfg, **kw):
    return run_dhg(Tape(), tagger.model, SENT, init_graph(SENT), cfg, DIST, **kw)


# -- schedule ---------------------------------------------------------------------

def test_schedule_values():
    assert teacher_forcing_prob(0, 10) == pytest.approx(1 - 10 / 11, abs=1e-12)
    assert teacher_forcing_prob(0, 10) == pytest.approx(0.09091, abs=1e-5)
    assert teacher_forcing_prob(50, 10) == pytest.approx(0.9369, abs=1e-4)
    assert teacher_forcing_prob(10 ** 6, 10) == 1.0


@given(st.integers(0, 20_000), st.floats(0.5, 50))
def test_schedule_increases(epoch, mu):
    a, b = teacher_forcing_prob(epoch, mu), teacher_forcing_prob(epoch + 1, mu)
    assert 0 < a <= b <= 1
    ga, gb = teacher_forcing_gap(epoch, mu), teacher_forcing_gap(epoch + 1, mu)
    if gb >= np.finfo(float).tiny:  # subnormals lack the precision to separate neighbours
        assert gb < ga
    assert a == 1.0 - ga


@pytest.mark.parametrize("mu", [0.0, -1.0])
def test_schedule_rejects_bad_mu(mu):
    with pytest.raises(ValueError):
        teacher_forcing_prob(3, mu)


@pytest.mark.parametrize("kw", [dict(times=0), dict(epsilon=0.0), dict(epsilon=1.5), dict(mu=0.0),
                                dict(tf_keep=0.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        DhgConfig(**kw)


# -- teacher edges ----------------------------------------------------------------

def test_teacher_edges_keep_all():
    assert teacher_edges(SENT, 1.0, np.random.default_rng(0)) == [(2, 0), (6, 1)]


def test_teacher_edges_no_aspects():
    assert teacher_edges(make_sentence(["just", "words"]), 0.2, np.random.default_rng(0)) == []


def test_teacher_edges_seeded_subsample():
    sent = make_sentence(["w"] * 200, ["B-POS"] * 200)
    a = teacher_edges(sent, 0.2, np.random.default_rng(9))
    b = teacher_edges(sent, 0.2, np.random.default_rng(9))
    assert a == b
    # binomial(200, 0.2): mean 40, sd ~5.7
    assert 40 - 4 * 5.7 < len(a) < 40 + 4 * 5.7
    assert DhgConfig().tf_keep == 0.2


# -- the loop -----------------------------------------------------------------------

def test_defaults():
    cfg = DhgConfig()
    assert (cfg.times, cfg.epsilon, cfg.mu) == (2, 0.75, 10.0)


def test_threshold_one_never_links(tagger):
    res = dhg(tagger, DhgConfig(times=3, epsilon=1.0))
    assert all(not rec.added for rec in res.trace)
    assert not res.graph.edges[EdgeType.SENTIMENT]


def test_single_round_equals_static_pass(tagger):
    res = dhg(tagger, DhgConfig(times=1, epsilon=0.34))
    m, n = static_pass(Tape(), tagger.model, SENT, init_graph(SENT))
    assert np.array_equal(res.m.value, m.value)
    assert np.array_equal(res.n.value, n.value)


def test_trace_invariants(tagger):
    cfg = DhgConfig(times=3, epsilon=0.34)
    res = dhg(tagger, cfg, edit_hook=lambda it, graph: graph.audit())
    assert [r.iteration for r in res.trace] == [1, 2, 3]
    assert any(r.added for r in res.trace), "threshold should admit some links"
    for rec in res.trace:
        assert rec.probs.shape == (len(SENT), 3)
        np.testing.assert_allclose(rec.probs.sum(axis=1), 1.0, atol=1e-12)
        for _w, _s, conf, forced in rec.added:
            assert not forced and conf > cfg.epsilon


def test_degrees_within_budget_each_round(tagger):
    degrees = {}

    def hook(it, graph):
        degrees[it] = [graph.sentiment_degree(s) for s in range(3)]

    res = dhg(tagger, DhgConfig(times=3, epsilon=0.34), edit_hook=hook)
    for rec in res.trace:
        # the drop step saw the survivors plus whatever it removed
        total = sum(degrees[rec.iteration]) + len(rec.dropped)
        budgets = sentiment_budgets(DIST, total)
        assert all(d <= b for d, b in zip(degrees[rec.iteration], budgets))


def test_eval_is_deterministic(tagger):
    cfg = DhgConfig(times=2, epsilon=0.34)
    a, b = dhg(tagger, cfg), dhg(tagger, cfg)
    assert np.array_equal(a.m.value, b.m.value) and np.array_equal(a.n.value, b.n.value)
    assert dump_trace(a.trace) == dump_trace(b.trace)


def test_round_depends_only_on_previous_graph(tagger):
    cfg = DhgConfig(times=3, epsilon=0.34)
    base = dhg(tagger, cfg)

    def perturb(it, graph):
        if it == 1:
            add_sentiment_edge(graph, NodeId.word(1), NodeId.senti(2), 1.0)

    edited = dhg(tagger, cfg, edit_hook=perturb)
    assert np.array_equal(base.trace[0].probs, edited.trace[0].probs)
    assert not np.array_equal(base.trace[1].probs, edited.trace[1].probs)


def test_train_mode_teacher_forcing(tagger):
    cfg = DhgConfig(times=2, epsilon=0.34, tf_keep=1.0)
    res = dhg(tagger, cfg, train=True, rng=np.random.default_rng(0), pred_prob=0.0)
    assert res.teacher_forced
    for rec in res.trace:
        assert sorted((w, s) for w, s, _c, _f in rec.added) == [(2, 0), (6, 1)]
        assert all(conf == 1.0 and forced for _w, _s, conf, forced in rec.added)


def test_train_mode_predicted_edges(tagger):
    cfg = DhgConfig(times=2, epsilon=0.34)
    res = dhg(tagger, cfg, train=True, rng=np.random.default_rng(0), pred_prob=1.0)
    assert not res.teacher_forced
    assert all(not forced for rec in res.trace for *_x, forced in rec.added)


def test_train_mode_needs_rng(tagger):
    with pytest.raises(ValueError):
        dhg(tagger, DhgConfig(), train=True)


def test_initial_graph_without_sentiment_edges(tagger):
    g = init_graph(SENT)
    add_sentiment_edge(g, NodeId.word(2), NodeId.senti(0), 0.9)
    with pytest.raises(ValueError):
        run_dhg(Tape(), tagger.model, SENT, g, DhgConfig(), DIST)


def test_trace_dump_and_links():
    trace = [IterationRecord(1, np.zeros((3, 3)), added=[(3, 0, 0.9123454, False), (1, 1, 1.0, True)],
                             dropped=[(1, 1)]),
             IterationRecord(2, np.zeros((3, 3)), added=[(3, 0, 0.95, False)])]
    assert dump_trace(trace) == [
        "ITER 1 ADD w1→NEG 1.000000 forced",
        "ITER 1 ADD w3→POS 0.912345",
        "ITER 1 DROP w1→NEG",
        "ITER 2 ADD w3→POS 0.950000",
    ]
    sent = make_sentence(["I", "like", "it"])
    assert render_links(sent, trace) == "I like it[1:POS,2:POS]"
