import numpy as np
import pytest
from hypothesis import strategies as st

from dhg_tbsa.corpus import POLARITIES, Corpus, Sentence, Token
from dhg_tbsa.numcore import Tape


def make_sentence(words, tags=None, heads=None, sid="s1"):
    """Build a sentence from words and ``B-POS``/``O`` style tags (default all O, chain heads)."""
    n = len(words)
    tags = tags or ["O"] * n
    heads = heads or [0] + list(range(1, n))
    toks = []
    for i, (w, tag, h) in enumerate(zip(words, tags, heads), start=1):
        a, _, s = tag.partition("-")
        toks.append(Token(i, w, h, "dep", a, s or "NONE"))
    return Sentence(sid, tuple(toks))


@st.composite
def sentences(draw, max_len=8, sid="s"):
    """Random valid sentences: random heads, BIO runs with one polarity per span."""
    n = draw(st.integers(1, max_len))
    words = [draw(st.sampled_from(["a", "b", "c", "food", "good", "bad", "x"])) for _ in range(n)]
    heads = []
    for i in range(1, n + 1):
        h = draw(st.integers(0, n).filter(lambda h, i=i: h != i))
        heads.append(h)
    tags, prev_pol = [], None
    for i in range(n):
        choice = draw(st.sampled_from(["O", "B", "I"] if prev_pol else ["O", "B"]))
        if choice == "O":
            tags.append("O")
            prev_pol = None
        elif choice == "B":
            prev_pol = draw(st.sampled_from(POLARITIES))
            tags.append(f"B-{prev_pol}")
        else:
            tags.append(f"I-{prev_pol}")
    return make_sentence(words, tags, heads, sid=draw(st.sampled_from([sid, sid + "2", "x-1"])))


@st.composite
def corpora(draw, min_size=1, max_size=5):
    k = draw(st.integers(min_size, max_size))
    sents = [draw(sentences(sid=f"s{i}")) for i in range(k)]
    # ids must be unique for a faithful round trip
    sents = [Sentence(f"s{i}", s.tokens) for i, s in enumerate(sents)]
    return Corpus(sents)


@pytest.fixture
def toy_corpus():
    from dhg_tbsa import toy_corpus_path
    from dhg_tbsa.corpus import parse_dataset
    return parse_dataset(toy_corpus_path())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def assert_grads_match(f, params, eps=1e-6):
    """Analytic gradients against central differences, coordinate by coordinate."""
    for p in params:
        p.grad = None
    tape = Tape()
    tape.backward(f(tape))
    for p in params:
        analytic = np.zeros_like(p.value) if p.grad is None else p.grad.copy()
        numeric = np.zeros_like(p.value)
        flat = p.value.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f(Tape(record=False)).value
            flat[i] = orig - eps
            down = f(Tape(record=False)).value
            flat[i] = orig
            numeric.reshape(-1)[i] = (up - down) / (2 * eps)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-8, err_msg=p.name or "")


# criterion number -> (passed, detail); filled by test_acceptance, printed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
        terminalreporter.write_line(f"criterion {k:>2}: {status}  {detail}")
